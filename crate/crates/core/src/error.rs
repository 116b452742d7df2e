use thiserror::Error;

use crate::spectral::PairId;

#[derive(Debug, Error)]
pub enum TodaError {
    #[error("particle count must be at least 2, got {0}")]
    TooFewParticles(usize),

    #[error("q has length {q} but p has length {p}")]
    LengthMismatch { q: usize, p: usize },

    #[error("non-finite phase-space coordinate at index {0}")]
    NonFinite(usize),

    #[error("|q[{index}] - q[{next}]| = {gap} exceeds the overflow guard {limit}")]
    Overflow {
        index: usize,
        next: usize,
        gap: f64,
        limit: f64,
    },

    #[error("sign vector entry {0} is not +1 or -1")]
    InvalidSign(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("flow index {j} outside 1..={n}")]
    FlowIndex { j: usize, n: usize },

    #[error("eigensolver failed to converge")]
    Eigensolver,

    #[error("three consecutive eigenvalues coincide starting at position {0}")]
    TripleDegeneracy(usize),

    #[error("{0} is not an admissible eigenvalue pair for n = {1}")]
    InvalidPair(PairId, usize),

    #[error("{0} is not degenerate at the reference point (gap {1:e})")]
    NotDegenerate(PairId, f64),

    #[error("frozen frame no longer valid for {pair}: overlap {overlap:.4} < 0.9")]
    FrameValidity { pair: PairId, overlap: f64 },

    #[error("Gauss-Newton did not converge in {iterations} iterations (max gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("refinement collapsed onto a higher stratum; extra degenerate pairs: {0:?}")]
    HigherStratum(Vec<PairId>),

    #[error("bracket normaliser vanishes for {0}")]
    VanishingNormalizer(PairId),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integration left the admissible domain at t = {t}: {source}")]
    LeftDomain {
        t: f64,
        #[source]
        source: Box<TodaError>,
    },

    #[error("curve point at t = {t} is not regular ({reason})")]
    NotRegular { t: f64, reason: String },

    #[error("eigenvector transport could not resolve index {index} near t = {t} ({class})")]
    TransportRefinement {
        index: usize,
        t: f64,
        class: &'static str,
    },

    #[error("winding of det(U)^2 could not be resolved near t = {t}")]
    WindingRefinement { t: f64 },

    #[error("Lagrangian frame is rank deficient at t = {t} (min eigenvalue of W^H W {min_eig:e})")]
    FrameRankDeficient { t: f64, min_eig: f64 },

    #[error("closed curve does not close: |z(1) - z(0)| = {0:e}")]
    OpenCurve(f64),

    #[error("singular point at disk radius {radius:.3} is too close to the boundary")]
    NearBoundary { radius: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TodaError>;

//! Eigenvector holonomies and Maslov indices along closed curves of regular
//! points.
//!
//! The Maslov index is the winding of `det(U)²`, where `U` is the unitary
//! part of `W = A + iB` and the columns of `(A; B)` are the Hamiltonian
//! vector fields `X_{F_j}` (position block `A`, momentum block `B`). Since
//! `det U = det W / |det W|`, only the phase of `det W` is needed.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::dynamics::{grad_all, poisson, Gradient};
use crate::error::{Result, TodaError};
use crate::lax::{LaxClass, LaxMatrix, PhasePoint};
use crate::singularity::{corank, SingularPoint, DEFAULT_RANK_TOL};
use crate::spectral::{decompose, FrozenFrame, PairId, DEFAULT_DEGENERACY_TOL};

/// Orientation convention: the harmonic-oscillator angle loop, traversed in
/// the direction of the flow, has Maslov index `+2`.
pub const CALIBRATION_SIGN: i64 = -1;

/// Overlap below which consecutive eigenvectors trigger refinement.
pub const TRANSPORT_OVERLAP_MIN: f64 = 0.9;

const MIN_PARAM_STEP: f64 = 1e-9;

type CurveFn = Arc<dyn Fn(f64) -> Result<PhasePoint> + Send + Sync>;

/// A closed curve `t ↦ z(t)`, `t ∈ [0, 1]`, with an initial uniform grid
/// that transport and winding refine locally where needed.
#[derive(Clone)]
pub struct ClosedCurve {
    eval: CurveFn,
    samples: usize,
}

impl std::fmt::Debug for ClosedCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosedCurve").field("samples", &self.samples).finish()
    }
}

impl ClosedCurve {
    pub fn parametric<F>(f: F, samples: usize) -> Self
    where
        F: Fn(f64) -> Result<PhasePoint> + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            samples: samples.max(3),
        }
    }

    /// Piecewise-linear loop through `points`; the last point must repeat
    /// the first.
    pub fn polyline(points: Vec<PhasePoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(TodaError::Config("a sampled curve needs at least two points".into()));
        }
        let gap = points[0].distance(points.last().unwrap());
        if gap > 1e-9 * points[0].to_flat().iter().fold(1.0_f64, |m, x| m.max(x.abs())) {
            return Err(TodaError::OpenCurve(gap));
        }
        let n = points[0].n();
        if let Some(bad) = points.iter().find(|p| p.n() != n) {
            return Err(TodaError::DimensionMismatch { expected: n, got: bad.n() });
        }
        let segments = points.len() - 1;
        let flat: Vec<Vec<f64>> = points.iter().map(|p| p.to_flat()).collect();
        let eval = move |t: f64| {
            if segments == 0 {
                return PhasePoint::from_flat(&flat[0]);
            }
            let x = t.clamp(0.0, 1.0) * segments as f64;
            let k = (x.floor() as usize).min(segments - 1);
            let w = x - k as f64;
            let z: Vec<f64> = flat[k].iter().zip(&flat[k + 1]).map(|(a, b)| a + w * (b - a)).collect();
            PhasePoint::from_flat(&z)
        };
        Ok(Self {
            eval: Arc::new(eval),
            samples: segments.max(3),
        })
    }

    /// The loop `z* + ε(cos 2πt · v_ξ + sin 2πt · v_η)` in the plane dual to
    /// the block coordinates of `pair`, so that `(ξ, η) ≈ ε(cos, sin)`.
    pub fn circle(sp: &SingularPoint, pair: PairId, radius: f64, samples: usize) -> Result<Self> {
        let plane = TransversePlane::new(&sp.z, pair)?;
        let z0 = sp.z.clone();
        Ok(Self::parametric(
            move |t| {
                let (c, s) = ((TAU * t).cos(), (TAU * t).sin());
                let dz: Vec<f64> = plane.v_xi.iter().zip(&plane.v_eta).map(|(a, b)| radius * (c * a + s * b)).collect();
                z0.displaced(&dz, 1.0)
            },
            samples,
        ))
    }

    pub fn point(&self, t: f64) -> Result<PhasePoint> {
        (self.eval)(t)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Same geometric loop with `factor` times as many initial samples.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            eval: self.eval.clone(),
            samples: self.samples * factor.max(1),
        }
    }

    /// Same loop traversed backwards.
    pub fn reversed(&self) -> Self {
        let f = self.eval.clone();
        Self {
            eval: Arc::new(move |t| f(1.0 - t)),
            samples: self.samples,
        }
    }

    fn grid(&self) -> Vec<f64> {
        (0..=self.samples).map(|k| k as f64 / self.samples as f64).collect()
    }

    fn check_closed(&self) -> Result<()> {
        let (a, b) = (self.point(0.0)?, self.point(1.0)?);
        let gap = a.distance(&b);
        if gap > 1e-9 * a.to_flat().iter().fold(1.0_f64, |m, x| m.max(x.abs())) {
            return Err(TodaError::OpenCurve(gap));
        }
        Ok(())
    }

    /// Every grid point must have corank zero with a decided rank.
    pub fn check_regular(&self) -> Result<()> {
        self.check_closed()?;
        for t in self.grid() {
            let rep = corank(&self.point(t)?, DEFAULT_RANK_TOL, DEFAULT_DEGENERACY_TOL)?;
            if rep.inconclusive || rep.corank > 0 {
                return Err(TodaError::NotRegular {
                    t,
                    reason: format!("corank {} (inconclusive: {})", rep.corank, rep.inconclusive),
                });
            }
        }
        Ok(())
    }
}

/// Directions `v_ξ = X_η / κ`, `v_η = -X_ξ / κ` with `κ = {ξ, η}`, so that
/// `dξ(v_ξ) = dη(v_η) = 1` and `dξ(v_η) = dη(v_ξ) = 0`.
#[derive(Clone, Debug)]
pub struct TransversePlane {
    pub pair: PairId,
    pub kappa: f64,
    pub v_xi: Vec<f64>,
    pub v_eta: Vec<f64>,
    /// `∇τ` with its components along `∇ξ, ∇η` removed, unit length.
    pub v_tau: Vec<f64>,
    pub dxi: Vec<f64>,
    pub deta: Vec<f64>,
}

impl TransversePlane {
    pub fn new(z: &PhasePoint, pair: PairId) -> Result<Self> {
        let frame = FrozenFrame::new(z, &[pair], DEFAULT_DEGENERACY_TOL)?;
        let d = frame.differentials(pair);
        let (gx, ge) = (Gradient::from_flat(&d.dxi), Gradient::from_flat(&d.deta));
        let kappa = poisson(&gx, &ge)?;
        if kappa.abs() < 1e-12 {
            return Err(TodaError::VanishingNormalizer(pair));
        }
        let v_xi: Vec<f64> = ge.hamiltonian_vector().iter().map(|x| x / kappa).collect();
        let v_eta: Vec<f64> = gx.hamiltonian_vector().iter().map(|x| -x / kappa).collect();

        let basis = DMatrix::from_columns(&[DVector::from_column_slice(&d.dxi), DVector::from_column_slice(&d.deta)]);
        let tau = DVector::from_column_slice(&d.dtau);
        let coef = (basis.transpose() * &basis)
            .lu()
            .solve(&(basis.transpose() * &tau))
            .ok_or(TodaError::VanishingNormalizer(pair))?;
        let mut v_tau = tau - &basis * coef;
        v_tau /= v_tau.norm();
        Ok(Self {
            pair,
            kappa,
            v_xi,
            v_eta,
            v_tau: v_tau.as_slice().to_vec(),
            dxi: d.dxi,
            deta: d.deta,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolonomyResult {
    /// End-to-start sign of each eigenvector of `L`, descending order.
    pub gamma: Vec<i8>,
    /// Same for `L̄`.
    pub gammabar: Vec<i8>,
    /// Product over even one-based positions of both spectra.
    pub even_product: i8,
    /// Product over odd one-based positions of both spectra.
    pub odd_product: i8,
}

fn eigvecs(z: &PhasePoint, class: LaxClass) -> Result<DMatrix<f64>> {
    Ok(decompose(LaxMatrix::of_class(z, class).entries(), 0.0)?.vectors)
}

/// Continues every eigenvector of `L` and `L̄` along the curve, choosing the
/// sign that maximizes overlap with its predecessor, and returns the sign it
/// has acquired on return. Steps are bisected while any overlap is at most
/// 0.9.
pub fn transport_eigenvectors(curve: &ClosedCurve) -> Result<HolonomyResult> {
    curve.check_regular()?;
    let mut signs = Vec::new();
    for class in [LaxClass::Even, LaxClass::Odd] {
        let start = eigvecs(&curve.point(0.0)?, class)?;
        let n = start.ncols();
        let mut cur = start.clone();
        let mut t = 0.0;
        for target in curve.grid().into_iter().skip(1) {
            while t < target {
                let mut t_try = target;
                let next = loop {
                    let mut cand = eigvecs(&curve.point(t_try)?, class)?;
                    let mut worst = (0, f64::INFINITY);
                    for i in 0..n {
                        let o = cur.column(i).dot(&cand.column(i));
                        if o < 0.0 {
                            cand.column_mut(i).neg_mut();
                        }
                        if o.abs() < worst.1 {
                            worst = (i, o.abs());
                        }
                    }
                    if worst.1 > TRANSPORT_OVERLAP_MIN {
                        break cand;
                    }
                    if t_try - t < MIN_PARAM_STEP {
                        return Err(TodaError::TransportRefinement {
                            index: worst.0,
                            t: t_try,
                            class: class.label(),
                        });
                    }
                    t_try = 0.5 * (t + t_try);
                };
                cur = next;
                t = t_try;
            }
        }
        let g: Vec<i8> = (0..n)
            .map(|i| if cur.column(i).dot(&start.column(i)) >= 0.0 { 1 } else { -1 })
            .collect();
        signs.push(g);
    }
    let gammabar = signs.pop().unwrap();
    let gamma = signs.pop().unwrap();
    let prod = |parity: usize| -> i8 {
        gamma
            .iter()
            .chain(&gammabar)
            .enumerate()
            .filter(|(k, _)| (k % gamma.len() + 1) % 2 == parity)
            .map(|(_, &s)| s)
            .product()
    };
    Ok(HolonomyResult {
        even_product: prod(0),
        odd_product: prod(1),
        gamma,
        gammabar,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaslovResult {
    pub mu: i64,
    /// Raw winding number of `det(U)²` before calibration.
    #[serde(with = "crate::json::float")]
    pub winding: f64,
    /// `(t, unwrapped arg det(U)²)` at every accepted parameter.
    #[serde(with = "crate::json::float_mat")]
    pub winding_trace: Vec<Vec<f64>>,
    pub calibration_sign: i64,
}

impl MaslovResult {
    /// `(-1)^{μ/2}`.
    pub fn half_parity(&self) -> i8 {
        if (self.mu / 2).rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }

    /// CSV with header `t,phase`.
    pub fn write_trace_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,phase")?;
        for row in &self.winding_trace {
            writeln!(w, "{},{}", crate::json::format_f64(row[0]), crate::json::format_f64(row[1]))?;
        }
        Ok(())
    }
}

/// `2 arg det(A + iB)` after normalizing the columns of `(A; B)`; fails if
/// `W^H W` has an eigenvalue at or below `1e-10`.
pub fn frame_phase(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> Result<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    let mut b = b.clone();
    for j in 0..a.ncols() {
        let norm = (a.column(j).norm_squared() + b.column(j).norm_squared()).sqrt();
        a.column_mut(j).scale_mut(1.0 / norm);
        b.column_mut(j).scale_mut(1.0 / norm);
    }
    let w = DMatrix::from_fn(n, a.ncols(), |i, j| Complex::new(a[(i, j)], b[(i, j)]));
    let gram = w.adjoint() * &w;
    let min_eig = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min(x));
    if !(min_eig > 1e-10) {
        return Err(TodaError::FrameRankDeficient { t, min_eig });
    }
    Ok(2.0 * w.determinant().arg())
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Winding number of a closed loop of phases `phase(t)`, `t ∈ [0, 1]`,
/// sampled on `samples` uniform steps and bisected wherever a step would
/// change the phase by `π/2` or more.
pub fn winding_number<F>(phase: F, samples: usize) -> Result<(f64, Vec<Vec<f64>>)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut t = 0.0;
    let mut cur = phase(0.0)?;
    let mut total = cur;
    let mut trace = vec![vec![0.0, total]];
    for k in 1..=samples {
        let target = k as f64 / samples as f64;
        while t < target {
            let mut t_try = target;
            let (next, delta) = loop {
                let p = phase(t_try)?;
                let d = wrap(p - cur);
                if d.abs() < PI / 2.0 {
                    break (p, d);
                }
                if t_try - t < MIN_PARAM_STEP {
                    return Err(TodaError::WindingRefinement { t: t_try });
                }
                t_try = 0.5 * (t + t_try);
            };
            total += delta;
            cur = next;
            t = t_try;
            trace.push(vec![t, total]);
        }
    }
    Ok(((total - trace[0][1]) / TAU, trace))
}

fn toda_frame(z: &PhasePoint) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = z.n();
    let g = grad_all(z);
    let a = DMatrix::from_fn(n, n, |r, j| g[j].dp[r]);
    let b = DMatrix::from_fn(n, n, |r, j| -g[j].dq[r]);
    (a, b)
}

fn index_from_winding(winding: f64) -> Result<i64> {
    let k = winding.round();
    if (winding - k).abs() > 1e-6 {
        return Err(TodaError::WindingRefinement { t: 1.0 });
    }
    Ok(k as i64 * CALIBRATION_SIGN)
}

/// Maslov index of the Lagrangian planes spanned by `X_{F_1}, …, X_{F_n}`
/// along the curve.
pub fn maslov_index(curve: &ClosedCurve) -> Result<MaslovResult> {
    curve.check_regular()?;
    let (winding, winding_trace) = winding_number(
        |t| {
            let (a, b) = toda_frame(&curve.point(t)?);
            frame_phase(&a, &b, t)
        },
        curve.samples(),
    )?;
    Ok(MaslovResult {
        mu: index_from_winding(winding)?,
        winding,
        winding_trace,
        calibration_sign: CALIBRATION_SIGN,
    })
}

/// Maslov index of one angle loop of `n` uncoupled oscillators
/// `H_j = ½(p_j² + q_j²)`: oscillator `k` runs once around its circle of
/// radius `amplitude` in the direction of the flow, the others stay put at
/// unit amplitude.
pub fn harmonic_oscillator_maslov(n: usize, k: usize, amplitude: f64, samples: usize) -> Result<MaslovResult> {
    if k >= n {
        return Err(TodaError::DimensionMismatch { expected: n, got: k });
    }
    let (winding, winding_trace) = winding_number(
        |t| {
            let mut q = vec![1.0; n];
            let mut p = vec![0.0; n];
            q[k] = amplitude * (TAU * t).cos();
            p[k] = -amplitude * (TAU * t).sin();
            // X_{H_j} = (∂H_j/∂p, -∂H_j/∂q) = (p_j e_j, -q_j e_j)
            let a = DMatrix::from_diagonal(&DVector::from_vec(p));
            let b = DMatrix::from_diagonal(&DVector::from_vec(q.iter().map(|x| -x).collect()));
            frame_phase(&a, &b, t)
        },
        samples,
    )?;
    Ok(MaslovResult {
        mu: index_from_winding(winding)?,
        winding,
        winding_trace,
        calibration_sign: CALIBRATION_SIGN,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyTheoremReport {
    pub holonomy: HolonomyResult,
    pub maslov: MaslovResult,
    /// `(-1)^{μ/2}`.
    pub lhs: i8,
    /// Product of all signs of each spectrum; both should be `+1`.
    pub total_products: (i8, i8),
    /// Signs agree inside every admissible pair.
    pub pairing_holds: bool,
    pub passed: bool,
}

/// Computes `(-1)^{μ/2}` and the eigenvector holonomy products
/// independently and compares them.
pub fn check_holonomy_theorem(curve: &ClosedCurve) -> Result<HolonomyTheoremReport> {
    let holonomy = transport_eigenvectors(curve)?;
    let maslov = maslov_index(curve)?;
    let lhs = maslov.half_parity();
    let n = holonomy.gamma.len();
    let total_products = (
        holonomy.gamma.iter().product::<i8>(),
        holonomy.gammabar.iter().product::<i8>(),
    );
    let pairing_holds = PairId::all(n).iter().all(|p| {
        let g = match p.class {
            LaxClass::Even => &holonomy.gamma,
            LaxClass::Odd => &holonomy.gammabar,
        };
        g[p.first] == g[p.second()]
    });
    let passed = maslov.mu % 2 == 0
        && lhs == holonomy.even_product
        && lhs == holonomy.odd_product
        && total_products == (1, 1)
        && pairing_holds;
    Ok(HolonomyTheoremReport {
        holonomy,
        maslov,
        lhs,
        total_products,
        pairing_holds,
        passed,
    })
}

type DiskFn = Arc<dyn Fn(f64, f64) -> Result<PhasePoint> + Send + Sync>;

/// A map `S` from the unit disk into phase space whose interior meets the
/// codimension-two strata at isolated points.
#[derive(Clone)]
pub struct DiskPatch {
    map: DiskFn,
    /// Approximate interior parameters of the singular points and their pairs.
    pub guesses: Vec<(f64, f64, PairId)>,
}

impl std::fmt::Debug for DiskPatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiskPatch").field("guesses", &self.guesses).finish()
    }
}

impl DiskPatch {
    pub fn new<F>(map: F, guesses: Vec<(f64, f64, PairId)>) -> Self
    where
        F: Fn(f64, f64) -> Result<PhasePoint> + Send + Sync + 'static,
    {
        Self {
            map: Arc::new(map),
            guesses,
        }
    }

    /// `S(s, t) = z* + ρ(s v_ξ + t v_η)`: one singular point at the centre.
    pub fn around(sp: &SingularPoint, pair: PairId, radius: f64) -> Result<Self> {
        let plane = TransversePlane::new(&sp.z, pair)?;
        let z0 = sp.z.clone();
        Ok(Self::new(
            move |s, t| {
                let dz: Vec<f64> = plane.v_xi.iter().zip(&plane.v_eta).map(|(a, b)| radius * (s * a + t * b)).collect();
                z0.displaced(&dz, 1.0)
            },
            vec![(0.0, 0.0, pair)],
        ))
    }

    /// `S(s, t) = z* + ρ[Re(w² - a²) v_ξ + Im(w² - a²) v_η] + ρ' s v_τ` with
    /// `w = s + it`. The quadratic map covers the origin of the `(ξ, η)`
    /// plane twice with the same orientation, at `w = ±a`; the shift along
    /// the stratum direction `v_τ` separates the two preimages in phase
    /// space.
    pub fn two_point(sp: &SingularPoint, pair: PairId, radius: f64, a: f64, shift: f64) -> Result<Self> {
        let plane = TransversePlane::new(&sp.z, pair)?;
        let z0 = sp.z.clone();
        Ok(Self::new(
            move |s, t| {
                let (re, im) = (s * s - t * t - a * a, 2.0 * s * t);
                let dz: Vec<f64> = (0..plane.v_xi.len())
                    .map(|k| radius * (re * plane.v_xi[k] + im * plane.v_eta[k]) + shift * s * plane.v_tau[k])
                    .collect();
                z0.displaced(&dz, 1.0)
            },
            vec![(a, 0.0, pair), (-a, 0.0, pair)],
        ))
    }

    pub fn point(&self, s: f64, t: f64) -> Result<PhasePoint> {
        (self.map)(s, t)
    }

    /// The same disk with `t ↦ -t`, which reverses its orientation.
    pub fn reversed(&self) -> Self {
        let f = self.map.clone();
        Self {
            map: Arc::new(move |s, t| f(s, -t)),
            guesses: self.guesses.iter().map(|&(s, t, p)| (s, -t, p)).collect(),
        }
    }

    /// Positively oriented boundary circle.
    pub fn boundary(&self, samples: usize) -> ClosedCurve {
        let f = self.map.clone();
        ClosedCurve::parametric(move |u| f((TAU * u).cos(), (TAU * u).sin()), samples)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnclosedPoint {
    pub pair: PairId,
    #[serde(with = "crate::json::float_vec")]
    pub parameter: Vec<f64>,
    #[serde(with = "crate::json::float")]
    pub gap: f64,
    pub sigma: i8,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnclosureReport {
    pub points: Vec<EnclosedPoint>,
    pub mu: i64,
    pub predicted: i64,
    pub passed: bool,
}

fn tangent_pair(disk: &DiskPatch, s: f64, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = 1e-6;
    let d = |ds: f64, dt: f64| -> Result<Vec<f64>> {
        let p = disk.point(s + ds, t + dt)?.to_flat();
        let m = disk.point(s - ds, t - dt)?.to_flat();
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    Ok((d(h, 0.0)?, d(0.0, h)?))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Locates the point of the disk where `pair` is degenerate by Newton steps
/// on its block coordinates, with the frame refreshed at every iterate, and
/// returns its parameter, gap and transversal sign
/// `σ = sign(κ · det[[dξ·∂_s S, dξ·∂_t S], [dη·∂_s S, dη·∂_t S]])`.
fn locate(disk: &DiskPatch, s0: f64, t0: f64, pair: PairId) -> Result<EnclosedPoint> {
    let (mut s, mut t) = (s0, t0);
    for it in 0..60 {
        let z = disk.point(s, t)?;
        let frame = FrozenFrame::new(&z, &[pair], DEFAULT_DEGENERACY_TOL)?;
        let spec = frame.spectrum(pair.class);
        let gap = spec.gaps[pair.first];
        let d = frame.differentials(pair);
        let (ds, dt) = tangent_pair(disk, s, t)?;
        let m = [[dot(&d.dxi, &ds), dot(&d.dxi, &dt)], [dot(&d.deta, &ds), dot(&d.deta, &dt)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if gap < 1e-11 * spec.spectral_range().max(1.0) {
            let kappa = poisson(&Gradient::from_flat(&d.dxi), &Gradient::from_flat(&d.deta))?;
            return Ok(EnclosedPoint {
                pair,
                parameter: vec![s, t],
                gap,
                sigma: if det * kappa > 0.0 { 1 } else { -1 },
            });
        }
        let c = frame.block_coordinates(&z)?.pairs[0];
        let (rx, re) = (c.xi, c.eta);
        s -= (m[1][1] * rx - m[0][1] * re) / det;
        t -= (-m[1][0] * rx + m[0][0] * re) / det;
        if !(s.hypot(t) < 1.0) {
            return Err(TodaError::NoConvergence { iterations: it, gap });
        }
    }
    Err(TodaError::NoConvergence { iterations: 60, gap: f64::NAN })
}

/// Checks `μ(∂D) = -2 Σ σ_j` over the singular points inside the disk.
pub fn enclosure_count_check(disk: &DiskPatch, samples: usize) -> Result<EnclosureReport> {
    let mut points = Vec::new();
    for &(s, t, pair) in &disk.guesses {
        let p = locate(disk, s, t, pair)?;
        let radius = p.parameter[0].hypot(p.parameter[1]);
        if radius > 0.9 {
            return Err(TodaError::NearBoundary { radius });
        }
        points.push(p);
    }
    let mu = maslov_index(&disk.boundary(samples))?.mu;
    let predicted = -2 * points.iter().map(|p| p.sigma as i64).sum::<i64>();
    Ok(EnclosureReport {
        passed: mu == predicted,
        points,
        mu,
        predicted,
    })
}

/// JSON description of a closed curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    /// Explicit samples; the last must equal the first.
    Samples { points: Vec<PhasePoint> },
    /// Circle of the given radius in the block-coordinate plane of `pair`
    /// around a singular point, given inline or as an index into a list.
    Circle {
        center: CenterRef,
        pair: PairId,
        #[serde(with = "crate::json::float")]
        radius: f64,
        samples: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterRef {
    Index(usize),
    Point(Box<SingularPoint>),
}

impl CurveSpec {
    /// Builds the curve; `stored` resolves index references.
    pub fn build(&self, stored: &[SingularPoint]) -> Result<ClosedCurve> {
        match self {
            CurveSpec::Samples { points } => ClosedCurve::polyline(points.clone()),
            CurveSpec::Circle {
                center,
                pair,
                radius,
                samples,
            } => {
                let sp = match center {
                    CenterRef::Index(i) => stored
                        .get(*i)
                        .ok_or_else(|| TodaError::Config(format!("no stored singular point with index {i}")))?,
                    CenterRef::Point(p) => p,
                };
                if !(*radius > 0.0) {
                    return Err(TodaError::Config("circle radius must be positive".into()));
                }
                ClosedCurve::circle(sp, *pair, *radius, *samples)
            }
        }
    }
}

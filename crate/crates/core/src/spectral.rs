//! Ordered eigen-decompositions of Lax matrices, degeneracy bookkeeping, the
//! interlacing chain between `L` and `L̄`, frozen-frame block coordinates and
//! the annihilating polynomials attached to a degenerate pair.
//!
//! Eigenvalues are always sorted in descending order. Degeneracies of `L` can
//! only occur at zero-based positions `(1,2), (3,4), …`; those of `L̄` only at
//! `(0,1), (2,3), …`. Together these are the `n - 1` admissible pairs, and the
//! pair starting at position `k` belongs to `L̄` when `k` is even.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Result, TodaError};
use crate::lax::{bilinear_gradient, LaxClass, LaxMatrix, PhasePoint};

pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

/// Frame overlap below which frozen-frame coordinates are no longer trusted.
pub const FRAME_OVERLAP_MIN: f64 = 0.9;

/// An admissible degenerate pair: positions `(first, first + 1)` in the
/// descending spectrum of the matrix of the given class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairId {
    pub class: LaxClass,
    pub first: usize,
}

impl PairId {
    pub fn new(class: LaxClass, first: usize, n: usize) -> Result<Self> {
        let pair = Self { class, first };
        let parity_ok = match class {
            LaxClass::Even => first % 2 == 1,
            LaxClass::Odd => first % 2 == 0,
        };
        if !parity_ok || first + 1 >= n {
            return Err(TodaError::InvalidPair(pair, n));
        }
        Ok(pair)
    }

    /// The `k`-th pair of `L` (zero-based).
    pub fn even(k: usize) -> Self {
        Self {
            class: LaxClass::Even,
            first: 2 * k + 1,
        }
    }

    /// The `k`-th pair of `L̄` (zero-based).
    pub fn odd(k: usize) -> Self {
        Self {
            class: LaxClass::Odd,
            first: 2 * k,
        }
    }

    /// The pair starting at position `k` of the interlacing chain.
    pub fn at_position(k: usize) -> Self {
        if k % 2 == 0 {
            Self::odd(k / 2)
        } else {
            Self::even(k / 2)
        }
    }

    /// All `n - 1` admissible pairs ordered by position.
    pub fn all(n: usize) -> Vec<Self> {
        (0..n.saturating_sub(1)).map(Self::at_position).collect()
    }

    pub fn second(&self) -> usize {
        self.first + 1
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        Self::new(self.class, self.first, n).map(|_| ())
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.class, self.first, self.first + 1)
    }
}

/// Descending spectrum with orthonormal eigenvectors (column `r` belongs to
/// `values[r]`).
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub class: Option<LaxClass>,
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// `values[r] - values[r + 1]`.
    pub gaps: Vec<f64>,
    /// Positions `(r, r + 1)` whose gap is below the degeneracy threshold.
    pub degenerate_pairs: Vec<(usize, usize)>,
    /// Absolute threshold used: `degeneracy_tol * max(1, spectral range)`.
    pub threshold: f64,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, r: usize) -> DVector<f64> {
        self.vectors.column(r).into_owned()
    }

    pub fn spectral_range(&self) -> f64 {
        self.values[0] - self.values[self.n() - 1]
    }

    pub fn is_degenerate(&self, first: usize) -> bool {
        self.degenerate_pairs.iter().any(|&(a, _)| a == first)
    }

    /// Number of doubly degenerate eigenvalues.
    pub fn degeneracy_count(&self) -> usize {
        self.degenerate_pairs.len()
    }

    /// `max_r ‖A v_r - λ_r v_r‖ / (1 + |λ_r|)`.
    pub fn eigen_residual(&self, a: &DMatrix<f64>) -> f64 {
        (0..self.n())
            .map(|r| {
                let v = self.vectors.column(r);
                (a * v - v * self.values[r]).norm() / (1.0 + self.values[r].abs())
            })
            .fold(0.0, f64::max)
    }

    /// `‖VᵀV - I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.n();
        (self.vectors.transpose() * &self.vectors - DMatrix::<f64>::identity(n, n)).amax()
    }
}

/// Decomposes a symmetric matrix; see [`decompose_with_reference`].
pub fn decompose(a: &DMatrix<f64>, degeneracy_tol: f64) -> Result<SpectralData> {
    decompose_with_reference(a, degeneracy_tol, None)
}

pub fn decompose_lax(l: &LaxMatrix, degeneracy_tol: f64) -> Result<SpectralData> {
    let mut s = decompose(l.entries(), degeneracy_tol)?;
    s.class = Some(l.sign().class());
    Ok(s)
}

/// Descending decomposition with a deterministic choice of basis.
///
/// Simple eigenvectors get the sign that makes their overlap with the
/// matching reference column nonnegative, or without a reference, the sign
/// that makes their first non-negligible component positive. Inside a flagged
/// pair the two vectors are rotated to maximal overlap with the reference
/// columns (orthogonal Procrustes); without a reference the first vector is
/// rotated so its first non-negligible component is positive and maximal.
///
/// A flagged triple (three eigenvalues within threshold) is rejected: Lax
/// eigenvalues are at most doubly degenerate.
pub fn decompose_with_reference(
    a: &DMatrix<f64>,
    degeneracy_tol: f64,
    reference: Option<&DMatrix<f64>>,
) -> Result<SpectralData> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(TodaError::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if let Some(r) = reference {
        if r.nrows() != n || r.ncols() != n {
            return Err(TodaError::DimensionMismatch {
                expected: n,
                got: r.ncols(),
            });
        }
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 10_000).ok_or(TodaError::Eigensolver)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }

    let gaps: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
    let range = values[0] - values[n - 1];
    let threshold = degeneracy_tol * range.max(1.0);
    let mut degenerate_pairs = Vec::new();
    for (r, &g) in gaps.iter().enumerate() {
        if g < threshold {
            if degenerate_pairs.last().is_some_and(|&(_, b)| b == r) {
                return Err(TodaError::TripleDegeneracy(r - 1));
            }
            degenerate_pairs.push((r, r + 1));
        }
    }

    let mut r = 0;
    while r < n {
        if degenerate_pairs.iter().any(|&(a, _)| a == r) {
            fix_pair_basis(&mut vectors, r, reference);
            r += 2;
        } else {
            fix_sign(&mut vectors, r, reference);
            r += 1;
        }
    }

    Ok(SpectralData {
        class: None,
        values,
        vectors,
        gaps,
        degenerate_pairs,
        threshold,
    })
}

const NEGLIGIBLE: f64 = 1e-6;

fn fix_sign(v: &mut DMatrix<f64>, col: usize, reference: Option<&DMatrix<f64>>) {
    let flip = match reference {
        Some(rf) => v.column(col).dot(&rf.column(col)) < 0.0,
        None => v
            .column(col)
            .iter()
            .find(|x| x.abs() > NEGLIGIBLE)
            .is_some_and(|&x| x < 0.0),
    };
    if flip {
        v.column_mut(col).neg_mut();
    }
}

fn fix_pair_basis(v: &mut DMatrix<f64>, first: usize, reference: Option<&DMatrix<f64>>) {
    let n = v.nrows();
    let basis = v.columns(first, 2).into_owned();
    let rotated = match reference {
        Some(rf) => {
            let overlap = basis.transpose() * rf.columns(first, 2);
            let svd = overlap.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            &basis * (u * vt)
        }
        None => {
            let k = (0..n)
                .find(|&k| basis[(k, 0)].hypot(basis[(k, 1)]) > NEGLIGIBLE)
                .unwrap_or(0);
            let h = basis[(k, 0)].hypot(basis[(k, 1)]);
            let (c, s) = (basis[(k, 0)] / h, basis[(k, 1)] / h);
            let mut out = DMatrix::zeros(n, 2);
            for i in 0..n {
                out[(i, 0)] = c * basis[(i, 0)] + s * basis[(i, 1)];
                out[(i, 1)] = -s * basis[(i, 0)] + c * basis[(i, 1)];
            }
            if out
                .column(1)
                .iter()
                .find(|x| x.abs() > NEGLIGIBLE)
                .is_some_and(|&x| x < 0.0)
            {
                out.column_mut(1).neg_mut();
            }
            out
        }
    };
    v.columns_mut(first, 2).copy_from(&rotated);
}

/// Whether every flagged pair sits at a position admissible for `class`.
pub fn pairs_obey_parity(class: LaxClass, pairs: &[(usize, usize)]) -> bool {
    pairs.iter().all(|&(a, _)| match class {
        LaxClass::Even => a % 2 == 1,
        LaxClass::Odd => a % 2 == 0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainViolation {
    /// Chain position of the left element.
    pub position: usize,
    pub left: String,
    pub right: String,
    pub strict: bool,
    /// `left - right`; should be positive (strict) or nonnegative (weak).
    pub difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterlacingReport {
    pub n: usize,
    pub lambda: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    /// The chain `λ1 > λ̄1 ≥ λ̄2 > λ2 ≥ λ3 > λ̄3 ≥ …` as `(label, value)`.
    pub chain: Vec<(String, f64)>,
    pub violations: Vec<ChainViolation>,
    /// Smallest strict gap in the chain relative to the spectral scale.
    pub min_strict_gap: f64,
    pub passed: bool,
}

/// Checks the alternating chain between the spectra of `L` and `L̄`: strict
/// between the two matrices, weak inside each admissible pair.
pub fn interlacing_check(z: &PhasePoint, tol: f64) -> Result<InterlacingReport> {
    let n = z.n();
    let lam = decompose(LaxMatrix::of_class(z, LaxClass::Even).entries(), 0.0)?.values;
    let lamb = decompose(LaxMatrix::of_class(z, LaxClass::Odd).entries(), 0.0)?.values;
    let scale = lam
        .iter()
        .chain(lamb.iter())
        .fold(1.0_f64, |m, x| m.max(x.abs()));

    // (is_bar, index)
    let mut seq: Vec<(bool, usize)> = vec![(false, 0)];
    let (mut li, mut bi) = (1, 0);
    let mut bar_turn = true;
    while seq.len() < 2 * n {
        for _ in 0..2 {
            if bar_turn && bi < n {
                seq.push((true, bi));
                bi += 1;
            } else if !bar_turn && li < n {
                seq.push((false, li));
                li += 1;
            }
        }
        bar_turn = !bar_turn;
    }
    let value = |(bar, i): (bool, usize)| if bar { lamb[i] } else { lam[i] };
    let label = |(bar, i): (bool, usize)| {
        if bar {
            format!("lambda_bar[{i}]")
        } else {
            format!("lambda[{i}]")
        }
    };

    let mut violations = Vec::new();
    let mut min_strict_gap = f64::INFINITY;
    for k in 0..seq.len() - 1 {
        let (a, b) = (seq[k], seq[k + 1]);
        let strict = a.0 != b.0;
        let diff = value(a) - value(b);
        let bad = if strict {
            min_strict_gap = min_strict_gap.min(diff / scale);
            diff <= tol * scale
        } else {
            diff < -tol * scale
        };
        if bad {
            violations.push(ChainViolation {
                position: k,
                left: label(a),
                right: label(b),
                strict,
                difference: diff,
            });
        }
    }
    Ok(InterlacingReport {
        n,
        chain: seq.iter().map(|&e| (label(e), value(e))).collect(),
        lambda: lam,
        lambda_bar: lamb,
        passed: violations.is_empty(),
        violations,
        min_strict_gap,
    })
}

/// Eigenvectors of `L(z*)` and `L̄(z*)` frozen at a base point, used as a fixed
/// basis for the 2×2 block coordinates of selected pairs.
#[derive(Clone, Debug)]
pub struct FrozenFrame {
    base: PhasePoint,
    even: SpectralData,
    odd: SpectralData,
    pairs: Vec<PairId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairCoordinates {
    pub pair: PairId,
    /// `½(⟨u_b, L u_b⟩ - ⟨u_a, L u_a⟩)`.
    pub xi: f64,
    /// `⟨u_a, L u_b⟩`.
    pub eta: f64,
    /// `½(⟨u_b, L u_b⟩ + ⟨u_a, L u_a⟩)`.
    pub tau: f64,
}

impl PairCoordinates {
    /// First-order gap of the pair: `2 √(ξ² + η²)`.
    pub fn block_gap(&self) -> f64 {
        2.0 * self.xi.hypot(self.eta)
    }
}

#[derive(Clone, Debug)]
pub struct BlockCoordinates {
    pub base_point: PhasePoint,
    pub pairs: Vec<PairCoordinates>,
}

impl BlockCoordinates {
    pub fn even(&self) -> impl Iterator<Item = &PairCoordinates> {
        self.pairs.iter().filter(|c| c.pair.class == LaxClass::Even)
    }

    pub fn odd(&self) -> impl Iterator<Item = &PairCoordinates> {
        self.pairs.iter().filter(|c| c.pair.class == LaxClass::Odd)
    }

    pub fn get(&self, pair: PairId) -> Option<&PairCoordinates> {
        self.pairs.iter().find(|c| c.pair == pair)
    }
}

/// Gradients over `(q, p)` of the three block coordinates of one pair.
#[derive(Clone, Debug)]
pub struct PairDifferentials {
    pub pair: PairId,
    pub dxi: Vec<f64>,
    pub deta: Vec<f64>,
    pub dtau: Vec<f64>,
}

impl FrozenFrame {
    pub fn new(base: &PhasePoint, pairs: &[PairId], degeneracy_tol: f64) -> Result<Self> {
        Self::with_reference(base, pairs, degeneracy_tol, None)
    }

    /// Like [`FrozenFrame::new`], rotating degenerate eigenspaces to maximal
    /// overlap with a previous frame.
    pub fn with_reference(
        base: &PhasePoint,
        pairs: &[PairId],
        degeneracy_tol: f64,
        reference: Option<&FrozenFrame>,
    ) -> Result<Self> {
        let n = base.n();
        for p in pairs {
            p.validate(n)?;
        }
        let even = decompose_with_reference(
            LaxMatrix::of_class(base, LaxClass::Even).entries(),
            degeneracy_tol,
            reference.map(|f| &f.even.vectors),
        )?;
        let odd = decompose_with_reference(
            LaxMatrix::of_class(base, LaxClass::Odd).entries(),
            degeneracy_tol,
            reference.map(|f| &f.odd.vectors),
        )?;
        Ok(Self {
            base: base.clone(),
            even: SpectralData {
                class: Some(LaxClass::Even),
                ..even
            },
            odd: SpectralData {
                class: Some(LaxClass::Odd),
                ..odd
            },
            pairs: pairs.to_vec(),
        })
    }

    pub fn base(&self) -> &PhasePoint {
        &self.base
    }

    pub fn pairs(&self) -> &[PairId] {
        &self.pairs
    }

    pub fn spectrum(&self, class: LaxClass) -> &SpectralData {
        match class {
            LaxClass::Even => &self.even,
            LaxClass::Odd => &self.odd,
        }
    }

    /// Frozen vectors `(u_a, u_b)` of a pair.
    pub fn pair_vectors(&self, pair: PairId) -> (DVector<f64>, DVector<f64>) {
        let s = self.spectrum(pair.class);
        (s.vector(pair.first), s.vector(pair.second()))
    }

    fn coordinates_unchecked(&self, z: &PhasePoint) -> Vec<PairCoordinates> {
        let even = LaxMatrix::of_class(z, LaxClass::Even);
        let odd = LaxMatrix::of_class(z, LaxClass::Odd);
        self.pairs
            .iter()
            .map(|&pair| {
                let l = match pair.class {
                    LaxClass::Even => even.entries(),
                    LaxClass::Odd => odd.entries(),
                };
                let (ua, ub) = self.pair_vectors(pair);
                let aa = ua.dot(&(l * &ua));
                let bb = ub.dot(&(l * &ub));
                let ab = ua.dot(&(l * &ub));
                PairCoordinates {
                    pair,
                    xi: 0.5 * (bb - aa),
                    eta: ab,
                    tau: 0.5 * (bb + aa),
                }
            })
            .collect()
    }

    /// Smallest singular value of the overlap between the frozen pair
    /// vectors and the current eigenvectors at the same positions.
    pub fn overlap(&self, z: &PhasePoint, pair: PairId) -> Result<f64> {
        let l = LaxMatrix::of_class(z, pair.class);
        let cur = decompose(l.entries(), 0.0)?;
        let s = self.spectrum(pair.class);
        let m = s.vectors.columns(pair.first, 2).transpose() * cur.vectors.columns(pair.first, 2);
        let sv = m.singular_values();
        Ok(sv[0].min(sv[1]))
    }

    /// Block coordinates of every tracked pair at `z`, after checking that
    /// the frozen frame still overlaps the current eigenspaces.
    pub fn block_coordinates(&self, z: &PhasePoint) -> Result<BlockCoordinates> {
        if z.n() != self.base.n() {
            return Err(TodaError::DimensionMismatch {
                expected: self.base.n(),
                got: z.n(),
            });
        }
        for &pair in &self.pairs {
            let overlap = self.overlap(z, pair)?;
            if overlap < FRAME_OVERLAP_MIN {
                return Err(TodaError::FrameValidity { pair, overlap });
            }
        }
        Ok(BlockCoordinates {
            base_point: self.base.clone(),
            pairs: self.coordinates_unchecked(z),
        })
    }

    /// Gradients of the frozen-frame coordinates at an arbitrary point.
    pub fn differentials_at(&self, z: &PhasePoint, pair: PairId) -> PairDifferentials {
        let eps = pair.class.signs(z.n());
        let (ua, ub) = self.pair_vectors(pair);
        let (ua, ub) = (ua.as_slice(), ub.as_slice());
        let gaa = bilinear_gradient(z, &eps, ua, ua);
        let gbb = bilinear_gradient(z, &eps, ub, ub);
        let gab = bilinear_gradient(z, &eps, ua, ub);
        PairDifferentials {
            pair,
            dxi: gbb.iter().zip(&gaa).map(|(b, a)| 0.5 * (b - a)).collect(),
            deta: gab,
            dtau: gbb.iter().zip(&gaa).map(|(b, a)| 0.5 * (b + a)).collect(),
        }
    }

    pub fn differentials(&self, pair: PairId) -> PairDifferentials {
        self.differentials_at(&self.base, pair)
    }
}

/// Block coordinates of `z` in the frame frozen at `frame`'s base point.
pub fn block_coordinates(z: &PhasePoint, frame: &FrozenFrame) -> Result<BlockCoordinates> {
    frame.block_coordinates(z)
}

/// `T(x) = det(L_* - xI) / (λ_* - x) = Σ_j c_j x^{j-1}` for a degenerate pair.
#[derive(Clone, Debug, Serialize)]
pub struct AnnihilatorPolynomial {
    pub pair: PairId,
    /// `c_j` multiplies `x^{j-1}`, `j = 1..=n`.
    pub coefficients: Vec<f64>,
    /// The degenerate eigenvalue `λ_*` (mean of the pair).
    pub root: f64,
    /// `T'(λ_*)`.
    pub derivative_at_root: f64,
}

impl AnnihilatorPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }

    /// `Σ_j c_j A^{j-1}`.
    pub fn eval_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut acc = DMatrix::zeros(n, n);
        for c in self.coefficients.iter().rev() {
            acc = &acc * a + DMatrix::<f64>::identity(n, n) * *c;
        }
        acc
    }
}

/// Coefficients of `T` from the spectrum: the product of `(λ_i - x)` over all
/// eigenvalues with one copy of the degenerate value removed.
pub fn annihilator(spec: &SpectralData, pair: PairId) -> Result<AnnihilatorPolynomial> {
    let n = spec.n();
    pair.validate(n)?;
    if let Some(class) = spec.class {
        if class != pair.class {
            return Err(TodaError::InvalidPair(pair, n));
        }
    }
    if !spec.is_degenerate(pair.first) {
        return Err(TodaError::NotDegenerate(pair, spec.gaps[pair.first]));
    }
    let root = 0.5 * (spec.values[pair.first] + spec.values[pair.second()]);
    let mut coeffs = vec![1.0];
    for (i, &lam) in spec.values.iter().enumerate() {
        if i == pair.second() {
            continue;
        }
        let lam = if i == pair.first { root } else { lam };
        // multiply by (lam - x)
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += lam * c;
            next[k + 1] -= c;
        }
        coeffs = next;
    }
    let mut poly = AnnihilatorPolynomial {
        pair,
        coefficients: coeffs,
        root,
        derivative_at_root: 0.0,
    };
    poly.derivative_at_root = poly.derivative(root);
    Ok(poly)
}

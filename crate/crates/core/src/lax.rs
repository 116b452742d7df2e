//! Phase-space points, Lax matrices of both sign classes, flow generators and
//! the algebraic identities tying `L` to its antiperiodic partner `L̄`.
//!
//! Indices are zero-based and periodic with period `n` throughout: the
//! coupling `b[r]` joins particle `r` to particle `(r + 1) % n`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Result, TodaError};

/// Largest admissible `|q_r - q_{r+1}|`; keeps every coupling `b_r` well
/// inside double-precision range.
pub const OVERFLOW_GUARD: f64 = 600.0;

/// A point `(q, p)` of the 2n-dimensional phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct PhasePoint {
    q: Vec<f64>,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    #[serde(with = "crate::json::float_vec")]
    q: Vec<f64>,
    #[serde(with = "crate::json::float_vec")]
    p: Vec<f64>,
}

impl TryFrom<RawPoint> for PhasePoint {
    type Error = TodaError;
    fn try_from(raw: RawPoint) -> Result<Self> {
        PhasePoint::new(raw.q, raw.p)
    }
}

impl From<PhasePoint> for RawPoint {
    fn from(z: PhasePoint) -> Self {
        RawPoint { q: z.q, p: z.p }
    }
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(TodaError::LengthMismatch {
                q: q.len(),
                p: p.len(),
            });
        }
        let n = q.len();
        if n < 2 {
            return Err(TodaError::TooFewParticles(n));
        }
        if let Some(i) = q.iter().chain(p.iter()).position(|x| !x.is_finite()) {
            return Err(TodaError::NonFinite(i));
        }
        for r in 0..n {
            let next = (r + 1) % n;
            let gap = (q[r] - q[next]).abs();
            if gap > OVERFLOW_GUARD {
                return Err(TodaError::Overflow {
                    index: r,
                    next,
                    gap,
                    limit: OVERFLOW_GUARD,
                });
            }
        }
        Ok(Self { q, p })
    }

    /// Builds a point from the flat layout `(q_1..q_n, p_1..p_n)`.
    pub fn from_flat(z: &[f64]) -> Result<Self> {
        if z.len() % 2 != 0 {
            return Err(TodaError::DimensionMismatch {
                expected: z.len() + 1,
                got: z.len(),
            });
        }
        let n = z.len() / 2;
        Self::new(z[..n].to_vec(), z[n..].to_vec())
    }

    /// Relative equilibrium: all positions equal, all momenta equal.
    pub fn omega(n: usize, q0: f64, p0: f64) -> Result<Self> {
        Self::new(vec![q0; n], vec![p0; n])
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = self.q.clone();
        z.extend_from_slice(&self.p);
        z
    }

    /// `b_r = exp((q_r - q_{r+1}) / 2)`.
    pub fn couplings(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|r| ((self.q[r] - self.q[(r + 1) % n]) / 2.0).exp())
            .collect()
    }

    /// `self + scale * dz` in the flat layout.
    pub fn displaced(&self, dz: &[f64], scale: f64) -> Result<Self> {
        let z = self.to_flat();
        if dz.len() != z.len() {
            return Err(TodaError::DimensionMismatch {
                expected: z.len(),
                got: dz.len(),
            });
        }
        let moved: Vec<f64> = z.iter().zip(dz).map(|(a, d)| a + scale * d).collect();
        Self::from_flat(&moved)
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Even class: conjugate to `L` (periodic solutions of the difference
/// equation). Odd class: conjugate to `L̄` (antiperiodic solutions).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaxClass {
    Even,
    Odd,
}

impl LaxClass {
    /// The representative sign vector: all `+1` for even, `(1, .., 1, -1)` for odd.
    pub fn signs(self, n: usize) -> SignVector {
        match self {
            LaxClass::Even => SignVector::ones(n),
            LaxClass::Odd => SignVector::antiperiodic(n),
        }
    }

    pub fn other(self) -> Self {
        match self {
            LaxClass::Even => LaxClass::Odd,
            LaxClass::Odd => LaxClass::Even,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LaxClass::Even => "even",
            LaxClass::Odd => "odd",
        }
    }
}

impl fmt::Display for LaxClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Signs `ε` attached to the couplings, `b_r ↦ ε_r b_r`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(i) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(TodaError::InvalidSign(i));
        }
        if signs.len() < 2 {
            return Err(TodaError::TooFewParticles(signs.len()));
        }
        Ok(Self(signs))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn antiperiodic(n: usize) -> Self {
        let mut s = vec![1; n];
        s[n - 1] = -1;
        Self(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Sign of coupling `r`, periodic in `r`.
    pub fn get(&self, r: usize) -> f64 {
        f64::from(self.0[r % self.0.len()])
    }

    pub fn parity(&self) -> i8 {
        self.0.iter().product()
    }

    pub fn class(&self) -> LaxClass {
        if self.parity() == 1 {
            LaxClass::Even
        } else {
            LaxClass::Odd
        }
    }

    pub fn times(&self, other: &SignVector) -> Result<SignVector> {
        if self.len() != other.len() {
            return Err(TodaError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(SignVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect(),
        ))
    }

    /// Diagonal `d` with `d_0 = 1`, `d_m = Π_{k<m} ε_k σ_k`; `diag(d)`
    /// conjugates `L^ε` into `L^σ` exactly when `parity(ε σ) = +1`.
    pub fn transfer_diagonal(&self, other: &SignVector) -> Result<Vec<f64>> {
        let prod = self.times(other)?;
        let mut d = Vec::with_capacity(self.len());
        let mut acc = 1.0;
        for m in 0..self.len() {
            d.push(acc);
            acc *= prod.get(m);
        }
        Ok(d)
    }

    /// The conjugating diagonal, if the two sign vectors share a class.
    pub fn conjugator_to(&self, other: &SignVector) -> Result<Option<Vec<f64>>> {
        let prod = self.times(other)?;
        if prod.parity() != 1 {
            return Ok(None);
        }
        self.transfer_diagonal(other).map(Some)
    }
}

/// Symmetric periodic-tridiagonal Lax matrix `L^ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaxMatrix {
    sign: SignVector,
    entries: DMatrix<f64>,
}

impl LaxMatrix {
    /// `L` for the even class, `L̄` for the odd class.
    pub fn of_class(z: &PhasePoint, class: LaxClass) -> Self {
        let sign = class.signs(z.n());
        let entries = lax_entries(z, &sign);
        Self { sign, entries }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn sign(&self) -> &SignVector {
        &self.sign
    }
}

/// Builds `L^ε(z)`. Diagonal `p`, coupling `ε_r b_r` at `(r, r+1 mod n)`
/// and its mirror. For `n = 2` both couplings land on the same entry.
pub fn build_lax(z: &PhasePoint, eps: &SignVector) -> Result<LaxMatrix> {
    if eps.len() != z.n() {
        return Err(TodaError::DimensionMismatch {
            expected: z.n(),
            got: eps.len(),
        });
    }
    Ok(LaxMatrix {
        sign: eps.clone(),
        entries: lax_entries(z, eps),
    })
}

pub(crate) fn lax_entries(z: &PhasePoint, eps: &SignVector) -> DMatrix<f64> {
    let n = z.n();
    let b = z.couplings();
    let mut l = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(z.p()));
    for r in 0..n {
        let s = (r + 1) % n;
        let c = eps.get(r) * b[r];
        l[(r, s)] += c;
        l[(s, r)] += c;
    }
    l
}

/// Antisymmetric partner of `L^ε` in index form: `+ε_r b_r` at
/// `(r, r+1 mod n)` and `-ε_r b_r` at the mirror. Equals twice the
/// second flow generator of the same class.
pub fn skew_lax(z: &PhasePoint, eps: &SignVector) -> DMatrix<f64> {
    let n = z.n();
    let b = z.couplings();
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        let s = (r + 1) % n;
        let c = eps.get(r) * b[r];
        m[(r, s)] += c;
        m[(s, r)] -= c;
    }
    m
}

/// Gradient over `(q, p)` of `u · L^ε(z) · w` for fixed vectors `u`, `w`.
pub fn bilinear_gradient(z: &PhasePoint, eps: &SignVector, u: &[f64], w: &[f64]) -> Vec<f64> {
    let n = z.n();
    let b = z.couplings();
    let mut g = vec![0.0; 2 * n];
    for r in 0..n {
        g[n + r] = u[r] * w[r];
    }
    for m in 0..n {
        let s = (m + 1) % n;
        // d b_m = ½ b_m (dq_m - dq_{m+1})
        let coeff = 0.5 * eps.get(m) * b[m] * (u[m] * w[s] + u[s] * w[m]);
        g[m] += coeff;
        g[s] -= coeff;
    }
    g
}

/// `[I, A, A², …, A^max]` by repeated multiplication.
pub fn matrix_powers(a: &DMatrix<f64>, max: usize) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(max + 1);
    out.push(DMatrix::identity(n, n));
    for k in 1..=max {
        let next = &out[k - 1] * a;
        out.push(next);
    }
    out
}

/// Antisymmetric generator of the `F_j` flow.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix {
    flow_index: usize,
    class: LaxClass,
    entries: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn flow_index(&self) -> usize {
        self.flow_index
    }

    pub fn class(&self) -> LaxClass {
        self.class
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

fn check_flow_index(j: usize, n: usize) -> Result<()> {
    if j == 0 || j > n {
        Err(TodaError::FlowIndex { j, n })
    } else {
        Ok(())
    }
}

/// Generator `M_(j)` (even) or `M̄_(j)` (odd). The even generator takes its
/// strict upper triangle from `½ L̄^{j-1}`, the odd one from `½ L^{j-1}`; the
/// lower triangle is the antisymmetric completion.
pub fn build_generator(z: &PhasePoint, j: usize, class: LaxClass) -> Result<GeneratorMatrix> {
    let n = z.n();
    check_flow_index(j, n)?;
    let source = LaxMatrix::of_class(z, class.other());
    let power = &matrix_powers(source.entries(), j - 1)[j - 1];
    Ok(GeneratorMatrix {
        flow_index: j,
        class,
        entries: antisymmetric_from_upper(power, 0.5),
    })
}

pub(crate) fn antisymmetric_from_upper(a: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        for s in (r + 1)..n {
            m[(r, s)] = scale * a[(r, s)];
            m[(s, r)] = -scale * a[(r, s)];
        }
    }
    m
}

/// `F_j = Tr(L^j) / j` for `j = 1..=n`.
pub fn integrals(z: &PhasePoint) -> Vec<f64> {
    let n = z.n();
    let l = LaxMatrix::of_class(z, LaxClass::Even);
    let powers = matrix_powers(l.entries(), n);
    (1..=n).map(|j| powers[j].trace() / j as f64).collect()
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Residuals of the off-band structure of `L^j - L̄^j`.
#[derive(Clone, Debug, Serialize)]
pub struct OffBandReport {
    pub n: usize,
    pub j: usize,
    /// `max(‖L‖₂, ‖L̄‖₂)^j`, the scale for the zero-pattern residual.
    pub scale: f64,
    /// Largest `|(L^j - L̄^j)_{r,r+d}| / scale` over the diagonals that must vanish.
    pub zero_pattern_residual: f64,
    /// Largest relative error on the first nonzero diagonal.
    pub first_diagonal_residual: f64,
    /// `(row, col, observed, expected)` on the first nonzero diagonal.
    pub first_diagonal: Vec<(usize, usize, f64, f64)>,
    pub tol: f64,
    pub passed: bool,
}

/// Checks that `L^j - L̄^j` vanishes on its first `n - j` upper diagonals and
/// that the entries at `(r, r + n - j)`, `r < j`, equal `2 b_{r-1} ⋯ b_{r-j}`
/// (or 4 on the main diagonal when `j = n`).
pub fn off_band_check(z: &PhasePoint, j: usize, tol: f64) -> Result<OffBandReport> {
    let n = z.n();
    check_flow_index(j, n)?;
    let l = LaxMatrix::of_class(z, LaxClass::Even);
    let lb = LaxMatrix::of_class(z, LaxClass::Odd);
    let diff = &matrix_powers(l.entries(), j)[j] - &matrix_powers(lb.entries(), j)[j];
    let scale = spectral_norm(l.entries())
        .max(spectral_norm(lb.entries()))
        .powi(j as i32);

    let mut zero_res = 0.0_f64;
    for d in 0..(n - j) {
        for r in 0..(n - d) {
            zero_res = zero_res.max(diff[(r, r + d)].abs().max(diff[(r + d, r)].abs()));
        }
    }
    let zero_res = zero_res / scale;

    let b = z.couplings();
    let mut first = Vec::with_capacity(j);
    let mut first_res = 0.0_f64;
    for r in 0..j {
        let c = r + n - j;
        let expected = if j == n {
            4.0
        } else {
            2.0 * (1..=j).map(|k| b[(r + n - k) % n]).product::<f64>()
        };
        let observed = diff[(r, c)];
        first_res = first_res.max((observed - expected).abs() / expected.abs());
        first.push((r, c, observed, expected));
    }
    Ok(OffBandReport {
        n,
        j,
        scale,
        zero_pattern_residual: zero_res,
        first_diagonal_residual: first_res,
        first_diagonal: first,
        tol,
        passed: zero_res < tol && first_res < tol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceReport {
    pub n: usize,
    /// `Tr L^j - Tr L̄^j`, `j = 1..=n`.
    pub differences: Vec<f64>,
    /// Largest `|Tr L^j - Tr L̄^j| / max(1, ‖L‖^j)` over `j < n`.
    pub lower_residual: f64,
    /// `|Tr L^n - Tr L̄^n - 4n| / 4n`.
    pub top_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn trace_relation_check(z: &PhasePoint, tol: f64) -> TraceReport {
    let n = z.n();
    let l = LaxMatrix::of_class(z, LaxClass::Even);
    let lb = LaxMatrix::of_class(z, LaxClass::Odd);
    let pl = matrix_powers(l.entries(), n);
    let plb = matrix_powers(lb.entries(), n);
    let norm = spectral_norm(l.entries()).max(1.0);
    let differences: Vec<f64> = (1..=n).map(|j| pl[j].trace() - plb[j].trace()).collect();
    let lower_residual = differences[..n - 1]
        .iter()
        .enumerate()
        .map(|(k, d)| d.abs() / norm.powi(k as i32 + 1))
        .fold(0.0, f64::max);
    let target = 4.0 * n as f64;
    let top_residual = (differences[n - 1] - target).abs() / target;
    TraceReport {
        n,
        differences,
        lower_residual,
        top_residual,
        tol,
        passed: lower_residual < tol && top_residual < tol,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CharPolyReport {
    pub n: usize,
    /// `det(xI - L) - det(xI - L̄)` on the grid.
    pub values: Vec<f64>,
    /// Mean of `values`.
    pub constant: f64,
    /// Largest deviation of `values` from `constant`.
    pub max_deviation: f64,
    /// `||constant| - 4|`.
    pub magnitude_error: f64,
    pub tol: f64,
    pub passed: bool,
}

/// `det(xI - L(z)) - det(xI - L̄(z))` over `x_grid`; with this orientation of
/// the determinant the offset is `-4` for every `n`.
pub fn char_poly_offset(z: &PhasePoint, x_grid: &[f64], tol: f64) -> CharPolyReport {
    let n = z.n();
    let l = LaxMatrix::of_class(z, LaxClass::Even);
    let lb = LaxMatrix::of_class(z, LaxClass::Odd);
    let eye = DMatrix::<f64>::identity(n, n);
    let values: Vec<f64> = x_grid
        .iter()
        .map(|&x| {
            let a = &eye * x - l.entries();
            let b = &eye * x - lb.entries();
            a.determinant() - b.determinant()
        })
        .collect();
    let constant = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let max_deviation = values
        .iter()
        .map(|v| (v - constant).abs())
        .fold(0.0, f64::max);
    let magnitude_error = (constant.abs() - 4.0).abs();
    CharPolyReport {
        n,
        values,
        constant,
        max_deviation,
        magnitude_error,
        tol,
        passed: max_deviation < tol && magnitude_error < tol,
    }
}

/// Singular values (descending) of the `n² × (n-1)` matrix whose columns are
/// the flattened, unit-normalised `L^{j-1} - L̄^{j-1}`, `j = 2..=n`.
pub fn difference_powers_singular_values(z: &PhasePoint) -> Vec<f64> {
    let n = z.n();
    let pl = matrix_powers(LaxMatrix::of_class(z, LaxClass::Even).entries(), n - 1);
    let plb = matrix_powers(LaxMatrix::of_class(z, LaxClass::Odd).entries(), n - 1);
    let mut cols = DMatrix::zeros(n * n, n - 1);
    for j in 2..=n {
        let d = &pl[j - 1] - &plb[j - 1];
        let norm = d.norm();
        for (k, v) in d.iter().enumerate() {
            cols[(k, j - 2)] = v / norm;
        }
    }
    let mut sv: Vec<f64> = cols.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

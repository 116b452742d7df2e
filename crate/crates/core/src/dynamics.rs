//! Analytic gradients of the integrals, the canonical Poisson bracket,
//! verification of the higher Lax equations and integration of the flows
//! `ż = J∇G` for `G = Σ c_j F_j`.

use nalgebra::DMatrix;
use serde::Serialize;
use std::io::Write;

use crate::error::{Result, TodaError};
use crate::lax::{
    bilinear_gradient, build_generator, integrals, matrix_powers, LaxClass, LaxMatrix, PhasePoint,
};
use crate::spectral::decompose;
use crate::ode::{dopri5, stormer_verlet, OdeOptions, OdeStats};

/// Gradient of a function on phase space, split into `∂/∂q` and `∂/∂p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gradient {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n: usize) -> Self {
        Self {
            dq: vec![0.0; n],
            dp: vec![0.0; n],
        }
    }

    /// Splits a flat `(∂q, ∂p)` vector.
    pub fn from_flat(g: &[f64]) -> Self {
        let n = g.len() / 2;
        Self {
            dq: g[..n].to_vec(),
            dp: g[n..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend_from_slice(&self.dp);
        v
    }

    pub fn n(&self) -> usize {
        self.dq.len()
    }

    /// Gradient of the coordinate function `q_r`.
    pub fn q_coordinate(n: usize, r: usize) -> Self {
        let mut g = Self::zeros(n);
        g.dq[r] = 1.0;
        g
    }

    /// Gradient of the coordinate function `p_r`.
    pub fn p_coordinate(n: usize, r: usize) -> Self {
        let mut g = Self::zeros(n);
        g.dp[r] = 1.0;
        g
    }

    /// Hamiltonian vector field `J∇f = (∂f/∂p, -∂f/∂q)` in the flat layout.
    pub fn hamiltonian_vector(&self) -> Vec<f64> {
        let mut v = self.dp.clone();
        v.extend(self.dq.iter().map(|x| -x));
        v
    }

    pub fn norm(&self) -> f64 {
        self.dq.iter().chain(&self.dp).map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn grad_from_power(z: &PhasePoint, pw: &DMatrix<f64>) -> Gradient {
    let n = z.n();
    let b = z.couplings();
    let mut g = Gradient::zeros(n);
    for r in 0..n {
        let next = (r + 1) % n;
        let prev = (r + n - 1) % n;
        g.dp[r] = pw[(r, r)];
        g.dq[r] = b[r] * pw[(r, next)] - b[prev] * pw[(prev, r)];
    }
    g
}

/// `∇F_j` from `dF_j = Tr(L^{j-1} dL)`.
#[allow(non_snake_case)]
pub fn grad_F(z: &PhasePoint, j: usize) -> Result<Gradient> {
    let n = z.n();
    if j == 0 || j > n {
        return Err(TodaError::FlowIndex { j, n });
    }
    let l = LaxMatrix::of_class(z, LaxClass::Even);
    let pw = &matrix_powers(l.entries(), j - 1)[j - 1];
    Ok(grad_from_power(z, pw))
}

/// All of `∇F_1, …, ∇F_n`, sharing the matrix powers.
pub fn grad_all(z: &PhasePoint) -> Vec<Gradient> {
    let n = z.n();
    let l = LaxMatrix::of_class(z, LaxClass::Even);
    matrix_powers(l.entries(), n - 1)
        .iter()
        .map(|pw| grad_from_power(z, pw))
        .collect()
}

/// `∇(Σ c_j F_j)`.
pub fn grad_combination(z: &PhasePoint, c: &[f64]) -> Result<Gradient> {
    let n = z.n();
    if c.len() != n {
        return Err(TodaError::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    let mut g = Gradient::zeros(n);
    for (cj, gj) in c.iter().zip(grad_all(z)) {
        for r in 0..n {
            g.dq[r] += cj * gj.dq[r];
            g.dp[r] += cj * gj.dp[r];
        }
    }
    Ok(g)
}

/// Jacobian of `(F_1, …, F_n)`: row `j-1` is `∇F_j` in the flat layout.
pub fn jacobian(z: &PhasePoint) -> DMatrix<f64> {
    let n = z.n();
    let rows = grad_all(z);
    DMatrix::from_fn(n, 2 * n, |j, k| if k < n { rows[j].dq[k] } else { rows[j].dp[k - n] })
}

/// Canonical bracket `{f, g} = Σ (∂f/∂q ∂g/∂p - ∂f/∂p ∂g/∂q)`.
pub fn poisson(f: &Gradient, g: &Gradient) -> Result<f64> {
    if f.n() != g.n() {
        return Err(TodaError::DimensionMismatch {
            expected: f.n(),
            got: g.n(),
        });
    }
    Ok((0..f.n())
        .map(|r| f.dq[r] * g.dp[r] - f.dp[r] * g.dq[r])
        .sum())
}

/// Gradient of the matrix entry `L^ε_{rs}` as a function on phase space.
pub fn lax_entry_gradient(z: &PhasePoint, class: LaxClass, r: usize, s: usize) -> Gradient {
    let n = z.n();
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    u[r] = 1.0;
    w[s] = 1.0;
    Gradient::from_flat(&bilinear_gradient(z, &class.signs(n), &u, &w))
}

/// Matrix of brackets `{F_i, F_j}`.
pub fn involution_matrix(z: &PhasePoint) -> DMatrix<f64> {
    let g = grad_all(z);
    let n = z.n();
    DMatrix::from_fn(n, n, |i, j| poisson(&g[i], &g[j]).unwrap())
}

/// `max |{L_rs, F_j} - [L, M_(j)]_rs|`, with `L̄` and `M̄_(j)` for the odd
/// class. The bracket side uses analytic gradients only.
pub fn lax_residual(z: &PhasePoint, j: usize, class: LaxClass) -> Result<f64> {
    let n = z.n();
    let gf = grad_F(z, j)?;
    let l = LaxMatrix::of_class(z, class);
    let m = build_generator(z, j, class)?;
    let comm = l.entries() * m.entries() - m.entries() * l.entries();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for s in 0..n {
            let br = poisson(&lax_entry_gradient(z, class, r, s), &gf)?;
            worst = worst.max((br - comm[(r, s)]).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Integrator {
    /// Adaptive Dormand–Prince 5(4) with dense output.
    DormandPrince,
    /// Fixed-step Störmer–Verlet; only for the `F_2` flow.
    StormerVerlet { h: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub integrator: Integrator,
    pub ode: OdeOptions,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::DormandPrince,
            ode: OdeOptions::default(),
        }
    }
}

impl FlowOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        let mut o = Self::default();
        o.ode.rtol = rtol;
        o.ode.atol = rtol * 1e-2;
        o
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowState {
    #[serde(with = "crate::json::float")]
    pub t: f64,
    pub z: PhasePoint,
    #[serde(with = "crate::json::float_vec")]
    pub integrals: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    #[serde(with = "crate::json::float_vec")]
    pub coefficients: Vec<f64>,
    pub states: Vec<FlowState>,
    /// `max_k max_t |F_k(t) - F_k(0)| / max(1, |F_k(0)|)`.
    #[serde(with = "crate::json::float")]
    pub max_integral_drift: f64,
    #[serde(skip)]
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &FlowState {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// CSV with header `t,q_1..q_n,p_1..p_n,F_1..F_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.coefficients.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("q_{i}")));
        header.extend((1..=n).map(|i| format!("p_{i}")));
        header.extend((1..=n).map(|i| format!("F_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.states {
            let row: Vec<String> = std::iter::once(s.t)
                .chain(s.z.q().iter().copied())
                .chain(s.z.p().iter().copied())
                .chain(s.integrals.iter().copied())
                .map(crate::json::format_f64)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Largest change of the sorted spectra of `L` and `L̄` along a trajectory,
/// relative to `max(1, max |λ|)` at the start.
pub fn spectral_drift(traj: &Trajectory) -> Result<f64> {
    let spectra = |z: &PhasePoint| -> Result<Vec<f64>> {
        let mut v = decompose(LaxMatrix::of_class(z, LaxClass::Even).entries(), 0.0)?.values;
        v.extend(decompose(LaxMatrix::of_class(z, LaxClass::Odd).entries(), 0.0)?.values);
        Ok(v)
    };
    let s0 = spectra(&traj.states[0].z)?;
    let scale = s0.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut worst: f64 = 0.0;
    for st in &traj.states[1..] {
        for (a, b) in spectra(&st.z)?.iter().zip(&s0) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(worst)
}

/// `t_final * k / samples` for `k = 0..=samples`.
pub fn uniform_times(t_final: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(1);
    (0..=samples)
        .map(|k| t_final * k as f64 / samples as f64)
        .collect()
}

/// Integrates `ż = J∇(Σ c_j F_j)` from `z0` and samples at `times`
/// (nondecreasing, starting at or after 0).
pub fn integrate_flow(
    z0: &PhasePoint,
    c: &[f64],
    times: &[f64],
    opts: &FlowOptions,
) -> Result<Trajectory> {
    let n = z0.n();
    if c.len() != n {
        return Err(TodaError::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(TodaError::Config("sample times must be finite".into()));
    }
    let (points, stats) = match opts.integrator {
        Integrator::DormandPrince => {
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let z = PhasePoint::from_flat(y).map_err(|e| TodaError::LeftDomain {
                    t,
                    source: Box::new(e),
                })?;
                let v = grad_combination(&z, c)?.hamiltonian_vector();
                dy.copy_from_slice(&v);
                Ok(())
            };
            let (ys, stats) = dopri5(rhs, 0.0, &z0.to_flat(), times, &opts.ode)?;
            let pts = ys
                .iter()
                .zip(times)
                .map(|(y, &t)| {
                    PhasePoint::from_flat(y).map_err(|e| TodaError::LeftDomain {
                        t,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (pts, stats)
        }
        Integrator::StormerVerlet { h } => {
            let is_energy = c
                .iter()
                .enumerate()
                .all(|(k, &x)| if k == 1 { x == 1.0 } else { x == 0.0 });
            if !is_energy {
                return Err(TodaError::Config(
                    "Störmer-Verlet is only available for the F_2 flow".into(),
                ));
            }
            let p0 = z0.p().to_vec();
            let grad_v = |q: &[f64], g: &mut [f64]| -> Result<()> {
                let z = PhasePoint::new(q.to_vec(), vec![0.0; q.len()])?;
                g.copy_from_slice(&grad_F(&z, 2)?.dq);
                Ok(())
            };
            let out = stormer_verlet(grad_v, 0.0, z0.q(), &p0, times, h)?;
            let pts = out
                .into_iter()
                .map(|(q, p)| PhasePoint::new(q, p))
                .collect::<Result<Vec<_>>>()?;
            (pts, OdeStats::default())
        }
    };
    let f0 = integrals(z0);
    let mut drift: f64 = 0.0;
    let states: Vec<FlowState> = points
        .into_iter()
        .zip(times)
        .map(|(z, &t)| {
            let f = integrals(&z);
            for (a, b) in f.iter().zip(&f0) {
                drift = drift.max((a - b).abs() / b.abs().max(1.0));
            }
            FlowState { t, z, integrals: f }
        })
        .collect();
    Ok(Trajectory {
        coefficients: c.to_vec(),
        states,
        max_integral_drift: drift,
        stats,
    })
}

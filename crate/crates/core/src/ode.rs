//! Dormand–Prince 5(4) with dense output, plus a fixed-step Störmer–Verlet
//! scheme for separable Hamiltonians.

use crate::error::{Result, TodaError};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (a, k) in terms {
            s += a * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

/// Integrates `y' = f(t, y)` from `t0` and returns the solution at each of
/// `sample_times` (nondecreasing, all `>= t0`) by dense-output
/// interpolation. The right-hand side may fail, which aborts the solve.
pub fn dopri5<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    sample_times: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = y0.len();
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(sample_times.len());
    let t_end = sample_times.last().copied().unwrap_or(t0);
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.first().is_some_and(|&s| s < t0) {
        return Err(TodaError::Config("sample times must be nondecreasing and >= t0".into()));
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    f(t, &y, &mut k[0])?;
    stats.evaluations += 1;

    let mut next_sample = 0;
    while next_sample < sample_times.len() && sample_times[next_sample] <= t {
        out.push(y.clone());
        next_sample += 1;
    }
    if next_sample == sample_times.len() {
        return Ok((out, stats));
    }

    let scale = |a: &[f64], b: &[f64], i: usize| opts.atol + opts.rtol * a[i].abs().max(b[i].abs());
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let d0 = (0..dim).map(|i| (y[i] / scale(&y, &y, i)).powi(2)).sum::<f64>() / dim as f64;
            let d1 = (0..dim).map(|i| (k[0][i] / scale(&y, &y, i)).powi(2)).sum::<f64>() / dim as f64;
            if d0 < 1e-10 || d1 < 1e-10 {
                1e-6
            } else {
                0.01 * (d0 / d1).sqrt()
            }
        }
    }
    .min(opts.h_max)
    .min(t_end - t0);

    let mut ytmp = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut facold: f64 = 1e-4;
    let mut rejected_last = false;
    let mut steps = 0;

    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(TodaError::StepUnderflow { t, h });
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(TodaError::StepUnderflow { t, h });
        }
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }

        let (k1, rest) = k.split_first_mut().unwrap();
        let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
        axpy(&mut ytmp, &y, h, &[(A21, k1)]);
        f(t + C2 * h, &ytmp, k2)?;
        axpy(&mut ytmp, &y, h, &[(A31, k1), (A32, k2)]);
        f(t + C3 * h, &ytmp, k3)?;
        axpy(&mut ytmp, &y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        f(t + C4 * h, &ytmp, k4)?;
        axpy(&mut ytmp, &y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        f(t + C5 * h, &ytmp, k5)?;
        axpy(&mut ytmp, &y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        f(t + h, &ytmp, k6)?;
        axpy(&mut y1, &y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        f(t + h, &y1, k7)?;
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..dim {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / scale(&y, &y1, i)).powi(2);
        }
        let err = (err / dim as f64).sqrt();

        let fac11 = err.powf(0.17);
        if err <= 1.0 {
            let facold_pow = facold.powf(0.04);
            let fac = (fac11 / facold_pow / 0.9).clamp(0.2, 10.0);
            let mut h_new = (h / fac).min(opts.h_max);
            if rejected_last {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);
            stats.accepted += 1;

            let t_new = t + h;
            while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                let theta = (sample_times[next_sample] - t) / h;
                let th1 = 1.0 - theta;
                let mut ys = vec![0.0; dim];
                for i in 0..dim {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    let r4 = ydiff - h * k7[i] - bspl;
                    let r5 = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                    ys[i] = y[i] + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * r5)));
                }
                out.push(ys);
                next_sample += 1;
            }

            std::mem::swap(&mut y, &mut y1);
            k1.copy_from_slice(k7);
            t = if last { t_end } else { t_new };
            h = h_new;
            rejected_last = false;
        } else {
            h /= (fac11 / 0.9).min(5.0);
            stats.rejected += 1;
            rejected_last = true;
        }
    }
    while next_sample < sample_times.len() {
        out.push(y.clone());
        next_sample += 1;
    }
    Ok((out, stats))
}

/// Fixed-step velocity Verlet for `H = ½|p|² + V(q)`. `grad_v` writes
/// `∇V(q)`. Steps are shortened uniformly so every sample time is hit.
pub fn stormer_verlet<G>(
    mut grad_v: G,
    t0: f64,
    q0: &[f64],
    p0: &[f64],
    sample_times: &[f64],
    h_max: f64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>>
where
    G: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = q0.len();
    let (mut q, mut p) = (q0.to_vec(), p0.to_vec());
    let mut g = vec![0.0; n];
    grad_v(&q, &mut g)?;
    let mut t = t0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        if ts < t {
            return Err(TodaError::Config("sample times must be nondecreasing and >= t0".into()));
        }
        let steps = ((ts - t) / h_max).ceil() as usize;
        let h = if steps > 0 { (ts - t) / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            for i in 0..n {
                p[i] -= 0.5 * h * g[i];
                q[i] += h * p[i];
            }
            grad_v(&q, &mut g)?;
            for i in 0..n {
                p[i] -= 0.5 * h * g[i];
            }
        }
        t = ts;
        out.push((q.clone(), p.clone()));
    }
    Ok(out)
}

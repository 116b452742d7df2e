//! Test-side oracles. Everything here is rebuilt from the defining formulas
//! on plain `Vec` matrices so that tests do not lean on the library's own
//! constructions.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![0.0; n]; n]
}

pub fn eye(n: usize) -> Mat {
    let mut a = zeros(n);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    a
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut c = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..n {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

pub fn matpow(a: &Mat, k: usize) -> Mat {
    (0..k).fold(eye(a.len()), |acc, _| matmul(&acc, a))
}

pub fn trace(a: &Mat) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &Mat) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut d = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            m.swap(piv, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

pub fn couplings(q: &[f64]) -> Vec<f64> {
    let n = q.len();
    (0..n).map(|r| ((q[r] - q[(r + 1) % n]) / 2.0).exp()).collect()
}

/// `+1` everywhere for the periodic class, last entry `-1` for the
/// antiperiodic one.
pub fn signs(n: usize, odd: bool) -> Vec<f64> {
    let mut e = vec![1.0; n];
    if odd {
        e[n - 1] = -1.0;
    }
    e
}

pub fn lax(q: &[f64], p: &[f64], eps: &[f64]) -> Mat {
    let n = q.len();
    let b = couplings(q);
    let mut l = zeros(n);
    for r in 0..n {
        l[r][r] = p[r];
    }
    for r in 0..n {
        let s = (r + 1) % n;
        l[r][s] += eps[r] * b[r];
        l[s][r] += eps[r] * b[r];
    }
    l
}

/// `∂L/∂z_k` for `z = (q, p)`.
pub fn dlax(q: &[f64], eps: &[f64], k: usize) -> Mat {
    let n = q.len();
    let mut d = zeros(n);
    if k >= n {
        d[k - n][k - n] = 1.0;
        return d;
    }
    let b = couplings(q);
    // b_k grows with q_k, b_{k-1} shrinks
    for (r, f) in [(k, 0.5), ((k + n - 1) % n, -0.5)] {
        let s = (r + 1) % n;
        d[r][s] += f * eps[r] * b[r];
        d[s][r] += f * eps[r] * b[r];
    }
    d
}

pub fn f_values(q: &[f64], p: &[f64]) -> Vec<f64> {
    let l = lax(q, p, &signs(q.len(), false));
    (1..=q.len()).map(|j| trace(&matpow(&l, j)) / j as f64).collect()
}

/// `∇F_j` over `(q, p)` from `dF_j = Tr(L^{j-1} dL)`.
pub fn grad_f(q: &[f64], p: &[f64], j: usize) -> Vec<f64> {
    let n = q.len();
    let eps = signs(n, false);
    let lj = matpow(&lax(q, p, &eps), j - 1);
    (0..2 * n).map(|k| trace(&matmul(&lj, &dlax(q, &eps, k)))).collect()
}

/// Gradient of `u · L^ε(z) · w` with `u`, `w` frozen.
pub fn grad_bilinear(q: &[f64], eps: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
    let n = q.len();
    (0..2 * n)
        .map(|k| {
            let d = dlax(q, eps, k);
            (0..n).map(|a| (0..n).map(|b| u[a] * d[a][b] * w[b]).sum::<f64>()).sum()
        })
        .collect()
}

/// `{f, g} = Σ ∂f/∂q ∂g/∂p - ∂f/∂p ∂g/∂q`.
pub fn poisson(f: &[f64], g: &[f64]) -> f64 {
    let n = f.len() / 2;
    (0..n).map(|r| f[r] * g[n + r] - f[n + r] * g[r]).sum()
}

/// Cyclic Jacobi; eigenvalues descending with eigenvectors as columns.
pub fn jacobi(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut m = a.clone();
    let mut v = eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if m[p][r].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[r][r] - m[p][p]) / (2.0 * m[p][r]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkr) = (m[k][p], m[k][r]);
                    m[k][p] = c * mkp - s * mkr;
                    m[k][r] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let (mpk, mrk) = (m[p][k], m[r][k]);
                    m[p][k] = c * mpk - s * mrk;
                    m[r][k] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let (vkp, vkr) = (v[k][p], v[k][r]);
                    v[k][p] = c * vkp - s * vkr;
                    v[k][r] = s * vkp + c * vkr;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n).map(|k| order.iter().map(|&i| v[k][i]).collect()).collect();
    (vals, vecs)
}

pub fn column(m: &Mat, c: usize) -> Vec<f64> {
    m.iter().map(|row| row[c]).collect()
}

pub fn spectra(q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = q.len();
    (jacobi(&lax(q, p, &signs(n, false))).0, jacobi(&lax(q, p, &signs(n, true))).0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `q, p` uniform in `[-1, 1]`.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let q = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (q, p)
}

/// Rank of `dF` from the eigenvalues of the Gram matrix of unit-normalized
/// gradients, plus the left null vectors.
pub fn df_gram(q: &[f64], p: &[f64]) -> (Vec<f64>, Mat) {
    let n = q.len();
    let rows: Vec<Vec<f64>> = (1..=n)
        .map(|j| {
            let g = grad_f(q, p, j);
            let nrm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nrm = if nrm > 0.0 { nrm } else { 1.0 };
            g.into_iter().map(|x| x / nrm).collect()
        })
        .collect();
    let gram: Mat = (0..n)
        .map(|i| (0..n).map(|j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum()).collect())
        .collect();
    jacobi(&gram)
}

/// Corank of `dF`: singular values below `tol` relative to the largest.
pub fn corank(q: &[f64], p: &[f64], tol: f64) -> usize {
    let (ev, _) = df_gram(q, p);
    let top = ev[0].max(0.0).sqrt();
    ev.iter().filter(|&&e| e.max(0.0).sqrt() < tol * top).count()
}

/// Number of eigenvalue pairs closer than `tol` in a descending list.
pub fn double_count(vals: &[f64], tol: f64) -> usize {
    let scale = (vals[0] - vals[vals.len() - 1]).max(1.0);
    vals.windows(2).filter(|w| w[0] - w[1] < tol * scale).count()
}

/// `arg det(A + iB)` with `A = ∂F/∂p`, `B = -∂F/∂q` column by column.
pub fn lagrangian_arg(q: &[f64], p: &[f64]) -> f64 {
    let n = q.len();
    let m = DMatrix::from_fn(n, n, |r, c| {
        let g = grad_f(q, p, c + 1);
        Complex::new(g[n + r], -g[r])
    });
    m.determinant().arg()
}

/// Winding number of `det(A + iB)²` along a closed curve, sampled finely
/// enough that consecutive phase steps stay well below π.
pub fn lagrangian_winding<F: Fn(f64) -> (Vec<f64>, Vec<f64>)>(curve: F, samples: usize) -> f64 {
    let mut total = 0.0;
    let (q0, p0) = curve(0.0);
    let mut prev = 2.0 * lagrangian_arg(&q0, &p0);
    for k in 1..=samples {
        let (q, p) = curve(k as f64 / samples as f64);
        let cur = 2.0 * lagrangian_arg(&q, &p);
        let mut d = cur - prev;
        d -= TAU * (d / TAU).round();
        assert!(d.abs() < 1.0, "phase step {d} too large; refine the curve");
        total += d;
        prev = cur;
    }
    total / TAU
}

/// Sign each eigenvector of `L^ε` picks up when continued around the curve.
pub fn holonomy<F: Fn(f64) -> (Vec<f64>, Vec<f64>)>(curve: F, odd: bool, samples: usize) -> Vec<i8> {
    let (q0, p0) = curve(0.0);
    let n = q0.len();
    let eps = signs(n, odd);
    let start = jacobi(&lax(&q0, &p0, &eps)).1;
    let mut cur = start.clone();
    for k in 1..=samples {
        let (q, p) = curve(k as f64 / samples as f64);
        let mut next = jacobi(&lax(&q, &p, &eps)).1;
        for c in 0..n {
            let dot: f64 = (0..n).map(|r| cur[r][c] * next[r][c]).sum();
            assert!(dot.abs() > 0.9, "eigenvector {c} jumped (overlap {dot}); refine the curve");
            if dot < 0.0 {
                for row in next.iter_mut() {
                    row[c] = -row[c];
                }
            }
        }
        cur = next;
    }
    (0..n)
        .map(|c| {
            let dot: f64 = (0..n).map(|r| cur[r][c] * start[r][c]).sum();
            if dot > 0.0 { 1 } else { -1 }
        })
        .collect()
}

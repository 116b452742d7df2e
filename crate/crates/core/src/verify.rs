//! The verification suite behind `toda-lax verify`.
//!
//! Work is split per particle count and run on a rayon pool whose size is
//! capped by `TODA_LAX_THREADS`; results are concatenated in a fixed order
//! so the report does not depend on scheduling.

use rayon::prelude::*;
use std::f64::consts::TAU;
use std::time::Instant;

use crate::config::RunConfig;
use crate::dynamics::{
    grad_F, integrate_flow, involution_matrix, lax_residual, spectral_drift, uniform_times, FlowOptions,
};
use crate::error::{Result, TodaError};
use crate::lax::{
    char_poly_offset, difference_powers_singular_values, integrals, off_band_check, trace_relation_check,
    LaxClass, LaxMatrix, PhasePoint,
};
use crate::maslov::{
    check_holonomy_theorem, enclosure_count_check, harmonic_oscillator_maslov, maslov_index,
    transport_eigenvectors, ClosedCurve, DiskPatch,
};
use crate::report::{CheckRecord, Status, VerificationReport};
use crate::sampling::random_points;
use crate::singularity::{
    bracket_relations_check, corank, find_singular, hessian_structure_check, null_vector_alignment, omega_point,
    stratum_seed, tangent_symplectic_check, FindOptions, SingularPoint,
};
use crate::spectral::{decompose, interlacing_check, PairId};

pub const THREADS_ENV: &str = "TODA_LAX_THREADS";

/// Radius of the loops drawn around singular points.
pub const LOOP_RADIUS: f64 = 1e-3;

/// Size of the perturbation that opens the non-target pairs of a seed.
pub const SEED_SIZE: f64 = 1e-2;

const REF_OFF_BAND: &str = "off-band structure of L^j - Lbar^j";
const REF_TRACE: &str = "trace relation Tr L^n - Tr Lbar^n = 4n";
const REF_CHARPOLY: &str = "characteristic polynomials of L and Lbar differ by a constant";
const REF_INDEPENDENCE: &str = "linear independence of L^{j-1} - Lbar^{j-1}";
const REF_INTERLACING: &str = "interlacing of the spectra of L and Lbar";
const REF_OMEGA: &str = "closed-form spectra at relative equilibria";
const REF_INVOLUTION: &str = "involution of the integrals F_j";
const REF_LAX: &str = "higher Lax equations {L, F_j} = [L, M_(j)]";
const REF_FLOW: &str = "isospectrality of the Lax flows";
const REF_CORANK: &str = "corank dF = nu + nubar";
const REF_HESSIAN: &str = "transverse stability: G'' structure and frequency";
const REF_BRACKETS: &str = "Poisson brackets of block coordinates";
const REF_SYMPLECTIC: &str = "strata are symplectic submanifolds";
const REF_NULL: &str = "null vectors of dF are annihilator coefficients";
const REF_HOLONOMY: &str = "Maslov index parity equals eigenvector holonomy";
const REF_ENCLOSURE: &str = "Maslov index counts enclosed singular points";
const REF_CALIBRATION: &str = "Maslov orientation calibration (harmonic oscillator)";

/// Pool sized by `TODA_LAX_THREADS` when set, else rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k: usize = v
            .trim()
            .parse()
            .map_err(|_| TodaError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if k == 0 {
            return Err(TodaError::Config(format!("{THREADS_ENV} must be positive")));
        }
        b = b.num_threads(k);
    }
    b.build().map_err(|e| TodaError::Config(e.to_string()))
}

fn timed(cfg: &RunConfig, f: impl FnOnce() -> CheckRecord) -> CheckRecord {
    let start = Instant::now();
    let mut r = f();
    if cfg.timing {
        r.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    r
}

fn or_error(id: &str, reference: &str, r: Result<CheckRecord>) -> CheckRecord {
    r.unwrap_or_else(|e| CheckRecord::error(id, reference, e))
}

fn seed_for(cfg: &RunConfig, n: usize, salt: u64) -> u64 {
    cfg.seed.wrapping_mul(1_000_003).wrapping_add(100 * n as u64 + salt)
}

/// Runs every selected check for every particle count in the config.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let pool = thread_pool()?;
    let ns: Vec<usize> = cfg.particle_counts().collect();
    let per_n: Vec<Vec<CheckRecord>> = pool.install(|| ns.par_iter().map(|&n| checks_for_n(cfg, n)).collect());
    let mut report = VerificationReport::default();
    if cfg.runs("maslov") {
        report.push(timed(cfg, || {
            or_error("maslov.calibration", REF_CALIBRATION, calibration_check(cfg))
        }));
    }
    for block in per_n {
        report.extend(block);
    }
    Ok(report)
}

fn checks_for_n(cfg: &RunConfig, n: usize) -> Vec<CheckRecord> {
    let pts = random_points(seed_for(cfg, n, 1), n, cfg.random_points, 1.0);
    let mut out = Vec::new();
    if cfg.runs("lax") {
        out.extend(lax_checks(cfg, n, &pts));
    }
    if cfg.runs("spectral") {
        out.extend(spectral_checks(cfg, n, &pts));
    }
    if cfg.runs("dynamics") {
        out.extend(dynamics_checks(cfg, n, &pts));
    }
    let need_points = cfg.runs("singularity") || cfg.runs("maslov");
    let found: Vec<(PairId, Result<SingularPoint>)> = if need_points {
        sigma1_points(cfg, n)
    } else {
        Vec::new()
    };
    if cfg.runs("singularity") {
        out.extend(singularity_checks(cfg, n, &pts, &found));
    }
    if cfg.runs("maslov") {
        out.extend(maslov_checks(cfg, n, &pts, &found));
    }
    out
}

/// One point per admissible pair on the stratum where only that pair is
/// degenerate. For `n = 2` that stratum is the line of relative equilibria.
pub fn sigma1_points(cfg: &RunConfig, n: usize) -> Vec<(PairId, Result<SingularPoint>)> {
    let opts = FindOptions {
        degeneracy_tol: cfg.tolerances.degeneracy,
        ..Default::default()
    };
    PairId::all(n)
        .into_iter()
        .map(|pair| {
            let sp = if n == 2 {
                SingularPoint::from_omega(2, 0.0, 0.0)
            } else {
                stratum_seed(n, &[pair], SEED_SIZE).and_then(|seed| find_singular(&seed, &[pair], &opts))
            };
            (pair, sp)
        })
        .collect()
}

fn lax_checks(cfg: &RunConfig, n: usize, pts: &[PhasePoint]) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    out.push(timed(cfg, || {
        let id = format!("lax.off_band.n{n}");
        or_error(&id, REF_OFF_BAND, (|| {
            let mut worst: f64 = 0.0;
            for z in pts {
                for j in 1..=n {
                    let r = off_band_check(z, j, 1e-10)?;
                    worst = worst.max(r.zero_pattern_residual).max(r.first_diagonal_residual);
                }
            }
            Ok(CheckRecord::residual(&id, REF_OFF_BAND, worst, 1e-10))
        })())
    }));
    out.push(timed(cfg, || {
        let worst = pts
            .iter()
            .map(|z| {
                let r = trace_relation_check(z, 1e-9);
                r.lower_residual.max(r.top_residual)
            })
            .fold(0.0, f64::max);
        CheckRecord::residual(format!("lax.trace.n{n}"), REF_TRACE, worst, 1e-9)
    }));
    out.push(timed(cfg, || {
        let grid: Vec<f64> = (0..21).map(|k| -3.0 + 0.3 * k as f64).collect();
        let mut worst: f64 = 0.0;
        for z in pts.iter().take(100) {
            let r = char_poly_offset(z, &grid, 1e-8);
            worst = worst.max(r.max_deviation).max((r.constant + 4.0).abs());
        }
        CheckRecord::residual(format!("lax.char_poly.n{n}"), REF_CHARPOLY, worst, 1e-8)
            .with_detail("constant -4 for det(xI - L) - det(xI - Lbar)")
    }));
    out.push(timed(cfg, || {
        let min_sv = pts
            .iter()
            .take(20)
            .map(|z| *difference_powers_singular_values(z).last().unwrap_or(&1.0))
            .fold(f64::INFINITY, f64::min);
        CheckRecord::boolean(format!("lax.independence.n{n}"), REF_INDEPENDENCE, min_sv > 1e-8, 0)
            .with_detail(format!("smallest normalized singular value {min_sv:.3e}"))
    }));
    out
}

fn spectral_checks(cfg: &RunConfig, n: usize, pts: &[PhasePoint]) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    out.push(timed(cfg, || {
        let id = format!("spectral.interlacing.n{n}");
        or_error(&id, REF_INTERLACING, (|| {
            let mut bad = 0;
            for z in pts {
                bad += interlacing_check(z, 0.0)?.violations.len();
            }
            Ok(CheckRecord::boolean(&id, REF_INTERLACING, bad == 0, bad))
        })())
    }));
    out.push(timed(cfg, || {
        let id = format!("spectral.decomposition.n{n}");
        or_error(&id, "plumbing", (|| {
            let mut worst: f64 = 0.0;
            for z in pts {
                for class in [LaxClass::Even, LaxClass::Odd] {
                    let l = LaxMatrix::of_class(z, class);
                    let s = decompose(l.entries(), cfg.tolerances.degeneracy)?;
                    worst = worst.max(s.eigen_residual(l.entries())).max(s.orthonormality_error());
                }
            }
            Ok(CheckRecord::residual(&id, "plumbing", worst, 1e-10))
        })())
    }));
    out.push(timed(cfg, || {
        let id = format!("spectral.omega_closed_form.n{n}");
        or_error(&id, REF_OMEGA, (|| {
            let mut worst: f64 = 0.0;
            for (q0, p0) in [(0.0, 0.0), (0.7, -1.3), (-2.0, 0.4)] {
                worst = worst.max(omega_point(n, q0, p0)?.spectrum_error()?);
            }
            Ok(CheckRecord::residual(&id, REF_OMEGA, worst, 1e-12))
        })())
    }));
    out
}

fn dynamics_checks(cfg: &RunConfig, n: usize, pts: &[PhasePoint]) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    out.push(timed(cfg, || {
        let worst = pts.iter().map(|z| involution_matrix(z).amax()).fold(0.0, f64::max);
        CheckRecord::residual(format!("dynamics.involution.n{n}"), REF_INVOLUTION, worst, 1e-9)
    }));
    out.push(timed(cfg, || {
        let id = format!("dynamics.lax_equations.n{n}");
        or_error(&id, REF_LAX, (|| {
            let mut worst: f64 = 0.0;
            for z in pts.iter().take(50) {
                for j in 1..=n {
                    for class in [LaxClass::Even, LaxClass::Odd] {
                        worst = worst.max(lax_residual(z, j, class)?);
                    }
                }
            }
            Ok(CheckRecord::residual(&id, REF_LAX, worst, 1e-8))
        })())
    }));
    out.push(timed(cfg, || {
        let id = format!("dynamics.gradients.n{n}");
        or_error(&id, "plumbing", (|| {
            let mut worst: f64 = 0.0;
            let h = 1e-6;
            for z in pts.iter().take(5) {
                for j in 1..=n {
                    let g = grad_F(z, j)?.to_flat();
                    for k in 0..2 * n {
                        let mut e = vec![0.0; 2 * n];
                        e[k] = h;
                        let fp = integrals(&z.displaced(&e, 1.0)?)[j - 1];
                        let fm = integrals(&z.displaced(&e, -1.0)?)[j - 1];
                        worst = worst.max((g[k] - (fp - fm) / (2.0 * h)).abs());
                    }
                }
            }
            Ok(CheckRecord::residual(&id, "plumbing", worst, 1e-7))
        })())
    }));
    for j in [2usize, 3] {
        if j > n {
            continue;
        }
        out.push(timed(cfg, || {
            let id = format!("dynamics.isospectral_f{j}.n{n}");
            or_error(&id, REF_FLOW, (|| {
                let mut c = vec![0.0; n];
                c[j - 1] = 1.0;
                let opts = FlowOptions::with_rtol(cfg.tolerances.ode_rtol);
                let tr = integrate_flow(&pts[0], &c, &uniform_times(cfg.t_final, 200), &opts)?;
                let drift = spectral_drift(&tr)?;
                Ok(CheckRecord::residual(&id, REF_FLOW, drift, 1e-8))
            })())
        }));
    }
    out
}

fn singularity_checks(
    cfg: &RunConfig,
    n: usize,
    pts: &[PhasePoint],
    found: &[(PairId, Result<SingularPoint>)],
) -> Vec<CheckRecord> {
    let tol = &cfg.tolerances;
    let mut out = Vec::new();
    out.push(timed(cfg, || {
        let id = format!("singularity.corank_omega.n{n}");
        or_error(&id, REF_CORANK, (|| {
            let r = corank(&PhasePoint::omega(n, 0.0, 0.0)?, tol.rank, tol.degeneracy)?;
            let ok = r.corank == n - 1 && r.nu == (n - 1) / 2 && r.nubar == n / 2;
            let rec = CheckRecord::boolean(&id, REF_CORANK, ok, usize::from(!ok)).with_detail(format!(
                "corank {}, nu {}, nubar {}",
                r.corank, r.nu, r.nubar
            ));
            Ok(if r.inconclusive { rec.with_status(Status::Inconclusive) } else { rec })
        })())
    }));
    out.push(timed(cfg, || {
        let id = format!("singularity.corank_random.n{n}");
        or_error(&id, REF_CORANK, (|| {
            let (mut bad, mut undecided) = (0, 0);
            for z in pts {
                let r = corank(z, tol.rank, tol.degeneracy)?;
                match r.theorem_holds() {
                    None => undecided += 1,
                    Some(ok) => bad += usize::from(!ok || r.corank != 0),
                }
            }
            let rec = CheckRecord::boolean(&id, REF_CORANK, bad == 0, bad)
                .with_detail(format!("{undecided} of {} points undecided", pts.len()));
            Ok(if bad == 0 && undecided > 0 { rec.with_status(Status::Inconclusive) } else { rec })
        })())
    }));
    out.push(timed(cfg, || {
        let id = format!("singularity.brackets_omega.n{n}");
        or_error(&id, REF_BRACKETS, (|| {
            let sp = SingularPoint::from_omega(n, 0.0, 0.0)?;
            let r = bracket_relations_check(&sp, tol.bracket)?;
            let residual = r
                .normalized_ratios
                .iter()
                .map(|x| (x - 1.0).abs())
                .fold(r.zero_residual, f64::max);
            Ok(CheckRecord::residual(&id, REF_BRACKETS, residual, tol.bracket)
                .with_status(if r.passed { Status::Pass } else { Status::Fail }))
        })())
    }));
    for (pair, sp) in found {
        let sp = match sp {
            Ok(sp) => sp,
            Err(e) => {
                out.push(CheckRecord::error(format!("singularity.find.{pair}.n{n}"), REF_CORANK, e));
                continue;
            }
        };
        out.push(timed(cfg, || {
            let id = format!("singularity.find.{pair}.n{n}");
            or_error(&id, REF_CORANK, (|| {
                let r = corank(&sp.z, tol.rank, tol.degeneracy)?;
                let ok = r.corank == 1 && r.theorem_holds() == Some(true);
                let rec = CheckRecord::boolean(&id, REF_CORANK, ok, usize::from(!ok))
                    .with_detail(format!("corank {} after {} iterations", r.corank, sp.iterations));
                Ok(if r.inconclusive { rec.with_status(Status::Inconclusive) } else { rec })
            })())
        }));
        out.push(timed(cfg, || {
            let id = format!("singularity.hessian.{pair}.n{n}");
            or_error(&id, REF_HESSIAN, (|| {
                let h = hessian_structure_check(sp, *pair, 1e-6)?;
                Ok(CheckRecord::residual(&id, REF_HESSIAN, h.dyad_residual.max(h.omega_relative_error), 1e-6)
                    .with_status(if h.passed { Status::Pass } else { Status::Fail })
                    .with_detail(format!("omega {:.6}, Tr K^2 {:.6}", h.omega_formula, h.trace_k2)))
            })())
        }));
        out.push(timed(cfg, || {
            let id = format!("singularity.brackets.{pair}.n{n}");
            or_error(&id, REF_BRACKETS, (|| {
                let r = bracket_relations_check(sp, tol.bracket)?;
                let residual = r
                    .normalized_ratios
                    .iter()
                    .map(|x| (x - 1.0).abs())
                    .fold(r.zero_residual, f64::max);
                Ok(CheckRecord::residual(&id, REF_BRACKETS, residual, tol.bracket)
                    .with_status(if r.passed { Status::Pass } else { Status::Fail }))
            })())
        }));
        out.push(timed(cfg, || {
            let id = format!("singularity.symplectic.{pair}.n{n}");
            or_error(&id, REF_SYMPLECTIC, (|| {
                let s = tangent_symplectic_check(sp)?;
                Ok(CheckRecord::boolean(&id, REF_SYMPLECTIC, s > 1e-6, usize::from(s <= 1e-6))
                    .with_detail(format!("smallest singular value {s:.3e}")))
            })())
        }));
        if n >= 3 {
            out.push(timed(cfg, || {
                let id = format!("singularity.null_vector.{pair}.n{n}");
                or_error(&id, REF_NULL, (|| {
                    if corank(&sp.z, tol.rank, tol.degeneracy)?.inconclusive {
                        return Ok(CheckRecord::residual(&id, REF_NULL, f64::NAN, 1e-6)
                            .with_status(Status::Inconclusive)
                            .with_detail("rank undecided at this tolerance"));
                    }
                    let angle = null_vector_alignment(sp, *pair, tol.rank)?;
                    Ok(CheckRecord::residual(&id, REF_NULL, angle, 1e-6))
                })())
            }));
        }
    }
    out
}

fn calibration_check(cfg: &RunConfig) -> Result<CheckRecord> {
    let r = harmonic_oscillator_maslov(2, 0, 1.0, cfg.loop_samples)?;
    Ok(CheckRecord::boolean("maslov.calibration", REF_CALIBRATION, r.mu == 2, usize::from(r.mu != 2))
        .with_detail(format!("mu {}", r.mu)))
}

/// Small circle in the `(q_0, p_0)` plane around a regular point.
pub fn regular_loop(z: &PhasePoint, radius: f64, samples: usize) -> ClosedCurve {
    let z = z.clone();
    ClosedCurve::parametric(
        move |t| {
            let mut q = z.q().to_vec();
            let mut p = z.p().to_vec();
            q[0] += radius * (TAU * t).cos();
            p[0] += radius * (TAU * t).sin();
            PhasePoint::new(q, p)
        },
        samples,
    )
}

/// Loop of radius `rho` around the line of relative equilibria for `n = 2`,
/// in the plane of `q_1 - q_2` and `p_1 - p_2`.
pub fn equilibrium_line_loop(rho: f64, samples: usize) -> ClosedCurve {
    ClosedCurve::parametric(
        move |t| {
            let (c, s) = ((TAU * t).cos(), (TAU * t).sin());
            PhasePoint::new(vec![rho * c / 2.0, -rho * c / 2.0], vec![rho * s / 2.0, -rho * s / 2.0])
        },
        samples,
    )
}

fn maslov_checks(
    cfg: &RunConfig,
    n: usize,
    pts: &[PhasePoint],
    found: &[(PairId, Result<SingularPoint>)],
) -> Vec<CheckRecord> {
    let samples = cfg.loop_samples;
    let mut out = Vec::new();
    out.push(timed(cfg, || {
        let id = format!("maslov.regular_loop.n{n}");
        or_error(&id, REF_HOLONOMY, (|| {
            let curve = regular_loop(&pts[0], 0.05, samples);
            let rep = check_holonomy_theorem(&curve)?;
            let trivial = rep.maslov.mu == 0
                && rep.holonomy.gamma.iter().chain(&rep.holonomy.gammabar).all(|&s| s == 1);
            let ok = rep.passed && trivial;
            Ok(CheckRecord::boolean(&id, REF_HOLONOMY, ok, usize::from(!ok))
                .with_detail(format!("mu {}", rep.maslov.mu)))
        })())
    }));
    if n == 2 {
        out.push(timed(cfg, || {
            let id = "maslov.equilibrium_line_loop.n2".to_string();
            or_error(&id, REF_HOLONOMY, (|| {
                let rep = check_holonomy_theorem(&equilibrium_line_loop(0.1, samples))?;
                let ok = rep.passed
                    && rep.holonomy.gamma == [1, 1]
                    && rep.holonomy.gammabar == [-1, -1]
                    && rep.maslov.mu.abs() == 2
                    && rep.lhs == -1;
                Ok(CheckRecord::boolean(&id, REF_HOLONOMY, ok, usize::from(!ok)).with_detail(format!(
                    "mu {}, gamma {:?}, gammabar {:?}",
                    rep.maslov.mu, rep.holonomy.gamma, rep.holonomy.gammabar
                )))
            })())
        }));
        return out;
    }
    for (pair, sp) in found {
        let Ok(sp) = sp else { continue };
        out.push(timed(cfg, || {
            let id = format!("maslov.circle.{pair}.n{n}");
            or_error(&id, REF_HOLONOMY, (|| {
                let curve = ClosedCurve::circle(sp, *pair, LOOP_RADIUS, samples)?;
                let rep = check_holonomy_theorem(&curve)?;
                let fine = ClosedCurve::circle(sp, *pair, LOOP_RADIUS, 2 * samples)?;
                let stable = maslov_index(&fine)?.mu == rep.maslov.mu && transport_eigenvectors(&fine)? == rep.holonomy;
                let ok = rep.passed && rep.lhs == -1 && stable;
                Ok(CheckRecord::boolean(&id, REF_HOLONOMY, ok, usize::from(!ok))
                    .with_detail(format!("mu {}, refinement stable {stable}", rep.maslov.mu)))
            })())
        }));
        out.push(timed(cfg, || {
            let id = format!("maslov.enclosure.{pair}.n{n}");
            or_error(&id, REF_ENCLOSURE, (|| {
                let disk = DiskPatch::around(sp, *pair, LOOP_RADIUS)?;
                let a = enclosure_count_check(&disk, samples)?;
                let b = enclosure_count_check(&disk.reversed(), samples)?;
                let ok = a.passed && b.passed && a.mu == -b.mu && a.mu.abs() == 2;
                Ok(CheckRecord::boolean(&id, REF_ENCLOSURE, ok, usize::from(!ok))
                    .with_detail(format!("mu {} (reversed {}), predicted {}", a.mu, b.mu, a.predicted)))
            })())
        }));
    }
    if n == 3 {
        if let Some((pair, Ok(sp))) = found.first() {
            out.push(timed(cfg, || {
                let id = "maslov.two_point_disk.n3".to_string();
                or_error(&id, REF_ENCLOSURE, (|| {
                    let disk = DiskPatch::two_point(sp, *pair, LOOP_RADIUS, 0.5, LOOP_RADIUS)?;
                    let r = enclosure_count_check(&disk, samples)?;
                    let ok = r.passed && r.points.len() == 2 && r.mu.abs() == 4;
                    Ok(CheckRecord::boolean(&id, REF_ENCLOSURE, ok, usize::from(!ok))
                        .with_detail(format!("mu {}, predicted {}", r.mu, r.predicted)))
                })())
            }));
        }
    }
    out
}

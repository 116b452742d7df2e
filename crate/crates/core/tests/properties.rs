mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::TAU;

use toda_lax::dynamics::{
    grad_F, integrate_flow, involution_matrix, lax_residual, spectral_drift, uniform_times, FlowOptions,
};
use toda_lax::lax::{build_generator, build_lax, difference_powers_singular_values, integrals};
use toda_lax::maslov::{check_holonomy_theorem, maslov_index, transport_eigenvectors, ClosedCurve};
use toda_lax::singularity::{corank, perturb_pairs, DEFAULT_RANK_TOL};
use toda_lax::spectral::{decompose, decompose_lax, pairs_obey_parity, DEFAULT_DEGENERACY_TOL};
use toda_lax::{LaxClass, LaxMatrix, PairId, PhasePoint, SignVector};

fn point(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = PhasePoint> {
    n.prop_flat_map(|n| {
        (prop::collection::vec(-1.5..1.5f64, n), prop::collection::vec(-1.5..1.5f64, n))
            .prop_map(|(q, p)| PhasePoint::new(q, p).unwrap())
    })
}

fn point_and_signs(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (PhasePoint, SignVector, SignVector)> {
    point(n).prop_flat_map(|z| {
        let n = z.n();
        let signs = || prop::collection::vec(prop::bool::ANY, n).prop_map(|b| {
            SignVector::new(b.into_iter().map(|x| if x { -1 } else { 1 }).collect()).unwrap()
        });
        (Just(z), signs(), signs())
    })
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    decompose(m, 0.0).unwrap().values
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lax_is_symmetric_periodic_tridiagonal((z, eps, _) in point_and_signs(2..=7)) {
        let l = build_lax(&z, &eps).unwrap();
        let a = l.entries();
        let n = z.n();
        for r in 0..n {
            for s in 0..n {
                prop_assert_eq!(a[(r, s)], a[(s, r)]);
                let d = (s + n - r) % n;
                if d > 1 && d < n - 1 {
                    prop_assert_eq!(a[(r, s)], 0.0);
                }
            }
        }
    }

    #[test]
    fn generators_are_antisymmetric(z in point(2..=7), j in 1usize..=7) {
        let n = z.n();
        let j = 1 + (j - 1) % n;
        for class in [LaxClass::Even, LaxClass::Odd] {
            let m = build_generator(&z, j, class).unwrap();
            let m = m.entries();
            prop_assert_eq!(m.transpose(), -m);
            if j == 1 {
                prop_assert_eq!(m.amax(), 0.0);
            }
        }
    }

    #[test]
    fn equal_parity_sign_vectors_are_isospectral((z, eps, sigma) in point_and_signs(2..=7)) {
        let a = sorted_eigs(build_lax(&z, &eps).unwrap().entries());
        let b = sorted_eigs(build_lax(&z, &sigma).unwrap().entries());
        if eps.parity() == sigma.parity() {
            let scale = a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn integrals_from_any_positive_parity_matrix((z, eps, _) in point_and_signs(2..=7)) {
        prop_assume!(eps.parity() == 1);
        let n = z.n();
        let l = build_lax(&z, &eps).unwrap();
        let mut power = DMatrix::<f64>::identity(n, n);
        for (j, f) in integrals(&z).iter().enumerate() {
            power = &power * l.entries();
            let g = power.trace() / (j + 1) as f64;
            prop_assert!((g - f).abs() < 1e-12 * f.abs().max(1.0));
        }
    }

    #[test]
    fn difference_powers_are_independent(z in point(3..=7)) {
        let sv = difference_powers_singular_values(&z);
        prop_assert!(*sv.last().unwrap() > 1e-8);
    }

    #[test]
    fn eigen_decomposition_bounds(entries in prop::collection::vec(-3.0..3.0f64, 36)) {
        let a = DMatrix::from_fn(6, 6, |r, c| entries[r.min(c) * 6 + r.max(c)]);
        let s = decompose(&a, 1e-8).unwrap();
        prop_assert!(s.eigen_residual(&a) < 1e-12);
        prop_assert!(s.orthonormality_error() < 1e-12);
    }

    #[test]
    fn pairs_follow_parity_and_count(n in 2usize..=6, q0 in -1.0..1.0f64, p0 in -1.0..1.0f64,
                                     sizes in prop::collection::vec(0.0..2e-2f64, 5)) {
        let base = PhasePoint::omega(n, q0, p0).unwrap();
        // open a random subset of pairs; sizes below 1e-3 stay closed
        let offsets: Vec<(PairId, f64, f64)> = PairId::all(n)
            .into_iter()
            .zip(&sizes)
            .filter(|(_, &s)| s > 1e-3)
            .map(|(p, &s)| (p, s, 0.5 * s))
            .collect();
        let z = perturb_pairs(&base, &offsets, DEFAULT_DEGENERACY_TOL).unwrap();
        let mut total = 0;
        for class in [LaxClass::Even, LaxClass::Odd] {
            let s = decompose_lax(&LaxMatrix::of_class(&z, class), DEFAULT_DEGENERACY_TOL).unwrap();
            prop_assert!(pairs_obey_parity(class, &s.degenerate_pairs));
            total += s.degeneracy_count();
        }
        prop_assert!(total <= n - 1);
        prop_assert_eq!(total == n - 1, offsets.is_empty());
        let r = corank(&z, DEFAULT_RANK_TOL, DEFAULT_DEGENERACY_TOL).unwrap();
        if let Some(ok) = r.theorem_holds() {
            prop_assert!(ok);
        }
    }

    #[test]
    fn integrals_commute_and_lax_equations_hold(z in point(2..=8)) {
        // F_n grows like ‖L‖^n, so bounds are taken relative to it
        let n = z.n();
        let norm = sorted_eigs(LaxMatrix::of_class(&z, LaxClass::Even).entries())
            .iter()
            .fold(1.0_f64, |m, x| m.max(x.abs()));
        let scale = norm.powi(2 * n as i32 - 1);
        prop_assert!(involution_matrix(&z).amax() < 1e-9 * scale.max(1.0));
        for j in 1..=n {
            let s = norm.powi(j as i32);
            prop_assert!(lax_residual(&z, j, LaxClass::Even).unwrap() < 1e-8 * s);
            prop_assert!(lax_residual(&z, j, LaxClass::Odd).unwrap() < 1e-8 * s);
        }
    }

    #[test]
    fn gradients_match_finite_differences(z in point(2..=8)) {
        let n = z.n();
        let h = 1e-6;
        for j in 1..=n {
            let g = grad_F(&z, j).unwrap().to_flat();
            let scale = g.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            for k in 0..2 * n {
                let mut e = vec![0.0; 2 * n];
                e[k] = h;
                let fd = (integrals(&z.displaced(&e, 1.0).unwrap())[j - 1]
                    - integrals(&z.displaced(&e, -1.0).unwrap())[j - 1]) / (2.0 * h);
                prop_assert!((g[k] - fd).abs() < 1e-7 * scale);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flows_are_isospectral(z in point(2..=5), c in prop::collection::vec(-1.0..1.0f64, 5)) {
        let c = c[..z.n()].to_vec();
        let tr = integrate_flow(&z, &c, &uniform_times(5.0, 25), &FlowOptions::default()).unwrap();
        prop_assert!(spectral_drift(&tr).unwrap() < 1e-8);
    }

    #[test]
    fn regular_loops_are_even_and_refinement_stable(z in point(2..=4), radius in 0.01..0.08f64,
                                                     shift in 0.0..1.0f64) {
        let n = z.n();
        let make = move |offset: f64| {
            let z = z.clone();
            ClosedCurve::parametric(move |t| {
                let a = TAU * (t + offset);
                let mut q = z.q().to_vec();
                let mut p = z.p().to_vec();
                q[0] += radius * a.cos();
                p[n - 1] += radius * a.sin();
                PhasePoint::new(q, p)
            }, 48)
        };
        let c = make(0.0);
        let rep = check_holonomy_theorem(&c).unwrap();
        prop_assert_eq!(rep.maslov.mu % 2, 0);
        prop_assert!(rep.passed);
        prop_assert_eq!(maslov_index(&c.refined(2)).unwrap().mu, rep.maslov.mu);
        prop_assert_eq!(maslov_index(&make(shift)).unwrap().mu, rep.maslov.mu);
        prop_assert_eq!(transport_eigenvectors(&c.refined(3)).unwrap(), rep.holonomy);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn loops_around_singular_points(k in 0usize..2, radius in 5e-4..3e-3f64, rot in 0.0..1.0f64) {
        use toda_lax::singularity::{find_singular, stratum_seed, FindOptions};
        let pair = PairId::at_position(k);
        let sp = find_singular(&stratum_seed(3, &[pair], 1e-2).unwrap(), &[pair], &FindOptions::default()).unwrap();
        let circle = ClosedCurve::circle(&sp, pair, radius, 64).unwrap();
        let start = circle.clone();
        let rotated = ClosedCurve::parametric(move |t| start.point((t + rot).fract()), 64);
        let rep = check_holonomy_theorem(&circle).unwrap();
        let h = &rep.holonomy;
        prop_assert_eq!(rep.maslov.mu.abs(), 2);
        prop_assert_eq!(h.even_product, rep.maslov.half_parity());
        prop_assert_eq!(h.odd_product, rep.maslov.half_parity());
        // zero-based: pairs of L start at odd positions, pairs of Lbar at even ones
        prop_assert_eq!(h.gamma[1], h.gamma[2]);
        prop_assert_eq!(h.gammabar[0], h.gammabar[1]);
        prop_assert_eq!(maslov_index(&rotated).unwrap().mu, rep.maslov.mu);
        prop_assert_eq!(maslov_index(&circle.reversed()).unwrap().mu, -rep.maslov.mu);
    }
}

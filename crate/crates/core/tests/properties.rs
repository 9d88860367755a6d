use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;

use sympdiss::bipotential::{minimal_symplectic_bipotential, separable_bipotential};
use sympdiss::convex::{symplectic_polar, ConjugateMethod};
use sympdiss::dynamics::{simulate, solve_gap, symplectic_gradient, Hamiltonian, SolverOptions};
use sympdiss::likelihood::{information_content, Likelihood};
use sympdiss::scenarios::build_scenario;
use sympdiss::{ConvexFunction, DualityKind, PhaseVector, SymplecticStructure};

fn pv(n: usize) -> impl Strategy<Value = PhaseVector> {
    prop::collection::vec(-2.0..2.0f64, 2 * n).prop_map(|v| PhaseVector::from_flat(&v).unwrap())
}

fn pair(n: usize) -> impl Strategy<Value = (PhaseVector, PhaseVector)> {
    (pv(n), pv(n))
}

fn triple(n: usize) -> impl Strategy<Value = (PhaseVector, PhaseVector, PhaseVector)> {
    (pv(n), pv(n), pv(n))
}

/// A few library functions of half-dimension `n` with closed-form conjugates.
fn library(n: usize) -> Vec<ConvexFunction> {
    let mut d = vec![0.5; 2 * n];
    d[0] = 2.0;
    let diag = PhaseVector::from_flat(&d).unwrap();
    let mut w = vec![1.0; 2 * n];
    w[n] = 0.5;
    let weights = PhaseVector::from_flat(&w).unwrap();
    vec![
        ConvexFunction::half_squared_norm(n),
        ConvexFunction::diagonal_quadratic(&diag).unwrap(),
        ConvexFunction::euclidean_norm(n),
        ConvexFunction::weighted_norm(weights.clone()).unwrap(),
        ConvexFunction::indicator_ball(n, 1.5).unwrap(),
        ConvexFunction::sum(vec![
            ConvexFunction::weighted_norm(weights).unwrap(),
            ConvexFunction::diagonal_quadratic(&diag).unwrap(),
        ])
        .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn omega_is_antisymmetric_and_represented_by_j((a, b) in pair(2)) {
        let s = SymplecticStructure::new(2).unwrap();
        let w = s.omega(&a, &b).unwrap();
        prop_assert_eq!(w, -s.omega(&b, &a).unwrap());
        prop_assert!((s.j_map(&a).unwrap().dot(&b) - w).abs() < 1e-14);
        prop_assert_eq!(s.omega(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn duality_values_are_bilinear((a, b, c) in triple(1), t in -3.0..3.0f64) {
        for kind in DualityKind::ALL {
            let s = SymplecticStructure::new(1).unwrap();
            let lhs = s.duality_eval(kind, &a.axpy(t, &c), &b).unwrap();
            let rhs = s.duality_eval(kind, &a, &b).unwrap() + t * s.duality_eval(kind, &c, &b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn fenchel_young_symplectic((z, zp) in pair(1)) {
        let s = SymplecticStructure::new(1).unwrap();
        for f in library(1) {
            let fz = f.evaluate(&z).unwrap();
            let polar = symplectic_polar(&s, &f, &zp, &ConjugateMethod::ClosedForm).unwrap();
            if let (Some(fz), Some(p)) = (fz.finite(), polar.finite()) {
                prop_assert!(fz + p >= s.omega(&zp, &z).unwrap() - 1e-9, "{}", f.name());
            }
        }
    }

    #[test]
    fn polar_reduces_to_conjugate_through_j(zp in pv(2)) {
        let s = SymplecticStructure::new(2).unwrap();
        for f in library(2) {
            // functions without a closed-form conjugate are covered by the numeric routes
            let Ok(a) = symplectic_polar(&s, &f, &zp, &ConjugateMethod::ClosedForm) else { continue };
            let b = f.conjugate(&s.j_map(&zp).unwrap()).unwrap();
            match (a.finite(), b.finite()) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-10),
                (None, None) => {}
                _ => prop_assert!(false, "domain mismatch for {}", f.name()),
            }
        }
    }

    #[test]
    fn prox_is_optimal((x, d) in pair(1), gamma in 0.05..3.0f64) {
        for f in library(1) {
            let p = f.prox(&x, gamma).unwrap();
            let obj = |v: &PhaseVector| {
                f.evaluate(v).unwrap().finite().map(|fv| fv + (v - &x).dot(&(v - &x)) / (2.0 * gamma))
            };
            let at_p = obj(&p).unwrap();
            for t in [1e-3, 1e-2, 1e-1] {
                if let Some(other) = obj(&p.axpy(t, &d)) {
                    prop_assert!(at_p <= other + 1e-10, "{}", f.name());
                }
            }
        }
    }

    #[test]
    fn bipotentials_dominate_omega((z, a, b) in triple(1)) {
        let s = SymplecticStructure::new(1).unwrap();
        prop_assert!(minimal_symplectic_bipotential(&s, &a, &b).unwrap() >= s.omega(&a, &b).unwrap());
        for f in library(1) {
            let bp = separable_bipotential(&s, f).unwrap();
            if let Some(v) = bp.eval(&z, &a, &b).unwrap().finite() {
                prop_assert!(v >= s.omega(&a, &b).unwrap() - 1e-9);
            }
        }
    }

    #[test]
    fn likelihood_values_and_information((z, a, b) in triple(1)) {
        let s = SymplecticStructure::new(1).unwrap();
        let sep = Likelihood::separable(&s, ConvexFunction::half_squared_norm(1)).unwrap();
        for l in [Likelihood::maximal(&s), sep] {
            let pi = l.pi(&z, &a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&pi));
            let info = information_content(&l, &z, &a, &b).unwrap();
            if pi > 1e-300 {
                prop_assert!((info.value() + pi.ln()).abs() <= 1e-9 * info.value().abs().max(1.0));
            }
        }
    }

    #[test]
    fn symplectic_gradient_pairs_with_omega((z, v) in pair(1), m in 0.2..3.0f64, k in 0.2..3.0f64) {
        let s = SymplecticStructure::new(1).unwrap();
        let h = Hamiltonian::oscillator(m, k).unwrap();
        let x = symplectic_gradient(&h, &z, 0.0).unwrap();
        let g = h.gradient(&z, 0.0).unwrap();
        prop_assert!((s.omega(&x, &v).unwrap() - g.dot(&v)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_hamiltonian_gradient_matches_differences(entries in prop::collection::vec(-1.0..1.0f64, 16), z in pv(2)) {
        let a = DMatrix::from_vec(4, 4, entries);
        let s = &a + a.transpose();
        let h = Hamiltonian::quadratic(s, PhaseVector::zeros(2), 0.0).unwrap();
        let g = h.gradient(&z, 0.0).unwrap();
        for i in 0..4 {
            let e = 1e-6;
            let mut zp = z.clone();
            zp.set(i, z.get(i) + e);
            let mut zm = z.clone();
            zm.set(i, z.get(i) - e);
            let fd = (h.value(&zp, 0.0).unwrap() - h.value(&zm, 0.0).unwrap()) / (2.0 * e);
            prop_assert!((fd - g.get(i)).abs() <= 1e-6f64.max(1e-4 * g.norm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accepted_steps_respect_the_residual_contract(z in pv(1), h in 1e-4..5e-2f64, idx in 0usize..5) {
        let names = sympdiss::scenarios::list_scenarios();
        let sc = build_scenario(names[idx], &BTreeMap::new()).unwrap();
        let opts = SolverOptions::default();
        let step = solve_gap(&sc.problem, &z, 0.0, h, &opts).unwrap();
        prop_assert!(step.residual >= -1e-8 && step.residual <= opts.residual_tol);
        // energy never increases across a step of an autonomous problem
        let h0 = sc.problem.hamiltonian().value(&z, 0.0).unwrap();
        let h1 = sc.problem.hamiltonian().value(&step.z_next, h).unwrap();
        prop_assert!(h1 <= h0 + 1e-12 * h0.abs().max(1.0));
    }

    #[test]
    fn trajectories_have_consistent_lengths(steps in 1usize..60, idx in 0usize..5) {
        let names = sympdiss::scenarios::list_scenarios();
        let sc = build_scenario(names[idx], &BTreeMap::new()).unwrap();
        let h = 1e-2;
        let traj = simulate(&sc.problem, &sc.default_z0, steps as f64 * h, h, &SolverOptions::default()).unwrap();
        prop_assert_eq!(traj.steps(), steps);
        prop_assert!(traj.check_consistency().is_ok());
    }
}

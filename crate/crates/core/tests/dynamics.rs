use std::collections::BTreeMap;

use sympdiss::bipotential::{in_contact_set, separable_bipotential};
use sympdiss::dynamics::{
    simulate, solve_gap, step_reversible, symplectic_gradient, DissipativeProblem, GapScheme, Hamiltonian,
    SolverOptions,
};
use sympdiss::reference::harmonic_solution;
use sympdiss::scenarios::{build_scenario, list_scenarios, Scenario};
use sympdiss::{ConvexFunction, PhaseVector, SymplecticStructure};

fn scenario(name: &str) -> Scenario {
    build_scenario(name, &BTreeMap::new()).unwrap()
}

#[test]
fn reversible_harmonic_energy_drift() {
    let sc = scenario("reversible_harmonic");
    let traj = simulate(&sc.problem, &sc.default_z0, 10.0, 1e-3, &SolverOptions::default()).unwrap();
    assert_eq!(traj.states.len(), 10_001);
    assert_eq!(traj.gaps.len(), 10_000);
    let h0 = traj.hamiltonian_values[0];
    let drift = traj.hamiltonian_values.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-6, "drift {drift:e}");
    let exact = harmonic_solution(1.0, 1.0, &sc.default_z0, 10.0);
    assert!((traj.final_state() - &exact).norm() < 1e-5);
    let max_gap = traj.gaps.iter().map(|g| g.norm_inf()).fold(0.0, f64::max);
    assert!(max_gap <= 1e-12, "gap {max_gap:e}");
}

#[test]
fn reversible_limit_matches_midpoint_per_step() {
    let s = SymplecticStructure::new(1).unwrap();
    let ham = Hamiltonian::custom(
        1,
        |z, _| 0.5 * z.p()[0].powi(2) - z.q()[0].cos(),
        |z, _| vec![z.q()[0].sin()],
        |z, _| vec![z.p()[0]],
    )
    .unwrap()
    .autonomous();
    let p = DissipativeProblem::new("pendulum", ham.clone(), separable_bipotential(&s, ConvexFunction::zero(1)).unwrap())
        .unwrap();
    let h = 1e-2;
    let traj = simulate(&p, &PhaseVector::scalar(1.0, 0.5), 2.0, h, &SolverOptions::default()).unwrap();
    for k in 0..traj.steps() {
        let rev = step_reversible(&ham, &traj.states[k], traj.times[k], h).unwrap();
        assert!((&rev - &traj.states[k + 1]).norm_inf() <= 1e-12, "step {k}");
    }
}

#[test]
fn viscous_matches_reference_and_decreases_energy() {
    let sc = scenario("viscous_oscillator");
    let traj = simulate(&sc.problem, &sc.default_z0, 10.0, 1e-3, &SolverOptions::default()).unwrap();
    let oracle = sc.oracle.as_ref().unwrap().solve(&sc.default_z0, 10.0).unwrap();
    let err = (traj.final_state() - &oracle.state).norm();
    assert!(err <= 5e-3, "end-state error {err:e}");
    for w in traj.hamiltonian_values.windows(2) {
        assert!(w[1] <= w[0] + 1e-10);
    }
}

#[test]
fn end_state_error_has_order_at_least_one() {
    let sc = scenario("viscous_oscillator");
    let oracle = sc.oracle.as_ref().unwrap().solve(&sc.default_z0, 10.0).unwrap();
    for scheme in [GapScheme::Implicit, GapScheme::FrozenPredictor] {
        let opts = SolverOptions::default().with_scheme(scheme);
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&h| {
                let traj = simulate(&sc.problem, &sc.default_z0, 10.0, h, &opts).unwrap();
                (traj.final_state() - &oracle.state).norm()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.7..=4.5).contains(&ratio), "{scheme:?}: ratio {ratio} from {errs:?}");
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let sc = scenario("dry_friction_oscillator");
    let opts = SolverOptions::default();
    let a = simulate(&sc.problem, &sc.default_z0, 3.0, 1e-3, &opts).unwrap();
    let b = simulate(&sc.problem, &sc.default_z0, 3.0, 1e-3, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.config_fingerprint, b.config_fingerprint);
    let c = simulate(&sc.problem, &sc.default_z0, 3.0, 2e-3, &opts).unwrap();
    assert_ne!(a.config_fingerprint, c.config_fingerprint);
}

#[test]
fn accepted_steps_lie_on_the_contact_set() {
    let opts = SolverOptions::default();
    for name in list_scenarios() {
        let sc = scenario(name);
        let traj = simulate(&sc.problem, &sc.default_z0, 10.0, 1e-2, &opts).unwrap();
        for k in (0..traj.steps()).step_by(25) {
            assert!(traj.step_residuals[k] >= -1e-8 && traj.step_residuals[k] <= opts.residual_tol);
            let inside = in_contact_set(
                sc.problem.bipotential(),
                &traj.states[k],
                &traj.gaps[k],
                &traj.rate(k),
                10.0 * opts.residual_tol,
            )
            .unwrap();
            assert!(inside, "{name} step {k}");
        }
    }
}

#[test]
fn dry_friction_sticks_under_large_yield() {
    let params = BTreeMap::from([("sigma_y".to_string(), 2.0)]);
    let sc = build_scenario("dry_friction_oscillator", &params).unwrap();
    let z0 = PhaseVector::scalar(0.1, 0.1);
    let traj = simulate(&sc.problem, &z0, 10.0, 1e-3, &SolverOptions::default()).unwrap();
    let oracle = sc.oracle.as_ref().unwrap().solve(&z0, 10.0).unwrap();
    assert!((traj.final_state() - &oracle.state).norm() < 1e-3);
    // Stuck for the last half of the run: the position is frozen and the
    // midpoint momentum vanishes (nodal momenta alternate in sign).
    let late = &traj.states[5000..];
    for w in late.windows(2) {
        assert!((w[1].q()[0] - w[0].q()[0]).abs() < 1e-12);
        assert!((w[1].p()[0] + w[0].p()[0]).abs() < 1e-12);
        assert!(w[0].p()[0].abs() < 1e-3);
    }
}

#[test]
fn forced_oscillator_flags_estimated_time_derivative() {
    let s = SymplecticStructure::new(1).unwrap();
    let forced = Hamiltonian::forced_oscillator(1.0, 1.0, 0.5, 1.3).unwrap();
    let v = forced.clone();
    let (gq, gp) = (forced.clone(), forced.clone());
    let custom = Hamiltonian::custom(
        1,
        move |z, t| v.value(z, t).unwrap(),
        move |z, t| gq.grad_q(z, t).unwrap(),
        move |z, t| gp.grad_p(z, t).unwrap(),
    )
    .unwrap();
    let phi = ConvexFunction::diagonal_quadratic(&PhaseVector::scalar(0.2, 0.0)).unwrap();
    let bp = separable_bipotential(&s, phi).unwrap();
    let exact = DissipativeProblem::new("forced", forced, bp.clone()).unwrap();
    let approx = DissipativeProblem::new("forced_fd", custom, bp).unwrap();
    let z0 = PhaseVector::scalar(0.5, 0.0);
    let a = simulate(&exact, &z0, 5.0, 1e-3, &SolverOptions::default()).unwrap();
    let b = simulate(&approx, &z0, 5.0, 1e-3, &SolverOptions::default()).unwrap();
    assert!(!a.dt_partial_estimated);
    assert!(b.dt_partial_estimated);
    assert!((a.final_state() - b.final_state()).norm() < 1e-12);
}

#[test]
fn symplectic_gradient_agrees_with_finite_differences() {
    let ham = Hamiltonian::forced_oscillator(2.0, 3.0, 0.4, 0.9).unwrap();
    let mut rng = sympdiss::sampling::rng(11);
    for _ in 0..100 {
        let z = sympdiss::sampling::uniform_box(&mut rng, 1, 2.0);
        let t = z.q()[0].abs() * 3.0;
        let x = symplectic_gradient(&ham, &z, t).unwrap();
        let e = 1e-6;
        let dq = (ham.value(&(&z + &PhaseVector::scalar(e, 0.0)), t).unwrap()
            - ham.value(&(&z - &PhaseVector::scalar(e, 0.0)), t).unwrap())
            / (2.0 * e);
        let dp = (ham.value(&(&z + &PhaseVector::scalar(0.0, e)), t).unwrap()
            - ham.value(&(&z - &PhaseVector::scalar(0.0, e)), t).unwrap())
            / (2.0 * e);
        let dt = (ham.value(&z, t + e).unwrap() - ham.value(&z, t - e).unwrap()) / (2.0 * e);
        let tol = |g: f64| 1e-6f64.max(1e-4 * g.abs());
        assert!((x.p()[0] + dq).abs() <= tol(dq));
        assert!((x.q()[0] - dp).abs() <= tol(dp));
        let dt_exact = ham.dt_partial(&z, t).unwrap();
        assert!((dt_exact - dt).abs() <= tol(dt));
    }
}

#[test]
fn solve_gap_contract_on_random_states() {
    let sc = scenario("viscoplastic_oscillator");
    let opts = SolverOptions::default();
    let mut rng = sympdiss::sampling::rng(5);
    for _ in 0..200 {
        let z = sympdiss::sampling::uniform_box(&mut rng, 1, 2.0);
        let step = solve_gap(&sc.problem, &z, 0.0, 1e-2, &opts).unwrap();
        assert!(step.residual >= -1e-8 && step.residual <= opts.residual_tol);
        assert!((&step.z_next - &z.axpy(1e-2, &step.rate)).norm_inf() < 1e-14);
    }
}

#[test]
fn simulate_rejects_bad_grids() {
    let sc = scenario("viscous_oscillator");
    let opts = SolverOptions::default();
    assert!(simulate(&sc.problem, &sc.default_z0, 0.0, 1e-3, &opts).is_err());
    assert!(simulate(&sc.problem, &sc.default_z0, 1.0, 2.0, &opts).is_err());
    assert!(simulate(&sc.problem, &PhaseVector::zeros(2), 1.0, 0.1, &opts).is_err());
}

//! Named one-degree-of-freedom problems.
//!
//! Dissipation is specified through a rate potential `R(zdot)` acting on the
//! velocity block. The bipotential is `R^{*w}(eta) + R(zdot)`, whose polar
//! part confines the gap to the momentum block and bounds or weights it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bipotential::{separable_bipotential, Bipotential, BipotentialReport};
use crate::checks::SamplePlan;
use crate::convex::{ConvexFunction, ExtendedReal, FEAS_TOL};
use crate::dynamics::{DissipativeProblem, Hamiltonian};
use crate::error::{Error, Result};
use crate::phase_space::{DualityKind, PhaseVector, SymplecticStructure};
use crate::reference::{
    damped_oscillator_reference, harmonic_solution, stick_slip_reference, ReferenceSolution,
};
use crate::sampling::uniform_box;

const NAMES: [&str; 5] = [
    "reversible_harmonic",
    "viscous_oscillator",
    "dry_friction_oscillator",
    "viscoplastic_oscillator",
    "nonseparable_friction",
];

/// The registered scenario names, in a fixed order.
pub fn list_scenarios() -> Vec<&'static str> {
    NAMES.to_vec()
}

/// Reference solution independent of the stepper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// Closed-form harmonic motion.
    Harmonic { m: f64, k: f64 },
    /// Adaptive Dormand-Prince on `m q'' + c q' + k q = 0`.
    DampedOscillator { m: f64, k: f64, c: f64 },
    /// Event-based stick-slip solution of `m q'' + mu q' + sigma Sign(q') + k q = 0`.
    StickSlip { m: f64, k: f64, sigma: f64, mu: f64 },
}

impl Oracle {
    pub fn solve(&self, z0: &PhaseVector, t_end: f64) -> Result<ReferenceSolution> {
        match *self {
            Oracle::Harmonic { m, k } => Ok(ReferenceSolution {
                state: harmonic_solution(m, k, z0, t_end),
                dissipation: 0.0,
            }),
            Oracle::DampedOscillator { m, k, c } => damped_oscillator_reference(m, k, c, z0, t_end),
            Oracle::StickSlip { m, k, sigma, mu } => stick_slip_reference(m, k, sigma, mu, z0, t_end),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub problem: DissipativeProblem,
    pub default_z0: PhaseVector,
    pub default_t: f64,
    pub default_h: f64,
    pub oracle: Option<Oracle>,
    /// Axiom report for the bipotential, from the check run at construction.
    pub validation: BipotentialReport,
}

/// Default parameters of a scenario.
pub fn scenario_defaults(name: &str) -> Result<BTreeMap<String, f64>> {
    let list: &[(&str, f64)] = match name {
        "reversible_harmonic" => &[("m", 1.0), ("k", 1.0)],
        "viscous_oscillator" => &[("m", 1.0), ("k", 1.0), ("c", 1.0)],
        "dry_friction_oscillator" => &[("m", 1.0), ("k", 1.0), ("sigma_y", 0.3)],
        "viscoplastic_oscillator" => &[("m", 1.0), ("k", 1.0), ("sigma_y", 0.3), ("mu", 0.5)],
        "nonseparable_friction" => &[
            ("m", 1.0),
            ("k", 1.0),
            ("sigma_y", 0.3),
            ("beta", 0.5),
            ("kappa", 0.5),
        ],
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(list.iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

fn positive(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = params[key];
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter {
            name: key.into(),
            value: v,
            reason: "must be positive and finite",
        });
    }
    Ok(v)
}

fn non_negative(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = params[key];
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter {
            name: key.into(),
            value: v,
            reason: "must be non-negative and finite",
        });
    }
    Ok(v)
}

fn velocity_weight(w: f64) -> PhaseVector {
    PhaseVector::scalar(w, 0.0)
}

/// Builds a scenario; `params` override the defaults and unknown keys are
/// rejected.
pub fn build_scenario(name: &str, params: &BTreeMap<String, f64>) -> Result<Scenario> {
    build_scenario_with_plan(name, params, &SamplePlan::quick())
}

/// As [`build_scenario`], validating the bipotential on `plan`.
pub fn build_scenario_with_plan(
    name: &str,
    overrides: &BTreeMap<String, f64>,
    plan: &SamplePlan,
) -> Result<Scenario> {
    let mut params = scenario_defaults(name)?;
    for (k, v) in overrides {
        match params.get_mut(k) {
            Some(slot) => *slot = *v,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "scenario `{name}` has no parameter `{k}`"
                )))
            }
        }
    }
    let s = SymplecticStructure::new(1)?;
    let m = positive(&params, "m")?;
    let k = positive(&params, "k")?;
    let ham = Hamiltonian::oscillator(m, k)?;
    let (bp, oracle) = match name {
        "reversible_harmonic" => (
            separable_bipotential(&s, ConvexFunction::zero(1))?,
            Some(Oracle::Harmonic { m, k }),
        ),
        "viscous_oscillator" => {
            let c = positive(&params, "c")?;
            let rate = ConvexFunction::diagonal_quadratic(&velocity_weight(c))?;
            (separable_bipotential(&s, rate)?, Some(Oracle::DampedOscillator { m, k, c }))
        }
        "dry_friction_oscillator" => {
            let sigma = positive(&params, "sigma_y")?;
            let rate = ConvexFunction::weighted_norm(velocity_weight(sigma))?;
            (
                separable_bipotential(&s, rate)?,
                Some(Oracle::StickSlip { m, k, sigma, mu: 0.0 }),
            )
        }
        "viscoplastic_oscillator" => {
            let sigma = positive(&params, "sigma_y")?;
            let mu = positive(&params, "mu")?;
            let rate = ConvexFunction::sum(vec![
                ConvexFunction::weighted_norm(velocity_weight(sigma))?,
                ConvexFunction::diagonal_quadratic(&velocity_weight(mu))?,
            ])?;
            (
                separable_bipotential(&s, rate)?,
                Some(Oracle::StickSlip { m, k, sigma, mu }),
            )
        }
        "nonseparable_friction" => {
            let sigma = positive(&params, "sigma_y")?;
            let beta = non_negative(&params, "beta")?;
            let kappa = non_negative(&params, "kappa")?;
            (nonseparable_friction(&s, sigma, beta, kappa), None)
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    let problem = DissipativeProblem::new(name, ham, bp)?;
    let validation = problem.validate(plan)?;
    Ok(Scenario {
        name: name.to_string(),
        params,
        problem,
        default_z0: PhaseVector::scalar(1.0, 0.0),
        default_t: 10.0,
        default_h: 1e-3,
        oracle,
        validation,
    })
}

/// Friction with a state-dependent yield level `sigma(z) = sigma_y (1 + beta |q|^2)`
/// and a coupling term that is not of the form `f(eta) + g(zdot)`:
///
/// `b = ind{eta_q = 0} + ind{|eta_p| <= sigma} + sigma |v| + kappa (|eta_p| |v| + <eta_p, v>)`
///
/// with `v` the velocity block of the rate. `b - w >= (sigma - |eta_p|) |v|`,
/// with equality exactly on the Coulomb contact set.
pub fn nonseparable_friction(s: &SymplecticStructure, sigma_y: f64, beta: f64, kappa: f64) -> Bipotential {
    let sigma_of = move |z: &PhaseVector| sigma_y * (1.0 + beta * z.q().iter().map(|x| x * x).sum::<f64>());
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    Bipotential::custom(s, "nonseparable_friction", DualityKind::Symplectic, move |z, eta, rate| {
        let sigma = sigma_of(z);
        let (ep, v) = (eta.p(), rate.q());
        let ne = norm(ep);
        if norm(eta.q()) > FEAS_TOL * (1.0 + norm(ep)) || ne > sigma * (1.0 + FEAS_TOL) + FEAS_TOL {
            return ExtendedReal::INFINITY;
        }
        let nv = norm(v);
        ExtendedReal::new(sigma * nv + kappa * (ne * nv + dot(ep, v))).unwrap_or(ExtendedReal::INFINITY)
    })
    .with_prox_second(move |z, eta, x, gamma| {
        let sigma = sigma_of(z);
        let ep = eta.p();
        let ne = norm(ep);
        // Shift by the linear term, then group soft-threshold.
        let shifted: Vec<f64> = x.q().iter().zip(ep).map(|(xq, e)| xq - gamma * kappa * e).collect();
        let thr = gamma * (sigma + kappa * ne);
        let ns = norm(&shifted);
        let scale = if ns > thr { 1.0 - thr / ns } else { 0.0 };
        let q: Vec<f64> = shifted.iter().map(|a| a * scale).collect();
        PhaseVector::new(q, x.p().to_vec()).expect("blocks of equal length")
    })
    .with_contact_sampler(move |z, rng| {
        use rand::Rng;
        let n = z.half_dim();
        let sigma = sigma_of(z);
        let rate = uniform_box(rng, n, 1.0);
        let mut eta = PhaseVector::zeros(n);
        if rng.random_bool(0.3) {
            let mut rate = rate;
            rate.q_mut().iter_mut().for_each(|x| *x = 0.0);
            let dir = uniform_box(rng, n, 1.0);
            let nd = norm(dir.p()).max(1e-300);
            let r = sigma * rng.random_range(0.0..1.0);
            eta.p_mut().iter_mut().zip(dir.p()).for_each(|(e, d)| *e = r * d / nd);
            return (eta, rate);
        }
        let nv = norm(rate.q()).max(1e-300);
        eta.p_mut().iter_mut().zip(rate.q()).for_each(|(e, v)| *e = -sigma * v / nv);
        (eta, rate)
    })
    .with_tempered(true)
}

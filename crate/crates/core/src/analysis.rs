//! Dissipation along trajectories, the energy balance, the dissipation
//! inequality and the comparison against perturbed curves.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{symplectic_gradient, DissipativeProblem, GapScheme, Trajectory};
use crate::error::{Error, Result};
use crate::phase_space::PhaseVector;
use crate::sampling::{rng, unit_direction};
use crate::serde_ext;

/// Summary of the balance checks on one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    #[serde(
        serialize_with = "serde_ext::serialize_f64_or_inf",
        deserialize_with = "serde_ext::deserialize_f64_or_inf"
    )]
    pub energy_balance_residual: f64,
    #[serde(
        serialize_with = "serde_ext::serialize_f64_or_inf",
        deserialize_with = "serde_ext::deserialize_f64_or_inf"
    )]
    pub dissipation_total: f64,
    /// `(step, defect)` for each step whose defect exceeds `dissipation_tol`.
    pub monotonicity_violations: Vec<(usize, f64)>,
    pub max_monotonicity_defect: f64,
    pub dissipation_tol: f64,
    #[serde(default, with = "serde_ext::vec_f64_or_inf")]
    pub sben_margins: Option<Vec<f64>>,
    #[serde(default)]
    pub sben_tol_margin: Option<f64>,
}

impl BalanceReport {
    pub fn dissipation_inequality_holds(&self) -> bool {
        self.monotonicity_violations.is_empty()
    }

    pub fn sben_min_margin(&self) -> Option<f64> {
        self.sben_margins
            .as_ref()
            .map(|m| m.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// `min_i m_i >= -tol_margin`; `None` when no comparison was run.
    pub fn sben_holds(&self) -> Option<bool> {
        let tol = self.sben_tol_margin.unwrap_or(DEFAULT_TOL_MARGIN);
        self.sben_min_margin().map(|m| m >= -tol)
    }
}

fn ensure_matches(traj: &Trajectory, p: &DissipativeProblem) -> Result<()> {
    traj.check_consistency()?;
    if traj.half_dim() != p.half_dim() {
        return Err(Error::GridMismatch(format!(
            "trajectory has half-dimension {}, problem {}",
            traj.half_dim(),
            p.half_dim()
        )));
    }
    Ok(())
}

/// `b(z_k, eta_k, zdot_k)` for each step, `+inf` off the domain.
pub fn dissipation_integrand(traj: &Trajectory, p: &DissipativeProblem) -> Result<Vec<f64>> {
    ensure_matches(traj, p)?;
    (0..traj.steps())
        .map(|k| {
            let b = p.bipotential().eval(&traj.states[k], &traj.gaps[k], &traj.rate(k))?;
            Ok(b.finite().unwrap_or(f64::INFINITY))
        })
        .collect()
}

/// Running dissipation at every node, starting from 0.
pub fn cumulative_dissipation(traj: &Trajectory, p: &DissipativeProblem) -> Result<Vec<f64>> {
    let b = dissipation_integrand(traj, p)?;
    let mut out = Vec::with_capacity(b.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for bk in b {
        acc += traj.h * bk;
        out.push(acc);
    }
    Ok(out)
}

/// Left-endpoint sum of `h b(z_k, eta_k, zdot_k)` over steps `k0..k1`.
pub fn dissipation_between(traj: &Trajectory, p: &DissipativeProblem, k0: usize, k1: usize) -> Result<f64> {
    if k0 > k1 || k1 > traj.steps() {
        return Err(Error::GridMismatch(format!(
            "step range {k0}..{k1} outside 0..{}",
            traj.steps()
        )));
    }
    let b = dissipation_integrand(traj, p)?;
    Ok(b[k0..k1].iter().map(|bk| traj.h * bk).sum())
}

/// Total dissipation over the trajectory.
pub fn dissipation(traj: &Trajectory, p: &DissipativeProblem) -> Result<f64> {
    dissipation_between(traj, p, 0, traj.steps())
}

fn dt_partials(traj: &Trajectory, p: &DissipativeProblem) -> Result<Vec<f64>> {
    (0..traj.steps())
        .map(|k| p.hamiltonian().dt_partial(&traj.states[k], traj.times[k]))
        .collect()
}

/// `max_k |H_k - H_0 - Q_k + Diss_k|` with `Q_k` the running integral of
/// `dH/dt`; both running sums use left endpoints.
pub fn energy_balance_residual(traj: &Trajectory, p: &DissipativeProblem) -> Result<f64> {
    let diss = cumulative_dissipation(traj, p)?;
    let dt = dt_partials(traj, p)?;
    let h0 = traj.hamiltonian_values[0];
    let mut q = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..=traj.steps() {
        if k > 0 {
            q += traj.h * dt[k - 1];
        }
        let d = (traj.hamiltonian_values[k] - h0 - q + diss[k]).abs();
        if !d.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Per-step defect `max(0, (H_{k+1} - H_k)/h - dH/dt(z_k, t_k))`, with
/// violations above `tol` recorded.
pub fn check_dissipation_inequality(traj: &Trajectory, p: &DissipativeProblem, tol: f64) -> Result<BalanceReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let dt = dt_partials(traj, p)?;
    let mut violations = Vec::new();
    let mut max_defect: f64 = 0.0;
    for k in 0..traj.steps() {
        let rate = (traj.hamiltonian_values[k + 1] - traj.hamiltonian_values[k]) / traj.h;
        let defect = (rate - dt[k]).max(0.0);
        max_defect = max_defect.max(defect);
        if defect > tol {
            violations.push((k, defect));
        }
    }
    Ok(BalanceReport {
        energy_balance_residual: energy_balance_residual(traj, p)?,
        dissipation_total: dissipation(traj, p)?,
        monotonicity_violations: violations,
        max_monotonicity_defect: max_defect,
        dissipation_tol: tol,
        sben_margins: None,
        sben_tol_margin: None,
    })
}

pub const DEFAULT_TOL_MARGIN: f64 = 1e-6;

type ProfileFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Time profile `beta(t)` of a perturbation on `[0, T]`, with `beta(0) = 0`.
#[derive(Clone, Default)]
pub enum BumpProfile {
    /// `(1 - ((t - c)/w)^2)^2` on `|t - c| < w`, random centre and width
    /// inside `(0, T)`.
    #[default]
    Bump,
    /// `sin^2(j pi t / T)` with random `j` in `1..=4`.
    Sine,
    /// Smoothstep `3 s^2 - 2 s^3`, `s = t/T`; moves the final state.
    Ramp,
    /// User profile `(t, T) -> beta`.
    Custom(Arc<ProfileFn>),
}

impl fmt::Debug for BumpProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BumpProfile::Bump => f.write_str("Bump"),
            BumpProfile::Sine => f.write_str("Sine"),
            BumpProfile::Ramp => f.write_str("Ramp"),
            BumpProfile::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Which blocks a perturbation moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Perturb momenta; positions are re-integrated so the gap keeps its
    /// position block. Keeps the gap inside the domain of bipotentials that
    /// confine it to the momentum block.
    #[default]
    Momentum,
    /// Perturb all coordinates independently.
    Free,
}

#[derive(Debug, Clone)]
pub struct PerturbationPlan {
    pub count: usize,
    pub amplitude: f64,
    pub seed: u64,
    pub profile: BumpProfile,
    pub mode: PerturbationMode,
    pub tol_margin: f64,
}

impl PerturbationPlan {
    pub fn new(count: usize, amplitude: f64, seed: u64) -> Self {
        Self {
            count,
            amplitude,
            seed,
            profile: BumpProfile::Bump,
            mode: PerturbationMode::Momentum,
            tol_margin: DEFAULT_TOL_MARGIN,
        }
    }

    pub fn with_profile(mut self, profile: BumpProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_mode(mut self, mode: PerturbationMode) -> Self {
        self.mode = mode;
        self
    }
}

/// A concrete time profile drawn from the plan.
fn draw_profile<R: Rng>(profile: &BumpProfile, rng: &mut R, t_end: f64) -> Arc<ProfileFn> {
    match profile {
        BumpProfile::Bump => {
            let c = rng.random_range(0.1..0.9) * t_end;
            // The support stays inside (0, T].
            let w = (rng.random_range(0.05..0.3) * t_end).min(c);
            Arc::new(move |t, _| {
                let s = (t - c) / w;
                if s.abs() < 1.0 {
                    (1.0 - s * s).powi(2)
                } else {
                    0.0
                }
            })
        }
        BumpProfile::Sine => {
            let j = rng.random_range(1..=4) as f64;
            Arc::new(move |t, tt| (j * std::f64::consts::PI * t / tt).sin().powi(2))
        }
        BumpProfile::Ramp => Arc::new(|t, tt| {
            let s = (t / tt).clamp(0.0, 1.0);
            s * s * (3.0 - 2.0 * s)
        }),
        BumpProfile::Custom(f) => f.clone(),
    }
}

/// The states of a curve perturbed from `traj`.
fn perturbed_states(
    traj: &Trajectory,
    p: &DissipativeProblem,
    beta: &ProfileFn,
    dir: &PhaseVector,
    mode: PerturbationMode,
) -> Result<Vec<PhaseVector>> {
    let t_end = *traj.times.last().expect("non-empty grid");
    let shift = |k: usize| dir.scale(beta(traj.times[k], t_end));
    let mut out: Vec<PhaseVector> = (0..=traj.steps()).map(|k| &traj.states[k] + &shift(k)).collect();
    if mode == PerturbationMode::Free {
        return Ok(out);
    }
    let n = p.half_dim();
    let h = traj.h;
    for k in 0..traj.steps() {
        let eta_q = traj.gaps[k].q().to_vec();
        let t = traj.times[k];
        let (head, tail) = out.split_at_mut(k + 1);
        let z = &head[k];
        let next = &mut tail[0];
        // q_{k+1} = q_k + h (X_q + eta_q); X depends on q_{k+1} through the midpoint.
        for _ in 0..60 {
            let x = match traj.scheme {
                GapScheme::Implicit => symplectic_gradient(p.hamiltonian(), &(z + &*next).scale(0.5), t + 0.5 * h)?,
                GapScheme::FrozenPredictor => p.discrete_field(z, next, t, h, traj.scheme)?,
            };
            let mut change: f64 = 0.0;
            for i in 0..n {
                let q = z.q()[i] + h * (x.q()[i] + eta_q[i]);
                change = change.max((q - next.q()[i]).abs());
                next.q_mut()[i] = q;
            }
            if change <= 1e-15 * (1.0 + next.norm_inf()) || traj.scheme == GapScheme::FrozenPredictor {
                break;
            }
        }
    }
    Ok(out)
}

/// `Diss(c') + H(c'(T), T)` for a curve on the trajectory's grid.
fn curve_value(traj: &Trajectory, p: &DissipativeProblem, states: &[PhaseVector]) -> Result<f64> {
    let h = traj.h;
    let mut diss = 0.0;
    for k in 0..traj.steps() {
        let rate = (&states[k + 1] - &states[k]).scale(1.0 / h);
        let x = p.discrete_field(&states[k], &states[k + 1], traj.times[k], h, traj.scheme)?;
        let eta = &rate - &x;
        match p.bipotential().eval(&states[k], &eta, &rate)?.finite() {
            Some(b) => diss += h * b,
            None => return Ok(f64::INFINITY),
        }
    }
    let t_end = *traj.times.last().expect("non-empty grid");
    Ok(diss + p.hamiltonian().value(states.last().expect("non-empty"), t_end)?)
}

/// Margins `[Diss(c') + H(c'(T))] - [Diss(c) + H(c(T))]` over the plan's
/// perturbations `c' = c + a d beta(t)`, all with `c'(0) = c(0)`.
pub fn sben_compare(traj: &Trajectory, p: &DissipativeProblem, plan: &PerturbationPlan) -> Result<BalanceReport> {
    ensure_matches(traj, p)?;
    if !(plan.amplitude >= 0.0) || !plan.amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {}", plan.amplitude)));
    }
    let t_end = *traj.times.last().expect("non-empty grid");
    let base = dissipation(traj, p)? + traj.hamiltonian_values[traj.steps()];
    let n = p.half_dim();
    let mut r = rng(plan.seed);
    let mut margins = Vec::with_capacity(plan.count);
    for _ in 0..plan.count {
        let beta = draw_profile(&plan.profile, &mut r, t_end);
        let b0 = beta(0.0, t_end);
        if b0.abs() * plan.amplitude > 0.0 || !b0.is_finite() {
            return Err(Error::InitialConditionViolated(b0.abs() * plan.amplitude.max(1.0)));
        }
        let mut dir = unit_direction(&mut r, n);
        if plan.mode == PerturbationMode::Momentum {
            dir.q_mut().iter_mut().for_each(|x| *x = 0.0);
            let norm = dir.norm();
            dir = if norm > 0.0 { dir.scale(1.0 / norm) } else { PhaseVector::basis(n, n) };
        }
        let dir = dir.scale(plan.amplitude);
        let states = perturbed_states(traj, p, &*beta, &dir, plan.mode)?;
        let gap = (&states[0] - &traj.states[0]).norm_inf();
        if gap > 0.0 {
            return Err(Error::InitialConditionViolated(gap));
        }
        let value = curve_value(traj, p, &states)?;
        margins.push(if value.is_finite() { value - base } else { f64::INFINITY });
    }
    let mut report = check_dissipation_inequality(traj, p, 1e-6)?;
    report.sben_margins = Some(margins);
    report.sben_tol_margin = Some(plan.tol_margin);
    Ok(report)
}

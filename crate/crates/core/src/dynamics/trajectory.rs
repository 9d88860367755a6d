use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::stepper::{DissipativeProblem, GapScheme, SolverOptions};
use crate::error::{Error, Result};
use crate::phase_space::PhaseVector;

/// A discrete solution on the grid `t_k = k h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseVector>,
    /// One gap per step.
    pub gaps: Vec<PhaseVector>,
    pub step_residuals: Vec<f64>,
    pub hamiltonian_values: Vec<f64>,
    pub config_fingerprint: String,
    pub h: f64,
    pub scheme: GapScheme,
    /// `dH/dt` was estimated by finite differences.
    pub dt_partial_estimated: bool,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.gaps.len()
    }

    pub fn half_dim(&self) -> usize {
        self.states[0].half_dim()
    }

    /// Forward difference over step `k`.
    pub fn rate(&self, k: usize) -> PhaseVector {
        (&self.states[k + 1] - &self.states[k]).scale(1.0 / self.h)
    }

    pub fn final_state(&self) -> &PhaseVector {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Length and finiteness consistency.
    pub fn check_consistency(&self) -> Result<()> {
        let n = self.steps();
        if self.states.len() != n + 1
            || self.times.len() != n + 1
            || self.hamiltonian_values.len() != n + 1
            || self.step_residuals.len() != n
        {
            return Err(Error::GridMismatch(format!(
                "{} states, {} times, {} energies for {n} steps with {} residuals",
                self.states.len(),
                self.times.len(),
                self.hamiltonian_values.len(),
                self.step_residuals.len()
            )));
        }
        if !(self.h > 0.0) {
            return Err(Error::GridMismatch(format!("step {} must be > 0", self.h)));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("times are not increasing".into()));
        }
        Ok(())
    }
}

/// Trajectory computed up to the first failure, if any.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub trajectory: Trajectory,
    /// `Error::Step` for the first step that could not be accepted.
    pub failure: Option<Error>,
}

/// SHA-256 over everything that determines a run.
pub fn fingerprint(problem: &DissipativeProblem, z0: &PhaseVector, t_end: f64, h: f64, opts: &SolverOptions) -> String {
    let mut hasher = Sha256::new();
    hasher.update(problem.name().as_bytes());
    hasher.update(problem.bipotential().name().as_bytes());
    hasher.update(format!("{:?}", problem.hamiltonian().descriptor()).as_bytes());
    for x in z0.to_flat() {
        hasher.update(x.to_le_bytes());
    }
    hasher.update(t_end.to_le_bytes());
    hasher.update(h.to_le_bytes());
    hasher.update(format!("{opts:?}").as_bytes());
    hex(&hasher.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Like [`simulate`], but keeps the steps computed before a failure.
pub fn simulate_partial(
    problem: &DissipativeProblem,
    z0: &PhaseVector,
    t_end: f64,
    h: f64,
    opts: &SolverOptions,
) -> Result<SimulationOutcome> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("final time must be > 0, got {t_end}")));
    }
    if !(h > 0.0 && h <= t_end) {
        return Err(Error::InvalidArgument(format!("need 0 < h <= T, got h={h}, T={t_end}")));
    }
    z0.ensure_dim(problem.half_dim())?;
    z0.ensure_finite("initial state")?;
    let steps = (t_end / h).round() as usize;
    let ham = problem.hamiltonian();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![z0.clone()],
        gaps: Vec::with_capacity(steps),
        step_residuals: Vec::with_capacity(steps),
        hamiltonian_values: vec![ham.value(z0, 0.0)?],
        config_fingerprint: fingerprint(problem, z0, t_end, h, opts),
        h,
        scheme: opts.scheme,
        dt_partial_estimated: ham.dt_is_estimated(),
    };
    let mut warm: Option<PhaseVector> = None;
    for k in 0..steps {
        let t = k as f64 * h;
        let z = &traj.states[k];
        match problem.step_from(z, t, h, opts, warm.as_ref()) {
            Ok(step) => {
                let t_next = (k + 1) as f64 * h;
                traj.hamiltonian_values.push(ham.value(&step.z_next, t_next)?);
                traj.times.push(t_next);
                traj.states.push(step.z_next);
                traj.gaps.push(step.eta);
                traj.step_residuals.push(step.residual);
                warm = Some(step.rate);
            }
            Err(e) => {
                return Ok(SimulationOutcome {
                    trajectory: traj,
                    failure: Some(Error::Step {
                        step: k,
                        source: Box::new(e),
                    }),
                })
            }
        }
    }
    Ok(SimulationOutcome {
        trajectory: traj,
        failure: None,
    })
}

/// `round(T / h)` steps of the gap solver from `z0`.
pub fn simulate(
    problem: &DissipativeProblem,
    z0: &PhaseVector,
    t_end: f64,
    h: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let out = simulate_partial(problem, z0, t_end, h, opts)?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(out.trajectory),
    }
}

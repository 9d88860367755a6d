use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{fd_jacobian, reversible_rate, symplectic_gradient, Hamiltonian};
use crate::bipotential::{check_bipotential_axioms, Bipotential, BipotentialReport};
use crate::checks::SamplePlan;
use crate::error::{Error, Result};
use crate::phase_space::{j_apply, omega_unchecked, DualityKind, PhaseVector, SymplecticStructure};
use crate::sampling::{rng, uniform_box};

/// Residuals below `-NEGATIVE_TOL` mean `b < w` somewhere: not a bipotential.
pub const NEGATIVE_TOL: f64 = 1e-8;

const RESTART_SEED: u64 = 0x9e37_79b9;
const ATTEMPT_ITERATIONS: usize = 50;

/// How the Hamiltonian part of the rate is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GapScheme {
    /// `X_H` at the midpoint of the accepted step, solved jointly with the gap.
    #[default]
    Implicit,
    /// `X_H` frozen at the midpoint of the undamped implicit-midpoint predictor.
    FrozenPredictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Accept a step when `b - w <= residual_tol`.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Inner stopping rule on the fixed-point defect, relative to `max(1, |v|)`.
    pub newton_tol: f64,
    pub scheme: GapScheme,
    /// Step of the proximal fixed-point map.
    pub prox_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            max_iterations: 500,
            newton_tol: 1e-13,
            scheme: GapScheme::Implicit,
            prox_step: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn with_scheme(mut self, scheme: GapScheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || !(self.newton_tol > 0.0) || !(self.prox_step > 0.0) {
            return Err(Error::InvalidArgument(
                "solver tolerances and prox step must be > 0".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// A Hamiltonian with a symplectic bipotential governing the gap.
///
/// The bipotential is evaluated as `b(z, eta, zdot)`: gap in the first
/// slot, rate in the second. On the contact set `b = w(eta, zdot)`, so along
/// solutions `dH/dt - dH/dt|_explicit = -b <= 0`.
#[derive(Debug, Clone)]
pub struct DissipativeProblem {
    name: String,
    hamiltonian: Hamiltonian,
    bipotential: Bipotential,
    structure: SymplecticStructure,
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStep {
    pub z_next: PhaseVector,
    pub eta: PhaseVector,
    /// Forward difference `(z_next - z) / h`.
    pub rate: PhaseVector,
    /// `b(z, eta, rate) - w(eta, rate)`.
    pub residual: f64,
    pub iterations: usize,
}

struct NewtonResult {
    v: PhaseVector,
    iterations: usize,
    defect: f64,
    converged: bool,
}

impl DissipativeProblem {
    pub fn new(name: impl Into<String>, hamiltonian: Hamiltonian, bipotential: Bipotential) -> Result<Self> {
        let n = hamiltonian.half_dim();
        if bipotential.half_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bipotential.half_dim(),
            });
        }
        if bipotential.duality() != DualityKind::Symplectic {
            return Err(Error::InvalidArgument(format!(
                "dynamics needs a bipotential for the symplectic duality, got {:?}",
                bipotential.duality()
            )));
        }
        Ok(Self {
            name: name.into(),
            structure: *bipotential.structure(),
            hamiltonian,
            bipotential,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn bipotential(&self) -> &Bipotential {
        &self.bipotential
    }

    pub fn structure(&self) -> &SymplecticStructure {
        &self.structure
    }

    pub fn half_dim(&self) -> usize {
        self.structure.half_dim()
    }

    /// Same Hamiltonian, different bipotential.
    pub fn with_bipotential(&self, bipotential: Bipotential) -> Result<Self> {
        Self::new(self.name.clone(), self.hamiltonian.clone(), bipotential)
    }

    /// Runs the sampled bipotential axioms and samples `b >= 0`; errors
    /// when either fails.
    pub fn validate(&self, plan: &SamplePlan) -> Result<BipotentialReport> {
        let report = check_bipotential_axioms(&self.bipotential, plan)?;
        if !report.pass() {
            let w = report
                .axiom_a
                .witnesses
                .iter()
                .chain(&report.convexity.witnesses)
                .chain(&report.axiom_b.witnesses)
                .next()
                .map(|w| w.to_string())
                .unwrap_or_default();
            return Err(Error::NotBipotential(format!("{}: {w}", self.bipotential.name())));
        }
        let n = self.half_dim();
        let mut r = rng(plan.seed ^ 0x5eed);
        for _ in 0..plan.samples {
            let z = uniform_box(&mut r, n, plan.half_width);
            let a = uniform_box(&mut r, n, plan.half_width);
            let mut b = uniform_box(&mut r, n, plan.half_width);
            if r.random_bool(0.5) {
                b = b.scale(1e-3);
            }
            let v = self.bipotential.value(&z, &a, &b)?;
            if let Some(v) = v.finite() {
                if v < -plan.tol * (1.0 + a.norm() * b.norm()) {
                    return Err(Error::NotBipotential(format!(
                        "negative value {v:e} at z={:?}, gap={:?}, rate={:?}",
                        z.to_flat(),
                        a.to_flat(),
                        b.to_flat()
                    )));
                }
            }
        }
        Ok(report)
    }

    /// `b(z, eta, rate) - w(eta, rate)`, `+inf` off the domain.
    pub fn residual(&self, z: &PhaseVector, eta: &PhaseVector, rate: &PhaseVector) -> Result<f64> {
        let b = self.bipotential.eval(z, eta, rate)?;
        Ok(b.finite().map_or(f64::INFINITY, |b| b - omega_unchecked(eta, rate)))
    }

    /// The Hamiltonian part of the rate for the step `z -> z_next` taken from
    /// time `t` with step `h`.
    pub fn discrete_field(
        &self,
        z: &PhaseVector,
        z_next: &PhaseVector,
        t: f64,
        h: f64,
        scheme: GapScheme,
    ) -> Result<PhaseVector> {
        match scheme {
            GapScheme::Implicit => {
                symplectic_gradient(&self.hamiltonian, &(z + z_next).scale(0.5), t + 0.5 * h)
            }
            GapScheme::FrozenPredictor => reversible_rate(&self.hamiltonian, z, t, h),
        }
    }

    pub(crate) fn step_from(
        &self,
        z: &PhaseVector,
        t: f64,
        h: f64,
        opts: &SolverOptions,
        warm: Option<&PhaseVector>,
    ) -> Result<GapStep> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be > 0, got {h}")));
        }
        opts.validate()?;
        z.ensure_dim(self.half_dim())?;
        z.ensure_finite("state")?;
        let frozen = match opts.scheme {
            GapScheme::FrozenPredictor => Some(reversible_rate(&self.hamiltonian, z, t, h)?),
            GapScheme::Implicit => None,
        };
        let field = |v: &PhaseVector| -> Result<PhaseVector> {
            match &frozen {
                Some(x) => Ok(x.clone()),
                None => symplectic_gradient(&self.hamiltonian, &z.axpy(0.5 * h, v), t + 0.5 * h),
            }
        };
        let mut starts = Vec::with_capacity(3);
        if let Some(w) = warm {
            starts.push(w.clone());
        }
        starts.push(match &frozen {
            Some(x) => x.clone(),
            None => reversible_rate(&self.hamiltonian, z, t, h)?,
        });
        // Smaller prox steps shrink the dead zones of the proximal map, where
        // the generalised Jacobian loses rank; the fixed points are the same.
        let gammas = [opts.prox_step, opts.prox_step * 1e-3, opts.prox_step * 1e-6];
        let mut best: Option<NewtonResult> = None;
        let mut tried_extra = false;
        let mut i = 0;
        'starts: while i < starts.len() {
            for &gamma in &gammas {
                let Some(found) = self.newton(z, &field, starts[i].clone(), opts, gamma)? else {
                    break 'starts;
                };
                let done = found.converged;
                if best.as_ref().is_none_or(|b| !b.converged && found.defect < b.defect) || done {
                    best = Some(found);
                }
                if done {
                    break 'starts;
                }
            }
            if i + 1 == starts.len() && !tried_extra {
                tried_extra = true;
                // With a frozen field the implicit solution is a good guess
                // for the right piece.
                if frozen.is_some() {
                    let implicit = SolverOptions {
                        scheme: GapScheme::Implicit,
                        ..opts.clone()
                    };
                    if let Ok(step) = self.step_from(z, t, h, &implicit, warm) {
                        starts.push(step.rate);
                    }
                }
                // Seeded restarts around the best iterate, to leave a piece
                // where the Jacobian is rank deficient.
                let centre = best.as_ref().map_or_else(|| starts[0].clone(), |b| b.v.clone());
                let scale = centre.norm_inf().max(1.0);
                let mut r = rng(RESTART_SEED);
                for radius in [1.0, 0.1, 10.0] {
                    for _ in 0..4 {
                        let u = crate::sampling::unit_direction(&mut r, self.half_dim());
                        starts.push(centre.axpy(radius * scale, &u));
                    }
                }
            }
            i += 1;
        }
        let (v, iterations) = match best {
            Some(b) => (b.v, b.iterations),
            None => {
                let start = match &frozen {
                    Some(x) => x.clone(),
                    None => reversible_rate(&self.hamiltonian, z, t, h)?,
                };
                self.descend(z, &field, start, opts)?
            }
        };
        let z_next = z.axpy(h, &v);
        let rate = (&z_next - z).scale(1.0 / h);
        let eta = &rate - &field(&rate)?;
        let residual = self.residual(z, &eta, &rate)?;
        if residual < -NEGATIVE_TOL {
            return Err(Error::NotBipotentialAlongIterates(residual));
        }
        if !(residual <= opts.residual_tol) {
            return Err(Error::ResidualStalled { eta, residual });
        }
        Ok(GapStep {
            z_next,
            eta,
            rate,
            residual,
            iterations,
        })
    }

    /// Semismooth Newton on `G(v) = v - prox_{g b(z, eta(v), .)}(v + g J eta(v))`,
    /// whose zeros are exactly the rates with `J eta` in the subdifferential
    /// of `b(z, eta, .)`, i.e. the contact set. `None` when the bipotential
    /// has no proximal map.
    fn newton(
        &self,
        z: &PhaseVector,
        field: &dyn Fn(&PhaseVector) -> Result<PhaseVector>,
        v0: PhaseVector,
        opts: &SolverOptions,
        gamma: f64,
    ) -> Result<Option<NewtonResult>> {
        // Scaled by 1/gamma so the stopping rule does not depend on the step.
        let defect = |v: &PhaseVector| -> Result<Option<PhaseVector>> {
            let eta = v - &field(v)?;
            let x = v.axpy(gamma, &j_apply(&eta));
            Ok(self
                .bipotential
                .prox_second(z, &eta, &x, gamma)?
                .map(|p| (v - &p).scale(1.0 / gamma)))
        };
        let Some(mut g) = defect(&v0)? else {
            return Ok(None);
        };
        let mut g_of = |v: &PhaseVector| -> Result<PhaseVector> {
            defect(v)?.ok_or_else(|| Error::NoClosedForm("prox of the bipotential".into()))
        };
        let mut v = v0;
        let mut iterations = 0;
        let converged = |v: &PhaseVector, g: &PhaseVector| g.norm_inf() <= opts.newton_tol * v.norm_inf().max(1.0);
        // Semismooth Newton either converges in a handful of steps or is in a
        // bad piece; restarts are cheaper than long stalls.
        let budget = opts.max_iterations.min(ATTEMPT_ITERATIONS);
        while iterations < budget {
            if converged(&v, &g) {
                break;
            }
            iterations += 1;
            let norm = g.norm();
            let mut accepted = false;
            let jac = fd_jacobian(&mut g_of, &v, &g, 1e-7)?;
            let max_sv = jac.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
            let rhs = DVector::from_vec(g.to_flat());
            if let Ok(d) = jac.svd(true, true).solve(&rhs, 1e-13 * max_sv) {
                if d.iter().all(|x| x.is_finite()) {
                    let d = PhaseVector::from_flat(d.as_slice())?;
                    let mut alpha = 1.0;
                    while alpha > 1e-10 {
                        let trial = v.axpy(-alpha, &d);
                        let gt = g_of(&trial)?;
                        if gt.norm() <= (1.0 - 1e-4 * alpha) * norm {
                            v = trial;
                            g = gt;
                            accepted = true;
                            break;
                        }
                        alpha *= 0.5;
                    }
                }
            }
            if !accepted {
                // Plain proximal fixed-point step.
                let trial = v.axpy(-gamma, &g);
                let gt = g_of(&trial)?;
                if gt.norm() < norm {
                    v = trial;
                    g = gt;
                } else {
                    break;
                }
            }
        }
        Ok(Some(NewtonResult {
            converged: converged(&v, &g),
            defect: g.norm_inf(),
            v,
            iterations,
        }))
    }

    /// Derivative-free descent on the residual, for bipotentials without a
    /// proximal map. Starts from the undamped rate, where the gap is zero.
    fn descend(
        &self,
        z: &PhaseVector,
        field: &dyn Fn(&PhaseVector) -> Result<PhaseVector>,
        v0: PhaseVector,
        opts: &SolverOptions,
    ) -> Result<(PhaseVector, usize)> {
        let merit = |v: &PhaseVector| -> Result<f64> {
            let eta = v - &field(v)?;
            self.residual(z, &eta, v)
        };
        let m = 2 * self.half_dim();
        let mut v = v0;
        let mut best = merit(&v)?;
        let mut step = 0.1 * v.norm_inf().max(1.0);
        let target = 0.01 * opts.residual_tol;
        let mut iterations = 0;
        while iterations < opts.max_iterations * m && best > target && step > 1e-15 {
            iterations += 1;
            let mut improved = false;
            for i in 0..m {
                for s in [step, -step] {
                    let mut trial = v.clone();
                    trial.set(i, v.get(i) + s);
                    let val = merit(&trial)?;
                    if val < best {
                        best = val;
                        v = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok((v, iterations))
    }
}

/// One step of the gap system from `(z, t)`.
pub fn solve_gap(
    problem: &DissipativeProblem,
    z: &PhaseVector,
    t: f64,
    h: f64,
    opts: &SolverOptions,
) -> Result<GapStep> {
    problem.step_from(z, t, h, opts, None)
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sympdiss::analysis::{BumpProfile, PerturbationPlan, DEFAULT_TOL_MARGIN};
use sympdiss::dynamics::{hex, GapScheme, SolverOptions};
use sympdiss::scenarios::{build_scenario, Scenario};
use sympdiss::PhaseVector;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SbenProfile {
    #[default]
    Bump,
    Sine,
    Ramp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbenConfig {
    pub count: usize,
    pub amplitude: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub profile: SbenProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub energy_balance: bool,
    pub dissipation_inequality: bool,
    pub sben: Option<SbenConfig>,
    pub bipotential_axioms: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            energy_balance: true,
            dissipation_inequality: true,
            sben: None,
            bipotential_axioms: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Pass threshold for the energy balance residual.
    pub energy_balance: f64,
    /// Per-step monotonicity defect allowed by the dissipation inequality.
    pub dissipation: f64,
    pub sben_margin: f64,
    /// Largest accepted `b - w` at a step.
    pub step_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            energy_balance: 1e-3,
            dissipation: 1e-6,
            sben_margin: DEFAULT_TOL_MARGIN,
            step_residual: SolverOptions::default().residual_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One JSON document describing a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Flat `[q..., p...]`; the scenario default when absent.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
    #[serde(rename = "T", default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub scheme: GapScheme,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn for_scenario(name: &str) -> Self {
        Self {
            scenario: ScenarioConfig {
                name: name.to_string(),
                params: BTreeMap::new(),
            },
            z0: None,
            t_end: None,
            h: None,
            checks: Checks::default(),
            output: None,
            format: Format::Csv,
            scheme: GapScheme::Implicit,
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// `--seed` replaces the perturbation seed.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let (Some(seed), Some(sben)) = (seed, self.checks.sben.as_mut()) {
            sben.seed = Some(seed);
        }
    }

    /// Build the scenario and fill every optional field, checking invariants.
    pub fn resolve(&self) -> CliResult<ResolvedRun> {
        let scenario = build_scenario(&self.scenario.name, &self.scenario.params)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let n = scenario.problem.half_dim();
        let z0 = match &self.z0 {
            Some(v) => {
                if v.len() != 2 * n {
                    return Err(CliError::Config(format!("z0 needs {} entries, got {}", 2 * n, v.len())));
                }
                PhaseVector::from_flat(v).map_err(|e| CliError::Config(e.to_string()))?
            }
            None => scenario.default_z0.clone(),
        };
        if let Some(x) = z0.to_flat().iter().find(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("z0 entry {x} is not finite")));
        }
        let t_end = self.t_end.unwrap_or(scenario.default_t);
        let h = self.h.unwrap_or(scenario.default_h);
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(CliError::Config(format!("T must be > 0, got {t_end}")));
        }
        if !(h > 0.0 && h <= t_end) {
            return Err(CliError::Config(format!("need 0 < h <= T, got h={h}, T={t_end}")));
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("energy_balance", tol.energy_balance),
            ("dissipation", tol.dissipation),
            ("sben_margin", tol.sben_margin),
            ("step_residual", tol.step_residual),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance {name} must be > 0, got {v}")));
            }
        }
        let sben = match &self.checks.sben {
            None => None,
            Some(s) => {
                let seed = s
                    .seed
                    .ok_or_else(|| CliError::Config("sben check needs a seed (config or --seed)".into()))?;
                if s.count == 0 || !(s.amplitude > 0.0 && s.amplitude.is_finite()) {
                    return Err(CliError::Config(format!(
                        "sben needs count > 0 and amplitude > 0, got {} and {}",
                        s.count, s.amplitude
                    )));
                }
                let profile = match s.profile {
                    SbenProfile::Bump => BumpProfile::Bump,
                    SbenProfile::Sine => BumpProfile::Sine,
                    SbenProfile::Ramp => BumpProfile::Ramp,
                };
                let mut plan = PerturbationPlan::new(s.count, s.amplitude, seed).with_profile(profile);
                plan.tol_margin = tol.sben_margin;
                Some(plan)
            }
        };
        let solver = SolverOptions {
            residual_tol: tol.step_residual,
            ..SolverOptions::default()
        }
        .with_scheme(self.scheme);
        let mut canonical = self.clone();
        canonical.output = None;
        canonical.z0 = Some(z0.to_flat());
        canonical.t_end = Some(t_end);
        canonical.h = Some(h);
        canonical.scenario.params = scenario.params.clone();
        let fingerprint = config_fingerprint(&canonical)?;
        Ok(ResolvedRun {
            scenario,
            z0,
            t_end,
            h,
            solver,
            sben,
            canonical,
            fingerprint,
        })
    }
}

/// SHA-256 of the canonical JSON form of a config.
pub fn config_fingerprint(config: &RunConfig) -> CliResult<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Everything a run needs, with defaults filled in.
pub struct ResolvedRun {
    pub scenario: Scenario,
    pub z0: PhaseVector,
    pub t_end: f64,
    pub h: f64,
    pub solver: SolverOptions,
    pub sben: Option<PerturbationPlan>,
    /// The config with defaults written out and the output path dropped.
    pub canonical: RunConfig,
    pub fingerprint: String,
}

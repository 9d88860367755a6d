use std::path::{Path, PathBuf};

use serde::Serialize;
use sympdiss::analysis::{
    check_dissipation_inequality, cumulative_dissipation, energy_balance_residual, sben_compare, BalanceReport,
};
use sympdiss::bipotential::{check_bipotential_axioms, BipotentialReport};
use sympdiss::checks::SamplePlan;
use sympdiss::dynamics::{simulate, simulate_partial, GapScheme};
use sympdiss::scenarios::{build_scenario, list_scenarios, scenario_defaults};
use sympdiss::serde_ext;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_OK, EXIT_SOLVER};
use crate::output::{fmt_f64, trajectory_columns, trajectory_csv, trajectory_json, trajectory_rows, write_atomic, write_json};

/// Residuals below this are treated as roundoff in the refinement study.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
/// Smallest acceptable residual ratio per halving of `h`.
pub const MIN_REFINEMENT_RATIO: f64 = 1.7;

/// What a subcommand produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: u8,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    #[serde(serialize_with = "serde_ext::serialize_f64_or_inf")]
    pub value: f64,
    pub tolerance: f64,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config_fingerprint: String,
    pub trajectory_fingerprint: String,
    pub scenario: String,
    pub half_dim: usize,
    pub h: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub scheme: GapScheme,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub dt_partial_estimated: bool,
    #[serde(flatten)]
    pub balance: BalanceReport,
    pub checks: Vec<CheckResult>,
    pub bipotential_axioms: Option<BipotentialReport>,
    pub failure: Option<String>,
    pub pass: bool,
}

fn summary_line(c: &CheckResult) -> String {
    format!(
        "{:<24} {} (value {}, tolerance {:e})",
        c.name,
        if c.pass { "pass" } else { "FAIL" },
        fmt_f64(c.value),
        c.tolerance
    )
}

/// Simulate, run the enabled checks, write the trajectory and `report.json`.
pub fn run(config: &RunConfig, out_dir: &Path) -> CliResult<Outcome> {
    let resolved = config.resolve()?;
    let problem = &resolved.scenario.problem;
    let outcome = simulate_partial(problem, &resolved.z0, resolved.t_end, resolved.h, &resolved.solver)?;
    let traj = &outcome.trajectory;
    let failure = outcome.failure.as_ref().map(|e| {
        let step = match e {
            sympdiss::Error::Step { step, .. } => *step,
            _ => traj.steps(),
        };
        (step, e.to_string())
    });

    let cum = cumulative_dissipation(traj, problem)?;
    let columns = trajectory_columns(problem.half_dim());
    let rows = trajectory_rows(traj, problem, &cum)?;
    let fail_ref = failure.as_ref().map(|(s, m)| (*s, m.as_str()));
    let traj_path = match config.format {
        Format::Csv => {
            let path = out_dir.join("trajectory.csv");
            write_atomic(&path, trajectory_csv(&columns, &rows, fail_ref).as_bytes())?;
            path
        }
        Format::Json => {
            let path = out_dir.join("trajectory.json");
            write_atomic(&path, &trajectory_json(&columns, &rows, fail_ref)?)?;
            path
        }
    };

    let tol = &config.tolerances;
    let mut balance = check_dissipation_inequality(traj, problem, tol.dissipation)?;
    let mut checks = Vec::new();
    if config.checks.energy_balance {
        checks.push(CheckResult {
            name: "energy_balance".into(),
            pass: balance.energy_balance_residual <= tol.energy_balance,
            value: balance.energy_balance_residual,
            tolerance: tol.energy_balance,
        });
    }
    if config.checks.dissipation_inequality {
        checks.push(CheckResult {
            name: "dissipation_inequality".into(),
            pass: balance.dissipation_inequality_holds(),
            value: balance.max_monotonicity_defect,
            tolerance: tol.dissipation,
        });
    }
    if let Some(plan) = &resolved.sben {
        // perturbations need the whole curve
        if failure.is_none() {
            let sben = sben_compare(traj, problem, plan)?;
            balance.sben_margins = sben.sben_margins;
            balance.sben_tol_margin = sben.sben_tol_margin;
        }
        checks.push(CheckResult {
            name: "sben".into(),
            pass: balance.sben_holds() == Some(true),
            value: balance.sben_min_margin().unwrap_or(f64::NEG_INFINITY),
            tolerance: tol.sben_margin,
        });
    }
    let bipotential_axioms = if config.checks.bipotential_axioms {
        let report = check_bipotential_axioms(problem.bipotential(), &SamplePlan::default())?;
        checks.push(CheckResult {
            name: "bipotential_axioms".into(),
            pass: report.pass(),
            value: (report.axiom_a.witnesses.len() + report.convexity.witnesses.len() + report.axiom_b.witnesses.len())
                as f64,
            tolerance: 0.0,
        });
        Some(report)
    } else {
        None
    };

    let checks_pass = checks.iter().all(|c| c.pass);
    let report = RunReport {
        config_fingerprint: resolved.fingerprint.clone(),
        trajectory_fingerprint: traj.config_fingerprint.clone(),
        scenario: resolved.scenario.name.clone(),
        half_dim: problem.half_dim(),
        h: resolved.h,
        t_end: resolved.t_end,
        scheme: resolved.solver.scheme,
        steps_requested: (resolved.t_end / resolved.h).round() as usize,
        steps_completed: traj.steps(),
        dt_partial_estimated: traj.dt_partial_estimated,
        balance,
        checks,
        bipotential_axioms,
        failure: failure.as_ref().map(|(_, m)| m.clone()),
        pass: checks_pass && failure.is_none(),
    };
    let report_path = out_dir.join("report.json");
    write_json(&report_path, &report)?;

    let mut summary: Vec<String> = report.checks.iter().map(summary_line).collect();
    let exit_code = if let Some((step, msg)) = &failure {
        summary.push(format!("solver failed at step {step}: {msg}"));
        EXIT_SOLVER
    } else if checks_pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    };
    Ok(Outcome {
        exit_code,
        files: vec![traj_path, report_path],
        summary,
    })
}

/// One line of `refinement.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub h: f64,
    pub energy_balance_residual: f64,
    /// `None` when the scenario has no oracle.
    pub end_state_error: Option<f64>,
    /// Residual of the previous level over this one.
    pub ratio: Option<f64>,
    pub status: RatioStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioStatus {
    /// Coarsest level, nothing to compare.
    First,
    Ok,
    /// Ratio below the required factor.
    Low,
    /// Both residuals under the roundoff floor; the ratio carries no information.
    Roundoff,
}

impl RatioStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RatioStatus::First => "first",
            RatioStatus::Ok => "ok",
            RatioStatus::Low => "low",
            RatioStatus::Roundoff => "roundoff",
        }
    }
}

/// Concurrency cap for refinement levels from `SYMPDISS_THREADS`.
pub fn thread_cap() -> CliResult<usize> {
    match std::env::var("SYMPDISS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("SYMPDISS_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Runs at `h, h/2, ..` and the empirical residual ratios between levels.
pub fn refine_rows(config: &RunConfig, levels: usize, threads: usize) -> CliResult<Vec<RefinementRow>> {
    if levels < 2 {
        return Err(CliError::Config(format!("refine needs at least 2 levels, got {levels}")));
    }
    let resolved = config.resolve()?;
    let oracle = match &resolved.scenario.oracle {
        Some(o) => Some(o.solve(&resolved.z0, resolved.t_end)?),
        None => None,
    };
    let steps: Vec<f64> = (0..levels).map(|i| resolved.h / 2f64.powi(i as i32)).collect();
    let level = |h: f64| -> CliResult<(f64, Option<f64>)> {
        let problem = &resolved.scenario.problem;
        let traj = simulate(problem, &resolved.z0, resolved.t_end, h, &resolved.solver)?;
        let residual = energy_balance_residual(&traj, problem)?;
        let err = oracle.as_ref().map(|o| (traj.final_state() - &o.state).norm());
        Ok((residual, err))
    };
    let mut results = Vec::with_capacity(levels);
    for chunk in steps.chunks(threads.max(1)) {
        let batch: Vec<CliResult<(f64, Option<f64>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|&h| scope.spawn(move || level(h))).collect();
            handles.into_iter().map(|j| j.join().expect("refinement level panicked")).collect()
        });
        for r in batch {
            results.push(r?);
        }
    }
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(levels);
    for (i, (&h, (residual, err))) in steps.iter().zip(results).enumerate() {
        let (ratio, status) = if i == 0 {
            (None, RatioStatus::First)
        } else {
            let prev = rows[i - 1].energy_balance_residual;
            let ratio = prev / residual;
            let status = if prev < ROUNDOFF_FLOOR && residual < ROUNDOFF_FLOOR {
                RatioStatus::Roundoff
            } else if ratio >= MIN_REFINEMENT_RATIO {
                RatioStatus::Ok
            } else {
                RatioStatus::Low
            };
            (Some(ratio), status)
        };
        rows.push(RefinementRow {
            h,
            energy_balance_residual: residual,
            end_state_error: err,
            ratio,
            status,
        });
    }
    Ok(rows)
}

pub fn refinement_csv(rows: &[RefinementRow]) -> String {
    let mut out = String::from("h,energy_balance_residual,end_state_error_vs_oracle,residual_ratio,ratio_status\n");
    for r in rows {
        let err = r.end_state_error.map(fmt_f64).unwrap_or_else(|| "absent".into());
        let ratio = r.ratio.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.h),
            fmt_f64(r.energy_balance_residual),
            err,
            ratio,
            r.status.as_str()
        ));
    }
    out
}

/// Refinement study written to `refinement.csv`.
pub fn refine(config: &RunConfig, levels: usize, out_dir: &Path) -> CliResult<Outcome> {
    let rows = refine_rows(config, levels, thread_cap()?)?;
    let path = out_dir.join("refinement.csv");
    write_atomic(&path, refinement_csv(&rows).as_bytes())?;
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "h={:<10e} residual={:<12e} error={} ratio={}",
                r.h,
                r.energy_balance_residual,
                r.end_state_error.map(|e| format!("{e:e}")).unwrap_or_else(|| "absent".into()),
                r.ratio.map(|x| format!("{x:.3} ({})", r.status.as_str())).unwrap_or_else(|| "-".into())
            )
        })
        .collect();
    let pass = !config.checks.energy_balance || rows.iter().all(|r| r.status != RatioStatus::Low);
    Ok(Outcome {
        exit_code: if pass { EXIT_OK } else { EXIT_CHECK_FAILED },
        files: vec![path],
        summary,
    })
}

/// Scenario names with their default parameters.
pub fn list() -> CliResult<Outcome> {
    let mut summary = Vec::new();
    for name in list_scenarios() {
        let params: Vec<String> = scenario_defaults(name)?
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        summary.push(format!("{name:<26} {}", params.join(" ")));
    }
    Ok(Outcome {
        exit_code: EXIT_OK,
        files: Vec::new(),
        summary,
    })
}

/// Full sampled axiom check of a scenario's bipotential.
pub fn check_bipotential(config: &RunConfig, seed: Option<u64>, out_dir: &Path) -> CliResult<Outcome> {
    let scenario =
        build_scenario(&config.scenario.name, &config.scenario.params).map_err(|e| CliError::Config(e.to_string()))?;
    let mut plan = SamplePlan::default();
    if let Some(seed) = seed {
        plan = plan.with_seed(seed);
    }
    let report = check_bipotential_axioms(scenario.problem.bipotential(), &plan)?;
    let path = out_dir.join("bipotential_report.json");
    write_json(&path, &report)?;
    let verdict = |pass: bool| if pass { "pass" } else { "FAIL" };
    let mut summary = vec![
        format!("axiom_a     {}", verdict(report.axiom_a.pass)),
        format!("convexity   {}", verdict(report.convexity.pass)),
        format!(
            "axiom_b     {} ({} of {} probed pairs in contact, {} unresolved)",
            verdict(report.axiom_b.pass),
            report.contact_pairs_found,
            report.contact_pairs_probed,
            report.unresolved
        ),
    ];
    for w in report
        .axiom_a
        .witnesses
        .iter()
        .chain(&report.convexity.witnesses)
        .chain(&report.axiom_b.witnesses)
    {
        summary.push(format!("  {w}"));
    }
    Ok(Outcome {
        exit_code: if report.pass() { EXIT_OK } else { EXIT_CHECK_FAILED },
        files: vec![path],
        summary,
    })
}

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sympdiss::dynamics::{DissipativeProblem, Trajectory};

use crate::error::{CliError, CliResult};

/// First field of the row appended to a trajectory cut short by a solver failure.
pub const TRUNCATION_MARKER: &str = "truncated";

/// Write to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

fn block_names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// `t, q.., p.., H, eta_q.., eta_p.., step_residual, cum_dissipation, cum_dt_partial`.
pub fn trajectory_columns(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(block_names("q", n));
    cols.extend(block_names("p", n));
    cols.push("H".into());
    cols.extend(block_names("eta_q", n));
    cols.extend(block_names("eta_p", n));
    cols.extend(["step_residual", "cum_dissipation", "cum_dt_partial"].map(String::from));
    cols
}

/// Node rows. Step `k` writes its gap and residual on node `k + 1`; node 0
/// carries zeros there.
pub fn trajectory_rows(traj: &Trajectory, problem: &DissipativeProblem, cum_diss: &[f64]) -> CliResult<Vec<Vec<f64>>> {
    let n = traj.half_dim();
    let mut rows = Vec::with_capacity(traj.states.len());
    let mut q_acc = 0.0;
    for (k, z) in traj.states.iter().enumerate() {
        let mut row = Vec::with_capacity(4 * n + 5);
        row.push(traj.times[k]);
        row.extend(z.to_flat());
        row.push(traj.hamiltonian_values[k]);
        if k == 0 {
            row.extend(std::iter::repeat_n(0.0, 2 * n));
            row.push(0.0);
        } else {
            row.extend(traj.gaps[k - 1].to_flat());
            row.push(traj.step_residuals[k - 1]);
            q_acc += traj.h * problem.hamiltonian().dt_partial(&traj.states[k - 1], traj.times[k - 1])?;
        }
        row.push(cum_diss[k]);
        row.push(q_acc);
        rows.push(row);
    }
    Ok(rows)
}

/// Render a trajectory table as CSV, with a truncation row when `failure` is set.
pub fn trajectory_csv(columns: &[String], rows: &[Vec<f64>], failure: Option<(usize, &str)>) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    if let Some((step, _)) = failure {
        // keep the column count so the file still parses as a table
        let mut fields = vec![TRUNCATION_MARKER.to_string(), step.to_string()];
        fields.resize(columns.len(), String::new());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    columns: &'a [String],
    rows: Vec<Vec<String>>,
    truncated: Option<Truncation<'a>>,
}

#[derive(Serialize)]
struct Truncation<'a> {
    step: usize,
    message: &'a str,
}

/// Same table as a JSON document; values are strings in the CSV number format.
pub fn trajectory_json(columns: &[String], rows: &[Vec<f64>], failure: Option<(usize, &str)>) -> CliResult<Vec<u8>> {
    let doc = TrajectoryJson {
        columns,
        rows: rows.iter().map(|r| r.iter().map(|x| fmt_f64(*x)).collect()).collect(),
        truncated: failure.map(|(step, message)| Truncation { step, message }),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

//! Versioned CSV output.
//!
//! The file starts with `#` comment lines (schema version, plan, Lanczos
//! configuration) followed by a header row. Trial rows have `row = trial`;
//! per (point, method) summaries have `row = summary`. Timings are seconds
//! with 6 decimals; every other float uses the shortest representation that
//! round-trips.

use std::io::Write;
use std::path::Path;

use certify::lanczos::LanczosConfig;

use crate::plan::ExperimentPlan;
use crate::sweep::{Summary, SweepOutput, TrialRecord};
use crate::BenchError;

pub const SCHEMA: &str = "# certify-bench csv v1";

pub const COLUMNS: [&str; 32] = [
    "row",
    "kind",
    "point",
    "method",
    "n_vertices",
    "dim",
    "gamma",
    "file",
    "trial",
    "seed",
    "eta",
    "tol",
    "block_size",
    "fill_limit",
    "drop_tol",
    "outcome",
    "lambda",
    "iterations",
    "matvecs",
    "precond_applications",
    "converged",
    "error",
    "n_ok",
    "iterations_mean",
    "iterations_ci95",
    "time_s",
    "cholesky_time_s",
    "precond_time_s",
    "solve_time_s",
    "time_mean_s",
    "time_ci95_s",
    "time_median_s",
];

/// Columns that hold wall-clock measurements.
pub const TIMING_COLUMNS: [&str; 7] = [
    "time_s",
    "cholesky_time_s",
    "precond_time_s",
    "solve_time_s",
    "time_mean_s",
    "time_ci95_s",
    "time_median_s",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn secs(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.6}")
    } else {
        String::new()
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

fn trial_row(plan: &ExperimentPlan, r: &TrialRecord) -> Vec<String> {
    vec![
        "trial".into(),
        r.kind.into(),
        r.point.to_string(),
        r.method.to_string(),
        opt(&r.n_vertices),
        r.dim.to_string(),
        opt(&r.gamma),
        opt(&r.file),
        r.trial.to_string(),
        r.seed.to_string(),
        r.eta.to_string(),
        plan.tol.to_string(),
        plan.block_size.to_string(),
        opt(&plan.fill_limit),
        plan.drop_tol.to_string(),
        r.outcome.into(),
        opt(&r.lambda),
        r.iterations.to_string(),
        r.matvecs.to_string(),
        r.precond_applications.to_string(),
        r.converged.to_string(),
        opt(&r.error),
        String::new(),
        String::new(),
        String::new(),
        secs(r.time_s),
        secs(r.cholesky_time_s),
        secs(r.precond_time_s),
        secs(r.solve_time_s),
        String::new(),
        String::new(),
        String::new(),
    ]
}

fn summary_row(plan: &ExperimentPlan, s: &Summary) -> Vec<String> {
    let mut row = vec![String::new(); COLUMNS.len()];
    row[0] = "summary".into();
    row[1] = s.kind.into();
    row[2] = s.point.to_string();
    row[3] = s.method.to_string();
    row[4] = opt(&s.n_vertices);
    row[6] = opt(&s.gamma);
    row[7] = opt(&s.file);
    row[10] = plan.eta.to_string();
    row[11] = plan.tol.to_string();
    row[12] = plan.block_size.to_string();
    row[13] = opt(&plan.fill_limit);
    row[14] = plan.drop_tol.to_string();
    row[22] = s.n_ok.to_string();
    row[23] = num(s.iterations_mean);
    row[24] = num(s.iterations_ci95);
    row[29] = secs(s.time_mean_s);
    row[30] = secs(s.time_ci95_s);
    row[31] = secs(s.time_median_s);
    row
}

/// Comment lines describing the run.
pub fn preamble(plan: &ExperimentPlan) -> Vec<String> {
    let lz = LanczosConfig::new(plan.tol, plan.max_matvecs, 0);
    vec![
        SCHEMA.to_string(),
        format!(
            "# plan: kind={} trials={} methods={} tol={} eta={} blocksize={} fill_limit={} drop_tol={} seed={} max_iter={} max_matvecs={} workers={}",
            plan.grid.kind(),
            plan.trials,
            plan.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join("+"),
            plan.tol,
            plan.eta,
            plan.block_size,
            plan.fill_limit.map_or("auto".to_string(), |f| f.to_string()),
            plan.drop_tol,
            plan.seed,
            plan.max_iter,
            plan.max_matvecs,
            plan.workers,
        ),
        format!(
            "# lanczos: full reorthogonalization (two passes), max_basis={} thick restart keeping {} Ritz vectors, check every {} steps, sigma = theta_max + 0.01 |theta_max| + floor",
            lz.max_basis, lz.keep, lz.check_every
        ),
    ]
}

pub fn write_csv_to<W: Write>(mut w: W, plan: &ExperimentPlan, out: &SweepOutput) -> Result<(), BenchError> {
    for line in preamble(plan) {
        writeln!(w, "{line}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(COLUMNS)?;
    for r in &out.records {
        csv.write_record(trial_row(plan, r))?;
    }
    for s in &out.summaries {
        csv.write_record(summary_row(plan, s))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, plan: &ExperimentPlan, out: &SweepOutput) -> Result<(), BenchError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv_to(std::io::BufWriter::new(file), plan, out)
}

/// Header and rows of a CSV written by [`write_csv`], comments skipped.
pub fn read_rows(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>), BenchError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Rows with the timing columns blanked, for reproducibility checks.
pub fn without_timings(header: &[String], rows: &[Vec<String>]) -> Vec<Vec<String>> {
    let timed: Vec<bool> = header.iter().map(|h| TIMING_COLUMNS.contains(&h.as_str())).collect();
    rows.iter()
        .map(|r| r.iter().zip(&timed).map(|(v, &t)| if t { String::new() } else { v.clone() }).collect())
        .collect()
}

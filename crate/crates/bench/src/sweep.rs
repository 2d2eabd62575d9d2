//! Running sweeps: one record per (grid point, trial, method).

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use certify::lanczos::LanczosConfig;
use certify::mtx::read_matrix_market;
use certify::sparse::SparseSymMatrix;
use certify::testgen::{sample_test_matrix, TestMatrixSpec};
use certify::verify::{fast_verification, lanczos_verification, VerificationOutcome, VerificationReport, VerifyConfig, VerifyError};

use crate::plan::{ExperimentPlan, Grid, Method};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub kind: &'static str,
    pub point: usize,
    pub method: Method,
    pub n_vertices: Option<usize>,
    pub dim: usize,
    pub gamma: Option<f64>,
    pub file: Option<String>,
    pub trial: usize,
    pub seed: u64,
    /// Shift the outcome refers to.
    pub eta: f64,
    pub outcome: &'static str,
    pub lambda: Option<f64>,
    pub iterations: usize,
    pub matvecs: usize,
    pub precond_applications: usize,
    pub converged: bool,
    pub error: Option<String>,
    pub time_s: f64,
    pub cholesky_time_s: f64,
    pub precond_time_s: f64,
    pub solve_time_s: f64,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Per (grid point, method) statistics over the successful trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub kind: &'static str,
    pub point: usize,
    pub method: Method,
    pub n_vertices: Option<usize>,
    pub gamma: Option<f64>,
    pub file: Option<String>,
    pub n_ok: usize,
    pub iterations_mean: f64,
    pub iterations_ci95: f64,
    pub time_mean_s: f64,
    pub time_ci95_s: f64,
    pub time_median_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<Summary>,
}

impl SweepOutput {
    pub fn summary(&self, point: usize, method: Method) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.point == point && s.method == method)
    }
}

/// Mean and 95% normal-approximation half-width.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

fn error_code(e: &VerifyError) -> &'static str {
    match e {
        VerifyError::InvalidEta(_) => "invalid-eta",
        VerifyError::Factor(_) => "factor",
        VerifyError::Precond(_) => "precond",
        VerifyError::Lobpcg(_) => "lobpcg",
        VerifyError::Lanczos(_) => "lanczos",
        VerifyError::Inconclusive { .. } => "inconclusive",
    }
}

/// Where a trial's matrix came from.
#[derive(Debug, Clone)]
struct Source {
    point: usize,
    trial: usize,
    seed: u64,
    n_vertices: Option<usize>,
    gamma: Option<f64>,
    file: Option<String>,
}

fn run_method(plan: &ExperimentPlan, method: Method, s: &SparseSymMatrix, seed: u64) -> Result<VerificationReport, VerifyError> {
    match method {
        Method::LobpcgPrecond | Method::LobpcgPlain => {
            let cfg = VerifyConfig {
                block_size: plan.block_size,
                tol: plan.tol,
                max_iter: plan.max_iter,
                fill_limit: plan.fill_limit,
                drop_tol: plan.drop_tol,
                seed,
                precondition: method == Method::LobpcgPrecond,
            };
            fast_verification(s, plan.eta, &cfg)
        }
        Method::LanczosShifted => lanczos_verification(s, plan.eta, &LanczosConfig::new(plan.tol, plan.max_matvecs, seed)),
    }
}

fn record(plan: &ExperimentPlan, src: &Source, method: Method, dim: usize, result: Result<VerificationReport, String>) -> TrialRecord {
    let mut rec = TrialRecord {
        kind: plan.grid.kind(),
        point: src.point,
        method,
        n_vertices: src.n_vertices,
        dim,
        gamma: src.gamma,
        file: src.file.clone(),
        trial: src.trial,
        seed: src.seed,
        eta: plan.eta,
        outcome: "error",
        lambda: None,
        iterations: 0,
        matvecs: 0,
        precond_applications: 0,
        converged: false,
        error: None,
        time_s: 0.0,
        cholesky_time_s: 0.0,
        precond_time_s: 0.0,
        solve_time_s: 0.0,
    };
    match result {
        Ok(r) => {
            rec.eta = r.eta;
            rec.outcome = match r.outcome {
                VerificationOutcome::Certificate { .. } => "certificate",
                VerificationOutcome::NegativeCurvature { .. } => "negative-curvature",
            };
            rec.lambda = r.outcome.lambda();
            rec.iterations = r.iterations;
            rec.matvecs = r.matvecs;
            rec.precond_applications = r.precond_applications;
            rec.converged = r.converged;
            rec.time_s = r.timings.total_s;
            rec.cholesky_time_s = r.timings.cholesky_s;
            rec.precond_time_s = r.timings.precond_s;
            rec.solve_time_s = r.timings.solve_s;
        }
        Err(code) => rec.error = Some(code),
    }
    rec
}

fn run_trial(plan: &ExperimentPlan, src: &Source) -> Vec<TrialRecord> {
    let matrix: Result<SparseSymMatrix, String> = match (&plan.grid, &src.file) {
        (Grid::Files(_), Some(path)) => read_matrix_market(path).map_err(|e| format!("parse: {e}")),
        _ => {
            let spec = TestMatrixSpec::new(src.n_vertices.unwrap_or(0), src.gamma.unwrap_or(0.0), src.seed);
            sample_test_matrix(&spec).map(|t| t.matrix).map_err(|e| format!("testgen: {e}"))
        }
    };
    plan.methods
        .iter()
        .map(|&method| match &matrix {
            Ok(s) => {
                let result = run_method(plan, method, s, src.seed).map_err(|e| format!("{}: {e}", error_code(&e)));
                record(plan, src, method, s.dim(), result)
            }
            Err(msg) => record(plan, src, method, 0, Err(msg.clone())),
        })
        .collect()
}

fn sources(plan: &ExperimentPlan) -> Vec<Source> {
    let mut out = Vec::new();
    for point in 0..plan.grid.len() {
        for trial in 0..plan.trials {
            let seed = plan.trial_seed(point, trial);
            let (n_vertices, gamma, file) = match &plan.grid {
                Grid::Gap { gammas, n_vertices } => (Some(*n_vertices), Some(gammas[point]), None),
                Grid::Size { sizes, gamma } => (Some(sizes[point]), Some(*gamma), None),
                Grid::Files(files) => (None, None, Some(files[point].display().to_string())),
            };
            out.push(Source {
                point,
                trial,
                seed,
                n_vertices,
                gamma,
                file,
            });
        }
    }
    out
}

fn summarize(plan: &ExperimentPlan, records: &[TrialRecord]) -> Vec<Summary> {
    let mut out = Vec::new();
    for point in 0..plan.grid.len() {
        for &method in &plan.methods {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.point == point && r.method == method).collect();
            let Some(first) = rows.first() else { continue };
            let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| r.ok()).collect();
            let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
            let times: Vec<f64> = ok.iter().map(|r| r.time_s).collect();
            let (iterations_mean, iterations_ci95) = mean_ci95(&iters);
            let (time_mean_s, time_ci95_s) = mean_ci95(&times);
            out.push(Summary {
                kind: first.kind,
                point,
                method,
                n_vertices: first.n_vertices,
                gamma: first.gamma,
                file: first.file.clone(),
                n_ok: ok.len(),
                iterations_mean,
                iterations_ci95,
                time_mean_s,
                time_ci95_s,
                time_median_s: median(&times),
            });
        }
    }
    out
}

/// Run every (point, trial) of the plan. Failures are recorded, never fatal.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<SweepOutput, BenchError> {
    plan.validate()?;
    let jobs = sources(plan);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Vec<TrialRecord>>();
    std::thread::scope(|scope| {
        for _ in 0..plan.workers.min(jobs.len()) {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(src) = jobs.get(i) else { break };
                if tx.send(run_trial(plan, src)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut records: Vec<TrialRecord> = rx.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.point, r.trial, r.method));
    let summaries = summarize(plan, &records);
    Ok(SweepOutput { records, summaries })
}

pub fn run_gap_sweep(plan: &ExperimentPlan) -> Result<SweepOutput, BenchError> {
    if !matches!(plan.grid, Grid::Gap { .. }) {
        return Err(BenchError::InvalidPlan("gap sweep needs a gamma grid".into()));
    }
    run_sweep(plan)
}

pub fn run_size_sweep(plan: &ExperimentPlan) -> Result<SweepOutput, BenchError> {
    if !matches!(plan.grid, Grid::Size { .. }) {
        return Err(BenchError::InvalidPlan("size sweep needs a size grid".into()));
    }
    run_sweep(plan)
}

pub fn run_file(plan: &ExperimentPlan) -> Result<SweepOutput, BenchError> {
    if !matches!(plan.grid, Grid::Files(_)) {
        return Err(BenchError::InvalidPlan("file mode needs Matrix Market paths".into()));
    }
    run_sweep(plan)
}

/// Convenience for a single matrix already in memory.
pub fn run_matrix(plan: &ExperimentPlan, s: &SparseSymMatrix, seed: u64, label: &Path) -> Vec<TrialRecord> {
    let src = Source {
        point: 0,
        trial: 0,
        seed,
        n_vertices: None,
        gamma: None,
        file: Some(label.display().to_string()),
    };
    plan.methods
        .iter()
        .map(|&method| {
            let result = run_method(plan, method, s, seed).map_err(|e| format!("{}: {e}", error_code(&e)));
            record(plan, &src, method, s.dim(), result)
        })
        .collect()
}

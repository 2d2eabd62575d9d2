//! Gap and size sweeps over sampled test matrices, file mode for external
//! Matrix Market certificates, CSV output and plot scripts.

pub mod plan;
pub mod plot;
pub mod report;
pub mod sweep;

use thiserror::Error;

pub use plan::{ExperimentPlan, Grid, Method};
pub use plot::emit_plot_script;
pub use report::{write_csv, TIMING_COLUMNS};
pub use sweep::{run_file, run_gap_sweep, run_size_sweep, run_sweep, Summary, SweepOutput, TrialRecord};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Worker count from `CERTIFY_WORKERS`, default 1.
pub fn workers_from_env() -> usize {
    std::env::var("CERTIFY_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or(1)
}

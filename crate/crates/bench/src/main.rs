use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use certify::mtx::write_matrix_market;
use certify::testgen::{sample_test_matrix, TestMatrixSpec};
use certify_bench::{
    emit_plot_script, run_file, run_gap_sweep, run_size_sweep, workers_from_env, write_csv, BenchError, ExperimentPlan,
    Grid, Method, SweepOutput,
};

/// Sweeps comparing preconditioned LOBPCG, plain LOBPCG and shifted Lanczos
/// on the verification problem. Worker count comes from CERTIFY_WORKERS.
#[derive(Parser)]
#[command(name = "certify-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vary gamma at fixed N.
    GapSweep(SweepArgs),
    /// Vary N at fixed gamma.
    SizeSweep(SweepArgs),
    /// Run the methods on Matrix Market files.
    VerifyFile {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write a plot script for a sweep CSV.
    Plot { csv: PathBuf },
    /// Write one sampled test matrix as Matrix Market.
    Sample {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 1e-2)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated gammas (one value for a size sweep).
    #[arg(long, value_delimiter = ',')]
    gamma_list: Option<Vec<f64>>,
    /// Comma-separated vertex counts (one value for a gap sweep).
    #[arg(long, value_delimiter = ',')]
    size_list: Option<Vec<usize>>,
    /// Paper-scale grids (N = 25000 gap sweep, N up to 50000).
    #[arg(long)]
    full_scale: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of lobpcg-precond, lobpcg-plain, lanczos-shifted.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    blocksize: Option<usize>,
    #[arg(long)]
    fill_limit: Option<usize>,
    #[arg(long)]
    drop_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// LOBPCG iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Lanczos matvec cap.
    #[arg(long)]
    max_matvecs: Option<usize>,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

impl CommonArgs {
    fn apply(&self, plan: &mut ExperimentPlan) -> Result<(), BenchError> {
        if let Some(t) = self.trials {
            plan.trials = t;
        }
        if let Some(ms) = &self.methods {
            plan.methods = ms.iter().map(|m| m.parse::<Method>()).collect::<Result<_, _>>()?;
        }
        if let Some(t) = self.tol {
            plan.tol = t;
        }
        if let Some(e) = self.eta {
            plan.eta = e;
        }
        if let Some(m) = self.blocksize {
            plan.block_size = m;
        }
        if self.fill_limit.is_some() {
            plan.fill_limit = self.fill_limit;
        }
        if let Some(d) = self.drop_tol {
            plan.drop_tol = d;
        }
        if let Some(s) = self.seed {
            plan.seed = s;
        }
        if let Some(m) = self.max_iter {
            plan.max_iter = m;
        }
        if let Some(m) = self.max_matvecs {
            plan.max_matvecs = m;
        }
        plan.out_dir = self.out_dir.clone();
        plan.workers = workers_from_env();
        Ok(())
    }
}

fn single<T: Copy>(list: &Option<Vec<T>>, flag: &str) -> Result<Option<T>, BenchError> {
    match list.as_deref() {
        None => Ok(None),
        Some([x]) => Ok(Some(*x)),
        Some(_) => Err(BenchError::InvalidPlan(format!("{flag} takes a single value for this sweep"))),
    }
}

fn gap_plan(a: &SweepArgs) -> Result<ExperimentPlan, BenchError> {
    let mut plan = if a.full_scale {
        ExperimentPlan::gap_full_scale()
    } else {
        ExperimentPlan::gap_default()
    };
    if let Grid::Gap { gammas, n_vertices } = &mut plan.grid {
        if let Some(g) = &a.gamma_list {
            *gammas = g.clone();
        }
        if let Some(n) = single(&a.size_list, "--size-list")? {
            *n_vertices = n;
        }
    }
    a.common.apply(&mut plan)?;
    Ok(plan)
}

fn size_plan(a: &SweepArgs) -> Result<ExperimentPlan, BenchError> {
    let mut plan = if a.full_scale {
        ExperimentPlan::size_full_scale()
    } else {
        ExperimentPlan::size_default()
    };
    plan.trials = 20;
    if let Grid::Size { sizes, gamma } = &mut plan.grid {
        if let Some(s) = &a.size_list {
            *sizes = s.clone();
        }
        if let Some(g) = single(&a.gamma_list, "--gamma-list")? {
            *gamma = g;
        }
    }
    a.common.apply(&mut plan)?;
    Ok(plan)
}

fn print_summary(out: &SweepOutput) {
    println!(
        "{:>6} {:>16} {:>10} {:>10} {:>6} {:>12} {:>12} {:>12}",
        "point", "method", "gamma", "N", "ok", "iters", "time_mean", "time_median"
    );
    for s in &out.summaries {
        println!(
            "{:>6} {:>16} {:>10} {:>10} {:>6} {:>12.1} {:>12.6} {:>12.6}",
            s.point,
            s.method.name(),
            s.gamma.map_or("-".into(), |g| format!("{g:e}")),
            s.n_vertices.map_or("-".into(), |n| n.to_string()),
            s.n_ok,
            s.iterations_mean,
            s.time_mean_s,
            s.time_median_s
        );
    }
}

fn finish(plan: &ExperimentPlan, out: &SweepOutput, name: &str, plot: bool) -> Result<(), BenchError> {
    std::fs::create_dir_all(&plan.out_dir)?;
    let csv = plan.out_dir.join(format!("{name}.csv"));
    write_csv(&csv, plan, out)?;
    print_summary(out);
    println!("wrote {}", csv.display());
    if plot {
        println!("wrote {}", emit_plot_script(&csv)?.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::GapSweep(a) => {
            let plan = gap_plan(&a)?;
            let out = run_gap_sweep(&plan)?;
            finish(&plan, &out, "gap_sweep", true)
        }
        Command::SizeSweep(a) => {
            let plan = size_plan(&a)?;
            let out = run_size_sweep(&plan)?;
            finish(&plan, &out, "size_sweep", true)
        }
        Command::VerifyFile { files, common } => {
            let mut plan = ExperimentPlan::new(Grid::Files(files));
            plan.trials = 1;
            common.apply(&mut plan)?;
            let out = run_file(&plan)?;
            for r in &out.records {
                println!(
                    "{} {} {} lambda={} time={:.6}s{}",
                    r.file.as_deref().unwrap_or("-"),
                    r.method,
                    r.outcome,
                    r.lambda.map_or("-".into(), |l| l.to_string()),
                    r.time_s,
                    r.error.as_ref().map_or(String::new(), |e| format!(" error={e}"))
                );
            }
            finish(&plan, &out, "verify_file", false)
        }
        Command::Plot { csv } => {
            println!("wrote {}", emit_plot_script(&csv)?.display());
            Ok(())
        }
        Command::Sample { n, gamma, seed, out } => {
            let t = sample_test_matrix(&TestMatrixSpec::new(n, gamma, seed))
                .map_err(|e| BenchError::InvalidPlan(e.to_string()))?;
            write_matrix_market(&t.matrix, &out).map_err(|e| BenchError::InvalidPlan(e.to_string()))?;
            println!("wrote {} (dimension {}, connected: {})", out.display(), t.matrix.dim(), t.connected());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

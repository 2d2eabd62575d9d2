//! Experiment plans: what to sweep, which methods to run, and how.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    LobpcgPrecond,
    LobpcgPlain,
    LanczosShifted,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::LobpcgPrecond, Method::LobpcgPlain, Method::LanczosShifted];

    pub fn name(self) -> &'static str {
        match self {
            Method::LobpcgPrecond => "lobpcg-precond",
            Method::LobpcgPlain => "lobpcg-plain",
            Method::LanczosShifted => "lanczos-shifted",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| BenchError::InvalidPlan(format!("unknown method '{s}'")))
    }
}

/// The swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Vary `gamma` at fixed vertex count.
    Gap { gammas: Vec<f64>, n_vertices: usize },
    /// Vary the vertex count at fixed `gamma`.
    Size { sizes: Vec<usize>, gamma: f64 },
    /// Matrix Market files.
    Files(Vec<PathBuf>),
}

impl Grid {
    pub fn kind(&self) -> &'static str {
        match self {
            Grid::Gap { .. } => "gap",
            Grid::Size { .. } => "size",
            Grid::Files(_) => "file",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Gap { gammas, .. } => gammas.len(),
            Grid::Size { sizes, .. } => sizes.len(),
            Grid::Files(files) => files.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub grid: Grid,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub tol: f64,
    /// Absolute shift; the same for every method and trial.
    pub eta: f64,
    pub block_size: usize,
    pub fill_limit: Option<usize>,
    pub drop_tol: f64,
    pub seed: u64,
    /// LOBPCG iteration cap.
    pub max_iter: usize,
    /// Lanczos matvec cap.
    pub max_matvecs: usize,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            trials: 50,
            methods: Method::ALL.to_vec(),
            tol: 1e-2,
            eta: 1e-6,
            block_size: 5,
            fill_limit: None,
            drop_tol: 1e-3,
            seed: 0,
            max_iter: 20_000,
            max_matvecs: 200_000,
            workers: 1,
            out_dir: PathBuf::from("bench-out"),
        }
    }

    /// Gap sweep over `gamma = 10^k`, `k = -1..=-6`, at `N = 2000`.
    pub fn gap_default() -> Self {
        let gammas = (1..=6).map(|k| 10f64.powi(-k)).collect();
        Self::new(Grid::Gap { gammas, n_vertices: 2000 })
    }

    /// Gap sweep over `gamma = 10^k`, `k = 1..=-6`, at `N = 25000`.
    pub fn gap_full_scale() -> Self {
        let gammas = (-1..=6).map(|k| 10f64.powi(-k)).collect();
        Self::new(Grid::Gap { gammas, n_vertices: 25_000 })
    }

    /// Size sweep over `N in {1000, 2000, 4000, 8000}` at `gamma = 1e-2`.
    pub fn size_default() -> Self {
        Self::new(Grid::Size {
            sizes: vec![1000, 2000, 4000, 8000],
            gamma: 1e-2,
        })
    }

    /// Size sweep over `N = 5000 k`, `k = 1..=10`.
    pub fn size_full_scale() -> Self {
        Self::new(Grid::Size {
            sizes: (1..=10).map(|k| 5000 * k).collect(),
            gamma: 1e-2,
        })
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidPlan(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.grid.is_empty() {
            return bad("parameter grid is empty".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.block_size == 0 {
            return bad("block size must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("need at least one worker".into());
        }
        match &self.grid {
            Grid::Gap { gammas, n_vertices } => {
                if *n_vertices < 2 {
                    return bad(format!("need N >= 2, got {n_vertices}"));
                }
                if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
                    return bad(format!("gamma must be >= 0, got {g}"));
                }
            }
            Grid::Size { sizes, gamma } => {
                if let Some(n) = sizes.iter().find(|&&n| n < 2) {
                    return bad(format!("need N >= 2, got {n}"));
                }
                if !(*gamma >= 0.0) || !gamma.is_finite() {
                    return bad(format!("gamma must be >= 0, got {gamma}"));
                }
            }
            Grid::Files(_) => {}
        }
        Ok(())
    }

    /// Seed of trial `trial` at grid point `point`: the first word of the
    /// ChaCha8 stream `(point << 32) | trial` keyed by the master seed.
    pub fn trial_seed(&self, point: usize, trial: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((point as u64) << 32) | trial as u64);
        rng.next_u64()
    }
}

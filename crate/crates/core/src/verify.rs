//! Deciding `S >= -eta I` or exhibiting negative curvature.
//!
//! [`fast_verification`] first tries a Cholesky factorization of
//! `M = S + eta I`. If that succeeds, the factor is the certificate.
//! Otherwise `M` is indefinite: an incomplete `L D L^T` of `M` is
//! inertia-corrected into a positive-definite preconditioner `T` and LOBPCG
//! computes the smallest eigenpair `(theta, x)` of `M`; `theta - eta` is then
//! the smallest eigenvalue estimate of `S`.

use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::factor::{attempt_cholesky, default_fill_limit, ildl, CholeskyFactor, CholeskyOutcome, FactorError, IldlStats};
use crate::lanczos::{shifted_lanczos_min_eig, LanczosConfig, LanczosError};
use crate::lobpcg::{lobpcg, random_block, LobpcgConfig, LobpcgError};
use crate::precond::{PrecondError, Preconditioner};
use crate::sparse::{CountingOperator, DenseBlock, IdentityOperator, LinearOperator, SparseSymMatrix};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("eta must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Lobpcg(#[from] LobpcgError),
    #[error(transparent)]
    Lanczos(#[from] LanczosError),
    #[error("solver stopped after {iterations} iterations without a negative Ritz value (best {lambda:e})")]
    Inconclusive { lambda: f64, iterations: usize },
}

#[derive(Debug, Clone)]
pub enum VerificationOutcome {
    /// `S + eta I` is positive definite. The factor is present when the
    /// certificate came from a Cholesky factorization.
    Certificate { factor: Option<CholeskyFactor>, eta: f64 },
    /// `x^T S x = lambda < 0` with `||x|| = 1`.
    NegativeCurvature {
        lambda: f64,
        x: DVector<f64>,
        iterations: usize,
        matvecs: usize,
    },
}

impl VerificationOutcome {
    pub fn is_certificate(&self) -> bool {
        matches!(self, VerificationOutcome::Certificate { .. })
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            VerificationOutcome::NegativeCurvature { lambda, .. } => Some(*lambda),
            VerificationOutcome::Certificate { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub block_size: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// `None` picks [`default_fill_limit`] of `M`.
    pub fill_limit: Option<usize>,
    pub drop_tol: f64,
    pub seed: u64,
    /// Use `T = I` instead of the factorization-based preconditioner.
    pub precondition: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            block_size: 5,
            tol: 1e-2,
            max_iter: 1000,
            fill_limit: None,
            drop_tol: 1e-3,
            seed: 0,
            precondition: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyTimings {
    pub cholesky_s: f64,
    pub precond_s: f64,
    pub solve_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub outcome: VerificationOutcome,
    /// The shift the outcome refers to; twice the requested one after a
    /// factorization retry.
    pub eta: f64,
    pub iterations: usize,
    /// Applications of `M` (or `S`).
    pub matvecs: usize,
    pub precond_applications: usize,
    pub converged: bool,
    pub ildl_stats: Option<IldlStats>,
    pub timings: VerifyTimings,
}

/// `1e-6 * (max |S_ii| + 1)`.
pub fn default_eta(s: &SparseSymMatrix) -> f64 {
    1e-6 * (s.max_abs_diagonal() + 1.0)
}

fn certificate(factor: CholeskyFactor, eta: f64, timings: VerifyTimings) -> VerificationReport {
    VerificationReport {
        outcome: VerificationOutcome::Certificate {
            factor: Some(factor),
            eta,
        },
        eta,
        iterations: 0,
        matvecs: 0,
        precond_applications: 0,
        converged: true,
        ildl_stats: None,
        timings,
    }
}

fn unit_rayleigh(s: &SparseSymMatrix, x: &DVector<f64>) -> (DVector<f64>, f64) {
    let x = x / x.norm();
    let sx = s.apply(&DenseBlock::from_column_slice(x.len(), 1, x.as_slice()));
    let lambda = x.dot(&sx.column(0));
    (x, lambda)
}

/// Certify `S >= -eta I` or return a direction of negative curvature.
pub fn fast_verification(s: &SparseSymMatrix, eta: f64, cfg: &VerifyConfig) -> Result<VerificationReport, VerifyError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(VerifyError::InvalidEta(eta));
    }
    let start = Instant::now();
    let mut timings = VerifyTimings::default();
    let n = s.dim();

    let mut eta = eta;
    let mut m = s.shift_identity(eta);
    let clock = Instant::now();
    let chol = attempt_cholesky(&m)?;
    timings.cholesky_s = clock.elapsed().as_secs_f64();
    if let CholeskyOutcome::Factor(f) = chol {
        timings.total_s = start.elapsed().as_secs_f64();
        return Ok(certificate(f, eta, timings));
    }

    let mut precond = None;
    let mut ildl_stats = None;
    if cfg.precondition {
        let clock = Instant::now();
        let fill = cfg.fill_limit.unwrap_or_else(|| default_fill_limit(&m));
        let factorization = match ildl(&m, fill, cfg.drop_tol) {
            Ok(f) => f,
            Err(FactorError::PivotBreakdown { .. }) => {
                // -eta may be an eigenvalue of S; move away from it once.
                eta *= 2.0;
                m = s.shift_identity(eta);
                if let CholeskyOutcome::Factor(f) = attempt_cholesky(&m)? {
                    timings.precond_s = clock.elapsed().as_secs_f64();
                    timings.total_s = start.elapsed().as_secs_f64();
                    return Ok(certificate(f, eta, timings));
                }
                let fill = cfg.fill_limit.unwrap_or_else(|| default_fill_limit(&m));
                ildl(&m, fill, cfg.drop_tol)?
            }
            Err(e) => return Err(e.into()),
        };
        ildl_stats = Some(factorization.stats().clone());
        precond = Some(Preconditioner::new(&factorization)?);
        timings.precond_s = clock.elapsed().as_secs_f64();
    }

    let clock = Instant::now();
    let identity = IdentityOperator::new(n);
    let a = CountingOperator::new(&m);
    let t = match &precond {
        Some(p) => CountingOperator::new(p),
        None => CountingOperator::new(&identity),
    };
    let lob_cfg = LobpcgConfig {
        block_size: cfg.block_size.min(n),
        n_wanted: 1,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        abs_floor: None,
        seed: cfg.seed,
    };
    let x0 = random_block(n, lob_cfg.block_size, cfg.seed);
    let result = lobpcg(&a, &identity, &t, x0, &lob_cfg)?;
    timings.solve_s = clock.elapsed().as_secs_f64();

    let (x, lambda) = unit_rayleigh(s, &result.vectors.column(0).clone_owned());
    timings.total_s = start.elapsed().as_secs_f64();
    if !(lambda < 0.0) {
        return Err(VerifyError::Inconclusive {
            lambda,
            iterations: result.iterations,
        });
    }
    Ok(VerificationReport {
        outcome: VerificationOutcome::NegativeCurvature {
            lambda,
            x,
            iterations: result.iterations,
            matvecs: a.count(),
        },
        eta,
        iterations: result.iterations,
        matvecs: a.count(),
        precond_applications: if precond.is_some() { t.count() } else { 0 },
        converged: result.converged,
        ildl_stats,
        timings,
    })
}

/// Baseline: spectrally shifted Lanczos for `lambda_min(S)`; a certificate
/// when `lambda_min >= -eta`.
pub fn lanczos_verification(s: &SparseSymMatrix, eta: f64, cfg: &LanczosConfig) -> Result<VerificationReport, VerifyError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(VerifyError::InvalidEta(eta));
    }
    let start = Instant::now();
    let r = shifted_lanczos_min_eig(s, cfg)?;
    let (x, lambda) = unit_rayleigh(s, &r.vector);
    let elapsed = start.elapsed().as_secs_f64();
    let timings = VerifyTimings {
        solve_s: elapsed,
        total_s: elapsed,
        ..VerifyTimings::default()
    };
    let outcome = if lambda >= -eta {
        VerificationOutcome::Certificate { factor: None, eta }
    } else {
        VerificationOutcome::NegativeCurvature {
            lambda,
            x,
            iterations: r.total_matvecs,
            matvecs: r.total_matvecs,
        }
    };
    Ok(VerificationReport {
        outcome,
        eta,
        iterations: r.total_matvecs,
        matvecs: r.total_matvecs,
        precond_applications: 0,
        converged: r.converged,
        ildl_stats: None,
        timings,
    })
}

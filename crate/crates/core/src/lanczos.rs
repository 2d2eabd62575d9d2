//! Lanczos baselines for extremal eigenpairs.
//!
//! The basis is fully reorthogonalized (classical Gram-Schmidt, applied twice)
//! and thick-restarted: when it reaches `max_basis` vectors, the `keep` best
//! Ritz vectors are retained together with the next Lanczos vector. The
//! retained block is rotated so that the projected matrix stays tridiagonal
//! with the coupling on its last row.

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dense::{tridiagonal_eig, DenseError};
use crate::sparse::{CountingOperator, DenseBlock, LinearOperator, SpectralShift};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LanczosError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Smallest,
    Largest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosConfig {
    /// Relative residual tolerance, as in LOBPCG.
    pub tol: f64,
    /// Cap on operator applications.
    pub max_iter: usize,
    pub seed: u64,
    /// Absolute residual floor; `n * eps * ||A||_1` when `None`.
    pub abs_floor: Option<f64>,
    pub max_basis: usize,
    pub keep: usize,
    /// Steps between convergence checks.
    pub check_every: usize,
}

impl LanczosConfig {
    pub fn new(tol: f64, max_iter: usize, seed: u64) -> Self {
        Self {
            tol,
            max_iter,
            seed,
            abs_floor: None,
            max_basis: 250,
            keep: 10,
            check_every: 10,
        }
    }

    fn validate(&self) -> Result<(), LanczosError> {
        if !(self.tol > 0.0) {
            return Err(LanczosError::InvalidConfig(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(LanczosError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.max_basis < 3 || self.keep == 0 || self.keep + 1 >= self.max_basis {
            return Err(LanczosError::InvalidConfig(format!(
                "need 1 <= keep < max_basis - 1, got keep = {}, max_basis = {}",
                self.keep, self.max_basis
            )));
        }
        if self.check_every == 0 {
            return Err(LanczosError::InvalidConfig("check_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: DVector<f64>,
    /// Operator applications, including residual checks.
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub restarts: usize,
}

/// Lanczos factorization state: `basis` has `alpha.len()` columns, the last
/// of which is the current vector.
struct LanczosState {
    basis: DMatrix<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    restarts: usize,
}

impl LanczosState {
    fn len(&self) -> usize {
        self.alpha.len()
    }

    /// Orthogonalize `w` against the first `j` basis vectors, twice.
    fn reorthogonalize(&self, w: &mut DVector<f64>, j: usize) {
        for _ in 0..2 {
            let v = self.basis.columns(0, j);
            let h = v.tr_mul(w);
            *w -= v * h;
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let nrm = v.norm();
    v /= nrm;
    v
}

/// Run Lanczos for the largest eigenvalue of `sign * A`; `accept(theta, r)`
/// decides convergence for a Ritz value `theta` of `A` (not `sign * A`).
fn lanczos_largest(
    a: &dyn LinearOperator,
    sign: f64,
    cfg: &LanczosConfig,
    accept: &dyn Fn(f64, f64) -> bool,
) -> Result<LanczosResult, LanczosError> {
    cfg.validate()?;
    let n = a.dim();
    if n == 0 {
        return Err(LanczosError::InvalidConfig("empty operator".into()));
    }
    let max_basis = cfg.max_basis.min(n);
    let keep = cfg.keep.min(max_basis.saturating_sub(2)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let op = |x: &DVector<f64>| -> DVector<f64> {
        let block = DenseBlock::from_column_slice(n, 1, x.as_slice());
        DVector::from_column_slice(a.apply(&block).as_slice()) * sign
    };

    let mut state = LanczosState {
        basis: DMatrix::zeros(n, max_basis + 1),
        alpha: Vec::with_capacity(max_basis),
        beta: Vec::with_capacity(max_basis),
        restarts: 0,
    };
    state.basis.set_column(0, &random_unit(n, &mut rng));
    state.alpha.push(f64::NAN);
    let mut matvecs = 0;
    let mut since_check = 0;
    let mut best: Option<LanczosResult> = None;

    loop {
        // Extend by one step from the current (last) basis vector.
        let j = state.len() - 1;
        let v = state.basis.column(j).clone_owned();
        let mut w = op(&v);
        matvecs += 1;
        since_check += 1;
        let alpha = v.dot(&w);
        state.alpha[j] = alpha;
        w.axpy(-alpha, &v, 1.0);
        if j > 0 {
            let prev = state.basis.column(j - 1).clone_owned();
            w.axpy(-state.beta[j - 1], &prev, 1.0);
        }
        state.reorthogonalize(&mut w, j + 1);
        let beta = w.norm();
        let scale = state.alpha.iter().fold(0.0_f64, |m, a| m.max(a.abs())).max(f64::MIN_POSITIVE);
        let invariant = beta <= f64::EPSILON * scale * (n as f64).sqrt();

        let full = state.len() == max_basis;
        let out_of_budget = matvecs >= cfg.max_iter;
        if since_check >= cfg.check_every || full || invariant || out_of_budget || state.len() == n {
            since_check = 0;
            // Track only the last row of the eigenvector matrix.
            let p = state.len();
            let mut z = DMatrix::zeros(1, p);
            z[(0, p - 1)] = 1.0;
            let theta = tridiagonal_eig(&state.alpha, &state.beta, &mut z)?;
            let target = theta[p - 1];
            let estimate = beta * z[(0, p - 1)].abs();
            if accept(sign * target, estimate) || invariant || out_of_budget {
                let (x, value) = ritz_vector(&state, p - 1)?;
                let ax = op(&x);
                matvecs += 1;
                let residual = (&ax - &x * value).norm();
                let result = LanczosResult {
                    value: sign * value,
                    vector: x,
                    iterations: matvecs,
                    residual_norm: residual,
                    converged: accept(sign * value, residual),
                    restarts: state.restarts,
                };
                if result.converged || matvecs >= cfg.max_iter {
                    return Ok(result);
                }
                best = Some(result);
            }
        }
        if matvecs >= cfg.max_iter {
            return Ok(best.expect("budget exhaustion always records a result"));
        }

        if invariant {
            // The Krylov space is invariant; continue from a fresh direction.
            let mut fresh = random_unit(n, &mut rng);
            state.reorthogonalize(&mut fresh, j + 1);
            let nrm = fresh.norm();
            if nrm == 0.0 || state.len() >= n {
                return Ok(best.expect("an invariant subspace always triggers a check"));
            }
            fresh /= nrm;
            if state.len() == max_basis {
                thick_restart(&mut state, keep, 0.0, &fresh)?;
            } else {
                state.beta.push(0.0);
                state.basis.set_column(j + 1, &fresh);
                state.alpha.push(f64::NAN);
            }
            continue;
        }
        let next = w / beta;
        if state.len() == max_basis {
            thick_restart(&mut state, keep, beta, &next)?;
        } else {
            state.beta.push(beta);
            state.basis.set_column(j + 1, &next);
            state.alpha.push(f64::NAN);
        }
    }
}

/// Ritz vector for eigenvalue index `idx` (ascending) of the current
/// tridiagonal matrix.
fn ritz_vector(state: &LanczosState, idx: usize) -> Result<(DVector<f64>, f64), LanczosError> {
    let p = state.len();
    let mut z = DMatrix::identity(p, p);
    let theta = tridiagonal_eig(&state.alpha, &state.beta, &mut z)?;
    let mut x = state.basis.columns(0, p) * z.column(idx);
    let nrm = x.norm();
    x /= nrm;
    Ok((x, theta[idx]))
}

/// Keep the `keep` largest Ritz vectors plus `next`, which is coupled to
/// them with weight `beta`.
fn thick_restart(state: &mut LanczosState, keep: usize, beta: f64, next: &DVector<f64>) -> Result<(), LanczosError> {
    let p = state.len();
    let mut z = DMatrix::identity(p, p);
    let theta = tridiagonal_eig(&state.alpha, &state.beta, &mut z)?;
    let kept: Vec<usize> = (p - keep..p).collect();

    // Arrowhead [[0, b^T], [b, diag(theta)]] with b_i = beta * z[p-1, i],
    // reduced to tridiagonal form with the coupling row fixed first.
    let k = kept.len();
    let mut arrow = DMatrix::zeros(k + 1, k + 1);
    for (c, &i) in kept.iter().enumerate() {
        arrow[(c + 1, c + 1)] = theta[i];
        arrow[(c + 1, 0)] = beta * z[(p - 1, i)];
        arrow[(0, c + 1)] = beta * z[(p - 1, i)];
    }
    let (q, diag, off) = SymmetricTridiagonal::new(arrow).unpack();

    // New basis in reversed order: column m is Y q[:, k - m], then `next`.
    let zk = z.select_columns(&kept);
    let mut coeffs = DMatrix::zeros(p, k);
    for m in 0..k {
        let qcol = q.column(k - m).rows(1, k).clone_owned();
        coeffs.set_column(m, &(&zk * qcol));
    }
    let mut alpha: Vec<f64> = (0..k).map(|m| diag[k - m]).collect();
    // off[i] couples q-columns i and i + 1; new couplings run m -> m + 1.
    let mut couple: Vec<f64> = (0..k).map(|m| off[k - m - 1]).collect();
    let mut signs = vec![1.0; k];
    for m in (0..k).rev() {
        if couple[m] < 0.0 {
            signs[m] = -1.0;
            couple[m] = -couple[m];
            if m > 0 {
                couple[m - 1] = -couple[m - 1];
            }
        }
    }
    let new_basis = state.basis.columns(0, p) * &coeffs;
    for m in 0..k {
        state.basis.set_column(m, &(new_basis.column(m) * signs[m]));
    }
    state.basis.set_column(k, next);
    alpha.push(f64::NAN);
    state.alpha = alpha;
    state.beta = couple;
    state.restarts += 1;
    Ok(())
}

fn default_floor(a: &dyn LinearOperator, cfg: &LanczosConfig) -> f64 {
    cfg.abs_floor
        .unwrap_or_else(|| a.dim() as f64 * f64::EPSILON * a.norm1_estimate())
}

/// Extremal eigenpair with `||A x - theta x|| <= max(tol * |theta|, floor)`.
pub fn lanczos_extremal(a: &dyn LinearOperator, which: Which, cfg: &LanczosConfig) -> Result<LanczosResult, LanczosError> {
    let floor = default_floor(a, cfg);
    let tol = cfg.tol;
    let accept = move |theta: f64, r: f64| r <= (tol * theta.abs()).max(floor);
    let sign = match which {
        Which::Largest => 1.0,
        Which::Smallest => -1.0,
    };
    lanczos_largest(a, sign, cfg, &accept)
}

#[derive(Debug, Clone)]
pub struct ShiftedLanczosResult {
    pub lambda_min: f64,
    pub vector: DVector<f64>,
    pub sigma: f64,
    /// Applications of `S` across both phases.
    pub total_matvecs: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub phase1: LanczosResult,
}

/// Smallest eigenpair of `S` by shifting: estimate `lambda_max`, set
/// `sigma = theta + 0.01 |theta| + floor`, then find the dominant eigenpair
/// of `sigma I - S`.
///
/// Phase 2 uses the residual test relative to `lambda = sigma - theta`.
pub fn shifted_lanczos_min_eig(s: &dyn LinearOperator, cfg: &LanczosConfig) -> Result<ShiftedLanczosResult, LanczosError> {
    let counted = CountingOperator::new(s);
    let floor = default_floor(s, cfg);
    let phase1 = lanczos_extremal(&counted, Which::Largest, &LanczosConfig { abs_floor: Some(floor), ..cfg.clone() })?;
    let sigma = phase1.value + 0.01 * phase1.value.abs() + floor;

    let shifted = SpectralShift::new(&counted, sigma);
    let tol = cfg.tol;
    let accept = move |theta: f64, r: f64| r <= (tol * (sigma - theta).abs()).max(floor);
    let budget = cfg.max_iter.saturating_sub(phase1.iterations).max(1);
    let phase2_cfg = LanczosConfig {
        max_iter: budget,
        seed: cfg.seed.wrapping_add(1),
        ..cfg.clone()
    };
    let phase2 = lanczos_largest(&shifted, 1.0, &phase2_cfg, &accept)?;
    Ok(ShiftedLanczosResult {
        lambda_min: sigma - phase2.value,
        vector: phase2.vector,
        sigma,
        total_matvecs: counted.count(),
        residual_norm: phase2.residual_norm,
        converged: phase1.converged && phase2.converged,
        phase1,
    })
}

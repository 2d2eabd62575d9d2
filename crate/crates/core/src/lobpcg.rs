//! Locally optimal block preconditioned conjugate gradient (LOBPCG).
//!
//! Computes the `k` algebraically smallest eigenpairs of `A x = lambda B x`
//! with a block of `m >= k` iterates. Each iteration preconditions the
//! residuals (`W = T R`), forms the search basis `S = [X W P]`, and takes the
//! Rayleigh-Ritz minimizer over it. `P` holds the previous step directions.
//!
//! Before the projection, `W` and `P` are B-orthonormalized against `X` (and
//! `P` against `W`); this leaves `span(S)` unchanged apart from numerically
//! dependent columns, which are dropped. If the projected B-Gram matrix still
//! fails to factor, the offending column is removed and the projection is
//! retried.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::rayleigh_ritz::{rayleigh_ritz_projected, RayleighRitz, RitzError};
use crate::sparse::{DenseBlock, LinearOperator};

/// Columns whose B-norm shrinks below this fraction during
/// orthogonalization are treated as dependent and dropped.
const DROP_RTOL: f64 = 1e-10;
const MAX_BASIS_RETRIES: usize = 32;
/// Panels whose columns were scaled up by more than this during
/// orthonormalization get fresh operator images: the recurrence error in the
/// carried images grows by the same factor.
const STALE_GROWTH: f64 = 1e2;
/// Fresh images of `X` are recomputed this often.
const REFRESH_EVERY: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LobpcgError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: operators are {n}, initial block is {rows}x{cols}")]
    DimensionMismatch { n: usize, rows: usize, cols: usize },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobpcgConfig {
    /// Block size `m`.
    pub block_size: usize,
    /// Number of wanted pairs `k <= m`.
    pub n_wanted: usize,
    /// Relative residual tolerance: pair `i` has converged when
    /// `||A x_i - theta_i B x_i|| <= max(tol * |theta_i|, floor)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Absolute residual floor; `n * eps * ||A||_1` when `None`.
    pub abs_floor: Option<f64>,
    /// Seed for columns regenerated after a breakdown.
    pub seed: u64,
}

impl LobpcgConfig {
    /// Defaults for `k` wanted pairs: block size `k + 4`, `tol = 1e-2`.
    pub fn new(n_wanted: usize) -> Self {
        Self {
            block_size: n_wanted + 4,
            n_wanted,
            tol: 1e-2,
            max_iter: 1000,
            abs_floor: None,
            seed: 0,
        }
    }

    pub fn with_block_size(mut self, m: usize) -> Self {
        self.block_size = m;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<(), LobpcgError> {
        if self.n_wanted == 0 || self.n_wanted > self.block_size {
            return Err(LobpcgError::InvalidConfig(format!(
                "need 1 <= k <= m, got k = {}, m = {}",
                self.n_wanted, self.block_size
            )));
        }
        if !(self.tol > 0.0) {
            return Err(LobpcgError::InvalidConfig(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(LobpcgError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Ritz values, ascending, length `k`.
    pub values: Vec<f64>,
    /// Ritz vectors (`n x k`), B-orthonormal.
    pub vectors: DenseBlock,
    pub iterations: usize,
    /// `||A x_i - theta_i B x_i||`, recomputed from fresh operator products.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
    /// Smallest Ritz value after each iteration.
    pub history: Vec<f64>,
}

/// Block with its (optional) A-image and B-image.
struct Panel {
    v: DenseBlock,
    a: Option<DenseBlock>,
    b: DenseBlock,
}

impl Panel {
    fn ncols(&self) -> usize {
        self.v.ncols()
    }

    fn select(&self, cols: &[usize]) -> Panel {
        Panel {
            v: self.v.select_columns(cols),
            a: self.a.as_ref().map(|a| a.select_columns(cols)),
            b: self.b.select_columns(cols),
        }
    }
}

/// Matrix of i.i.d. standard normal entries.
pub fn random_block(n: usize, m: usize, seed: u64) -> DenseBlock {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseBlock::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng))
}

fn hcat(blocks: &[&DenseBlock]) -> DenseBlock {
    let n = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DenseBlock::zeros(n, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

fn col_dot(x: &DenseBlock, i: usize, y: &DenseBlock, j: usize) -> f64 {
    x.column(i).dot(&y.column(j))
}

/// B-orthonormalize `t` against the (B-orthonormal) panels in `against`, then
/// within itself. Columns that lose all but `DROP_RTOL` of their B-norm are
/// dropped. Also returns the largest factor by which a kept column was
/// rescaled.
fn orthonormalize(mut t: Panel, against: &[&Panel]) -> (Panel, f64) {
    let k = t.ncols();
    let norm0: Vec<f64> = (0..k).map(|j| col_dot(&t.v, j, &t.b, j).max(0.0).sqrt()).collect();

    for _ in 0..2 {
        for q in against {
            if q.ncols() == 0 {
                continue;
            }
            let coef = q.b.transpose() * &t.v;
            t.v -= &q.v * &coef;
            t.b -= &q.b * &coef;
            if let (Some(ta), Some(qa)) = (t.a.as_mut(), q.a.as_ref()) {
                *ta -= qa * &coef;
            }
        }
    }

    let mut keep: Vec<usize> = Vec::with_capacity(k);
    let mut growth = 1.0_f64;
    for j in 0..k {
        for _ in 0..2 {
            for &i in &keep {
                let c = col_dot(&t.b, i, &t.v, j);
                let (vi, bi) = (t.v.column(i).clone_owned(), t.b.column(i).clone_owned());
                t.v.column_mut(j).axpy(-c, &vi, 1.0);
                t.b.column_mut(j).axpy(-c, &bi, 1.0);
                if let Some(ta) = t.a.as_mut() {
                    let ai = ta.column(i).clone_owned();
                    ta.column_mut(j).axpy(-c, &ai, 1.0);
                }
            }
        }
        let nrm = col_dot(&t.v, j, &t.b, j).max(0.0).sqrt();
        if nrm > 0.0 && nrm > DROP_RTOL * norm0[j] && nrm.is_finite() {
            t.v.column_mut(j).scale_mut(1.0 / nrm);
            t.b.column_mut(j).scale_mut(1.0 / nrm);
            if let Some(ta) = t.a.as_mut() {
                ta.column_mut(j).scale_mut(1.0 / nrm);
            }
            growth = growth.max(norm0[j] / nrm);
            keep.push(j);
        }
    }
    if keep.len() == k {
        (t, growth)
    } else {
        (t.select(&keep), growth)
    }
}

/// Make `x` a full-rank B-orthonormal block, replacing dependent columns with
/// random ones. Returns the panel with fresh A- and B-images.
fn restore_block(
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    x: DenseBlock,
    rng: &mut ChaCha8Rng,
) -> Result<Panel, LobpcgError> {
    let (n, m) = x.shape();
    let mut v = x;
    for _ in 0..MAX_BASIS_RETRIES {
        let bv = b.apply(&v);
        let (p, _) = orthonormalize(Panel { v: v.clone(), a: None, b: bv }, &[]);
        if p.ncols() == m {
            let av = a.apply(&p.v);
            return Ok(Panel { v: p.v, a: Some(av), b: p.b });
        }
        let fresh = DenseBlock::from_fn(n, m - p.ncols(), |_, _| StandardNormal.sample(rng));
        v = hcat(&[&p.v, &fresh]);
    }
    Err(LobpcgError::NumericalBreakdown("could not build a full-rank initial block".into()))
}

fn residual_norms(r: &DenseBlock) -> Vec<f64> {
    r.column_iter().map(|c| c.norm()).collect()
}

fn residuals(ax: &DenseBlock, bx: &DenseBlock, theta: &[f64]) -> DenseBlock {
    let mut r = ax.clone();
    for (j, &t) in theta.iter().enumerate() {
        r.column_mut(j).axpy(-t, &bx.column(j), 1.0);
    }
    r
}

/// Compute the `cfg.n_wanted` smallest eigenpairs of `A x = lambda B x`.
///
/// `x0` supplies the `m` starting vectors. Reaching `max_iter` is not an
/// error: the best estimates are returned with `converged == false`.
pub fn lobpcg(
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    t: &dyn LinearOperator,
    x0: DenseBlock,
    cfg: &LobpcgConfig,
) -> Result<EigResult, LobpcgError> {
    cfg.validate()?;
    let n = a.dim();
    let (m, k) = (cfg.block_size, cfg.n_wanted);
    if b.dim() != n || t.dim() != n || x0.nrows() != n || x0.ncols() != m {
        return Err(LobpcgError::DimensionMismatch {
            n,
            rows: x0.nrows(),
            cols: x0.ncols(),
        });
    }
    if m > n {
        return Err(LobpcgError::InvalidConfig(format!("block size {m} exceeds dimension {n}")));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(LobpcgError::InvalidConfig("initial block has non-finite entries".into()));
    }
    let floor = cfg
        .abs_floor
        .unwrap_or_else(|| n as f64 * f64::EPSILON * a.norm1_estimate());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_10bc);

    // B-orthonormalize the initial block through Rayleigh-Ritz.
    let mut x = restore_block(a, b, x0, &mut rng)?;
    let mut theta = {
        let rr = project(&x.v, x.a.as_ref().unwrap(), &x.b)
            .map_err(|e| LobpcgError::NumericalBreakdown(e.to_string()))?;
        x = combine(&x, &rr.coeffs, 0, m);
        rr.values.as_slice()[..m].to_vec()
    };
    let mut r = residuals(x.a.as_ref().unwrap(), &x.b, &theta);
    let mut p: Option<Panel> = None;
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut retries = 0;

    let converged_mask = |r: &DenseBlock, theta: &[f64]| -> Vec<bool> {
        residual_norms(r)
            .iter()
            .zip(theta)
            .map(|(&rn, &th)| rn <= (cfg.tol * th.abs()).max(floor))
            .collect()
    };

    let converged = loop {
        let mask = converged_mask(&r, &theta);
        if mask[..k].iter().all(|&c| c) {
            // Confirm against fresh products; recurrences drift slowly.
            x.a = Some(a.apply(&x.v));
            x.b = b.apply(&x.v);
            r = residuals(x.a.as_ref().unwrap(), &x.b, &theta);
            if converged_mask(&r, &theta)[..k].iter().all(|&c| c) {
                break true;
            }
        }
        if iterations == cfg.max_iter {
            break false;
        }
        iterations += 1;

        // Soft locking: converged wanted pairs get no new direction.
        let mask = converged_mask(&r, &theta);
        let active: Vec<usize> = (0..m).filter(|&i| !(i < k && mask[i])).collect();

        let wv = t.apply(&r.select_columns(&active));
        let wb = b.apply(&wv);
        let (mut w, growth) = orthonormalize(Panel { v: wv, a: None, b: wb }, &[&x]);
        if w.ncols() > 0 {
            w.a = Some(a.apply(&w.v));
            if growth > STALE_GROWTH {
                w.b = b.apply(&w.v);
            }
        }
        let mut pp = p.take().map(|p| orthonormalize(p, &[&x, &w])).and_then(|(mut p, growth)| {
            if p.ncols() == 0 {
                return None;
            }
            if growth > STALE_GROWTH {
                p.a = Some(a.apply(&p.v));
                p.b = b.apply(&p.v);
            }
            Some(p)
        });

        // Rayleigh-Ritz on S = [X W P], pruning dependent columns.
        let rr = loop {
            let s_v = hcat(&[&x.v, &w.v, pp.as_ref().map_or(&DenseBlock::zeros(n, 0), |p| &p.v)]);
            let s_a = hcat(&[
                x.a.as_ref().unwrap(),
                w.a.as_ref().unwrap_or(&DenseBlock::zeros(n, 0)),
                pp.as_ref().map_or(&DenseBlock::zeros(n, 0), |p| p.a.as_ref().unwrap()),
            ]);
            let s_b = hcat(&[&x.b, &w.b, pp.as_ref().map_or(&DenseBlock::zeros(n, 0), |p| &p.b)]);
            match project(&s_v, &s_a, &s_b) {
                Ok(rr) => break Some((rr, s_v, s_a, s_b)),
                Err(RitzError::BasisDegenerate { pivot }) => {
                    retries += 1;
                    if retries > MAX_BASIS_RETRIES * cfg.max_iter.max(1) {
                        return Err(LobpcgError::NumericalBreakdown("basis pruning did not recover".into()));
                    }
                    let nw = w.ncols();
                    if pivot >= m + nw {
                        let pp_ref = pp.as_ref().unwrap();
                        let keep: Vec<usize> = (0..pp_ref.ncols()).filter(|&j| j != pivot - m - nw).collect();
                        pp = Some(pp_ref.select(&keep)).filter(|p| p.ncols() > 0);
                    } else if pivot >= m {
                        let keep: Vec<usize> = (0..nw).filter(|&j| j != pivot - m).collect();
                        w = w.select(&keep);
                    } else {
                        break None;
                    }
                }
                Err(e) => return Err(LobpcgError::NumericalBreakdown(e.to_string())),
            }
        };
        let Some((rr, s_v, s_a, s_b)) = rr else {
            // X itself lost rank: rebuild it and start the step over.
            retries += 1;
            if retries > MAX_BASIS_RETRIES * cfg.max_iter.max(1) {
                return Err(LobpcgError::NumericalBreakdown("iterate block lost rank".into()));
            }
            x = restore_block(a, b, x.v, &mut rng)?;
            let rr = project(&x.v, x.a.as_ref().unwrap(), &x.b)
                .map_err(|e| LobpcgError::NumericalBreakdown(e.to_string()))?;
            x = combine(&x, &rr.coeffs, 0, m);
            theta = rr.values.as_slice()[..m].to_vec();
            r = residuals(x.a.as_ref().unwrap(), &x.b, &theta);
            continue;
        };

        if rr.values.iter().any(|v| !v.is_finite()) {
            return Err(LobpcgError::NumericalBreakdown("non-finite Ritz values".into()));
        }
        let s = Panel { v: s_v, a: Some(s_a), b: s_b };
        let cx = rr.coeffs.columns(0, m).clone_owned();
        let new_x = Panel {
            v: &s.v * &cx,
            a: Some(s.a.as_ref().unwrap() * &cx),
            b: &s.b * &cx,
        };
        let total = s.ncols();
        p = if total > m {
            let tail = DMatrix::from_fn(total - m, active.len(), |i, j| rr.coeffs[(m + i, active[j])]);
            Some(Panel {
                v: s.v.columns(m, total - m) * &tail,
                a: Some(s.a.as_ref().unwrap().columns(m, total - m) * &tail),
                b: s.b.columns(m, total - m) * &tail,
            })
        } else {
            None
        };
        x = new_x;
        if iterations % REFRESH_EVERY == 0 {
            x.a = Some(a.apply(&x.v));
            x.b = b.apply(&x.v);
        }
        theta = rr.values.as_slice()[..m].to_vec();
        r = residuals(x.a.as_ref().unwrap(), &x.b, &theta);
        history.push(theta[0]);
    };

    if !converged {
        x.a = Some(a.apply(&x.v));
        x.b = b.apply(&x.v);
    }
    // Report Rayleigh quotients of the returned vectors with exact residuals.
    let ax = x.a.as_ref().unwrap();
    let mut pairs: Vec<(f64, usize)> = (0..k)
        .map(|j| (col_dot(&x.v, j, ax, j) / col_dot(&x.v, j, &x.b, j), j))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let order: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vectors = x.v.select_columns(&order);
    let res = residuals(&ax.select_columns(&order), &x.b.select_columns(&order), &values);
    Ok(EigResult {
        values,
        vectors,
        iterations,
        residual_norms: residual_norms(&res),
        converged,
        history,
    })
}

fn project(v: &DenseBlock, av: &DenseBlock, bv: &DenseBlock) -> Result<RayleighRitz, RitzError> {
    let ga = v.transpose() * av;
    let gb = v.transpose() * bv;
    rayleigh_ritz_projected(&ga, &gb)
}

fn combine(p: &Panel, coeffs: &DMatrix<f64>, start: usize, cols: usize) -> Panel {
    let c = coeffs.columns(start, cols);
    Panel {
        v: &p.v * c,
        a: p.a.as_ref().map(|a| a * c),
        b: &p.b * c,
    }
}

/// Residual norms `||A x_i - theta_i B x_i||` computed from scratch.
pub fn exact_residuals(a: &dyn LinearOperator, b: &dyn LinearOperator, values: &[f64], vectors: &DenseBlock) -> Vec<f64> {
    let r = residuals(&a.apply(vectors), &b.apply(vectors), values);
    residual_norms(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{IdentityOperator, SparseSymMatrix};

    #[test]
    fn diagonal_matrix_smallest_pair() {
        let diag: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let a = SparseSymMatrix::from_diagonal(&diag);
        let id = IdentityOperator::new(10);
        let cfg = LobpcgConfig::new(1).with_block_size(2);
        let res = lobpcg(&a, &id, &id, random_block(10, 2, 7), &cfg).unwrap();
        assert!(res.converged);
        assert!((res.values[0] - 1.0).abs() <= 1e-2);
        let x = res.vectors.column(0);
        assert!((x[0].abs() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn config_validation() {
        let a = SparseSymMatrix::identity(4);
        let id = IdentityOperator::new(4);
        let bad = LobpcgConfig::new(3).with_block_size(2);
        assert!(matches!(
            lobpcg(&a, &id, &id, random_block(4, 2, 0), &bad),
            Err(LobpcgError::InvalidConfig(_))
        ));
        let cfg = LobpcgConfig::new(1).with_block_size(2);
        assert!(matches!(
            lobpcg(&a, &id, &id, random_block(4, 3, 0), &cfg),
            Err(LobpcgError::DimensionMismatch { .. })
        ));
        let zero_tol = LobpcgConfig::new(1).with_block_size(2).with_tol(0.0);
        assert!(lobpcg(&a, &id, &id, random_block(4, 2, 0), &zero_tol).is_err());
    }

    #[test]
    fn rank_deficient_start_is_repaired() {
        let diag: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let a = SparseSymMatrix::from_diagonal(&diag);
        let id = IdentityOperator::new(8);
        let mut x0 = random_block(8, 3, 1);
        let c0 = x0.column(0).clone_owned();
        x0.set_column(1, &c0);
        let cfg = LobpcgConfig::new(1).with_block_size(3).with_tol(1e-10);
        let res = lobpcg(&a, &id, &id, x0, &cfg).unwrap();
        assert!(res.converged);
        assert!((res.values[0] + 3.5).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_returns_unconverged() {
        let diag: Vec<f64> = (0..200).map(|i| 1.0 + i as f64 * 1e-3).collect();
        let a = SparseSymMatrix::from_diagonal(&diag);
        let id = IdentityOperator::new(200);
        let cfg = LobpcgConfig::new(1).with_block_size(1).with_tol(1e-14).with_max_iter(2);
        let res = lobpcg(&a, &id, &id, random_block(200, 1, 3), &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
        let exact = exact_residuals(&a, &id, &res.values, &res.vectors);
        assert!((exact[0] - res.residual_norms[0]).abs() <= 1e-12 * exact[0]);
    }
}

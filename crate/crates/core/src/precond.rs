//! Positive-definite preconditioner from an inertia-corrected `L D L^T`.
//!
//! `T = S P^T L^{-T} D^+ L^{-1} P S`, where `S` is the equilibration scaling
//! of the factorization and `D^+` replaces every eigenvalue of each pivot
//! block by the reciprocal of its magnitude. With an exact factorization,
//! every eigenvalue of `T A` is `+1` or `-1`.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dense::dense_sym_eig;
use crate::factor::{BlockDiagFactorization, PivotBlock, StrictLower};
use crate::sparse::{DenseBlock, LinearOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecondError {
    #[error("pivot block at position {position} is singular")]
    SingularBlock { position: usize },
    #[error("pivot block at position {position} has a non-finite entry")]
    NonFinite { position: usize },
}

/// `D^+ = Q diag(1 / |lambda|) Q^T` of a small symmetric block.
pub fn inertia_correct(d: &DMatrix<f64>) -> Result<DMatrix<f64>, PrecondError> {
    let (q, inv) = corrected_eig(d, 0)?;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * inv[j]);
    Ok(&scaled * q.transpose())
}

fn corrected_eig(d: &DMatrix<f64>, position: usize) -> Result<(DMatrix<f64>, Vec<f64>), PrecondError> {
    if d.iter().any(|v| !v.is_finite()) {
        return Err(PrecondError::NonFinite { position });
    }
    let eig = dense_sym_eig(d).map_err(|_| PrecondError::NonFinite { position })?;
    let inv: Vec<f64> = eig.values.iter().map(|l| 1.0 / l.abs()).collect();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(PrecondError::SingularBlock { position });
    }
    Ok((eig.vectors, inv))
}

#[derive(Debug, Clone)]
enum CorrectedBlock {
    One { pos: usize, inv: f64 },
    Two { pos: usize, q: [[f64; 2]; 2], inv: [f64; 2] },
}

/// The applicable operator `T`; never formed densely.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    perm: Vec<usize>,
    scaling: Vec<f64>,
    l: Arc<StrictLower>,
    blocks: Vec<CorrectedBlock>,
}

impl Preconditioner {
    pub fn new(f: &BlockDiagFactorization) -> Result<Self, PrecondError> {
        let mut blocks = Vec::with_capacity(f.blocks().len());
        for b in f.blocks() {
            blocks.push(match *b {
                PivotBlock::One { pos, d } => {
                    let inv = 1.0 / d.abs();
                    if !d.is_finite() {
                        return Err(PrecondError::NonFinite { position: pos });
                    }
                    if !inv.is_finite() {
                        return Err(PrecondError::SingularBlock { position: pos });
                    }
                    CorrectedBlock::One { pos, inv }
                }
                PivotBlock::Two { pos, .. } => {
                    let (q, inv) = corrected_eig(&b.to_dense(), pos)?;
                    CorrectedBlock::Two {
                        pos,
                        q: [[q[(0, 0)], q[(0, 1)]], [q[(1, 0)], q[(1, 1)]]],
                        inv: [inv[0], inv[1]],
                    }
                }
            });
        }
        Ok(Self {
            perm: f.perm().to_vec(),
            scaling: f.scaling().to_vec(),
            l: Arc::clone(f.l()),
            blocks,
        })
    }

    /// Dense `D^+` in permuted coordinates.
    pub fn d_plus_dense(&self) -> DMatrix<f64> {
        let n = self.perm.len();
        let mut out = DMatrix::zeros(n, n);
        for b in &self.blocks {
            match *b {
                CorrectedBlock::One { pos, inv } => out[(pos, pos)] = inv,
                CorrectedBlock::Two { pos, q, inv } => {
                    for i in 0..2 {
                        for j in 0..2 {
                            out[(pos + i, pos + j)] = q[i][0] * inv[0] * q[j][0] + q[i][1] * inv[1] * q[j][1];
                        }
                    }
                }
            }
        }
        out
    }

    fn apply_vector(&self, r: &[f64], out: &mut [f64]) {
        let mut z: Vec<f64> = self.perm.iter().map(|&i| self.scaling[i] * r[i]).collect();
        self.l.solve_unit(&mut z);
        for b in &self.blocks {
            match *b {
                CorrectedBlock::One { pos, inv } => z[pos] *= inv,
                CorrectedBlock::Two { pos, q, inv } => {
                    let (a, c) = (z[pos], z[pos + 1]);
                    let t0 = inv[0] * (q[0][0] * a + q[1][0] * c);
                    let t1 = inv[1] * (q[0][1] * a + q[1][1] * c);
                    z[pos] = q[0][0] * t0 + q[0][1] * t1;
                    z[pos + 1] = q[1][0] * t0 + q[1][1] * t1;
                }
            }
        }
        self.l.solve_unit_transpose(&mut z);
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = self.scaling[i] * z[k];
        }
    }
}

impl LinearOperator for Preconditioner {
    fn dim(&self) -> usize {
        self.perm.len()
    }

    fn apply(&self, x: &DenseBlock) -> DenseBlock {
        assert_eq!(x.nrows(), self.dim(), "operator applied to a block of the wrong height");
        let mut y = DenseBlock::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            let mut out = vec![0.0; x.nrows()];
            self.apply_vector(&col, &mut out);
            y.column_mut(c).copy_from_slice(&out);
        }
        y
    }
}

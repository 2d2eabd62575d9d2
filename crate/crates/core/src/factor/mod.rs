//! Sparse factorizations of symmetric matrices.
//!
//! Both factorizations order the matrix with approximate minimum degree on its
//! full pattern. Permutations use the convention `perm[k] = old index at
//! position k`, matching [`SparseSymMatrix::permute`].

mod cholesky;
mod ildl;

pub use cholesky::{attempt_cholesky, CholeskyFactor, CholeskyOutcome};
pub use ildl::{default_fill_limit, equilibrate, ildl, BlockDiagFactorization, IldlStats, PivotBlock, BK_ALPHA};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::sparse::SparseSymMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("non-finite value produced at position {position}")]
    NonFinite { position: usize },
    #[error("no admissible pivot at position {position} (pivot {pivot:e})")]
    PivotBreakdown { position: usize, pivot: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Approximate-minimum-degree ordering of the pattern of `m`.
pub fn amd_ordering(m: &SparseSymMatrix) -> Vec<usize> {
    let n = m.dim();
    if n == 0 {
        return Vec::new();
    }
    // AMD ignores the diagonal, but the `amd` crate expects at least n
    // entries, so every diagonal is included in the pattern.
    let (full_ptr, full_rows, _) = m.to_full_csc();
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut rows = Vec::with_capacity(full_rows.len() + n);
    col_ptr.push(0);
    for j in 0..n {
        let col = &full_rows[full_ptr[j]..full_ptr[j + 1]];
        let split = col.partition_point(|&i| i < j);
        rows.extend_from_slice(&col[..split]);
        rows.push(j);
        rows.extend(col[split..].iter().copied().filter(|&i| i != j));
        col_ptr.push(rows.len());
    }
    match amd::order(n, &col_ptr, &rows, &amd::Control::default()) {
        Ok((perm, _, _)) => perm,
        // The full pattern is sorted and in range, so this is unreachable in
        // practice; fall back to the natural order rather than fail.
        Err(_) => (0..n).collect(),
    }
}

/// Strictly lower triangular sparse matrix in CSC form, rows ascending.
///
/// Used as the off-diagonal part of `L` in both `L L^T` and `L D L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrictLower {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl StrictLower {
    /// Assemble from per-column `(row, value)` lists. Rows must exceed the
    /// column index; they are sorted here.
    pub(crate) fn from_columns(n: usize, mut cols: Vec<Vec<(usize, f64)>>) -> Self {
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let nnz = cols.iter().map(Vec::len).sum();
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (j, col) in cols.iter_mut().enumerate() {
            col.sort_unstable_by_key(|e| e.0);
            for &(i, v) in col.iter() {
                debug_assert!(i > j && i < n);
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn max_column_nnz(&self) -> usize {
        (0..self.n).map(|j| self.col_ptr[j + 1] - self.col_ptr[j]).max().unwrap_or(0)
    }

    /// Solve `(I + L) y = x` in place.
    pub fn solve_unit(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    x[self.row_idx[p]] -= self.values[p] * xj;
                }
            }
        }
    }

    /// Solve `(I + L)^T y = x` in place.
    pub fn solve_unit_transpose(&self, x: &mut [f64]) {
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc -= self.values[p] * x[self.row_idx[p]];
            }
            x[j] = acc;
        }
    }

    /// Dense `L` with the given diagonal.
    pub fn to_dense_with_diagonal(&self, diag: &[f64]) -> DMatrix<f64> {
        let mut l = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag));
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                l[(i, j)] = v;
            }
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_a_permutation() {
        let m = SparseSymMatrix::from_triplets(
            5,
            &[(0, 0, 4.0), (1, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0), (4, 0, 1.0), (1, 1, 2.0), (2, 2, 2.0), (3, 3, 2.0), (4, 4, 2.0)],
        )
        .unwrap();
        let mut p = amd_ordering(&m);
        // The hub vertex should not be eliminated first.
        assert_ne!(p[0], 0);
        p.sort_unstable();
        assert_eq!(p, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn unit_solves_invert_the_factor() {
        let l = StrictLower::from_columns(3, vec![vec![(2, 0.5), (1, -2.0)], vec![(2, 3.0)], vec![]]);
        let dense = l.to_dense_with_diagonal(&[1.0; 3]);
        let b = [1.0, -1.0, 2.0];
        let mut x = b;
        l.solve_unit(&mut x);
        let back = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-14);
        }
        let mut y = b;
        l.solve_unit_transpose(&mut y);
        let back = dense.transpose() * nalgebra::DVector::from_column_slice(&y);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-14);
        }
    }
}

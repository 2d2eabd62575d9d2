//! Left-looking sparse Cholesky used as a positive-definiteness test.

use nalgebra::DMatrix;

use super::{amd_ordering, FactorError, StrictLower};
use crate::sparse::SparseSymMatrix;

/// `P M P^T = L L^T` with `L` lower triangular and a positive diagonal.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    perm: Vec<usize>,
    diag: Vec<f64>,
    lower: StrictLower,
}

#[derive(Debug, Clone)]
pub enum CholeskyOutcome {
    Factor(CholeskyFactor),
    /// The pivot at permuted position `column` fell below the threshold.
    Indefinite { column: usize, pivot: f64 },
}

impl CholeskyOutcome {
    pub fn is_factor(&self) -> bool {
        matches!(self, CholeskyOutcome::Factor(_))
    }
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `perm[k]` is the original index at position `k`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn lower(&self) -> &StrictLower {
        &self.lower
    }

    /// Nonzeros of `L` including the diagonal.
    pub fn nnz(&self) -> usize {
        self.lower.nnz() + self.diag.len()
    }

    /// `L^T P z`.
    pub fn lt_mul(&self, z: &[f64]) -> Vec<f64> {
        let pz: Vec<f64> = self.perm.iter().map(|&i| z[i]).collect();
        (0..self.dim())
            .map(|j| self.diag[j] * pz[j] + self.lower.column(j).map(|(i, v)| v * pz[i]).sum::<f64>())
            .collect()
    }

    /// `z^T M z` evaluated through the factor as `||L^T P z||^2`.
    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        self.lt_mul(z).iter().map(|v| v * v).sum()
    }

    /// Dense `L` in permuted coordinates.
    pub fn l_dense(&self) -> DMatrix<f64> {
        self.lower.to_dense_with_diagonal(&self.diag)
    }

    /// `P^T L L^T P` in original coordinates.
    pub fn reconstruct_dense(&self) -> DMatrix<f64> {
        let l = self.l_dense();
        let llt = &l * l.transpose();
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                out[(self.perm[a], self.perm[b])] = llt[(a, b)];
            }
        }
        out
    }
}

/// Attempt `P M P^T = L L^T`.
///
/// A pivot counts as positive when it exceeds `n * eps * max diag(P M P^T)`.
/// Failing that test is a normal outcome, reported with the permuted column.
/// An overflowing pivot is an error.
pub fn attempt_cholesky(m: &SparseSymMatrix) -> Result<CholeskyOutcome, FactorError> {
    let n = m.dim();
    let perm = amd_ordering(m);
    let a = m.permute(&perm);
    let max_diag = a.diagonal().into_iter().fold(0.0_f64, f64::max);
    let threshold = n as f64 * f64::EPSILON * max_diag;

    let (a_ptr, a_rows, a_vals) = (a.col_ptr(), a.row_indices(), a.values());
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut next = vec![0usize; n];
    let mut row_lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut diag = vec![0.0; n];

    let mut work = vec![0.0; n];
    let mut stamp = vec![usize::MAX; n];
    let mut pattern: Vec<usize> = Vec::new();

    for j in 0..n {
        pattern.clear();
        let mut touch = |i: usize, pattern: &mut Vec<usize>, work: &mut [f64]| {
            if stamp[i] != j {
                stamp[i] = j;
                work[i] = 0.0;
                if i != j {
                    pattern.push(i);
                }
            }
        };
        touch(j, &mut pattern, &mut work);
        for p in a_ptr[j]..a_ptr[j + 1] {
            let i = a_rows[p];
            touch(i, &mut pattern, &mut work);
            work[i] += a_vals[p];
        }
        for &k in &row_lists[j] {
            let col = &cols[k];
            let start = next[k];
            debug_assert_eq!(col[start].0, j);
            let ljk = col[start].1;
            next[k] += 1;
            // Column k holds only rows > k; `work[j]` gets the ljk^2 term.
            work[j] -= ljk * ljk;
            for &(i, v) in &col[start + 1..] {
                touch(i, &mut pattern, &mut work);
                work[i] -= v * ljk;
            }
        }
        let d = work[j];
        if d.is_nan() || d.is_infinite() {
            return Err(FactorError::NonFinite { position: j });
        }
        if !(d > threshold) {
            return Ok(CholeskyOutcome::Indefinite { column: j, pivot: d });
        }
        let sd = d.sqrt();
        diag[j] = sd;
        pattern.sort_unstable();
        let mut col = Vec::with_capacity(pattern.len());
        for &i in &pattern {
            let v = work[i] / sd;
            if v != 0.0 {
                col.push((i, v));
                row_lists[i].push(j);
            }
        }
        cols[j] = col;
    }
    Ok(CholeskyOutcome::Factor(CholeskyFactor {
        perm,
        diag,
        lower: StrictLower::from_columns(n, cols),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factor(m: &SparseSymMatrix) -> CholeskyFactor {
        match attempt_cholesky(m).unwrap() {
            CholeskyOutcome::Factor(f) => f,
            CholeskyOutcome::Indefinite { column, .. } => panic!("unexpected failure at {column}"),
        }
    }

    #[test]
    fn identity_factors_to_identity() {
        let f = factor(&SparseSymMatrix::identity(5));
        assert_eq!(f.lower().nnz(), 0);
        assert!(f.diagonal().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn negative_diagonal_is_reported_at_its_position() {
        let m = SparseSymMatrix::from_diagonal(&[1.0, 1.0, -1e-3]);
        match attempt_cholesky(&m).unwrap() {
            CholeskyOutcome::Indefinite { column, pivot } => {
                let f_perm = amd_ordering(&m);
                assert_eq!(f_perm[column], 2);
                assert_eq!(pivot, -1e-3);
            }
            CholeskyOutcome::Factor(_) => panic!("indefinite matrix factored"),
        }
    }

    #[test]
    fn tridiagonal_reconstruction() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 0.01 * i as f64));
            if i + 1 < n {
                t.push((i + 1, i, -1.0));
            }
        }
        let m = SparseSymMatrix::from_triplets(n, &t).unwrap();
        let f = factor(&m);
        let err = (f.reconstruct_dense() - m.to_dense()).norm();
        assert!(err <= 1e-12 * m.frobenius_norm(), "{err}");
        let z: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let zv = nalgebra::DVector::from_column_slice(&z);
        let direct = (zv.transpose() * m.to_dense() * &zv)[(0, 0)];
        assert!((f.quadratic_form(&z) - direct).abs() <= 1e-12 * direct.abs());
    }
}

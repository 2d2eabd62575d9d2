//! Rayleigh-Ritz projection of a symmetric pencil `(A, B)` onto a basis.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dense::{dense_cholesky, dense_sym_eig, DenseError};
use crate::sparse::{DenseBlock, LinearOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RitzError {
    /// The basis is numerically rank deficient; column `pivot` depends on the
    /// columns before it.
    #[error("basis is degenerate at column {pivot}")]
    BasisDegenerate { pivot: usize },
    #[error("projected matrices have mismatched shapes")]
    ShapeMismatch,
    #[error(transparent)]
    Dense(#[from] DenseError),
}

/// Ritz values `theta` (ascending) and coefficients `C` with
/// `C^T (S^T B S) C = I` and `C^T (S^T A S) C = diag(theta)`.
#[derive(Debug, Clone)]
pub struct RayleighRitz {
    pub values: DVector<f64>,
    pub coeffs: DMatrix<f64>,
}

/// Project `(A, B)` onto the columns of `basis`.
pub fn rayleigh_ritz(
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    basis: &DenseBlock,
) -> Result<RayleighRitz, RitzError> {
    let gram_a = basis.transpose() * a.apply(basis);
    let gram_b = basis.transpose() * b.apply(basis);
    rayleigh_ritz_projected(&gram_a, &gram_b)
}

/// Rayleigh-Ritz from precomputed Gram matrices `S^T A S` and `S^T B S`.
pub fn rayleigh_ritz_projected(gram_a: &DMatrix<f64>, gram_b: &DMatrix<f64>) -> Result<RayleighRitz, RitzError> {
    let k = gram_b.nrows();
    if gram_b.ncols() != k || gram_a.nrows() != k || gram_a.ncols() != k {
        return Err(RitzError::ShapeMismatch);
    }
    let gram_a = (gram_a + gram_a.transpose()) * 0.5;
    let gram_b = (gram_b + gram_b.transpose()) * 0.5;

    // D = diag(S^T B S)^{-1/2}; a zero column is clamped and left for the
    // Cholesky factorization to reject.
    let mut scale = DVector::zeros(k);
    for i in 0..k {
        let d = gram_b[(i, i)];
        if d < 0.0 || !d.is_finite() {
            return Err(RitzError::BasisDegenerate { pivot: i });
        }
        scale[i] = 1.0 / d.max(f64::EPSILON).sqrt();
    }
    let scaled_b = DMatrix::from_fn(k, k, |i, j| scale[i] * gram_b[(i, j)] * scale[j]);
    let scaled_a = DMatrix::from_fn(k, k, |i, j| scale[i] * gram_a[(i, j)] * scale[j]);

    // R^T R = D S^T B S D with R = L^T.
    let l = match dense_cholesky(&scaled_b) {
        Ok(l) => l,
        Err(DenseError::NotPositiveDefinite { pivot }) => return Err(RitzError::BasisDegenerate { pivot }),
        Err(e) => return Err(e.into()),
    };

    // R^{-T} (D S^T A S D) R^{-1} = L^{-1} (D S^T A S D) L^{-T}
    let left = l
        .solve_lower_triangular(&scaled_a)
        .ok_or(RitzError::BasisDegenerate { pivot: 0 })?;
    let projected = l
        .solve_lower_triangular(&left.transpose())
        .ok_or(RitzError::BasisDegenerate { pivot: 0 })?;
    let eig = dense_sym_eig(&projected)?;

    // C = D R^{-1} Q = D L^{-T} Q
    let lt = l.transpose();
    let rq = lt
        .solve_upper_triangular(&eig.vectors)
        .ok_or(RitzError::BasisDegenerate { pivot: 0 })?;
    let coeffs = DMatrix::from_fn(k, k, |i, j| scale[i] * rq[(i, j)]);
    Ok(RayleighRitz {
        values: eig.values,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{IdentityOperator, SparseSymMatrix};

    #[test]
    fn eigenbasis_gives_exact_values() {
        let a = SparseSymMatrix::from_diagonal(&[1.0, 2.0]);
        let id = IdentityOperator::new(2);
        let rr = rayleigh_ritz(&a, &id, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(rr.values.as_slice(), &[1.0, 2.0]);
        for v in rr.coeffs.iter() {
            assert!(v.abs() == 0.0 || (v.abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_column_is_rayleigh_quotient() {
        let a = SparseSymMatrix::from_triplets(3, &[(0, 0, 2.0), (1, 0, 1.0), (2, 2, -3.0)]).unwrap();
        let x = DMatrix::from_column_slice(3, 1, &[0.6, 0.0, 0.8]);
        let rr = rayleigh_ritz(&a, &IdentityOperator::new(3), &x).unwrap();
        let q = (x.transpose() * a.to_dense() * &x)[(0, 0)];
        assert!((rr.values[0] - q).abs() < 1e-15);
        assert!((rr.coeffs[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dependent_columns_are_reported() {
        let a = SparseSymMatrix::identity(3);
        let s = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let err = rayleigh_ritz(&a, &IdentityOperator::new(3), &s).unwrap_err();
        assert_eq!(err, RitzError::BasisDegenerate { pivot: 1 });

        let zero = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let err = rayleigh_ritz(&a, &IdentityOperator::new(3), &zero).unwrap_err();
        assert_eq!(err, RitzError::BasisDegenerate { pivot: 1 });
    }
}

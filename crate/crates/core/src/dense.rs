//! Small dense symmetric kernels.
//!
//! These run on projected matrices of dimension at most a few times the block
//! size, on the 1x1/2x2 pivot blocks, and on Lanczos tridiagonals.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenseError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not positive definite: pivot {pivot} failed")]
    NotPositiveDefinite { pivot: usize },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

/// Eigendecomposition `A = Q diag(values) Q^T` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct DenseSymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized as `(A + A^T) / 2`. Each eigenvector is signed so
/// that its largest-magnitude component is positive.
pub fn dense_sym_eig(a: &DMatrix<f64>) -> Result<DenseSymEig, DenseError> {
    let p = check_square(a)?;
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(p, p);

    let total = m.norm();
    if total > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..p)
                .flat_map(|j| (0..j).map(move |i| (i, j)))
                .map(|(i, j)| m[(i, j)] * m[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off <= f64::EPSILON * total * 1e-2 {
                break;
            }
            for q in 1..p {
                for r in 0..q {
                    let apq = m[(r, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(r, r)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut m, &mut v, r, q, c, s);
                }
            }
        }
        let off: f64 = (0..p)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off > 1e-10 * total {
            return Err(DenseError::NoConvergence);
        }
    }

    let diag: Vec<f64> = (0..p).map(|i| m[(i, i)]).collect();
    Ok(sorted_eig(&diag, &v))
}

/// Apply the Jacobi rotation annihilating `m[(r, q)]`.
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, r: usize, q: usize, c: f64, s: f64) {
    let p = m.nrows();
    for k in 0..p {
        let mkr = m[(k, r)];
        let mkq = m[(k, q)];
        m[(k, r)] = c * mkr - s * mkq;
        m[(k, q)] = s * mkr + c * mkq;
    }
    for k in 0..p {
        let mrk = m[(r, k)];
        let mqk = m[(q, k)];
        m[(r, k)] = c * mrk - s * mqk;
        m[(q, k)] = s * mrk + c * mqk;
    }
    m[(r, q)] = 0.0;
    m[(q, r)] = 0.0;
    for k in 0..p {
        let vkr = v[(k, r)];
        let vkq = v[(k, q)];
        v[(k, r)] = c * vkr - s * vkq;
        v[(k, q)] = s * vkr + c * vkq;
    }
}

fn sorted_eig(diag: &[f64], v: &DMatrix<f64>) -> DenseSymEig {
    let p = diag.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let values = DVector::from_iterator(p, order.iter().map(|&i| diag[i]));
    let mut vectors = DMatrix::zeros(v.nrows(), p);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let mut lead = 0;
        for k in 1..col.len() {
            if col[k].abs() > col[lead].abs() {
                lead = k;
            }
        }
        let sign = if !col.is_empty() && col[lead] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    DenseSymEig { values, vectors }
}

/// Dense Cholesky `A = L L^T` with `L` lower triangular.
///
/// Fails at the first pivot `<= p * eps * max(diag(A))`.
pub fn dense_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>, DenseError> {
    let p = check_square(a)?;
    let max_diag = (0..p).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let threshold = p as f64 * f64::EPSILON * max_diag;
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) {
            return Err(DenseError::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

fn check_square(a: &DMatrix<f64>) -> Result<usize, DenseError> {
    if a.nrows() != a.ncols() {
        return Err(DenseError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(DenseError::NonFinite);
    }
    Ok(a.nrows())
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL.
///
/// `diag` has length `p` and `off[i]` couples `i` and `i + 1`. The rotations
/// are accumulated into `z`, which must have `p` columns and any number of
/// rows: pass the identity for full eigenvectors, or a single row to track
/// only that row of the eigenvector matrix. On return the eigenvalues are
/// ascending and the columns of `z` are permuted to match.
pub fn tridiagonal_eig(diag: &[f64], off: &[f64], z: &mut DMatrix<f64>) -> Result<Vec<f64>, DenseError> {
    let p = diag.len();
    assert_eq!(z.ncols(), p, "accumulator must have one column per eigenvalue");
    assert!(off.len() + 1 >= p, "need p - 1 off-diagonal entries");
    if diag.iter().chain(off.iter()).any(|v| !v.is_finite()) {
        return Err(DenseError::NonFinite);
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; p];
    e[..p.saturating_sub(1)].copy_from_slice(&off[..p.saturating_sub(1)]);
    let rows = z.nrows();

    for l in 0..p {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < p {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(DenseError::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut pp) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= pp;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - pp;
                r = (d[i] - g) * s + 2.0 * c * b;
                pp = s * r;
                d[i + 1] = g + pp;
                g = c * r - b;
                for k in 0..rows {
                    let f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= pp;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let old = z.clone();
    for (dst, &src) in order.iter().enumerate() {
        z.set_column(dst, &old.column(src));
    }
    Ok(sorted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &DMatrix<f64>, e: &DenseSymEig) -> f64 {
        (a * &e.vectors - &e.vectors * DMatrix::from_diagonal(&e.values)).norm()
    }

    #[test]
    fn diagonal_input() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let e = dense_sym_eig(&a).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 3.0]);
        assert_eq!(e.vectors, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn swap_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = dense_sym_eig(&a).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vectors.column(0);
        let v1 = e.vectors.column(1);
        assert!((v0[0].abs() - h).abs() < 1e-15 && (v0[0] + v0[1]).abs() < 1e-15);
        assert!((v1[0] - h).abs() < 1e-15 && (v1[1] - h).abs() < 1e-15);
        assert!(residual(&a, &e) < 1e-14);
    }

    #[test]
    fn zero_and_one_by_one() {
        let e = dense_sym_eig(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values.as_slice(), &[0.0; 3]);
        let e = dense_sym_eig(&DMatrix::from_element(1, 1, -2.5)).unwrap();
        assert_eq!(e.values[0], -2.5);
        assert_eq!(e.vectors[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            dense_sym_eig(&DMatrix::zeros(2, 3)).unwrap_err(),
            DenseError::NotSquare { rows: 2, cols: 3 }
        );
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = f64::INFINITY;
        assert_eq!(dense_sym_eig(&a).unwrap_err(), DenseError::NonFinite);
    }

    #[test]
    fn cholesky_cases() {
        let l = dense_cholesky(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(l, DMatrix::identity(3, 3));

        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 2.0]);
        let l = dense_cholesky(&a).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]));

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(dense_cholesky(&a).unwrap_err(), DenseError::NotPositiveDefinite { pivot: 1 });

        assert_eq!(
            dense_cholesky(&DMatrix::zeros(2, 2)).unwrap_err(),
            DenseError::NotPositiveDefinite { pivot: 0 }
        );
    }

    #[test]
    fn tridiagonal_matches_jacobi() {
        let d = [2.0, -1.0, 0.5, 3.0, 1.0];
        let e = [1.0, 0.3, -2.0, 0.7];
        let mut t = DMatrix::zeros(5, 5);
        for i in 0..5 {
            t[(i, i)] = d[i];
            if i < 4 {
                t[(i, i + 1)] = e[i];
                t[(i + 1, i)] = e[i];
            }
        }
        let mut z = DMatrix::identity(5, 5);
        let vals = tridiagonal_eig(&d, &e, &mut z).unwrap();
        let jac = dense_sym_eig(&t).unwrap();
        for i in 0..5 {
            assert!((vals[i] - jac.values[i]).abs() < 1e-13);
        }
        let res = &t * &z - &z * DMatrix::from_diagonal(&DVector::from_vec(vals.clone()));
        assert!(res.norm() < 1e-13);

        // tracking only the last row reproduces the last row of Z
        let mut last = DMatrix::zeros(1, 5);
        last[(0, 4)] = 1.0;
        let vals2 = tridiagonal_eig(&d, &e, &mut last).unwrap();
        assert_eq!(vals, vals2);
        for i in 0..5 {
            assert!((last[(0, i)] - z[(4, i)]).abs() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_with_zero_coupling() {
        let mut z = DMatrix::identity(3, 3);
        let vals = tridiagonal_eig(&[3.0, 1.0, 2.0], &[0.0, 0.0], &mut z).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }
}

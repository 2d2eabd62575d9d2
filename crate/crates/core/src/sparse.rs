//! Symmetric sparse storage and the operator abstraction shared by the solvers.
//!
//! [`SparseSymMatrix`] keeps only the lower triangle in compressed-column form.
//! Products walk every stored off-diagonal entry twice, once as `(i, j)` and
//! once mirrored as `(j, i)`.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use thiserror::Error;

/// An `n x m` block of column vectors.
pub type DenseBlock = DMatrix<f64>;

/// Relative tolerance used when an entry is given in both triangles.
const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) is out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("entries ({row}, {col}) = {lower} and ({col}, {row}) = {upper} disagree")]
    Asymmetric {
        row: usize,
        col: usize,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: operator is {expected}, block has {found} rows")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("edge ({i}, {j}) has negative weight {w}")]
    NegativeWeight { i: usize, j: usize, w: f64 },
}

/// Symmetric real sparse matrix holding its lower triangle in CSC form.
///
/// Column `j` stores rows `i >= j` in ascending order. No explicit zeros and
/// no duplicate coordinates are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from coordinate triplets.
    ///
    /// Entries in the upper triangle are mirrored. Duplicates within one
    /// triangle are summed; when a coordinate is given in both triangles the
    /// two sums must agree. Exact zeros are dropped after summation.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, SparseError> {
        // (col, row, value, from_upper) in lower-triangle coordinates
        let mut entries = Vec::with_capacity(triplets.len());
        for &(row, col, value) in triplets {
            if row >= n || col >= n {
                return Err(SparseError::IndexOutOfRange { row, col, n });
            }
            if !value.is_finite() {
                return Err(SparseError::NonFinite { row, col });
            }
            if row >= col {
                entries.push((col, row, value, false));
            } else {
                entries.push((row, col, value, true));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1, a.3).cmp(&(b.0, b.1, b.3)));

        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());

        let mut k = 0;
        while k < entries.len() {
            let (col, row, _, _) = entries[k];
            let mut lower: Option<f64> = None;
            let mut upper: Option<f64> = None;
            while k < entries.len() && entries[k].0 == col && entries[k].1 == row {
                let (_, _, v, from_upper) = entries[k];
                let slot = if from_upper && row != col {
                    &mut upper
                } else {
                    &mut lower
                };
                *slot = Some(slot.unwrap_or(0.0) + v);
                k += 1;
            }
            let value = match (lower, upper) {
                (Some(l), Some(u)) => {
                    if (l - u).abs() > SYMMETRY_RTOL * l.abs().max(u.abs()) {
                        return Err(SparseError::Asymmetric {
                            row,
                            col,
                            lower: l,
                            upper: u,
                        });
                    }
                    l
                }
                (Some(v), None) | (None, Some(v)) => v,
                (None, None) => unreachable!(),
            };
            if value != 0.0 {
                row_idx.push(row);
                values.push(value);
                col_ptr[col + 1] += 1;
            }
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// The `n x n` zero matrix.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            col_ptr: vec![0; n + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// The `n x n` identity.
    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let triplets: Vec<_> = diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
        Self::from_triplets(diag.len(), &triplets).expect("diagonal entries are in range")
    }

    /// Build from a dense symmetric matrix, reading its lower triangle.
    pub fn from_dense_lower(a: &DMatrix<f64>) -> Result<Self, SparseError> {
        let n = a.nrows();
        let mut triplets = Vec::new();
        for j in 0..n {
            for i in j..n {
                if a[(i, j)] != 0.0 {
                    triplets.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored (lower-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of nonzeros of the logical (full) matrix.
    pub fn nnz_full(&self) -> usize {
        self.iter().map(|(i, j, _)| if i == j { 1 } else { 2 }).sum()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries `(row, col, value)` with `row >= col`, column by column.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    /// Logical entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (row, col) = if i >= j { (i, j) } else { (j, i) };
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        match self.row_idx[range.clone()].binary_search(&row) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.get(j, j)).collect()
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.diagonal().iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Exact induced 1-norm (max absolute column sum of the logical matrix).
    pub fn norm1(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            sums[j] += v.abs();
            if i != j {
                sums[i] += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.iter()
            .map(|(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a
    }

    /// Full symmetric pattern in CSC form (both triangles, rows sorted).
    pub fn to_full_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut counts = vec![0usize; self.n + 1];
        for (i, j, _) in self.iter() {
            counts[j + 1] += 1;
            if i != j {
                counts[i + 1] += 1;
            }
        }
        for j in 0..self.n {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let nnz = col_ptr[self.n];
        let mut rows = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        // Mirrored upper entries of column j come from columns < j, so a
        // column-ordered sweep fills every column in ascending row order.
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                if i != j {
                    let q = next[i];
                    rows[q] = j;
                    vals[q] = v;
                    next[i] += 1;
                }
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let q = next[j];
                rows[q] = self.row_idx[p];
                vals[q] = self.values[p];
                next[j] += 1;
            }
        }
        (col_ptr, rows, vals)
    }

    /// Product of the logical symmetric matrix with a dense block.
    pub fn sym_mul(&self, x: &DenseBlock) -> Result<DenseBlock, SparseError> {
        if x.nrows() != self.n {
            return Err(SparseError::DimensionMismatch {
                expected: self.n,
                found: x.nrows(),
            });
        }
        let mut y = DenseBlock::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            for j in 0..self.n {
                let xj = xc[j];
                let mut acc = 0.0;
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    let i = self.row_idx[p];
                    let v = self.values[p];
                    if i == j {
                        acc += v * xj;
                    } else {
                        yc[i] += v * xj;
                        acc += v * xc[i];
                    }
                }
                yc[j] += acc;
            }
        }
        Ok(y)
    }

    /// `self + eta * I`. A diagonal entry that cancels to exactly zero is
    /// dropped, as in [`SparseSymMatrix::from_triplets`].
    pub fn shift_identity(&self, eta: f64) -> SparseSymMatrix {
        let mut triplets: Vec<_> = self.iter().collect();
        triplets.extend((0..self.n).map(|i| (i, i, eta)));
        Self::from_triplets(self.n, &triplets).expect("shifting preserves index ranges")
    }

    /// Symmetric permutation `P A P^T` where `perm[k]` is the old index placed
    /// at position `k`.
    pub fn permute(&self, perm: &[usize]) -> SparseSymMatrix {
        let mut inv = vec![0usize; self.n];
        for (k, &old) in perm.iter().enumerate() {
            inv[old] = k;
        }
        let triplets: Vec<_> = self.iter().map(|(i, j, v)| (inv[i], inv[j], v)).collect();
        Self::from_triplets(self.n, &triplets).expect("permutation preserves index ranges")
    }
}

/// Weighted graph Laplacian: `L[i][i] = sum_j w_ij`, `L[i][j] = -w_ij`.
///
/// Repeated edges accumulate their weights.
pub fn graph_laplacian(n: usize, edges: &[(usize, usize, f64)]) -> Result<SparseSymMatrix, SparseError> {
    let mut degree = vec![0.0; n];
    let mut triplets = Vec::with_capacity(edges.len() + n);
    for &(i, j, w) in edges {
        if i >= n || j >= n {
            return Err(SparseError::IndexOutOfRange { row: i, col: j, n });
        }
        if i == j {
            return Err(SparseError::SelfLoop(i));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(SparseError::NegativeWeight { i, j, w });
        }
        let (r, c) = if i > j { (i, j) } else { (j, i) };
        triplets.push((r, c, -w));
        degree[i] += w;
        degree[j] += w;
    }
    triplets.extend(degree.iter().enumerate().map(|(i, &d)| (i, i, d)));
    SparseSymMatrix::from_triplets(n, &triplets)
}

/// A linear map on `R^n` applied block-wise.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// Apply to every column of `x`. Panics if `x.nrows() != self.dim()`.
    fn apply(&self, x: &DenseBlock) -> DenseBlock;

    /// Estimate of the induced 1-norm.
    ///
    /// The default probes with the all-ones vector and a few alternating-sign
    /// vectors, which gives a lower bound.
    fn norm1_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let probes = DenseBlock::from_fn(n, 4, |i, c| match c {
            0 => 1.0,
            1 => if i % 2 == 0 { 1.0 } else { -1.0 },
            2 => if (i / 2) % 2 == 0 { 1.0 } else { -1.0 },
            _ => if (i * 7 + 3) % 5 < 2 { 1.0 } else { -1.0 },
        });
        let y = self.apply(&probes);
        (0..4)
            .map(|c| y.column(c).iter().map(|v| v.abs()).sum::<f64>() / n as f64)
            .fold(0.0, f64::max)
    }
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &DenseBlock) -> DenseBlock {
        self.sym_mul(x).expect("operator applied to a block of the wrong height")
    }

    fn norm1_estimate(&self) -> f64 {
        self.norm1()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &DenseBlock) -> DenseBlock {
        (**self).apply(x)
    }

    fn norm1_estimate(&self) -> f64 {
        (**self).norm1_estimate()
    }
}

/// The identity on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator {
    pub n: usize,
}

impl IdentityOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &DenseBlock) -> DenseBlock {
        assert_eq!(x.nrows(), self.n, "operator applied to a block of the wrong height");
        x.clone()
    }

    fn norm1_estimate(&self) -> f64 {
        1.0
    }
}

/// `sigma * I - inner`.
pub struct SpectralShift<'a> {
    inner: &'a dyn LinearOperator,
    sigma: f64,
}

impl<'a> SpectralShift<'a> {
    pub fn new(inner: &'a dyn LinearOperator, sigma: f64) -> Self {
        Self { inner, sigma }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl LinearOperator for SpectralShift<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &DenseBlock) -> DenseBlock {
        let mut y = self.inner.apply(x);
        y.zip_apply(x, |yi, xi| *yi = self.sigma * xi - *yi);
        y
    }

    fn norm1_estimate(&self) -> f64 {
        self.sigma.abs() + self.inner.norm1_estimate()
    }
}

/// Wraps an operator and counts single-vector applications.
pub struct CountingOperator<'a> {
    inner: &'a dyn LinearOperator,
    count: AtomicUsize,
}

impl<'a> CountingOperator<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    /// Number of columns the operator has been applied to.
    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

impl LinearOperator for CountingOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &DenseBlock) -> DenseBlock {
        self.count.fetch_add(x.ncols(), Ordering::Relaxed);
        self.inner.apply(x)
    }

    fn norm1_estimate(&self) -> f64 {
        self.inner.norm1_estimate()
    }
}

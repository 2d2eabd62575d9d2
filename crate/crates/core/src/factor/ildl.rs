//! Incomplete symmetric indefinite `L D L^T` with Bunch-Kaufman pivoting.
//!
//! The matrix is first equilibrated (`A = S M S`, `S` diagonal with power-of-two
//! entries) and ordered with AMD. Columns are then eliminated left-looking in
//! that order; each step computes the updated candidate column and chooses a
//! 1x1 or 2x2 pivot from it and, when needed, from the column of its largest
//! off-diagonal entry. Pivoting swaps are symmetric, so the final permutation
//! interleaves AMD order with the pivot choices.
//!
//! With `fill_limit >= n` and `drop_tol = 0` the factorization is exact.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{amd_ordering, FactorError, StrictLower};
use crate::dense::dense_sym_eig;
use crate::sparse::SparseSymMatrix;

/// `(1 + sqrt(17)) / 8`, which minimizes the element growth bound.
pub const BK_ALPHA: f64 = 0.640_388_203_202_207_6;

const EQUILIBRATION_SWEEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum PivotBlock {
    One { pos: usize, d: f64 },
    Two { pos: usize, d: [[f64; 2]; 2] },
}

impl PivotBlock {
    /// First position covered by the block.
    pub fn position(&self) -> usize {
        match *self {
            PivotBlock::One { pos, .. } | PivotBlock::Two { pos, .. } => pos,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            PivotBlock::One { .. } => 1,
            PivotBlock::Two { .. } => 2,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match *self {
            PivotBlock::One { d, .. } => DMatrix::from_element(1, 1, d),
            PivotBlock::Two { d, .. } => DMatrix::from_row_slice(2, 2, &[d[0][0], d[0][1], d[1][0], d[1][1]]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IldlStats {
    /// Off-diagonal nonzeros kept in `L`.
    pub nnz_l: usize,
    pub two_by_two: usize,
    pub dropped: usize,
    pub fill_limit: usize,
    pub drop_tol: f64,
}

/// `P S M S P^T ~= L D L^T` with `L` unit lower triangular and `D`
/// block diagonal.
#[derive(Debug, Clone)]
pub struct BlockDiagFactorization {
    perm: Vec<usize>,
    scaling: Vec<f64>,
    l: Arc<StrictLower>,
    blocks: Vec<PivotBlock>,
    stats: IldlStats,
}

impl BlockDiagFactorization {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// `perm[k]` is the original index at position `k`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Equilibration factors indexed by original index.
    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    /// Strictly lower part of the unit triangular factor.
    pub fn l(&self) -> &Arc<StrictLower> {
        &self.l
    }

    pub fn blocks(&self) -> &[PivotBlock] {
        &self.blocks
    }

    pub fn stats(&self) -> &IldlStats {
        &self.stats
    }

    /// Dense `D`.
    pub fn d_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for b in &self.blocks {
            let p = b.position();
            let s = b.size();
            d.view_mut((p, p), (s, s)).copy_from(&b.to_dense());
        }
        d
    }

    /// Dense `L D L^T` in permuted, equilibrated coordinates.
    pub fn ldlt_dense(&self) -> DMatrix<f64> {
        let l = self.l.to_dense_with_diagonal(&vec![1.0; self.dim()]);
        &l * self.d_dense() * l.transpose()
    }

    /// The factored approximation of `M` in original coordinates,
    /// `S^{-1} P^T L D L^T P S^{-1}`.
    pub fn reconstruct_dense(&self) -> DMatrix<f64> {
        let ldlt = self.ldlt_dense();
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let (i, j) = (self.perm[a], self.perm[b]);
                out[(i, j)] = ldlt[(a, b)] / (self.scaling[i] * self.scaling[j]);
            }
        }
        out
    }

    /// `(positive, negative, zero)` eigenvalue counts of `D`.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for b in &self.blocks {
            let values = match *b {
                PivotBlock::One { d, .. } => vec![d],
                PivotBlock::Two { .. } => dense_sym_eig(&b.to_dense())
                    .map(|e| e.values.iter().copied().collect())
                    .unwrap_or_else(|_| vec![0.0, 0.0]),
            };
            for v in values {
                if v > 0.0 {
                    counts.0 += 1;
                } else if v < 0.0 {
                    counts.1 += 1;
                } else {
                    counts.2 += 1;
                }
            }
        }
        counts
    }
}

/// Twice the average number of nonzeros per column of the full matrix.
pub fn default_fill_limit(m: &SparseSymMatrix) -> usize {
    let n = m.dim().max(1);
    (2 * m.nnz_full()).div_ceil(n).max(1)
}

/// Symmetric max-norm equilibration: `s` such that every row of `S M S` has
/// largest magnitude close to 1. Entries are powers of two, so scaling is
/// exact. Empty rows keep `s_i = 1`.
pub fn equilibrate(m: &SparseSymMatrix) -> Vec<f64> {
    let n = m.dim();
    let (col_ptr, rows, vals) = m.to_full_csc();
    let mut s = vec![1.0; n];
    let mut row_max = vec![0.0_f64; n];
    for _ in 0..EQUILIBRATION_SWEEPS {
        for j in 0..n {
            row_max[j] = (col_ptr[j]..col_ptr[j + 1])
                .map(|p| (s[j] * vals[p] * s[rows[p]]).abs())
                .fold(0.0, f64::max);
        }
        let mut worst = 0.0_f64;
        for j in 0..n {
            if row_max[j] > 0.0 {
                s[j] /= row_max[j].sqrt();
                worst = worst.max((row_max[j] - 1.0).abs());
            }
        }
        if worst < 1e-3 {
            break;
        }
    }
    for v in s.iter_mut() {
        *v = 2f64.powi(v.log2().round() as i32);
    }
    s
}

/// Sparse accumulator over labels.
struct Spa {
    vals: Vec<f64>,
    live: Vec<bool>,
    idx: Vec<usize>,
}

impl Spa {
    fn new(n: usize) -> Self {
        Self {
            vals: vec![0.0; n],
            live: vec![false; n],
            idx: Vec::new(),
        }
    }

    fn clear(&mut self) {
        for &i in &self.idx {
            self.live[i] = false;
        }
        self.idx.clear();
    }

    fn add(&mut self, i: usize, v: f64) {
        if !self.live[i] {
            self.live[i] = true;
            self.vals[i] = 0.0;
            self.idx.push(i);
        }
        self.vals[i] += v;
    }

    fn get(&self, i: usize) -> f64 {
        if self.live[i] {
            self.vals[i]
        } else {
            0.0
        }
    }

    /// Largest off-diagonal magnitude, excluding `skip`.
    fn max_off(&self, skip: usize) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for &i in &self.idx {
            let v = self.vals[i].abs();
            if i != skip && (v > best.0 || (v == best.0 && v > 0.0 && Some(i) < best.1)) {
                best = (v, Some(i));
            }
        }
        best
    }
}

struct Factorizer {
    n: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
    factored: Vec<bool>,
    /// Column `k` of `L`, rows as labels.
    cols: Vec<Vec<(usize, f64)>>,
    /// For each label, `(k, L[label, k])`.
    row_lists: Vec<Vec<(usize, f64)>>,
    blocks: Vec<PivotBlock>,
    block_of: Vec<usize>,
    label_at: Vec<usize>,
    lrow: Spa,
    fill_limit: usize,
    drop_tol: f64,
    tiny: f64,
    dropped: usize,
}

impl Factorizer {
    /// Column `c` of the current Schur complement restricted to unfactored labels.
    fn updated_column(&mut self, c: usize, out: &mut Spa) {
        out.clear();
        out.add(c, 0.0);
        for p in self.col_ptr[c]..self.col_ptr[c + 1] {
            let i = self.rows[p];
            if !self.factored[i] {
                out.add(i, self.vals[p]);
            }
        }
        // Row c of L, widened to both columns of every 2x2 block it touches.
        self.lrow.clear();
        for &(k, v) in &self.row_lists[c] {
            self.lrow.add(k, v);
            if let PivotBlock::Two { pos, .. } = self.blocks[self.block_of[k]] {
                self.lrow.add(if k == pos { pos + 1 } else { pos }, 0.0);
            }
        }
        for t in 0..self.lrow.idx.len() {
            let k = self.lrow.idx[t];
            let coef = match self.blocks[self.block_of[k]] {
                PivotBlock::One { d, .. } => d * self.lrow.get(k),
                PivotBlock::Two { pos, d } => {
                    let a = k - pos;
                    d[a][0] * self.lrow.get(pos) + d[a][1] * self.lrow.get(pos + 1)
                }
            };
            if coef == 0.0 {
                continue;
            }
            for &(i, l_ik) in &self.cols[k] {
                if !self.factored[i] {
                    out.add(i, -l_ik * coef);
                }
            }
        }
    }

    fn drop_entries(&mut self, col: &mut Vec<(usize, f64)>) {
        let before = col.len();
        col.retain(|e| e.1 != 0.0);
        if self.drop_tol > 0.0 {
            let norm = col.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            let threshold = self.drop_tol * norm;
            col.retain(|e| e.1.abs() >= threshold);
        }
        if col.len() > self.fill_limit {
            col.select_nth_unstable_by(self.fill_limit - 1, |a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            col.truncate(self.fill_limit);
        }
        self.dropped += before - col.len();
    }

    fn push_column(&mut self, pos: usize, label: usize, col: Vec<(usize, f64)>) {
        for &(i, v) in &col {
            self.row_lists[i].push((pos, v));
        }
        self.cols[pos] = col;
        self.label_at[pos] = label;
        self.block_of[pos] = self.blocks.len() - 1;
    }

    fn pivot_one(&mut self, pos: usize, p: usize, w: &Spa) -> Result<(), FactorError> {
        let d = w.get(p);
        if !d.is_finite() {
            return Err(FactorError::NonFinite { position: pos });
        }
        if d.abs() <= self.tiny {
            return Err(FactorError::PivotBreakdown { position: pos, pivot: d });
        }
        self.factored[p] = true;
        let mut col: Vec<(usize, f64)> = w
            .idx
            .iter()
            .filter(|&&i| i != p)
            .map(|&i| (i, w.vals[i] / d))
            .collect();
        self.drop_entries(&mut col);
        self.blocks.push(PivotBlock::One { pos, d });
        self.push_column(pos, p, col);
        Ok(())
    }

    fn pivot_two(&mut self, pos: usize, c: usize, r: usize, wc: &Spa, wr: &Spa) -> Result<(), FactorError> {
        let (a, b, e) = (wc.get(c), 0.5 * (wc.get(r) + wr.get(c)), wr.get(r));
        let det = a * e - b * b;
        if !det.is_finite() {
            return Err(FactorError::NonFinite { position: pos });
        }
        if det.abs() <= self.tiny * (a * e).abs().max(b * b) || det == 0.0 {
            return Err(FactorError::PivotBreakdown { position: pos, pivot: det });
        }
        let inv = [[e / det, -b / det], [-b / det, a / det]];
        self.factored[c] = true;
        self.factored[r] = true;
        let mut first = Vec::new();
        let mut second = Vec::new();
        let union = wc.idx.iter().chain(wr.idx.iter().filter(|&&i| !wc.live[i]));
        for &i in union {
            if i == c || i == r {
                continue;
            }
            let (x1, x2) = (wc.get(i), wr.get(i));
            first.push((i, x1 * inv[0][0] + x2 * inv[1][0]));
            second.push((i, x1 * inv[0][1] + x2 * inv[1][1]));
        }
        self.drop_entries(&mut first);
        self.drop_entries(&mut second);
        self.blocks.push(PivotBlock::Two { pos, d: [[a, b], [b, e]] });
        self.push_column(pos, c, first);
        self.push_column(pos + 1, r, second);
        Ok(())
    }
}

/// Incomplete `L D L^T` factorization of `m`.
///
/// Per column, entries of `L` smaller than `drop_tol` times the column's
/// 2-norm are discarded and at most `fill_limit` of the largest are kept.
pub fn ildl(m: &SparseSymMatrix, fill_limit: usize, drop_tol: f64) -> Result<BlockDiagFactorization, FactorError> {
    if fill_limit == 0 {
        return Err(FactorError::InvalidParameter("fill limit must be at least 1".into()));
    }
    if !(drop_tol >= 0.0) || !drop_tol.is_finite() {
        return Err(FactorError::InvalidParameter(format!("drop tolerance must be >= 0, got {drop_tol}")));
    }
    let n = m.dim();
    let scaling = equilibrate(m);
    let scaled: Vec<_> = m.iter().map(|(i, j, v)| (i, j, v * scaling[i] * scaling[j])).collect();
    let scaled = SparseSymMatrix::from_triplets(n, &scaled).expect("scaling preserves structure");
    let amd_perm = amd_ordering(&scaled);
    let (col_ptr, rows, vals) = scaled.permute(&amd_perm).to_full_csc();

    let mut f = Factorizer {
        n,
        col_ptr,
        rows,
        vals,
        factored: vec![false; n],
        cols: vec![Vec::new(); n],
        row_lists: vec![Vec::new(); n],
        blocks: Vec::new(),
        block_of: vec![0; n],
        label_at: vec![0; n],
        lrow: Spa::new(n),
        fill_limit,
        drop_tol,
        tiny: n as f64 * f64::EPSILON,
        dropped: 0,
    };
    let mut wc = Spa::new(n);
    let mut wr = Spa::new(n);
    let mut cursor = 0;
    let mut pos = 0;
    while pos < f.n {
        while f.factored[cursor] {
            cursor += 1;
        }
        let c = cursor;
        f.updated_column(c, &mut wc);
        let a_cc = wc.get(c).abs();
        let (lambda, r) = wc.max_off(c);
        match r {
            None => f.pivot_one(pos, c, &wc)?,
            Some(_) if a_cc >= BK_ALPHA * lambda => f.pivot_one(pos, c, &wc)?,
            Some(r) => {
                f.updated_column(r, &mut wr);
                let (sigma, _) = wr.max_off(r);
                if a_cc * sigma >= BK_ALPHA * lambda * lambda {
                    f.pivot_one(pos, c, &wc)?;
                } else if wr.get(r).abs() >= BK_ALPHA * sigma {
                    f.pivot_one(pos, r, &wr)?;
                } else {
                    f.pivot_two(pos, c, r, &wc, &wr)?;
                    pos += 1;
                }
            }
        }
        pos += 1;
    }

    let mut pos_of = vec![0usize; n];
    for (k, &label) in f.label_at.iter().enumerate() {
        pos_of[label] = k;
    }
    let cols: Vec<Vec<(usize, f64)>> = f
        .cols
        .iter()
        .map(|col| col.iter().map(|&(label, v)| (pos_of[label], v)).collect())
        .collect();
    let l = StrictLower::from_columns(n, cols);
    let stats = IldlStats {
        nnz_l: l.nnz(),
        two_by_two: f.blocks.iter().filter(|b| b.size() == 2).count(),
        dropped: f.dropped,
        fill_limit,
        drop_tol,
    };
    Ok(BlockDiagFactorization {
        perm: f.label_at.iter().map(|&label| amd_perm[label]).collect(),
        scaling,
        l: Arc::new(l),
        blocks: f.blocks,
        stats,
    })
}

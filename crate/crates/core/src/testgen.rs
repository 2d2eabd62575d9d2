//! Seeded test matrices with a prescribed smallest eigenvalue.
//!
//! A geometric random graph on `N` points in the unit square is turned into
//! its weighted Laplacian `L(G)`, and `S = blkdiag(L(G), -gamma)` is returned.
//! `L(G)` is positive semidefinite with `L(G) 1 = 0`, so `lambda_min(S) = -gamma`
//! and, for a connected graph, the next eigenvalue is `0`.
//!
//! Randomness comes from ChaCha8 seeded with `spec.seed`: stream 0 draws the
//! vertex coordinates (x then y per vertex), stream 1 draws one weight per
//! edge in lexicographic `(i, j)` order with `i < j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sparse::{graph_laplacian, SparseSymMatrix};

pub const DEFAULT_W_MAX: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestgenError {
    #[error("invalid test matrix spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestMatrixSpec {
    pub n_vertices: usize,
    pub radius: f64,
    pub w_max: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl TestMatrixSpec {
    /// Spec with the default radius and `W_max = 1e3`.
    pub fn new(n_vertices: usize, gamma: f64, seed: u64) -> Self {
        Self {
            n_vertices,
            radius: default_radius(n_vertices),
            w_max: DEFAULT_W_MAX,
            gamma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TestgenError> {
        if self.n_vertices < 2 {
            return Err(TestgenError::InvalidSpec(format!("need N >= 2, got {}", self.n_vertices)));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(TestgenError::InvalidSpec(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.w_max > 0.0) || !self.w_max.is_finite() {
            return Err(TestgenError::InvalidSpec(format!("W_max must be positive, got {}", self.w_max)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(TestgenError::InvalidSpec(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// `1.25 * sqrt(ln(N) / (pi * N))`.
pub fn default_radius(n_vertices: usize) -> f64 {
    let n = n_vertices as f64;
    1.25 * (n.ln() / (std::f64::consts::PI * n)).sqrt()
}

#[derive(Debug, Clone)]
pub struct TestMatrix {
    /// `blkdiag(L(G), -gamma)`, dimension `N + 1`.
    pub matrix: SparseSymMatrix,
    pub points: Vec<[f64; 2]>,
    /// `(i, j, w)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize, f64)>,
    pub components: usize,
}

impl TestMatrix {
    pub fn connected(&self) -> bool {
        self.components == 1
    }
}

pub fn sample_test_matrix(spec: &TestMatrixSpec) -> Result<TestMatrix, TestgenError> {
    spec.validate()?;
    let n = spec.n_vertices;

    let mut coords = ChaCha8Rng::seed_from_u64(spec.seed);
    coords.set_stream(0);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [coords.random::<f64>(), coords.random::<f64>()]).collect();

    let pairs = close_pairs(&points, spec.radius);
    let mut weights = ChaCha8Rng::seed_from_u64(spec.seed);
    weights.set_stream(1);
    let edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, weights.random::<f64>() * spec.w_max))
        .collect();

    let laplacian = graph_laplacian(n, &edges).expect("sampled edges are valid");
    let mut triplets: Vec<_> = laplacian.iter().collect();
    triplets.push((n, n, -spec.gamma));
    let matrix = SparseSymMatrix::from_triplets(n + 1, &triplets).expect("indices are in range");

    Ok(TestMatrix {
        matrix,
        components: count_components(n, &edges),
        points,
        edges,
    })
}

/// All pairs `i < j` with Euclidean distance strictly below `r`, sorted.
fn close_pairs(points: &[[f64; 2]], r: f64) -> Vec<(usize, usize)> {
    let cells = ((1.0 / r).floor() as usize).clamp(1, 1 << 12);
    let cell_of = |x: f64| ((x * cells as f64) as usize).min(cells - 1);
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    for (i, p) in points.iter().enumerate() {
        grid[cell_of(p[1]) * cells + cell_of(p[0])].push(i);
    }
    let r2 = r * r;
    let mut pairs = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = (cell_of(p[0]), cell_of(p[1]));
        for gy in cy.saturating_sub(1)..=(cy + 1).min(cells - 1) {
            for gx in cx.saturating_sub(1)..=(cx + 1).min(cells - 1) {
                for &j in &grid[gy * cells + gx] {
                    if j > i {
                        let (dx, dy) = (p[0] - points[j][0], p[1] - points[j][1]);
                        if dx * dx + dy * dy < r2 {
                            pairs.push((i, j));
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn count_components(n: usize, edges: &[(usize, usize, f64)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(i, j, _) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            components -= 1;
        }
    }
    components
}

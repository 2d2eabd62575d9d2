use certify::mtx::{format_matrix_market, parse_matrix_market};
use certify::testgen::{sample_test_matrix, TestMatrixSpec};
use nalgebra::SymmetricEigen;

fn sorted_eigenvalues(spec: &TestMatrixSpec) -> (Vec<f64>, bool) {
    let t = sample_test_matrix(spec).unwrap();
    let mut v: Vec<f64> = SymmetricEigen::new(t.matrix.to_dense()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    (v, t.connected())
}

#[test]
fn smallest_eigenvalue_is_minus_gamma() {
    let mut checked = 0;
    for seed in 0..20 {
        for &gamma in &[1e-1, 1e-3, 1e-6] {
            let (eig, connected) = sorted_eigenvalues(&TestMatrixSpec::new(200, gamma, seed));
            assert!((eig[0] + gamma).abs() <= 1e-10, "seed {seed}: {}", eig[0]);
            if connected {
                checked += 1;
                assert!(eig[1].abs() <= 1e-10, "seed {seed}: second eigenvalue {}", eig[1]);
                // Gap equals gamma when gamma is below the Fiedler value.
                if gamma < eig[2] {
                    assert!(((eig[1] - eig[0]) - gamma).abs() <= 1e-10);
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn zero_gamma_is_positive_semidefinite() {
    let (eig, _) = sorted_eigenvalues(&TestMatrixSpec::new(150, 0.0, 4));
    assert!(eig[0].abs() <= 1e-10);
    assert!(eig[0] >= -1e-10);
}

#[test]
fn nonzeros_grow_like_n_log_n() {
    for &n in &[1000usize, 4000] {
        for seed in 0..50 {
            let t = sample_test_matrix(&TestMatrixSpec::new(n, 1e-2, seed)).unwrap();
            let bound = 10.0 * n as f64 * (n as f64).ln();
            assert!((t.matrix.nnz_full() as f64) <= bound, "N = {n}, seed {seed}");
        }
    }
}

#[test]
fn matrix_market_round_trip_is_exact() {
    let t = sample_test_matrix(&TestMatrixSpec::new(300, 1e-3, 8)).unwrap();
    let mut buf = Vec::new();
    format_matrix_market(&t.matrix, &mut buf).unwrap();
    let back = parse_matrix_market(&buf[..]).unwrap();
    assert_eq!(back, t.matrix);
}

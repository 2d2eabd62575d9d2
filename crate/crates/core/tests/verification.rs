use certify::lanczos::LanczosConfig;
use certify::sparse::{DenseBlock, LinearOperator, SparseSymMatrix};
use certify::testgen::{sample_test_matrix, TestMatrixSpec};
use certify::verify::{fast_verification, lanczos_verification, VerificationOutcome, VerifyConfig};
use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const ETA: f64 = 1e-6;
const TAU: f64 = 1e-2;

fn quad(s: &SparseSymMatrix, x: &DVector<f64>) -> f64 {
    let sx = s.apply(&DenseBlock::from_column_slice(x.len(), 1, x.as_slice()));
    x.dot(&sx.column(0))
}

#[test]
fn negative_curvature_on_small_gap() {
    let t = sample_test_matrix(&TestMatrixSpec::new(200, 1e-3, 0)).unwrap();
    let r = fast_verification(&t.matrix, ETA, &VerifyConfig::default()).unwrap();
    let VerificationOutcome::NegativeCurvature { lambda, x, .. } = r.outcome else {
        panic!("expected negative curvature");
    };
    assert!(lambda >= -1e-3 * (1.0 + TAU) && lambda <= -1e-3 * (1.0 - TAU), "{lambda}");
    assert!((x.norm() - 1.0).abs() <= 1e-12);
    assert!(x[200].abs() > 0.99);
    let q = quad(&t.matrix, &x);
    assert!((q - lambda).abs() <= 1e-10 * lambda.abs());
}

#[test]
fn tiny_gap_takes_the_cholesky_path() {
    let t = sample_test_matrix(&TestMatrixSpec::new(200, 1e-9, 0)).unwrap();
    let r = fast_verification(&t.matrix, ETA, &VerifyConfig::default()).unwrap();
    assert!(r.outcome.is_certificate());
    assert_eq!(r.iterations, 0);
    assert_eq!(r.matvecs, 0);
}

#[test]
fn certificates_survive_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for seed in 0..5 {
        let t = sample_test_matrix(&TestMatrixSpec::new(200, 1e-8, seed)).unwrap();
        let r = fast_verification(&t.matrix, ETA, &VerifyConfig::default()).unwrap();
        let VerificationOutcome::Certificate { factor: Some(f), eta } = r.outcome else {
            panic!("expected a Cholesky certificate");
        };
        let n = t.matrix.dim();
        for _ in 0..1000 {
            let z: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            // z^T (S + eta I) z through the factor is a sum of squares.
            assert!(f.quadratic_form(z.as_slice()) >= 0.0);
            let zz = z.norm_squared();
            assert!(quad(&t.matrix, &z) >= -eta * zz * (1.0 + 1e-8));
        }
    }
}

#[test]
fn certificate_is_monotone_in_eta() {
    for seed in 0..10 {
        let t = sample_test_matrix(&TestMatrixSpec::new(150, 1e-7, seed)).unwrap();
        let small = fast_verification(&t.matrix, 1e-6, &VerifyConfig::default()).unwrap();
        assert!(small.outcome.is_certificate());
        for &eta in &[1e-5, 1e-3, 1.0] {
            let big = fast_verification(&t.matrix, eta, &VerifyConfig::default()).unwrap();
            assert!(big.outcome.is_certificate(), "seed {seed}, eta {eta}");
        }
    }
}

#[test]
fn agrees_with_lanczos_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for seed in 0..100 {
        let gamma = 10f64.powf(rng.random_range(-9.0..-1.0));
        let t = sample_test_matrix(&TestMatrixSpec::new(200, gamma, seed)).unwrap();
        let fast = fast_verification(&t.matrix, ETA, &VerifyConfig { seed, ..VerifyConfig::default() }).unwrap();
        let slow = lanczos_verification(&t.matrix, ETA, &LanczosConfig::new(TAU, 50_000, seed)).unwrap();
        assert_eq!(fast.outcome.is_certificate(), slow.outcome.is_certificate(), "seed {seed}, gamma {gamma:e}");
        if let (Some(a), Some(b)) = (fast.outcome.lambda(), slow.outcome.lambda()) {
            assert!((a - b).abs() <= 2.0 * TAU * b.abs(), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn unpreconditioned_path_reaches_the_same_answer() {
    let t = sample_test_matrix(&TestMatrixSpec::new(200, 1e-2, 3)).unwrap();
    let cfg = VerifyConfig {
        precondition: false,
        max_iter: 5000,
        ..VerifyConfig::default()
    };
    let r = fast_verification(&t.matrix, ETA, &cfg).unwrap();
    assert_eq!(r.precond_applications, 0);
    assert!(r.ildl_stats.is_none());
    let lambda = r.outcome.lambda().unwrap();
    assert!((lambda + 1e-2).abs() <= TAU * 1e-2);
}

#[test]
fn dense_indefinite_matrix_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for trial in 0..20 {
        let n = 80;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, rng.random_range(0.0..4.0)));
            for j in 0..i {
                if rng.random::<f64>() < 0.05 {
                    trip.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let s = SparseSymMatrix::from_triplets(n, &trip).unwrap();
        let lmin = SymmetricEigen::new(s.to_dense()).eigenvalues.min();
        let r = fast_verification(&s, ETA, &VerifyConfig { seed: trial, ..VerifyConfig::default() }).unwrap();
        match r.outcome {
            VerificationOutcome::Certificate { .. } => assert!(lmin > -ETA, "trial {trial}: {lmin}"),
            VerificationOutcome::NegativeCurvature { lambda, ref x, .. } => {
                assert!(lmin < 0.0);
                assert!(quad(&s, x) < 0.0);
                assert!((lambda - lmin).abs() <= TAU * lmin.abs() + 1e-12, "trial {trial}: {lambda} vs {lmin}");
            }
        }
    }
}

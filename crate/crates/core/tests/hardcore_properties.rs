mod common;

use hardcoreboost::hardcore::{bounded_representation, compute_hardcore, unweighted_correlation};
use hardcoreboost::optimize::{coordinate_descent, OptimizerConfig};
use hardcoreboost::{FeatureMatrix, Loss, RegionMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn core_agrees_with_sign_pattern_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..200 {
        let fm = common::random_ternary_problem(&mut rng);
        let cert = compute_hardcore(&fm).unwrap();
        let oracle = common::core_by_sign_patterns(&fm);
        assert_eq!(cert.core.indices(), oracle.as_slice(), "problem {k}: {fm:?}");
    }
}

#[test]
fn three_point_example_matches_vertex_oracle() {
    let fm = FeatureMatrix::from_rows(&[vec![0.5], vec![0.5], vec![1.0]], &[1.0, -1.0, 1.0]).unwrap();
    let cert = compute_hardcore(&fm).unwrap();
    assert_eq!(cert.core.indices(), common::core_by_vertices(&fm).as_slice());
    assert_eq!(cert.core.len(), 3);
    // (1, 2, 0.5) is one decorrelating direction: 0.5 - 1 + 0.5 = 0.
    assert!(unweighted_correlation(&fm, &[1.0, 2.0, 0.5]) < 1e-15);
}

fn rescale_column(fm: &FeatureMatrix, col: usize, factor: f64) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..fm.rows())
        .map(|j| {
            let mut r = fm.row(j).to_vec();
            r[col] *= factor;
            r
        })
        .collect();
    FeatureMatrix::from_rows(&rows, fm.labels()).unwrap()
}

#[test]
fn core_is_invariant_under_column_scaling_and_duplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let fm = common::random_ternary_problem(&mut rng);
        let core = compute_hardcore(&fm).unwrap().core;

        let col = rng.random_range(0..fm.cols());
        let factor = rng.random_range(0.05..1.0);
        let scaled = rescale_column(&fm, col, factor);
        assert_eq!(compute_hardcore(&scaled).unwrap().core, core);

        let dup = rng.random_range(0..fm.rows());
        let mut rows: Vec<Vec<f64>> = (0..fm.rows()).map(|j| fm.row(j).to_vec()).collect();
        let mut labels = fm.labels().to_vec();
        rows.push(fm.row(dup).to_vec());
        labels.push(fm.labels()[dup]);
        let bigger = FeatureMatrix::from_rows(&rows, &labels).unwrap();
        let extended = compute_hardcore(&bigger).unwrap().core;
        let mut expected = core.indices().to_vec();
        if core.contains(dup) {
            expected.push(fm.rows());
        }
        assert_eq!(extended.indices(), expected.as_slice());
    }
}

#[test]
fn certificates_pass_their_own_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let m = rng.random_range(2..=15);
        let n = rng.random_range(1..=4);
        let fm = common::random_continuous_problem(&mut rng, m, n);
        let cert = compute_hardcore(&fm).unwrap();
        cert.verify(&fm).unwrap();
        let max = cert.p.iter().fold(0.0f64, |a, &v| a.max(v));
        assert!(cert.core.is_empty() || (max - 1.0).abs() < 1e-15);
    }
}

#[test]
fn weighted_samples_share_the_core_of_their_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let fm = common::random_ternary_problem(&mut rng);
        let weights: Vec<f64> = (0..fm.rows()).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let weighted = FeatureMatrix::new(
            fm.values().to_vec(),
            fm.rows(),
            fm.cols(),
            fm.labels().to_vec(),
            weights.iter().map(|w| w / total).collect(),
        )
        .unwrap();
        assert_eq!(compute_hardcore(&weighted).unwrap().core, compute_hardcore(&fm).unwrap().core);
    }
}

#[test]
fn suboptimal_iterates_have_bounded_representations() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    while checked < 20 {
        let fm = common::random_ternary_problem(&mut rng);
        let cert = compute_hardcore(&fm).unwrap();
        if cert.core.is_empty() {
            continue;
        }
        let restricted = fm.select_rows(cert.core.indices()).unwrap();
        let full = RegionMask::full(restricted.rows());
        let mut norms = Vec::new();
        for _ in 0..20 {
            let init: Vec<f64> = (0..fm.cols()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let cfg = OptimizerConfig { init: Some(init), max_iters: 5_000, grad_tol: 1e-9, ..Default::default() };
            let run = coordinate_descent(&restricted, &Loss::Exp, &cfg).unwrap();
            let rep = bounded_representation(&restricted, &full, &run.lambda).unwrap();
            norms.push(rep.l1_norm());
        }
        let max = norms.iter().fold(0.0f64, |a, &v| a.max(v));
        let min = norms.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        assert!(max.is_finite());
        assert!(max <= 2.0 * min + 1e-3, "norms range over [{min}, {max}]");
        checked += 1;
    }
}

#[test]
fn bounded_representation_never_increases_the_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..100 {
        let fm = common::random_ternary_problem(&mut rng);
        let cert = compute_hardcore(&fm).unwrap();
        let lambda: Vec<f64> = (0..fm.cols()).map(|_| rng.random_range(-4.0..4.0)).collect();
        let lambda = hardcoreboost::Weighting::new(lambda).unwrap();
        let rep = bounded_representation(&fm, &cert.core, &lambda).unwrap();
        assert!(rep.l1_norm() <= lambda.l1_norm() + 1e-12);
        let before = fm.predictions(lambda.as_slice()).unwrap();
        let after = fm.predictions(rep.as_slice()).unwrap();
        for &j in cert.core.indices() {
            assert!((before[j] - after[j]).abs() <= 1e-8);
        }
    }
}

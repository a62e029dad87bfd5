//! Acceptance checks. Each test prints one `PASS`/`FAIL` line and then asserts.

mod common;

use std::time::Instant;

use hardcoreboost::bounds::{
    core_surrogate_bound, full_risk_bound, rademacher_surrogate_deviation, sample_split_bounds,
    vc_unbounded_bound, BoundInputs,
};
use hardcoreboost::experiments::{
    build_staggered, consistency_sweep, impossibility_trial, SweepConfig,
};
use hardcoreboost::hardcore::{compute_hardcore, separator_certificate, verify_dichotomy};
use hardcoreboost::optimize::{
    coordinate_descent, dual_lower_bound, subgradient_descent, suboptimality_certificate, Method,
    OptimizerConfig,
};
use hardcoreboost::risk::{
    bayes_risk_discrete, bayes_surrogate_risk_discrete, classification_risk, surrogate_risk,
};
use hardcoreboost::{FeatureMatrix, HypothesisClass, Loss, RegionMask, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
}

fn battery() -> Vec<FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..200).map(|_| common::random_ternary_problem(&mut rng)).collect()
}

#[test]
fn criterion_1_hardcore_matches_vertex_oracle() {
    let start = Instant::now();
    let mut agree = 0;
    let mut confirmed = 0;
    let problems = battery();
    for fm in &problems {
        let cert = compute_hardcore(fm).unwrap();
        let oracle = common::core_by_vertices(fm);
        if cert.core.indices() == oracle.as_slice() {
            agree += 1;
        }
        let mask = RegionMask::new(oracle, fm.rows()).unwrap();
        if let Ok((_, t)) = separator_certificate(fm, &mask) {
            if t > 0.0 {
                confirmed += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = agree == problems.len() && confirmed == problems.len() && secs < 60.0;
    report(
        1,
        pass,
        &format!("{agree}/{} cores agree, {confirmed} separator-confirmed, {secs:.2}s", problems.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_2_dichotomy_has_no_violations() {
    let mut violations = 0;
    let mut trials = 0;
    for (k, fm) in battery().iter().enumerate() {
        let cert = compute_hardcore(fm).unwrap();
        let r = verify_dichotomy(fm, &cert.core, 1000, k as u64).unwrap();
        violations += r.violations;
        trials += r.trials;
    }
    let pass = violations == 0;
    report(2, pass, &format!("{violations} violations in {trials} draws"));
    assert!(pass);
}

#[test]
fn criterion_3_weak_duality_certificate() {
    let fm = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0]], &[1.0, -1.0]).unwrap();
    let cert = compute_hardcore(&fm).unwrap();
    let gap = suboptimality_certificate(&fm, &Loss::Exp, &[0.0], &cert).unwrap();
    let tight = gap.abs() <= 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0;
    let losses = [Loss::Exp, Loss::Logistic, Loss::Hinge, Loss::cone(0.5, 0.5).unwrap()];
    for fm in battery().iter().take(100) {
        let cert = compute_hardcore(fm).unwrap();
        let density: Vec<f64> = cert.p.iter().zip(fm.weights()).map(|(p, w)| p / w).collect();
        for loss in &losses {
            for _ in 0..5 {
                let s: f64 = rng.random_range(0.0..3.0);
                let scaled: Vec<f64> = density.iter().map(|v| s * v).collect();
                let dual = dual_lower_bound(fm, loss, &scaled).unwrap();
                let lambda: Vec<f64> = (0..fm.cols()).map(|_| rng.random_range(-3.0..3.0)).collect();
                let primal = surrogate_risk(fm, &lambda, loss, None).unwrap();
                worst = worst.max(dual - primal);
                let gap = suboptimality_certificate(fm, loss, &lambda, &cert).unwrap();
                worst = worst.max(-gap);
                pairs += 1;
            }
        }
    }
    let pass = tight && worst <= 1e-9;
    report(
        3,
        pass,
        &format!("duplicated-point gap {gap:.3e}; max(dual - primal) over {pairs} pairs = {worst:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_optimizers_meet_the_oracle_contract() {
    let rho = 1e-2;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    for k in 0..20 {
        let n = rng.random_range(1..=2);
        let m = rng.random_range(3..=10);
        let fm = common::random_continuous_problem(&mut rng, m, n);
        for loss in [Loss::Exp, Loss::Logistic, Loss::Hinge] {
            let reference = common::grid_minimum(|l| surrogate_risk(&fm, l, &loss, None).unwrap(), n, 20.0);
            let cfg = OptimizerConfig { max_iters: 100_000, rho, grad_tol: 1e-12, ..Default::default() };
            let run = if loss == Loss::Hinge {
                subgradient_descent(&fm, &loss, &OptimizerConfig { method: Method::Subgradient, ..cfg }).unwrap()
            } else {
                coordinate_descent(&fm, &loss, &cfg).unwrap()
            };
            if run.objective > reference + rho {
                failures.push(format!("problem {k} {loss}: {} vs {reference}", run.objective));
            }
        }
    }
    let fm = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]], &[1.0, 1.0, -1.0]).unwrap();
    let run = coordinate_descent(&fm, &Loss::Exp, &OptimizerConfig::default()).unwrap();
    let target = 2.0 * 2f64.sqrt() / 3.0;
    let closed_form = (run.objective - target).abs() <= 1e-6;
    let pass = failures.is_empty() && closed_form;
    report(
        4,
        pass,
        &format!(
            "{} of 60 runs above reference + rho; 3-point objective {:.8} (target {target:.8}) {failures:?}",
            failures.len(),
            run.objective
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_impossibility_reproduction() {
    let start = Instant::now();
    let world = build_staggered(10).unwrap();
    let scales = [1.0, 32.0];
    let mut events = 0;
    let mut growth_ok = 0;
    let mut bar_ok = 0;
    let mut min_ratio = f64::INFINITY;
    let mut max_bar = 0.0f64;
    for seed in 0..50u64 {
        let trial = impossibility_trial(&world, 20, &scales, &Loss::Exp, seed).unwrap();
        if !trial.misclassifies {
            continue;
        }
        events += 1;
        let (r1, r32) = (&trial.rows[0], &trial.rows[1]);
        let ratio = r32.risk_hat / r1.risk_hat;
        min_ratio = min_ratio.min(ratio);
        max_bar = max_bar.max(r32.risk_bar);
        if ratio > 10.0 {
            growth_ok += 1;
        }
        if r32.risk_bar < 1e-3 {
            bar_ok += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = f64::from(events) / 50.0;
    let pass = growth_ok == events && bar_ok == events && rate >= 0.6 && secs < 30.0;
    report(
        5,
        pass,
        &format!(
            "event rate {rate:.2}; R(32 hat)/R(hat) > 10 in {growth_ok}/{events} (min ratio {min_ratio:.3}); \
             R(32 bar) < 1e-3 in {bar_ok}/{events} (R(32 bar) = {max_bar:.4}); {secs:.2}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_calibration_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checks = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let k = rng.random_range(1..=6);
        let mut instances = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        for _ in 0..k {
            let x = vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            for y in [1i8, -1] {
                instances.push(x.clone());
                labels.push(y);
                weights.push(rng.random_range(0.0..1.0));
            }
        }
        let dist = Sample::weighted(instances, labels, weights).unwrap();
        let fm = HypothesisClass::projections(2).unwrap().materialize(&dist).unwrap();
        let lambda = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let rl = classification_risk(&fm, &lambda, None).unwrap();
        let rl_star = bayes_risk_discrete(&dist);
        for loss in [Loss::Exp, Loss::Logistic] {
            let rphi = surrogate_risk(&fm, &lambda, &loss, None).unwrap();
            let rphi_star = bayes_surrogate_risk_discrete(&dist, &loss);
            let lhs = loss.psi((rl - rl_star).clamp(0.0, 1.0)).unwrap();
            worst = worst.max(lhs - (rphi - rphi_star));
            checks += 1;
        }
    }
    let pass = worst <= 1e-6;
    report(6, pass, &format!("{checks} checks; max psi(excess L) - excess phi = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_7_rademacher_bound_holds_empirically() {
    // Fixed distribution over 12 atoms in [-1, 1]^4 with random labels.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let atoms: Vec<(Vec<f64>, i8)> = (0..12)
        .map(|_| {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            (x, if rng.random_bool(0.6) { 1 } else { -1 })
        })
        .collect();
    let masses: Vec<f64> = (0..12).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = masses.iter().sum();
    let probs: Vec<f64> = masses.iter().map(|v| v / total).collect();
    // With ‖λ‖₁ ≤ 1 every hinge argument stays in [0, 2], so the risk is
    // affine in λ and the supremum of the deviation sits at a vertex ±e_i.
    let correlation = |weights: &[f64]| -> Vec<f64> {
        (0..4)
            .map(|i| atoms.iter().zip(weights).map(|((x, y), w)| w * f64::from(*y) * x[i]).sum())
            .collect()
    };
    let truth = correlation(&probs);
    let bound = rademacher_surrogate_deviation(4.0, 400.0, 1.0, Loss::Hinge.lipschitz_at(1.0), Loss::Hinge.value(1.0), 0.1)
        .unwrap();
    let dist = rand::distr::weighted::WeightedIndex::new(&probs).unwrap();
    let mut violations = 0;
    let mut largest = 0.0f64;
    for _ in 0..500 {
        let mut counts = vec![0.0; 12];
        for _ in 0..400 {
            counts[rand::distr::Distribution::sample(&dist, &mut rng)] += 1.0 / 400.0;
        }
        let emp = correlation(&counts);
        let dev = truth.iter().zip(&emp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        largest = largest.max(dev);
        if dev > bound {
            violations += 1;
        }
    }
    let rate = f64::from(violations) / 500.0;
    let pass = rate <= 0.15;
    report(7, pass, &format!("violation rate {rate:.3} (bound {bound:.4}, largest deviation {largest:.4})"));
    assert!(pass);
}

#[test]
fn criterion_8_lsrm_consistency_trend() {
    let start = Instant::now();
    let cfg = SweepConfig::new(8);
    let curve = consistency_sweep(&cfg).unwrap();
    let last = curve.rows.last().unwrap();
    let good = last.excess_risks.iter().filter(|&&e| e <= 0.05).count();
    let medians: Vec<f64> = curve.rows.iter().map(|r| r.excess_risk_median).collect();
    let inversions = medians.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
    let secs = start.elapsed().as_secs_f64();
    let pass = last.replication_count == 20 && good >= 18 && inversions <= 1 && secs < 600.0;
    report(
        8,
        pass,
        &format!("final stage {good}/20 within 0.05; medians {medians:.4?}; {inversions} inversions; {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_9_bound_calculator() {
    let inputs = BoundInputs {
        m: 1e6,
        n: 8.0,
        delta: 0.08,
        epsilon: 0.0,
        rho: 0.0,
        phi0: None,
        core_mass: 0.5,
        c: 2.0,
        b: 1.0,
        m_core: None,
        m_plus: None,
    };
    let total = full_risk_bound(&inputs, &Loss::Hinge, 0.0).unwrap().total;
    let arithmetic = (total - 0.04438).abs() <= 1e-4;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut broken = Vec::new();
    for _ in 0..200 {
        let m: f64 = rng.random_range(10.0..1e6);
        let n: f64 = rng.random_range(1.0..100.0);
        let delta: f64 = rng.random_range(0.01..0.9);
        let eps: f64 = rng.random_range(0.0..0.1);
        let mu: f64 = rng.random_range(0.05..0.95);
        let dp = delta / 8.0;
        let bigger = 1.5;
        let split = |m: f64| sample_split_bounds(m, mu, dp).unwrap().0 / m;
        if split(m * bigger) < split(m) - 1e-12 {
            broken.push("sample split in m");
        }
        let vc = |n: f64, mp: f64, e: f64, d: f64| vc_unbounded_bound(n, mp, e, 1.0, d, false).unwrap();
        if vc(n, m * bigger, eps, dp) > vc(n, m, eps, dp) + 1e-15 {
            broken.push("vc in m_plus");
        }
        if vc(n * bigger, m, eps, dp) < vc(n, m, eps, dp) {
            broken.push("vc in n");
        }
        if vc(n, m, eps * bigger + 1e-3, dp) < vc(n, m, eps, dp) {
            broken.push("vc in epsilon");
        }
        if vc(n, m, eps, dp / bigger) < vc(n, m, eps, dp) {
            broken.push("vc in delta");
        }
        let core = |n: f64, mc: f64, e: f64, d: f64| core_surrogate_bound(2.0, n, d, e, mc).unwrap().value;
        if core(n, m * bigger, eps, dp) > core(n, m, eps, dp) {
            broken.push("core in m_core");
        }
        if core(n * bigger, m, eps, dp) < core(n, m, eps, dp) {
            broken.push("core in n");
        }
        if core(n, m, eps + 0.01, dp) < core(n, m, eps, dp) {
            broken.push("core in epsilon");
        }
        if core(n, m, eps, dp / bigger) < core(n, m, eps, dp) {
            broken.push("core in delta");
        }
        let rad = |n: f64, m: f64, d: f64| rademacher_surrogate_deviation(n, m, 1.0, 1.0, 2.0, d).unwrap();
        if rad(n, m * bigger, delta) > rad(n, m, delta) || rad(n * bigger, m, delta) < rad(n, m, delta)
            || rad(n, m, delta / bigger) < rad(n, m, delta)
        {
            broken.push("rademacher");
        }
        for loss in [Loss::Hinge, Loss::Exp, Loss::Logistic] {
            let full = |m: f64, n: f64, e: f64, d: f64| {
                let inputs = BoundInputs { m, n, delta: d, epsilon: e, core_mass: mu, c: 2.0, ..inputs.clone() };
                full_risk_bound(&inputs, &loss, 0.0).unwrap().total
            };
            if full(m * bigger, n, eps, delta) > full(m, n, eps, delta)
                || full(m, n * bigger, eps, delta) < full(m, n, eps, delta)
                || full(m, n, eps + 0.01, delta) < full(m, n, eps, delta)
                || full(m, n, eps, delta / bigger) < full(m, n, eps, delta)
            {
                broken.push("full bound");
            }
        }
    }
    broken.dedup();
    let pass = arithmetic && broken.is_empty();
    report(9, pass, &format!("worked total {total:.6}; monotonicity failures {broken:?}"));
    assert!(pass);
}

//! Synthetic worlds and experiment drivers: the staggered separable world on
//! which empirical risk minimization with a convex loss goes astray, max-margin
//! solutions, and structural-risk-minimization sweeps over lattice classes.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::HypothesisClass;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::losses::Loss;
use crate::optimize::{coordinate_descent, subgradient_descent, Method, OptimizerConfig, Weighting};
use crate::risk::Sample;

/// The separator that is correct on every point of a staggered world.
pub const LAMBDA_BAR: [f64; 2] = [-1.0, 1.0];

/// Number of fresh draws [`impossibility_report`] makes before giving up.
pub const IMPOSSIBILITY_RETRIES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: [f64; 2],
    pub label: i8,
    pub mass: f64,
}

/// Points `p_i = (1 - ½·4^{2-i}, 1)` labeled `+1` and `n_i = (1, 1 - 0.3·4^{2-i})`
/// labeled `-1`, each of mass `2^{-i-1}`, for `i = 1..=depth`. The leftover
/// mass `2^{-depth}` is split evenly over the last pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggeredWorld {
    pub depth: usize,
    /// `p_1, n_1, p_2, n_2, ...`
    pub points: Vec<WorldPoint>,
}

pub fn build_staggered(depth: usize) -> Result<StaggeredWorld> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if depth > 500 {
        return Err(Error::ResourceLimit(format!("depth {depth} underflows point masses")));
    }
    let mut points = Vec::with_capacity(2 * depth);
    for i in 1..=depth {
        let scale = 4f64.powi(2 - i as i32);
        let mass = if i == depth {
            2f64.powi(-(depth as i32))
        } else {
            2f64.powi(-(i as i32) - 1)
        };
        points.push(WorldPoint { x: [1.0 - 0.5 * scale, 1.0], label: 1, mass });
        points.push(WorldPoint { x: [1.0, 1.0 - 0.3 * scale], label: -1, mass });
    }
    Ok(StaggeredWorld { depth, points })
}

impl StaggeredWorld {
    fn margin(point: &WorldPoint, lambda: &[f64; 2]) -> f64 {
        f64::from(point.label) * (lambda[0] * point.x[0] + lambda[1] * point.x[1])
    }

    /// `R_φ(Hλ)` under the world distribution.
    pub fn surrogate_risk(&self, lambda: &[f64; 2], loss: &Loss) -> f64 {
        self.points
            .iter()
            .map(|p| p.mass * loss.value(-Self::margin(p, lambda)))
            .sum()
    }

    /// Mass of the points the sign of `Hλ` gets wrong (ties predict `+1`).
    pub fn classification_risk(&self, lambda: &[f64; 2]) -> f64 {
        self.points
            .iter()
            .filter(|p| {
                let pred = if lambda[0] * p.x[0] + lambda[1] * p.x[1] >= 0.0 { 1 } else { -1 };
                pred != p.label
            })
            .map(|p| p.mass)
            .sum()
    }

    /// Smallest margin of `λ̄` over the support.
    pub fn min_separator_margin(&self) -> f64 {
        self.points
            .iter()
            .map(|p| Self::margin(p, &LAMBDA_BAR))
            .fold(f64::INFINITY, f64::min)
    }

    /// The world as a weighted sample.
    pub fn as_sample(&self) -> Result<Sample> {
        Sample::weighted(
            self.points.iter().map(|p| p.x.to_vec()).collect(),
            self.points.iter().map(|p| p.label).collect(),
            self.points.iter().map(|p| p.mass).collect(),
        )
    }
}

/// `m` i.i.d. draws from the world.
pub fn sample_world(world: &StaggeredWorld, m: usize, seed: u64) -> Result<Sample> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let dist = WeightedIndex::new(world.points.iter().map(|p| p.mass))
        .map_err(|e| Error::InvalidArgument(format!("bad world masses: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let p = &world.points[dist.sample(&mut rng)];
        instances.push(p.x.to_vec());
        labels.push(p.label);
    }
    Sample::new(instances, labels)
}

/// `max t` subject to `y⟨λ, x⟩ ≥ t` on the distinct sample points and `‖λ‖₁ = 1`.
fn max_margin_lp(sample: &Sample) -> Result<(Weighting, f64)> {
    let mut distinct: Vec<(&[f64], i8)> = Vec::new();
    for (x, &y) in sample.instances().iter().zip(sample.labels()) {
        if !distinct.iter().any(|(dx, dy)| *dx == x.as_slice() && *dy == y) {
            distinct.push((x, y));
        }
    }
    let k = distinct.len();
    // λ⁺ (2), λ⁻ (2), t, one slack per point.
    let mut lp = LinearProgram::new(5 + k);
    lp.set_bounds(4, -1.0, 1.0)?;
    lp.set_objective_coeff(4, 1.0);
    for (s, (x, y)) in distinct.iter().enumerate() {
        let y = f64::from(*y);
        lp.add_sparse_equality(
            &[
                (0, y * x[0]),
                (1, y * x[1]),
                (2, -y * x[0]),
                (3, -y * x[1]),
                (4, -1.0),
                (5 + s, -1.0),
            ],
            0.0,
        )?;
    }
    lp.add_sparse_equality(&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], 1.0)?;
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Inconsistent(format!("max-margin LP reported {:?}", sol.status)));
    }
    let raw = [sol.x[0] - sol.x[2], sol.x[1] - sol.x[3]];
    let norm = raw[0].abs() + raw[1].abs();
    if norm <= 0.0 {
        return Err(Error::NotSeparable { margin: sol.x[4] });
    }
    let lambda = [raw[0] / norm, raw[1] / norm];
    let margin = distinct
        .iter()
        .map(|(x, y)| f64::from(*y) * (lambda[0] * x[0] + lambda[1] * x[1]))
        .fold(f64::INFINITY, f64::min);
    Ok((Weighting::new(lambda.to_vec())?, margin))
}

/// Maximum-margin weighting of a two-dimensional sample under `‖λ‖₁ = 1`.
pub fn max_margin_2d(sample: &Sample) -> Result<(Weighting, f64)> {
    if sample.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: sample.dim() });
    }
    let pos = sample.labels().iter().any(|&y| y > 0);
    let neg = sample.labels().iter().any(|&y| y < 0);
    if !(pos && neg) {
        return Err(Error::InvalidArgument("max-margin solution needs both labels".into()));
    }
    let (lambda, margin) = max_margin_lp(sample)?;
    if margin <= 0.0 {
        return Err(Error::NotSeparable { margin });
    }
    Ok((lambda, margin))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub scale: f64,
    /// `R_φ(c·Hλ̂)`.
    pub risk_hat: f64,
    /// `R_φ(c·Hλ̄)`.
    pub risk_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityTrial {
    pub seed: u64,
    pub lambda_hat: [f64; 2],
    pub sample_margin: f64,
    /// `R_L(λ̂)`, which here equals the misclassified world mass.
    pub classification_risk: f64,
    pub misclassifies: bool,
    pub rows: Vec<ScaleRow>,
}

/// One draw: fit `λ̂` by max margin on `m` samples and evaluate the world risks
/// of `c·λ̂` and `c·λ̄` for every scale.
pub fn impossibility_trial(
    world: &StaggeredWorld,
    m: usize,
    scales: &[f64],
    loss: &Loss,
    seed: u64,
) -> Result<ImpossibilityTrial> {
    let sample = sample_world(world, m, seed)?;
    // Single-label samples have no two-class max-margin problem; the LP over
    // the available points still yields the normalized direction maximizing
    // the smallest margin.
    let (lambda, sample_margin) = max_margin_lp(&sample)?;
    let lambda_hat = [lambda[0], lambda[1]];
    let classification_risk = world.classification_risk(&lambda_hat);
    let rows = scales
        .iter()
        .map(|&c| ScaleRow {
            scale: c,
            risk_hat: world.surrogate_risk(&[c * lambda_hat[0], c * lambda_hat[1]], loss),
            risk_bar: world.surrogate_risk(&[c * LAMBDA_BAR[0], c * LAMBDA_BAR[1]], loss),
        })
        .collect();
    Ok(ImpossibilityTrial {
        seed,
        lambda_hat,
        sample_margin,
        classification_risk,
        misclassifies: classification_risk > 0.0,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityReport {
    pub depth: usize,
    pub m: usize,
    pub loss: Loss,
    pub seed: u64,
    /// Draws made, including the reported one.
    pub attempts: usize,
    /// False when every draw produced a `λ̂` that is correct on the whole world.
    pub found: bool,
    pub trial: ImpossibilityTrial,
}

/// Repeats [`impossibility_trial`] with seeds `seed, seed+1, ...` until `λ̂`
/// misclassifies positive world mass, at most [`IMPOSSIBILITY_RETRIES`] times.
pub fn impossibility_report(
    depth: usize,
    m: usize,
    scales: &[f64],
    loss: &Loss,
    seed: u64,
) -> Result<ImpossibilityReport> {
    if depth < 3 {
        return Err(Error::InvalidArgument("depth must be at least 3".into()));
    }
    if scales.is_empty() || scales.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::InvalidArgument("scales must be positive and finite".into()));
    }
    loss.validate()?;
    let world = build_staggered(depth)?;
    let mut last = None;
    for attempt in 0..IMPOSSIBILITY_RETRIES {
        let trial = impossibility_trial(&world, m, scales, loss, seed.wrapping_add(attempt as u64))?;
        if trial.misclassifies {
            return Ok(ImpossibilityReport { depth, m, loss: *loss, seed, attempts: attempt + 1, found: true, trial });
        }
        last = Some(trial);
    }
    Ok(ImpossibilityReport {
        depth,
        m,
        loss: *loss,
        seed,
        attempts: IMPOSSIBILITY_RETRIES,
        found: false,
        trial: last.expect("at least one attempt"),
    })
}

/// One-dimensional world: `X` uniform on `[-1, 1)`, and `P(y = +1 | x)`
/// constant on cells of width `1/cells_per_unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeWorld {
    pub cells_per_unit: u32,
    /// One conditional probability per cell, left to right.
    pub eta: Vec<f64>,
}

impl LatticeWorld {
    /// Cells of width ¼ alternating between 0.8 and 0.2 in pairs.
    pub fn noisy_default() -> Self {
        LatticeWorld {
            cells_per_unit: 4,
            eta: vec![0.8, 0.2, 0.2, 0.8, 0.8, 0.2, 0.2, 0.8],
        }
    }

    /// Labels `-1` on `[-1, 0)` and `+1` on `[0, 1)`.
    pub fn deterministic_halves() -> Self {
        LatticeWorld { cells_per_unit: 1, eta: vec![0.0, 1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells_per_unit == 0 || self.eta.len() != 2 * self.cells_per_unit as usize {
            return Err(Error::InvalidArgument(format!(
                "need {} conditional probabilities for {} cells per unit",
                2 * self.cells_per_unit,
                self.cells_per_unit
            )));
        }
        if self.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidArgument("conditional probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        1.0 / f64::from(self.cells_per_unit)
    }

    fn cell(&self, x: f64) -> usize {
        (((x + 1.0) * f64::from(self.cells_per_unit)).floor() as usize).min(self.eta.len() - 1)
    }

    pub fn bayes_risk(&self) -> f64 {
        self.eta.iter().map(|e| e.min(1.0 - e)).sum::<f64>() / self.eta.len() as f64
    }

    pub fn sample(&self, m: usize, rng: &mut impl Rng) -> Result<Sample> {
        let mut instances = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y = if rng.random_bool(self.eta[self.cell(x)]) { 1 } else { -1 };
            instances.push(vec![x]);
            labels.push(y);
        }
        Sample::new(instances, labels)
    }

    /// Exact classification risk of `sign(Hλ)` for a one-dimensional lattice class.
    pub fn classification_risk(&self, resolution: u32, lambda: &[f64]) -> Result<f64> {
        let r = f64::from(resolution);
        let expected = 2 * (resolution as usize).pow(2);
        if lambda.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: lambda.len() });
        }
        let w = self.width();
        let mut risk = 0.0;
        for (k, &eta) in self.eta.iter().enumerate() {
            let (a, b) = (-1.0 + k as f64 * w, -1.0 + (k + 1) as f64 * w);
            // Class cells overlapping [a, b).
            let first = ((a + r) * r).floor().max(0.0) as usize;
            let last = (((b + r) * r).ceil() as usize).min(expected);
            for (c, &l) in lambda.iter().enumerate().take(last).skip(first) {
                let (ca, cb) = (-r + c as f64 / r, -r + (c + 1) as f64 / r);
                let overlap = (b.min(cb) - a.max(ca)).max(0.0);
                let err = if l >= 0.0 { 1.0 - eta } else { eta };
                risk += 0.5 * overlap * err;
            }
        }
        Ok(risk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub m: usize,
    /// Lattice resolution `i` of the class `H_i`.
    pub resolution: u32,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "LatticeWorld::noisy_default")]
    pub world: LatticeWorld,
    #[serde(default = "default_schedule")]
    pub stages: Vec<Stage>,
    #[serde(default = "default_sweep_loss")]
    pub loss: Loss,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

fn default_sweep_loss() -> Loss {
    Loss::Logistic
}

fn default_replications() -> usize {
    20
}

/// `m_i = 250·4^{i-1}`, class `H_i`, `ε_i = 1/m_i` for `i = 1..=4`.
pub fn default_schedule() -> Vec<Stage> {
    (1..=4u32)
        .map(|i| {
            let m = 250 * 4usize.pow(i - 1);
            Stage { m, resolution: i, epsilon: 1.0 / m as f64 }
        })
        .collect()
}

impl SweepConfig {
    pub fn new(seed: u64) -> Self {
        SweepConfig {
            world: LatticeWorld::noisy_default(),
            stages: default_schedule(),
            loss: default_sweep_loss(),
            optimizer: OptimizerConfig::default(),
            seed,
            replications: default_replications(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.loss.validate()?;
        if self.stages.is_empty() || self.replications == 0 {
            return Err(Error::InvalidArgument("need at least one stage and one replication".into()));
        }
        for s in &self.stages {
            if s.m == 0 || s.resolution == 0 || !(s.epsilon > 0.0) {
                return Err(Error::InvalidArgument(format!("bad stage {s:?}")));
            }
        }
        for w in self.stages.windows(2) {
            if w[1].m <= w[0].m || w[1].epsilon >= w[0].epsilon {
                return Err(Error::InvalidArgument(
                    "sample sizes must increase and tolerances decrease across stages".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub stage: usize,
    pub m: usize,
    pub class_size: usize,
    pub epsilon: f64,
    pub excess_risk_median: f64,
    pub excess_risk_p90: f64,
    pub replication_count: usize,
    /// Excess risk per successful replication, in replication order.
    pub excess_risks: Vec<f64>,
    /// Optimizer or sampling failures, in replication order.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub bayes_risk: f64,
    pub rows: Vec<CurveRow>,
}

fn stage_rng(seed: u64, stage: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << 32) | rep as u64);
    rng
}

fn run_replication(cfg: &SweepConfig, stage_idx: usize, rep: usize) -> Result<f64> {
    let stage = cfg.stages[stage_idx];
    let mut rng = stage_rng(cfg.seed, stage_idx, rep);
    let sample = cfg.world.sample(stage.m, &mut rng)?;
    let class = HypothesisClass::lattice(stage.resolution, 1)?;
    let fm = class.materialize(&sample)?;
    let opt = OptimizerConfig { grad_tol: stage.epsilon, ..cfg.optimizer.clone() };
    let run = match opt.method {
        Method::Coordinate => coordinate_descent(&fm, &cfg.loss, &opt)?,
        Method::Subgradient => subgradient_descent(&fm, &cfg.loss, &opt)?,
    };
    let risk = cfg.world.classification_risk(stage.resolution, run.lambda.as_slice())?;
    Ok(risk - cfg.world.bayes_risk())
}

/// Lower-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Trains at every stage and replication and reports excess classification
/// risk over the Bayes risk of the world.
pub fn consistency_sweep(cfg: &SweepConfig) -> Result<SweepCurve> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.stages.len())
        .flat_map(|s| (0..cfg.replications).map(move |r| (s, r)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(s, r)| run_replication(cfg, s, r))
        .collect();

    let mut rows = Vec::with_capacity(cfg.stages.len());
    for (s, stage) in cfg.stages.iter().enumerate() {
        let mut excess = Vec::new();
        let mut failures = Vec::new();
        for (r, res) in results[s * cfg.replications..(s + 1) * cfg.replications].iter().enumerate() {
            match res {
                Ok(v) => excess.push(*v),
                Err(e) => failures.push(format!("replication {r}: {e}")),
            }
        }
        let mut sorted = excess.clone();
        sorted.sort_by(f64::total_cmp);
        rows.push(CurveRow {
            stage: s + 1,
            m: stage.m,
            class_size: 2 * (stage.resolution as usize).pow(2),
            epsilon: stage.epsilon,
            excess_risk_median: quantile(&sorted, 0.5),
            excess_risk_p90: quantile(&sorted, 0.9),
            replication_count: excess.len(),
            excess_risks: excess,
            failures,
        });
    }
    Ok(SweepCurve { bayes_risk: cfg.world.bayes_risk(), rows })
}

/// Writes the curve as CSV with one row per stage.
pub fn write_curve_csv<W: std::io::Write>(curve: &SweepCurve, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "stage",
        "m",
        "class_size",
        "epsilon",
        "excess_risk_median",
        "excess_risk_p90",
        "replication_count",
    ])?;
    for row in &curve.rows {
        wtr.write_record([
            row.stage.to_string(),
            row.m.to_string(),
            row.class_size.to_string(),
            row.epsilon.to_string(),
            row.excess_risk_median.to_string(),
            row.excess_risk_p90.to_string(),
            row.replication_count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

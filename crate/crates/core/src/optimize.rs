//! Subgradient descent and greedy coordinate descent on the empirical
//! surrogate risk, plus dual lower bounds built from decorrelating weights.

use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardcore::HardCoreCertificate;
use crate::hypotheses::FeatureMatrix;
use crate::losses::Loss;
use crate::numeric::{bisect_increasing, golden_section_max};

/// Largest step the coordinate line search will take.
pub const LINE_SEARCH_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60

/// Tolerance on `Σ_j w_j p_j y_j h_i(x_j)` for a weight vector to count as decorrelating.
pub const DECORRELATION_TOL: f64 = 1e-7;

/// Coefficients of a linear combination of hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weighting {
    coeffs: Vec<f64>,
    l1: f64,
}

impl Weighting {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(v) = coeffs.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite weighting entry {v}")));
        }
        let l1 = coeffs.iter().map(|v| v.abs()).sum();
        Ok(Weighting { coeffs, l1 })
    }

    pub fn zeros(n: usize) -> Self {
        Weighting { coeffs: vec![0.0; n], l1: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.coeffs.iter()
    }

    pub fn scaled(&self, c: f64) -> Result<Weighting> {
        Weighting::new(self.coeffs.iter().map(|v| c * v).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }
}

impl Index<usize> for Weighting {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.coeffs[i]
    }
}

impl TryFrom<Vec<f64>> for Weighting {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Weighting::new(v)
    }
}

impl From<Weighting> for Vec<f64> {
    fn from(w: Weighting) -> Self {
        w.coeffs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Subgradient,
    Coordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Target suboptimality; used with `dual_bound`.
    pub rho: f64,
    /// Stop once the sup-norm of the (sub)gradient is at most this.
    pub grad_tol: f64,
    /// Subgradient step scale; the step at iteration `t` is `scale / sqrt(t + 1)`.
    pub step_scale: f64,
    pub seed: u64,
    /// Starting point; zero when absent.
    pub init: Option<Vec<f64>>,
    /// A known lower bound on the optimum, enabling the gap stop.
    pub dual_bound: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Coordinate,
            max_iters: 10_000,
            rho: 1e-3,
            grad_tol: 1e-10,
            step_scale: 1.0,
            seed: 0,
            init: None,
            dual_bound: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol >= 0.0) || !(self.step_scale > 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be ≥ 0 and step_scale > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Gradient,
    Iterations,
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub l1_norm: f64,
    pub grad_sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptRun {
    pub lambda: Weighting,
    pub objective: f64,
    pub trace: Vec<TracePoint>,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub dual_lower_bound: Option<f64>,
    /// Set when some line search hit [`LINE_SEARCH_CAP`].
    pub truncated: bool,
}

struct Objective<'a> {
    fm: &'a FeatureMatrix,
    loss: &'a Loss,
}

impl Objective<'_> {
    fn value(&self, margins: &[f64]) -> f64 {
        margins
            .iter()
            .zip(self.fm.weights())
            .map(|(m, w)| w * self.loss.value(-m))
            .sum()
    }

    fn gradient(&self, margins: &[f64]) -> Vec<f64> {
        let fm = self.fm;
        let mut g = vec![0.0; fm.cols()];
        for j in 0..fm.rows() {
            let w = fm.weights()[j];
            if w == 0.0 {
                continue;
            }
            let coef = -w * self.loss.subgradient(-margins[j]) * fm.labels()[j];
            if coef == 0.0 {
                continue;
            }
            for (gi, h) in g.iter_mut().zip(fm.row(j)) {
                *gi += coef * h;
            }
        }
        g
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn start_point(fm: &FeatureMatrix, cfg: &OptimizerConfig) -> Result<Vec<f64>> {
    match &cfg.init {
        Some(v) => {
            fm.check_weighting(v)?;
            Ok(v.clone())
        }
        None => Ok(vec![0.0; fm.cols()]),
    }
}

fn trace_point(iter: usize, objective: f64, lambda: &[f64], grad: &[f64]) -> TracePoint {
    TracePoint {
        iter,
        objective,
        l1_norm: lambda.iter().map(|v| v.abs()).sum(),
        grad_sup_norm: sup_norm(grad),
    }
}

fn gap_reached(cfg: &OptimizerConfig, objective: f64) -> bool {
    cfg.dual_bound.is_some_and(|d| objective - d <= cfg.rho)
}

/// Subgradient descent for the hinge loss with steps `scale/√(t+1)`,
/// returning the best iterate seen.
pub fn subgradient_descent(fm: &FeatureMatrix, loss: &Loss, cfg: &OptimizerConfig) -> Result<OptRun> {
    cfg.validate()?;
    if !matches!(loss, Loss::Hinge) {
        return Err(Error::UnsupportedLoss {
            loss: loss.to_string(),
            operation: "subgradient descent",
        });
    }
    let obj = Objective { fm, loss };
    let mut lambda = start_point(fm, cfg)?;
    let mut margins = fm.margins(&lambda)?;
    let mut value = obj.value(&margins);
    let mut grad = obj.gradient(&margins);
    let mut best = (lambda.clone(), value);
    let mut trace = vec![trace_point(0, value, &lambda, &grad)];
    let mut stop = StopReason::Iterations;
    let mut iterations = 0;

    for t in 0..cfg.max_iters {
        if sup_norm(&grad) <= cfg.grad_tol {
            stop = StopReason::Gradient;
            break;
        }
        if gap_reached(cfg, best.1) {
            stop = StopReason::Gap;
            break;
        }
        let eta = cfg.step_scale / ((t + 1) as f64).sqrt();
        for (l, g) in lambda.iter_mut().zip(&grad) {
            *l -= eta * g;
        }
        margins = fm.margins(&lambda)?;
        value = obj.value(&margins);
        grad = obj.gradient(&margins);
        iterations = t + 1;
        if value < best.1 {
            best = (lambda.clone(), value);
        }
        trace.push(trace_point(iterations, value, &lambda, &grad));
    }
    if stop == StopReason::Iterations && gap_reached(cfg, best.1) {
        stop = StopReason::Gap;
    }
    Ok(OptRun {
        lambda: Weighting::new(best.0)?,
        objective: best.1,
        trace,
        stop_reason: stop,
        iterations,
        dual_lower_bound: cfg.dual_bound,
        truncated: false,
    })
}

/// Greedy coordinate descent with exact line search for the smooth losses.
///
/// Each step moves the coordinate with the largest absolute partial
/// derivative (lowest index on ties) to the minimizer of the risk along that
/// axis. The minimizer is bracketed by doubling from 1 up to
/// [`LINE_SEARCH_CAP`] and then located by bisection on the directional
/// derivative.
pub fn coordinate_descent(fm: &FeatureMatrix, loss: &Loss, cfg: &OptimizerConfig) -> Result<OptRun> {
    cfg.validate()?;
    loss.validate()?;
    if matches!(loss, Loss::Hinge) {
        return Err(Error::UnsupportedLoss {
            loss: loss.to_string(),
            operation: "coordinate descent",
        });
    }
    let obj = Objective { fm, loss };
    let mut lambda = start_point(fm, cfg)?;
    let mut margins = fm.margins(&lambda)?;
    let mut value = obj.value(&margins);
    let mut grad = obj.gradient(&margins);
    let mut trace = vec![trace_point(0, value, &lambda, &grad)];
    let mut stop = StopReason::Iterations;
    let mut truncated = false;
    let mut iterations = 0;
    let mut column = vec![0.0; fm.rows()];

    for t in 0..cfg.max_iters {
        let gmax = sup_norm(&grad);
        if gmax <= cfg.grad_tol {
            stop = StopReason::Gradient;
            break;
        }
        if gap_reached(cfg, value) {
            stop = StopReason::Gap;
            break;
        }
        let i = grad.iter().position(|g| g.abs() == gmax).unwrap_or(0);
        let s = -grad[i].signum();
        for (j, c) in column.iter_mut().enumerate() {
            *c = s * fm.labels()[j] * fm.get(j, i);
        }
        // d/dα R(λ + α s e_i), nondecreasing in α.
        let derivative = |alpha: f64| -> f64 {
            let mut d = 0.0;
            for j in 0..fm.rows() {
                let c = column[j];
                if c != 0.0 {
                    d -= fm.weights()[j] * loss.subgradient(-(margins[j] + alpha * c)) * c;
                }
            }
            d
        };
        let mut hi = 1.0;
        while derivative(hi) < 0.0 && hi < LINE_SEARCH_CAP {
            hi *= 2.0;
        }
        let alpha = if derivative(hi) < 0.0 {
            truncated = true;
            hi
        } else {
            let lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
            bisect_increasing(derivative, lo, hi, 1e-10)
        };
        let mut candidate = margins.clone();
        for (m, c) in candidate.iter_mut().zip(&column) {
            *m += alpha * c;
        }
        let new_value = obj.value(&candidate);
        iterations = t + 1;
        if !(new_value <= value) {
            // Bisection landed marginally past the minimizer without any
            // decrease; nothing more can be gained along this axis.
            stop = StopReason::Gradient;
            break;
        }
        lambda[i] += s * alpha;
        margins = candidate;
        value = new_value;
        grad = obj.gradient(&margins);
        trace.push(trace_point(iterations, value, &lambda, &grad));
    }
    if stop == StopReason::Iterations && gap_reached(cfg, value) {
        stop = StopReason::Gap;
    }
    Ok(OptRun {
        lambda: Weighting::new(lambda)?,
        objective: value,
        trace,
        stop_reason: stop,
        iterations,
        dual_lower_bound: cfg.dual_bound,
        truncated,
    })
}

/// Dispatches on `cfg.method`.
pub fn optimize(fm: &FeatureMatrix, loss: &Loss, cfg: &OptimizerConfig) -> Result<OptRun> {
    match cfg.method {
        Method::Subgradient => subgradient_descent(fm, loss, cfg),
        Method::Coordinate => coordinate_descent(fm, loss, cfg),
    }
}

/// Largest `|Σ_j w_j p_j y_j h_i(x_j)|` over hypotheses `i`.
pub fn decorrelation_violation(fm: &FeatureMatrix, p: &[f64]) -> f64 {
    let mut acc = vec![0.0; fm.cols()];
    for j in 0..fm.rows() {
        let c = fm.weights()[j] * p[j] * fm.labels()[j];
        if c != 0.0 {
            for (a, h) in acc.iter_mut().zip(fm.row(j)) {
                *a += c * h;
            }
        }
    }
    sup_norm(&acc)
}

fn conjugate_objective(fm: &FeatureMatrix, loss: &Loss, p: &[f64]) -> f64 {
    -p.iter()
        .zip(fm.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&q, &w)| w * loss.conjugate(q))
        .sum::<f64>()
}

/// Weak-duality lower bound `-Σ_j w_j φ*(p_j)` on the empirical surrogate risk
/// over the span. `p` is a per-point density relative to the sample weights;
/// for a uniform sample this is `-(1/m) Σ_j φ*(p_j)`.
pub fn dual_lower_bound(fm: &FeatureMatrix, loss: &Loss, p: &[f64]) -> Result<f64> {
    if p.len() != fm.rows() {
        return Err(Error::DimensionMismatch { expected: fm.rows(), found: p.len() });
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("dual weights must be finite and nonnegative, got {v}")));
    }
    let violation = decorrelation_violation(fm, p);
    if violation > DECORRELATION_TOL {
        return Err(Error::NotDecorrelating { violation });
    }
    Ok(conjugate_objective(fm, loss, p))
}

/// Best bound over scalings `s·q`, `s ≥ 0`, of a decorrelating direction.
fn best_scaled_bound(fm: &FeatureMatrix, loss: &Loss, q: &[f64]) -> f64 {
    let qmax = q.iter().fold(0.0f64, |a, &v| a.max(v));
    if qmax <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| {
        let scaled: Vec<f64> = q.iter().map(|v| s * v).collect();
        conjugate_objective(fm, loss, &scaled)
    };
    let hi = match loss {
        Loss::Hinge | Loss::Logistic => 1.0 / qmax,
        Loss::Cone { exp, .. } if *exp == 0.0 => 1.0 / qmax,
        _ => {
            let mut hi = 1.0 / qmax;
            while hi < LINE_SEARCH_CAP && f(2.0 * hi) > f(hi) {
                hi *= 2.0;
            }
            2.0 * hi
        }
    };
    let (s, v) = golden_section_max(f, 0.0, hi, 1e-12 * hi);
    let endpoint = f(1.0).max(0.0);
    if v.is_finite() && s.is_finite() {
        v.max(endpoint)
    } else {
        endpoint
    }
}

/// Projects `q` onto `{q : Σ_j w_j q_j y_j h_i(x_j) = 0 ∀i}` within the rows in `support`.
fn project_decorrelating(fm: &FeatureMatrix, q: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let n = fm.cols();
    let k = support.len();
    if k == 0 {
        return None;
    }
    let b = DMatrix::from_fn(n, k, |i, c| {
        let j = support[c];
        fm.weights()[j] * fm.labels()[j] * fm.get(j, i)
    });
    let qv = DVector::from_iterator(k, support.iter().map(|&j| q[j]));
    let pinv = b.clone().pseudo_inverse(1e-12).ok()?;
    let projected = &qv - pinv * (&b * &qv);
    let mut out = vec![0.0; fm.rows()];
    for (c, &j) in support.iter().enumerate() {
        let v = projected[c];
        if v < -1e-12 {
            return None;
        }
        out[j] = v.max(0.0);
    }
    Some(out)
}

/// Duality gap `R(Hλ) - bound` at `lambda`.
///
/// The bound is the better of two dual points: the certificate's
/// decorrelating weights under their best scaling, and the loss derivatives
/// at the current margins restricted to the hard core and projected back onto
/// the decorrelating subspace.
pub fn suboptimality_certificate(
    fm: &FeatureMatrix,
    loss: &Loss,
    lambda: &[f64],
    cert: &HardCoreCertificate,
) -> Result<f64> {
    let margins = fm.margins(lambda)?;
    if cert.p.len() != fm.rows() {
        return Err(Error::DimensionMismatch { expected: fm.rows(), found: cert.p.len() });
    }
    let primal: f64 = margins
        .iter()
        .zip(fm.weights())
        .map(|(m, w)| w * loss.value(-m))
        .sum();

    let density: Vec<f64> = cert
        .p
        .iter()
        .zip(fm.weights())
        .map(|(&p, &w)| if w > 0.0 { p / w } else { 0.0 })
        .collect();
    let mut bound = if decorrelation_violation(fm, &density) <= DECORRELATION_TOL {
        best_scaled_bound(fm, loss, &density)
    } else {
        0.0
    };

    let support: Vec<usize> = cert
        .core
        .indices()
        .iter()
        .copied()
        .filter(|&j| fm.weights()[j] > 0.0)
        .collect();
    let derivs: Vec<f64> = margins.iter().map(|m| loss.subgradient(-m)).collect();
    if let Some(q) = project_decorrelating(fm, &derivs, &support) {
        if decorrelation_violation(fm, &q) <= DECORRELATION_TOL {
            bound = bound.max(best_scaled_bound(fm, loss, &q));
        }
    }
    Ok(primal - bound)
}

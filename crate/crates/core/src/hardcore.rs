//! Hard cores of empirical linear classification problems.
//!
//! The hard core is the largest set of sample points carrying a
//! decorrelating reweighting `p ≥ 0`, i.e. one with `Σ_j p_j y_j h_i(x_j) = 0`
//! for every hypothesis. On the complement some weighting has strictly
//! positive margins while abstaining on the core; on the core every
//! weighting either abstains or errs somewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::FeatureMatrix;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::optimize::Weighting;
use crate::risk::RegionMask;

/// Per-point LP optimum above which a point belongs to the core.
pub const CORE_THRESHOLD: f64 = 1e-7;
/// Tolerance for the decorrelation and abstention checks.
pub const CERTIFICATE_TOL: f64 = 1e-7;
/// Margin floor at or below which a separator is rejected.
pub const MIN_SEPARATOR_MARGIN: f64 = 1e-9;
/// Cap on the dense tableau size of a single LP.
pub const MAX_LP_ENTRIES: usize = 25_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardCoreCertificate {
    pub core: RegionMask,
    /// Decorrelating weights, positive exactly on the core, max entry 1.
    pub p: Vec<f64>,
    /// Separator weighting with `‖λ‖₁ ≤ 1`.
    pub lambda: Weighting,
    /// Margin floor achieved off the core; `None` when the complement is empty.
    pub t: Option<f64>,
    /// Optimum of `max p_j` for each point.
    pub point_optima: Vec<f64>,
}

impl HardCoreCertificate {
    /// `t`, with `+∞` standing in for an empty complement.
    pub fn margin_floor(&self) -> f64 {
        self.t.unwrap_or(f64::INFINITY)
    }

    /// Checks every certificate invariant against `fm`.
    pub fn verify(&self, fm: &FeatureMatrix) -> Result<()> {
        let m = fm.rows();
        if self.core.universe() != m || self.p.len() != m || self.point_optima.len() != m {
            return Err(Error::Inconsistent("certificate sized for a different sample".into()));
        }
        if self.lambda.len() != fm.cols() {
            return Err(Error::Inconsistent("separator sized for a different class".into()));
        }
        for j in 0..m {
            let inside = self.core.contains(j);
            if inside && !(self.p[j] > 0.0) {
                return Err(Error::Inconsistent(format!("core point {j} has p = {}", self.p[j])));
            }
            if !inside && self.p[j] != 0.0 {
                return Err(Error::Inconsistent(format!("point {j} outside the core has p = {}", self.p[j])));
            }
        }
        let violation = unweighted_correlation(fm, &self.p);
        if violation > CERTIFICATE_TOL {
            return Err(Error::Inconsistent(format!("p is not decorrelating (violation {violation:e})")));
        }
        if self.lambda.l1_norm() > 1.0 + 1e-9 {
            return Err(Error::Inconsistent(format!("separator norm {} exceeds 1", self.lambda.l1_norm())));
        }
        let margins = fm.margins(self.lambda.as_slice())?;
        let active = active_complement(fm, &self.core);
        match self.t {
            None if !active.is_empty() => {
                return Err(Error::Inconsistent("missing margin floor for nonempty complement".into()));
            }
            Some(t) if !(t > MIN_SEPARATOR_MARGIN) => {
                return Err(Error::Inconsistent(format!("margin floor {t:e} is not positive")));
            }
            _ => {}
        }
        if let Some(t) = self.t {
            for &j in &active {
                if margins[j] < t - 1e-9 {
                    return Err(Error::Inconsistent(format!(
                        "margin {} at point {j} is below the floor {t}",
                        margins[j]
                    )));
                }
            }
        }
        for &j in self.core.indices() {
            if margins[j].abs() > CERTIFICATE_TOL {
                return Err(Error::Inconsistent(format!(
                    "separator does not abstain on core point {j} (margin {:e})",
                    margins[j]
                )));
            }
        }
        Ok(())
    }
}

/// `max_i |Σ_j p_j y_j h_i(x_j)|`.
pub fn unweighted_correlation(fm: &FeatureMatrix, p: &[f64]) -> f64 {
    let mut acc = vec![0.0; fm.cols()];
    for (j, &pj) in p.iter().enumerate() {
        if pj != 0.0 {
            let c = pj * fm.labels()[j];
            for (a, h) in acc.iter_mut().zip(fm.row(j)) {
                *a += c * h;
            }
        }
    }
    acc.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Positive-weight points outside the core; zero-weight points are null and
/// constrain nothing.
fn active_complement(fm: &FeatureMatrix, core: &RegionMask) -> Vec<usize> {
    (0..fm.rows())
        .filter(|&j| !core.contains(j) && fm.weights()[j] > 0.0)
        .collect()
}

fn check_lp_size(rows: usize, cols: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(size) if size <= MAX_LP_ENTRIES => Ok(()),
        _ => Err(Error::ResourceLimit(format!(
            "LP with {rows} rows and {cols} columns exceeds {MAX_LP_ENTRIES} tableau entries"
        ))),
    }
}

/// The polytope `{p ∈ [0,1]^m : A p = 0}` with `A_ij = y_j h_i(x_j)`;
/// zero-weight points are pinned to 0.
fn decorrelation_polytope(fm: &FeatureMatrix) -> Result<LinearProgram> {
    let m = fm.rows();
    let mut lp = LinearProgram::new(m);
    for j in 0..m {
        let hi = if fm.weights()[j] > 0.0 { 1.0 } else { 0.0 };
        lp.set_bounds(j, 0.0, hi)?;
    }
    for i in 0..fm.cols() {
        let row: Vec<f64> = (0..m).map(|j| fm.labels()[j] * fm.get(j, i)).collect();
        if row.iter().any(|&v| v != 0.0) {
            lp.add_equality(row, 0.0)?;
        }
    }
    Ok(lp)
}

/// Computes and verifies the hard core of the sample in `fm`.
pub fn compute_hardcore(fm: &FeatureMatrix) -> Result<HardCoreCertificate> {
    let m = fm.rows();
    check_lp_size(fm.cols(), 2 * m + fm.cols())?;
    let base = decorrelation_polytope(fm)?;

    let solutions: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            if fm.weights()[j] == 0.0 {
                return Ok(vec![0.0; m]);
            }
            let mut lp = base.clone();
            lp.set_objective_coeff(j, 1.0);
            let sol = lp::solve(&lp)?;
            match sol.status {
                LpStatus::Optimal => Ok(sol.x),
                // p = 0 is always feasible and the box is bounded.
                status => Err(Error::Inconsistent(format!(
                    "decorrelation LP for point {j} reported {status:?}"
                ))),
            }
        })
        .collect::<Result<_>>()?;

    let point_optima: Vec<f64> = (0..m).map(|j| solutions[j][j]).collect();
    let core_flags: Vec<bool> = point_optima.iter().map(|&v| v > CORE_THRESHOLD).collect();
    let core = RegionMask::from_flags(&core_flags);

    let mut p = vec![0.0; m];
    for sol in &solutions {
        for (acc, v) in p.iter_mut().zip(sol) {
            *acc += v;
        }
    }
    for (v, &inside) in p.iter_mut().zip(&core_flags) {
        if !inside {
            *v = 0.0;
        }
    }
    let max = p.iter().fold(0.0f64, |a, &v| a.max(v));
    if max > 0.0 {
        for v in &mut p {
            *v /= max;
        }
    }

    let (lambda, t) = separator_certificate(fm, &core)?;
    let cert = HardCoreCertificate {
        core,
        p,
        lambda,
        t: t.is_finite().then_some(t),
        point_optima,
    };
    cert.verify(fm)?;
    Ok(cert)
}

/// The separator LP and the index of its `t` variable; `None` when the
/// complement is empty.
fn separator_program(fm: &FeatureMatrix, core: &RegionMask) -> Result<Option<(LinearProgram, usize)>> {
    let m = fm.rows();
    let n = fm.cols();
    if core.universe() != m {
        return Err(Error::DimensionMismatch { expected: m, found: core.universe() });
    }
    let active = active_complement(fm, core);
    if active.is_empty() {
        return Ok(None);
    }
    // Variables: λ⁺ (n), λ⁻ (n), t, one slack per active point, norm slack.
    let t_var = 2 * n;
    let first_slack = t_var + 1;
    let norm_slack = first_slack + active.len();
    let vars = norm_slack + 1;
    let rows = active.len() + core.len() + 1;
    check_lp_size(rows, vars + rows)?;

    let mut lp = LinearProgram::new(vars);
    lp.set_bounds(t_var, -1.0, 1.0)?;
    lp.set_objective_coeff(t_var, 1.0);
    let margin_terms = |j: usize| -> Vec<(usize, f64)> {
        let y = fm.labels()[j];
        let mut terms = Vec::with_capacity(2 * n);
        for i in 0..n {
            let a = y * fm.get(j, i);
            if a != 0.0 {
                terms.push((i, a));
                terms.push((n + i, -a));
            }
        }
        terms
    };
    for (k, &j) in active.iter().enumerate() {
        let mut terms = margin_terms(j);
        terms.push((t_var, -1.0));
        terms.push((first_slack + k, -1.0));
        lp.add_sparse_equality(&terms, 0.0)?;
    }
    for &j in core.indices() {
        lp.add_sparse_equality(&margin_terms(j), 0.0)?;
    }
    let mut norm: Vec<(usize, f64)> = (0..2 * n).map(|v| (v, 1.0)).collect();
    norm.push((norm_slack, 1.0));
    lp.add_sparse_equality(&norm, 1.0)?;
    Ok(Some((lp, t_var)))
}

/// Solves `max t` subject to margins `≥ t` off the core, margins `= 0` on the
/// core and `‖λ‖₁ ≤ 1`. Returns `(0, +∞)` when the complement is empty.
pub fn separator_certificate(fm: &FeatureMatrix, core: &RegionMask) -> Result<(Weighting, f64)> {
    let n = fm.cols();
    let Some((lp, t_var)) = separator_program(fm, core)? else {
        return Ok((Weighting::zeros(n), f64::INFINITY));
    };
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Inconsistent(format!("separator LP reported {:?}", sol.status)));
    }
    let t = sol.x[t_var];
    if t <= MIN_SEPARATOR_MARGIN {
        return Err(Error::Inconsistent(format!(
            "no positive margin off the core (best {t:e}); the core is too small"
        )));
    }
    let lambda = Weighting::new((0..n).map(|i| sol.x[i] - sol.x[n + i]).collect())?;
    Ok((lambda, t))
}

/// Final simplex tableau of the separator LP as text; `None` when the
/// complement is empty.
pub fn separator_tableau(fm: &FeatureMatrix, core: &RegionMask) -> Result<Option<String>> {
    let Some((lp, _)) = separator_program(fm, core)? else {
        return Ok(None);
    };
    let opts = lp::SolverOptions { dump_tableau: true, ..Default::default() };
    Ok(lp::solve_with(&lp, &opts)?.tableau_dump)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub trials: usize,
    /// Draws with every core margin zero.
    pub abstained: usize,
    /// Draws with some negative core margin.
    pub erred: usize,
    /// Draws with neither; should be 0.
    pub violations: usize,
}

/// Draws `trials` weightings uniformly from the unit sphere and checks that
/// each either abstains on the whole core or errs on part of it.
pub fn verify_dichotomy(
    fm: &FeatureMatrix,
    core: &RegionMask,
    trials: usize,
    seed: u64,
) -> Result<DichotomyReport> {
    if core.universe() != fm.rows() {
        return Err(Error::DimensionMismatch { expected: fm.rows(), found: core.universe() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = fm.cols();
    let mut report = DichotomyReport { trials, abstained: 0, erred: 0, violations: 0 };
    let mut lambda = vec![0.0; n];
    for _ in 0..trials {
        loop {
            for v in lambda.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let norm = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                lambda.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
        let margins = fm.margins(&lambda)?;
        let core_margins = core.indices().iter().map(|&j| margins[j]);
        if core_margins.clone().all(|v| v.abs() <= 1e-9) {
            report.abstained += 1;
        } else if core_margins.clone().any(|v| v < -1e-9) {
            report.erred += 1;
        } else {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Minimum-`‖·‖₁` weighting that agrees with `lambda` on every core point.
pub fn bounded_representation(
    fm: &FeatureMatrix,
    core: &RegionMask,
    lambda: &Weighting,
) -> Result<Weighting> {
    let n = fm.cols();
    if lambda.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: lambda.len() });
    }
    if core.universe() != fm.rows() {
        return Err(Error::DimensionMismatch { expected: fm.rows(), found: core.universe() });
    }
    if core.is_empty() {
        return Ok(Weighting::zeros(n));
    }
    check_lp_size(core.len(), 2 * n + core.len())?;
    let preds = fm.predictions(lambda.as_slice())?;
    let mut lp = LinearProgram::new(2 * n);
    lp.set_objective(vec![-1.0; 2 * n])?;
    for &j in core.indices() {
        let mut terms = Vec::with_capacity(2 * n);
        for i in 0..n {
            let h = fm.get(j, i);
            if h != 0.0 {
                terms.push((i, h));
                terms.push((n + i, -h));
            }
        }
        lp.add_sparse_equality(&terms, preds[j])?;
    }
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Inconsistent(format!(
            "minimum-norm representation LP reported {:?} although λ is feasible",
            sol.status
        )));
    }
    let candidate = Weighting::new((0..n).map(|i| sol.x[i] - sol.x[n + i]).collect())?;
    if candidate.l1_norm() <= lambda.l1_norm() {
        Ok(candidate)
    } else {
        Ok(lambda.clone())
    }
}

//! Dense bounded-variable primal simplex.
//!
//! Problems are stated as
//!
//! ```text
//! maximize  cᵀx   subject to   A x = r,   l ≤ x ≤ u
//! ```
//!
//! with possibly infinite bounds. Internally every variable is shifted,
//! reflected or split so that it lives in `[0, u']`, rows are sign-flipped to
//! make the right-hand side nonnegative, and a two-phase method runs on a
//! dense tableau. Bland's rule is used for both the entering and the leaving
//! choice, which rules out cycling on the highly degenerate polytopes the
//! hard-core computation produces.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid linear program: {0}")]
    InvalidProgram(String),
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; `NaN` unless optimal.
    pub value: f64,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Text rendering of the final tableau, when requested.
    pub tableau_dump: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    pub optimality_tol: f64,
    /// Defaults to a generous multiple of the problem size.
    pub max_iterations: Option<usize>,
    pub dump_tableau: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-8,
            pivot_tol: 1e-11,
            optimality_tol: 1e-9,
            max_iterations: None,
            dump_tableau: false,
        }
    }
}

/// A maximization problem over equality constraints and variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// `num_vars` variables with zero objective and bounds `[0, +∞)`.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, c: Vec<f64>) -> Result<(), LpError> {
        if c.len() != self.num_vars() {
            return Err(LpError::InvalidProgram(format!(
                "objective has {} entries for {} variables",
                c.len(),
                self.num_vars()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(LpError::InvalidProgram("objective must be finite".into()));
        }
        self.objective = c;
        Ok(())
    }

    pub fn set_objective_coeff(&mut self, var: usize, value: f64) {
        self.objective[var] = value;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if var >= self.num_vars() {
            return Err(LpError::InvalidProgram(format!("variable {var} out of range")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::InvalidProgram(format!(
                "bad bounds [{lower}, {upper}] for variable {var}"
            )));
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Adds the row `coeffs · x = rhs`.
    pub fn add_equality(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.num_vars() {
            return Err(LpError::InvalidProgram(format!(
                "row has {} coefficients for {} variables",
                coeffs.len(),
                self.num_vars()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
            return Err(LpError::InvalidProgram("constraint data must be finite".into()));
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    /// Adds `Σ coeff · x_var = rhs` from `(var, coeff)` terms.
    pub fn add_sparse_equality(&mut self, terms: &[(usize, f64)], rhs: f64) -> Result<(), LpError> {
        let mut row = vec![0.0; self.num_vars()];
        for &(var, c) in terms {
            if var >= row.len() {
                return Err(LpError::InvalidProgram(format!("variable {var} out of range")));
            }
            row[var] += c;
        }
        self.add_equality(row, rhs)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any equality row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().zip(&self.rhs).map(|(row, r)| {
            (row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - r).abs()
        });
        let bounds = x.iter().enumerate().map(|(j, &v)| {
            (self.lower[j] - v).max(v - self.upper[j]).max(0.0)
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
enum Column {
    /// `x = lo + x'`
    Shift { var: usize, lo: f64 },
    /// `x = hi - x'`
    Reflect { var: usize, hi: f64 },
    /// Positive part of a free variable.
    Plus { var: usize },
    /// Negative part of a free variable.
    Minus { var: usize },
}

impl Column {
    fn var(&self) -> usize {
        match *self {
            Column::Shift { var, .. }
            | Column::Reflect { var, .. }
            | Column::Plus { var }
            | Column::Minus { var } => var,
        }
    }

    fn sign(&self) -> f64 {
        match self {
            Column::Shift { .. } | Column::Plus { .. } => 1.0,
            Column::Reflect { .. } | Column::Minus { .. } => -1.0,
        }
    }

    fn offset(&self) -> f64 {
        match *self {
            Column::Shift { lo, .. } => lo,
            Column::Reflect { hi, .. } => hi,
            _ => 0.0,
        }
    }
}

struct Tableau {
    m: usize,
    /// Structural columns; artificials follow.
    structural: usize,
    width: usize,
    t: Vec<f64>,
    /// Standard-form matrix (after row flips), kept for the final refinement.
    original: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    beta: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    weak_pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn recompute_reduced_costs(&mut self) {
        for j in 0..self.width {
            let mut v = self.cost[j];
            for i in 0..self.m {
                let cb = self.cost[self.basis[i]];
                if cb != 0.0 {
                    v -= cb * self.at(i, j);
                }
            }
            self.d[j] = v;
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn objective_value(&self) -> f64 {
        let basic: f64 = (0..self.m).map(|i| self.cost[self.basis[i]] * self.beta[i]).sum();
        let nonbasic: f64 = (0..self.width)
            .filter(|&j| self.basic_row[j].is_none() && self.at_upper[j])
            .map(|j| self.cost[j] * self.upper[j])
            .sum();
        basic + nonbasic
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let p = self.t[r * w + j];
        for k in 0..w {
            self.t[r * w + k] /= p;
        }
        self.t[r * w + j] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[j];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(pivot_row.iter()) {
                    *a -= f * b;
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (a, b) in self.d.iter_mut().zip(pivot_row.iter()) {
                *a -= f * b;
            }
            self.d[j] = 0.0;
        }
        let old = self.basis[r];
        self.basic_row[old] = None;
        self.basis[r] = j;
        self.basic_row[j] = Some(r);
        self.at_upper[j] = false;
    }

    fn run_phase(&mut self, opts: &SolverOptions, limit: usize) -> Result<PhaseEnd, LpError> {
        loop {
            if self.iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            // Bland: lowest-index improving column.
            let entering = (0..self.width).find(|&j| {
                self.basic_row[j].is_none()
                    && self.upper[j] > 0.0
                    && ((!self.at_upper[j] && self.d[j] > opts.optimality_tol)
                        || (self.at_upper[j] && self.d[j] < -opts.optimality_tol))
            });
            let Some(j) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;
            let s = if self.at_upper[j] { -1.0 } else { 1.0 };

            // Ratio test; ties broken by smallest variable index.
            let mut theta = self.upper[j];
            let mut leave: Option<usize> = None; // None = bound flip of `j`
            let mut leave_var = j;
            for i in 0..self.m {
                let a = self.at(i, j);
                if a.abs() <= opts.pivot_tol {
                    continue;
                }
                let delta = s * a;
                let lim = if delta > 0.0 {
                    self.beta[i].max(0.0) / delta
                } else {
                    let ub = self.upper[self.basis[i]];
                    if ub.is_infinite() {
                        continue;
                    }
                    (ub - self.beta[i]).max(0.0) / -delta
                };
                let tie = (lim - theta).abs() <= 1e-12 * (1.0 + theta.abs().min(1e12));
                if (lim < theta && !tie) || (tie && self.basis[i] < leave_var) {
                    theta = lim;
                    leave = Some(i);
                    leave_var = self.basis[i];
                }
            }
            if theta.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != 0.0 {
                    self.beta[i] -= theta * s * a;
                }
            }
            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some(r) => {
                    let delta = s * self.at(r, j);
                    if delta.abs() < 1e-9 {
                        self.weak_pivots += 1;
                        if self.weak_pivots > 100 {
                            return Err(LpError::NumericalInstability(format!(
                                "repeated pivots below 1e-9 (last {delta:e})"
                            )));
                        }
                    }
                    let leaving = self.basis[r];
                    let entering_value = if s > 0.0 { theta } else { self.upper[j] - theta };
                    self.pivot(r, j);
                    self.at_upper[leaving] = delta < 0.0;
                    self.beta[r] = entering_value;
                }
            }
            for i in 0..self.m {
                let ub = self.upper[self.basis[i]];
                if self.beta[i] < 0.0 && self.beta[i] > -opts.feasibility_tol {
                    self.beta[i] = 0.0;
                } else if self.beta[i] > ub && self.beta[i] < ub + opts.feasibility_tol {
                    self.beta[i] = ub;
                }
            }
        }
    }

    fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tableau {} rows x {} columns ({} structural)", self.m, self.width, self.structural);
        let _ = write!(out, "{:>8}", "d");
        for j in 0..self.width {
            let _ = write!(out, " {:>11.4e}", self.d[j]);
        }
        out.push('\n');
        for i in 0..self.m {
            let _ = write!(out, "{:>8}", format!("x{}", self.basis[i]));
            for j in 0..self.width {
                let _ = write!(out, " {:>11.4e}", self.at(i, j));
            }
            let _ = writeln!(out, " | {:>11.4e}", self.beta[i]);
        }
        out
    }

    /// Recomputes basic values from the original standard-form data.
    fn refine(&mut self) {
        let m = self.m;
        if m == 0 {
            return;
        }
        let mut rhs = self.rhs.clone();
        for j in 0..self.width {
            if self.basic_row[j].is_none() {
                let v = self.nonbasic_value(j);
                if v != 0.0 {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r -= self.column_entry(i, j) * v;
                    }
                }
            }
        }
        let mut b = vec![0.0; m * m];
        for (k, &var) in self.basis.iter().enumerate() {
            for i in 0..m {
                b[i * m + k] = self.column_entry(i, var);
            }
        }
        if solve_dense(&mut b, m, &mut rhs) {
            self.beta = rhs;
        }
    }

    fn column_entry(&self, i: usize, j: usize) -> f64 {
        if j < self.structural {
            self.original[i * self.structural + j]
        } else if j - self.structural == i {
            1.0
        } else {
            0.0
        }
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n × n` system.
/// Returns false when the matrix is numerically singular.
pub(crate) fn solve_dense(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    for col in 0..n {
        let (piv, max) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if max < 1e-13 {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut v = b[col];
        for k in col + 1..n {
            v -= a[col * n + k] * b[k];
        }
        b[col] = v / a[col * n + col];
    }
    true
}

/// Solves with default options.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    let m = lp.num_rows();
    let n = lp.num_vars();

    let mut columns = Vec::with_capacity(n);
    let mut col_upper = Vec::with_capacity(n);
    for var in 0..n {
        let (lo, hi) = (lp.lower[var], lp.upper[var]);
        if lo.is_finite() {
            columns.push(Column::Shift { var, lo });
            col_upper.push(hi - lo);
        } else if hi.is_finite() {
            columns.push(Column::Reflect { var, hi });
            col_upper.push(f64::INFINITY);
        } else {
            columns.push(Column::Plus { var });
            col_upper.push(f64::INFINITY);
            columns.push(Column::Minus { var });
            col_upper.push(f64::INFINITY);
        }
    }
    let structural = columns.len();
    let width = structural + m;

    let mut original = vec![0.0; m * structural];
    let mut rhs = lp.rhs.clone();
    for i in 0..m {
        for (k, col) in columns.iter().enumerate() {
            let a = lp.rows[i][col.var()];
            original[i * structural + k] = col.sign() * a;
        }
        for var in 0..n {
            let off = match columns.iter().find(|c| c.var() == var) {
                Some(c) => c.offset(),
                None => 0.0,
            };
            rhs[i] -= lp.rows[i][var] * off;
        }
        if rhs[i] < 0.0 {
            rhs[i] = -rhs[i];
            for k in 0..structural {
                original[i * structural + k] = -original[i * structural + k];
            }
        }
    }

    let mut t = vec![0.0; m * width];
    for i in 0..m {
        t[i * width..i * width + structural]
            .copy_from_slice(&original[i * structural..(i + 1) * structural]);
        t[i * width + structural + i] = 1.0;
    }
    let mut upper = col_upper;
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut basic_row = vec![None; width];
    for i in 0..m {
        basic_row[structural + i] = Some(i);
    }
    let mut cost = vec![0.0; width];
    for c in cost.iter_mut().skip(structural) {
        *c = -1.0;
    }

    let mut tab = Tableau {
        m,
        structural,
        width,
        t,
        original,
        rhs: rhs.clone(),
        basis: (structural..width).collect(),
        basic_row,
        at_upper: vec![false; width],
        upper,
        beta: rhs.clone(),
        cost,
        d: vec![0.0; width],
        iterations: 0,
        weak_pivots: 0,
    };
    let limit = opts.max_iterations.unwrap_or(10_000 + 50 * (width + m));

    // Phase 1: drive the artificials to zero.
    tab.recompute_reduced_costs();
    tab.run_phase(opts, limit)?;
    let infeasibility = -tab.objective_value();
    let scale = 1.0 + rhs.iter().map(|r| r.abs()).sum::<f64>();
    if infeasibility > opts.feasibility_tol * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            x: Vec::new(),
            iterations: tab.iterations,
            tableau_dump: opts.dump_tableau.then(|| tab.dump()),
        });
    }
    for a in structural..width {
        tab.upper[a] = 0.0;
        tab.at_upper[a] = false;
    }
    for r in 0..m {
        if tab.basis[r] < structural {
            continue;
        }
        let candidate = (0..structural)
            .filter(|&k| tab.basic_row[k].is_none())
            .map(|k| (k, tab.at(r, k).abs()))
            .filter(|&(_, a)| a > 1e-9)
            .fold(None, |best: Option<(usize, f64)>, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            });
        if let Some((k, _)) = candidate {
            let value = tab.nonbasic_value(k);
            tab.pivot(r, k);
            tab.beta[r] = value;
        }
    }

    // Phase 2.
    for (k, col) in columns.iter().enumerate() {
        tab.cost[k] = col.sign() * lp.objective[col.var()];
    }
    for a in structural..width {
        tab.cost[a] = 0.0;
    }
    tab.recompute_reduced_costs();
    let end = tab.run_phase(opts, limit)?;
    let dump = opts.dump_tableau.then(|| tab.dump());
    if let PhaseEnd::Unbounded = end {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NAN,
            x: Vec::new(),
            iterations: tab.iterations,
            tableau_dump: dump,
        });
    }

    tab.refine();
    let mut std_x = vec![0.0; structural];
    for (k, v) in std_x.iter_mut().enumerate() {
        *v = match tab.basic_row[k] {
            Some(r) => tab.beta[r],
            None => tab.nonbasic_value(k),
        };
        *v = v.clamp(0.0, tab.upper[k]);
    }
    let mut x = vec![0.0; n];
    for (k, col) in columns.iter().enumerate() {
        let v = std_x[k];
        match *col {
            Column::Shift { var, lo } => x[var] = lo + v,
            Column::Reflect { var, hi } => x[var] = hi - v,
            Column::Plus { var } => x[var] += v,
            Column::Minus { var } => x[var] -= v,
        }
    }
    for (var, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lp.lower[var], lp.upper[var]);
    }
    let violation = lp.max_violation(&x);
    let rhs_scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    if violation > opts.feasibility_tol * rhs_scale {
        return Err(LpError::NumericalInstability(format!(
            "optimal point violates constraints by {violation:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: lp.evaluate(&x),
        x,
        iterations: tab.iterations,
        tableau_dump: dump,
    })
}

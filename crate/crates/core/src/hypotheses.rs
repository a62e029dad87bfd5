//! Finite weak-learner families and their materialization on a sample.
//!
//! A class `H = {h_1, …, h_n}` of functions into `[-1, +1]` acts linearly on
//! weightings: `(Hλ)(x) = Σ λ_i h_i(x)`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optimize::Weighting;
use crate::risk::Sample;

/// Largest lattice class we are willing to enumerate.
pub const MAX_LATTICE_CELLS: usize = 1_000_000;

/// Hypothesis values keyed by instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitTable {
    dim: usize,
    instances: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    index: HashMap<Vec<u64>, usize>,
    source: Option<PathBuf>,
}

fn instance_key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same instance.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl ExplicitTable {
    pub fn new(instances: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self> {
        if instances.is_empty() || instances.len() != values.len() {
            return Err(Error::InvalidArgument(
                "explicit table needs one value row per instance, and at least one row".into(),
            ));
        }
        let dim = instances[0].len();
        let n = values[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("explicit table has no hypotheses".into()));
        }
        let mut index = HashMap::with_capacity(instances.len());
        for (row, (x, v)) in instances.iter().zip(&values).enumerate() {
            if x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: x.len() });
            }
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
            if let Some(bad) = v.iter().find(|h| !(h.abs() <= 1.0)) {
                return Err(Error::InvalidArgument(format!(
                    "hypothesis value {bad} outside [-1, 1]"
                )));
            }
            if index.insert(instance_key(x), row).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate instance {x:?} in table")));
            }
        }
        Ok(ExplicitTable {
            dim,
            instances,
            values,
            index,
            source: None,
        })
    }

    /// Reads a table whose columns starting with `h` hold hypothesis values
    /// and whose remaining columns hold instance coordinates.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let is_hyp: Vec<bool> = headers.iter().map(|h| h.trim().starts_with('h')).collect();
        let mut instances = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record?;
            let mut x = Vec::new();
            let mut v = Vec::new();
            for (field, hyp) in record.iter().zip(&is_hyp) {
                let parsed: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad number `{field}`: {e}")))?;
                if *hyp {
                    v.push(parsed);
                } else {
                    x.push(parsed);
                }
            }
            instances.push(x);
            values.push(v);
        }
        let mut table = ExplicitTable::new(instances, values)?;
        table.source = Some(path.to_path_buf());
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.values[0].len()
    }

    fn row(&self, x: &[f64]) -> Result<&[f64]> {
        self.index
            .get(&instance_key(x))
            .map(|&r| self.values[r].as_slice())
            .ok_or_else(|| Error::UnknownInstance(x.to_vec()))
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }
}

/// A finite hypothesis class.
#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisClass {
    /// Coordinate projections `h_i(x) = x_i` on `[-1, 1]^d`.
    Projections { dim: usize },
    /// Indicators of the half-open subcubes of side `1/resolution` tiling
    /// `[-resolution, resolution)^dim`.
    LatticeCells { resolution: u32, dim: usize },
    /// Values looked up from a table.
    Explicit(ExplicitTable),
}

impl HypothesisClass {
    pub fn projections(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("projection class needs dim >= 1".into()));
        }
        Ok(HypothesisClass::Projections { dim })
    }

    pub fn lattice(resolution: u32, dim: usize) -> Result<Self> {
        if resolution == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "lattice class needs resolution >= 1 and dim >= 1".into(),
            ));
        }
        lattice_size(resolution, dim)?;
        Ok(HypothesisClass::LatticeCells { resolution, dim })
    }

    /// Number of hypotheses `n`.
    pub fn size(&self) -> usize {
        match self {
            HypothesisClass::Projections { dim } => *dim,
            HypothesisClass::LatticeCells { resolution, dim } => {
                lattice_size(*resolution, *dim).expect("checked at construction")
            }
            HypothesisClass::Explicit(t) => t.size(),
        }
    }

    /// Dimension of the instances the class accepts.
    pub fn input_dim(&self) -> usize {
        match self {
            HypothesisClass::Projections { dim } | HypothesisClass::LatticeCells { dim, .. } => *dim,
            HypothesisClass::Explicit(t) => t.dim(),
        }
    }

    fn check_instance(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite coordinate {bad}")));
        }
        if let HypothesisClass::Projections { .. } = self {
            if let Some(bad) = x.iter().find(|v| v.abs() > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "projection features need coordinates in [-1, 1], got {bad}"
                )));
            }
        }
        Ok(())
    }

    /// Index of the lattice cell containing `x`, if any.
    fn lattice_cell(resolution: u32, x: &[f64]) -> Option<usize> {
        let r = resolution as f64;
        let per_axis = 2 * (resolution as usize).pow(2);
        let mut cell = 0usize;
        for &v in x {
            if v < -r || v >= r {
                return None;
            }
            let k = (((v + r) * r).floor() as usize).min(per_axis - 1);
            cell = cell * per_axis + k;
        }
        Some(cell)
    }

    /// `h_i(x)`.
    pub fn evaluate(&self, i: usize, x: &[f64]) -> Result<f64> {
        if i >= self.size() {
            return Err(Error::InvalidArgument(format!(
                "hypothesis index {i} out of range for class of size {}",
                self.size()
            )));
        }
        self.check_instance(x)?;
        Ok(match self {
            HypothesisClass::Projections { .. } => x[i],
            HypothesisClass::LatticeCells { resolution, .. } => {
                if Self::lattice_cell(*resolution, x) == Some(i) {
                    1.0
                } else {
                    0.0
                }
            }
            HypothesisClass::Explicit(t) => t.row(x)?[i],
        })
    }

    /// All hypothesis values at `x`, written into `out` (length `n`).
    pub fn features_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                found: out.len(),
            });
        }
        self.check_instance(x)?;
        match self {
            HypothesisClass::Projections { .. } => out.copy_from_slice(x),
            HypothesisClass::LatticeCells { resolution, .. } => {
                out.fill(0.0);
                if let Some(c) = Self::lattice_cell(*resolution, x) {
                    out[c] = 1.0;
                }
            }
            HypothesisClass::Explicit(t) => out.copy_from_slice(t.row(x)?),
        }
        Ok(())
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size()];
        self.features_into(x, &mut out)?;
        Ok(out)
    }

    /// `(Hλ)(x) = Σ λ_i h_i(x)`.
    pub fn apply(&self, lambda: &Weighting, x: &[f64]) -> Result<f64> {
        if lambda.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                found: lambda.len(),
            });
        }
        self.check_instance(x)?;
        match self {
            HypothesisClass::LatticeCells { resolution, .. } => {
                Ok(Self::lattice_cell(*resolution, x).map_or(0.0, |c| lambda[c]))
            }
            _ => {
                let h = self.features(x)?;
                Ok(h.iter().zip(lambda.iter()).map(|(a, b)| a * b).sum())
            }
        }
    }

    /// Evaluates every hypothesis on every sample point.
    pub fn materialize(&self, sample: &Sample) -> Result<FeatureMatrix> {
        let m = sample.len();
        let n = self.size();
        let mut values = vec![0.0; m * n];
        for (j, x) in sample.instances().iter().enumerate() {
            self.features_into(x, &mut values[j * n..(j + 1) * n])?;
        }
        let labels = sample.labels().iter().map(|&y| f64::from(y)).collect();
        FeatureMatrix::new(values, m, n, labels, sample.weights().to_vec())
    }
}

fn lattice_size(resolution: u32, dim: usize) -> Result<usize> {
    let per_axis = 2u128 * u128::from(resolution).pow(2);
    let mut total: u128 = 1;
    for _ in 0..dim {
        total = total.saturating_mul(per_axis);
        if total > MAX_LATTICE_CELLS as u128 {
            return Err(Error::ResourceLimit(format!(
                "lattice {resolution}x{dim} has more than {MAX_LATTICE_CELLS} cells"
            )));
        }
    }
    Ok(total as usize)
}

/// The nested lattice families `H_1, …, H_{i_max}` on `dim` coordinates.
pub fn lsrm_schedule(dim: usize, i_max: u32) -> Result<Vec<HypothesisClass>> {
    if dim == 0 || i_max == 0 {
        return Err(Error::InvalidArgument("lsrm schedule needs dim >= 1 and i_max >= 1".into()));
    }
    (1..=i_max).map(|i| HypothesisClass::lattice(i, dim)).collect()
}

impl fmt::Display for HypothesisClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisClass::Projections { dim } => write!(f, "proj:{dim}"),
            HypothesisClass::LatticeCells { resolution, dim } => write!(f, "lattice:{resolution}x{dim}"),
            HypothesisClass::Explicit(t) => match &t.source {
                Some(p) => write!(f, "explicit:{}", p.display()),
                None => write!(f, "explicit:<in-memory>"),
            },
        }
    }
}

impl FromStr for HypothesisClass {
    type Err = Error;

    /// `proj:<d>`, `lattice:<i>x<d>` or `explicit:<path.csv>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |what: &str| Error::Parse(format!("bad class spec `{s}`: {what}"));
        if let Some(d) = s.strip_prefix("proj:") {
            HypothesisClass::projections(d.parse().map_err(|_| bad("dimension"))?)
        } else if let Some(rest) = s.strip_prefix("lattice:") {
            let (i, d) = rest.split_once('x').ok_or_else(|| bad("expected <i>x<d>"))?;
            HypothesisClass::lattice(
                i.parse().map_err(|_| bad("resolution"))?,
                d.parse().map_err(|_| bad("dimension"))?,
            )
        } else if let Some(path) = s.strip_prefix("explicit:") {
            Ok(HypothesisClass::Explicit(ExplicitTable::from_csv_path(Path::new(path))?))
        } else {
            Err(bad("unknown kind"))
        }
    }
}

/// Hypothesis values on a sample: entry `(j, i) = h_i(x_j)`, plus labels and
/// point weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    labels: Vec<f64>,
    weights: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f64>,
        rows: usize,
        cols: usize,
        labels: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("feature matrix must be nonempty".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if labels.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, found: labels.len() });
        }
        if weights.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, found: weights.len() });
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::InvalidArgument(format!("feature value {v} outside [-1, 1]")));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument(format!("label {y} is not ±1")));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        Ok(FeatureMatrix { rows, cols, values, labels, weights })
    }

    /// Uniformly weighted matrix from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(m * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len() });
            }
            values.extend_from_slice(r);
        }
        let weights = vec![1.0 / m.max(1) as f64; m];
        FeatureMatrix::new(values, m, n, labels.to_vec(), weights)
    }

    /// Sample size `m`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Class size `n`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.cols..(j + 1) * self.cols]
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.cols + i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn check_weighting(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: lambda.len() });
        }
        Ok(())
    }

    /// `(Hλ)(x_j)` for every row.
    pub fn predictions(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_weighting(lambda)?;
        Ok((0..self.rows)
            .map(|j| self.row(j).iter().zip(lambda).map(|(h, l)| h * l).sum())
            .collect())
    }

    /// Margins `y_j (Hλ)(x_j)`.
    pub fn margins(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.predictions(lambda)?;
        for (v, y) in p.iter_mut().zip(&self.labels) {
            *v *= y;
        }
        Ok(p)
    }

    /// Copy with the rows listed in `keep`, weights left as they are.
    pub fn select_rows(&self, keep: &[usize]) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(keep.len() * self.cols);
        for &j in keep {
            values.extend_from_slice(self.row(j));
        }
        FeatureMatrix::new(
            values,
            keep.len(),
            self.cols,
            keep.iter().map(|&j| self.labels[j]).collect(),
            keep.iter().map(|&j| self.weights[j]).collect(),
        )
    }
}

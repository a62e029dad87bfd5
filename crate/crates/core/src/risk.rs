//! Empirical risk functionals and their restrictions to regions of a sample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::FeatureMatrix;
use crate::losses::Loss;
use crate::numeric::golden_section_min;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finite labeled sample with point masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    instances: Vec<Vec<f64>>,
    labels: Vec<i8>,
    weights: Vec<f64>,
}

impl Sample {
    /// Uniformly weighted sample (the empirical measure).
    pub fn new(instances: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        let m = instances.len();
        Self::build(instances, labels, vec![1.0 / m.max(1) as f64; m])
    }

    /// Sample with explicit masses. The masses are rescaled to sum to one.
    pub fn weighted(instances: Vec<Vec<f64>>, labels: Vec<i8>, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("weights must have positive total".into()));
        }
        let weights = if (total - 1.0).abs() <= WEIGHT_SUM_TOL {
            weights
        } else {
            weights.into_iter().map(|w| w / total).collect()
        };
        Self::build(instances, labels, weights)
    }

    fn build(instances: Vec<Vec<f64>>, labels: Vec<i8>, weights: Vec<f64>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::InvalidArgument("sample must be nonempty".into()));
        }
        if labels.len() != instances.len() {
            return Err(Error::DimensionMismatch {
                expected: instances.len(),
                found: labels.len(),
            });
        }
        if weights.len() != instances.len() {
            return Err(Error::DimensionMismatch {
                expected: instances.len(),
                found: weights.len(),
            });
        }
        let dim = instances[0].len();
        if let Some(x) = instances.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: x.len() });
        }
        if let Some(y) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidArgument(format!("label {y} is not ±1")));
        }
        Ok(Sample { instances, labels, weights })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances[0].len()
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| (w - u).abs() <= WEIGHT_SUM_TOL)
    }
}

/// A set of sample indices, e.g. a hard core or its complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMask {
    indices: Vec<usize>,
    universe: usize,
}

impl RegionMask {
    pub fn new(mut indices: Vec<usize>, universe: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("region indices must be distinct".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= universe) {
            return Err(Error::InvalidArgument(format!(
                "region index {bad} out of range for sample of size {universe}"
            )));
        }
        Ok(RegionMask { indices, universe })
    }

    pub fn empty(universe: usize) -> Self {
        RegionMask { indices: Vec::new(), universe }
    }

    pub fn full(universe: usize) -> Self {
        RegionMask { indices: (0..universe).collect(), universe }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        RegionMask {
            indices: flags.iter().enumerate().filter(|(_, &f)| f).map(|(j, _)| j).collect(),
            universe: flags.len(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.universe];
        for &j in &self.indices {
            f[j] = true;
        }
        f
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn complement(&self) -> RegionMask {
        let flags = self.flags();
        RegionMask {
            indices: (0..self.universe).filter(|&j| !flags[j]).collect(),
            universe: self.universe,
        }
    }

    /// Total mass of the region under `weights`.
    pub fn mass(&self, weights: &[f64]) -> f64 {
        self.indices.iter().map(|&j| weights[j]).sum()
    }
}

fn region_rows(fm: &FeatureMatrix, region: Option<&RegionMask>) -> Result<Vec<usize>> {
    match region {
        None => Ok((0..fm.rows()).collect()),
        Some(r) if r.universe() != fm.rows() => Err(Error::DimensionMismatch {
            expected: fm.rows(),
            found: r.universe(),
        }),
        Some(r) => Ok(r.indices().to_vec()),
    }
}

/// Empirical surrogate risk `Σ_j w_j φ(-y_j (Hλ)(x_j))`, optionally restricted
/// to a region. Restrictions are not renormalized.
pub fn surrogate_risk(
    fm: &FeatureMatrix,
    lambda: &[f64],
    loss: &Loss,
    region: Option<&RegionMask>,
) -> Result<f64> {
    let margins = fm.margins(lambda)?;
    let rows = region_rows(fm, region)?;
    Ok(rows
        .iter()
        .map(|&j| fm.weights()[j] * loss.value(-margins[j]))
        .sum())
}

/// Weighted error of the sign predictor; a prediction of exactly 0 counts as `+1`.
pub fn classification_risk(
    fm: &FeatureMatrix,
    lambda: &[f64],
    region: Option<&RegionMask>,
) -> Result<f64> {
    let preds = fm.predictions(lambda)?;
    let rows = region_rows(fm, region)?;
    Ok(rows
        .iter()
        .filter(|&&j| {
            let predicted = if preds[j] >= 0.0 { 1.0 } else { -1.0 };
            predicted != fm.labels()[j]
        })
        .map(|&j| fm.weights()[j])
        .sum())
}

/// Per distinct instance, the masses carried by positive and negative labels.
pub fn label_masses(dist: &Sample) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    for ((x, &y), &w) in dist.instances().iter().zip(dist.labels()).zip(dist.weights()) {
        let key = x.iter().map(|v| (v + 0.0).to_bits()).collect();
        let entry = groups.entry(key).or_insert((0.0, 0.0));
        if y > 0 {
            entry.0 += w;
        } else {
            entry.1 += w;
        }
    }
    groups.into_values().collect()
}

/// Bayes classification risk of a finitely supported distribution: the sum of
/// minority label masses over distinct instances.
pub fn bayes_risk_discrete(dist: &Sample) -> f64 {
    label_masses(dist).iter().map(|&(p, n)| p.min(n)).sum()
}

/// Optimal surrogate risk over all measurable predictors for a finitely
/// supported distribution. The conditional risk at each instance is minimized
/// by golden-section search over predictions in `[-60, 60]`.
pub fn bayes_surrogate_risk_discrete(dist: &Sample, loss: &Loss) -> f64 {
    label_masses(dist)
        .iter()
        .map(|&(p, n)| {
            golden_section_min(|f| p * loss.value(-f) + n * loss.value(f), -60.0, 60.0, 1e-10).1
        })
        .sum()
}

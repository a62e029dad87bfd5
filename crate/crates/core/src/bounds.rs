//! Finite-sample bound calculators.
//!
//! All functions are pure arithmetic on their inputs. The structural constants
//! `c` and `b` are taken as explicit inputs; [`estimate_constants`] derives
//! plausible values from a hard-core certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardcore::{bounded_representation, HardCoreCertificate};
use crate::hypotheses::FeatureMatrix;
use crate::losses::Loss;
use crate::optimize::Weighting;

/// Ratio between the failure probability and the per-event budget `δ′`.
pub const DELTA_SPLIT: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Sample size.
    pub m: f64,
    /// Number of hypotheses.
    pub n: f64,
    /// Failure probability.
    pub delta: f64,
    /// Empirical suboptimality of the returned weighting.
    pub epsilon: f64,
    /// Suboptimality tolerance of the oracle.
    #[serde(default)]
    pub rho: f64,
    /// `φ(0)`; filled from the loss when absent.
    #[serde(default)]
    pub phi0: Option<f64>,
    /// True mass of the hard core.
    pub core_mass: f64,
    pub c: f64,
    pub b: f64,
    /// Observed sample counts in the core and its complement.
    #[serde(default)]
    pub m_core: Option<f64>,
    #[serde(default)]
    pub m_plus: Option<f64>,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.m >= 1.0) || !self.m.is_finite() {
            return bad("m must be at least 1");
        }
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return bad("n must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.epsilon >= 0.0) || !(self.rho >= 0.0) {
            return bad("epsilon and rho must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.core_mass) {
            return bad("core mass must lie in [0, 1]");
        }
        if !(self.c > 0.0) || !(self.b > 0.0) {
            return bad("c and b must be positive");
        }
        if let Some(p) = self.phi0 {
            if !(p > 0.0) {
                return bad("phi0 must be positive");
            }
        }
        let mc = self.m_core.unwrap_or(0.0);
        let mp = self.m_plus.unwrap_or(0.0);
        if mc < 0.0 || mp < 0.0 || mc + mp > self.m {
            return bad("region counts must be nonnegative and sum to at most m");
        }
        Ok(())
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta / DELTA_SPLIT
    }
}

/// A bound value together with whether its side conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checked {
    pub value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub loss: Loss,
    pub approx_error: f64,
    pub delta_prime: f64,
    pub phi0: f64,
    /// High-probability lower bounds on the core and complement sample counts.
    pub sample_split: (f64, f64),
    /// Argument of `ψ⁻¹` in the core term; absent when the core has no mass.
    pub core_inner: Option<f64>,
    /// `ψ⁻¹(core_inner)`.
    pub core_term: Option<f64>,
    /// VC term over the complement; absent when the complement has no mass.
    pub vc_term: Option<f64>,
    pub total: f64,
    pub conditions: Vec<Condition>,
    pub valid: bool,
    pub notes: Vec<String>,
}

fn check_delta(d: f64) -> Result<()> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("probability {d} must lie in (0, 1]")))
    }
}

/// Lower bounds `m(μ(C) - √(ln(1/δ′)/(2m)))` on the core count and the same
/// with `1 - μ(C)` on the complement count, clamped at 0.
pub fn sample_split_bounds(m: f64, core_mass: f64, delta_prime: f64) -> Result<(f64, f64)> {
    check_delta(delta_prime)?;
    if !(m >= 1.0) || !(0.0..=1.0).contains(&core_mass) {
        return Err(Error::InvalidArgument("need m ≥ 1 and core mass in [0, 1]".into()));
    }
    let dev = ((1.0 / delta_prime).ln() / (2.0 * m)).sqrt();
    Ok((
        (m * (core_mass - dev)).max(0.0),
        (m * (1.0 - core_mass - dev)).max(0.0),
    ))
}

/// Classification-risk bound over the complement of the hard core.
///
/// With `zero_error` this is `4(n ln(2m₊+1) + ln(4/δ′))/m₊`; otherwise the
/// relative-deviation form `ε/φ₀ + 2√(2ε·K/(φ₀ m₊)) + 4K/m₊` with the same `K`.
pub fn vc_unbounded_bound(
    n: f64,
    m_plus: f64,
    epsilon: f64,
    phi0: f64,
    delta_prime: f64,
    zero_error: bool,
) -> Result<f64> {
    check_delta(delta_prime)?;
    if !(m_plus >= 1.0) {
        return Err(Error::InvalidArgument(format!("m_plus must be at least 1, got {m_plus}")));
    }
    if !(n >= 1.0) || !(phi0 > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument("need n ≥ 1, phi0 > 0, epsilon ≥ 0".into()));
    }
    let k = n * (2.0 * m_plus + 1.0).ln() + (4.0 / delta_prime).ln();
    let tail = 4.0 * k / m_plus;
    if zero_error {
        Ok(tail)
    } else {
        Ok(epsilon / phi0 + 2.0 * (2.0 * epsilon * k / (phi0 * m_plus)).sqrt() + tail)
    }
}

/// `ε + c(√ln n + 4√ln(2/δ′))/√m_C`, valid when `m_C ≥ c²(ln n + ln(6/δ′))`.
pub fn core_surrogate_bound(c: f64, n: f64, delta_prime: f64, epsilon: f64, m_core: f64) -> Result<Checked> {
    check_delta(delta_prime)?;
    if !(c > 0.0) || !(n >= 1.0) || !(epsilon >= 0.0) || !(m_core > 0.0) {
        return Err(Error::InvalidArgument("need c > 0, n ≥ 1, epsilon ≥ 0, m_core > 0".into()));
    }
    let value = epsilon + c * (n.ln().sqrt() + 4.0 * (2.0 / delta_prime).ln().sqrt()) / m_core.sqrt();
    let valid = m_core >= c * c * (n.ln() + (6.0 / delta_prime).ln());
    Ok(Checked { value, valid })
}

/// `ψ⁻¹` of the core surrogate bound plus the approximation error.
pub fn core_classification_bound(
    loss: &Loss,
    c: f64,
    n: f64,
    delta_prime: f64,
    epsilon: f64,
    m_core: f64,
    approx_error: f64,
) -> Result<Checked> {
    if !(approx_error >= 0.0) {
        return Err(Error::InvalidArgument("approximation error must be nonnegative".into()));
    }
    let inner = core_surrogate_bound(c, n, delta_prime, epsilon, m_core)?;
    Ok(Checked {
        value: loss.psi_inverse_bound(inner.value + approx_error)?,
        valid: inner.valid && loss.is_differentiable_at_zero(),
    })
}

/// Classification risk bound for the whole problem, with `δ′ = δ/8`.
///
/// Terms whose region has zero mass are dropped, as are the side conditions
/// that would divide by that mass.
pub fn full_risk_bound(inputs: &BoundInputs, loss: &Loss, approx_error: f64) -> Result<BoundReport> {
    inputs.validate()?;
    loss.validate()?;
    if !(approx_error >= 0.0) {
        return Err(Error::InvalidArgument("approximation error must be nonnegative".into()));
    }
    let BoundInputs { m, n, epsilon, c, core_mass, .. } = *inputs;
    let dp = inputs.delta_prime();
    let phi0 = inputs.phi0.unwrap_or_else(|| loss.value_at_origin());
    let plus_mass = 1.0 - core_mass;

    let core_inner = (core_mass > 0.0).then(|| {
        epsilon
            + c * 2f64.sqrt() * (n.ln().sqrt() + 4.0 * (2.0 / dp).ln().sqrt()) / (m * core_mass).sqrt()
            + approx_error
    });
    let core_term = core_inner.map(|r| loss.psi_inverse_bound(r)).transpose()?;
    let vc_term = (plus_mass > 0.0).then(|| {
        let mp = m * plus_mass;
        8.0 * (n * (mp + 1.0).ln() + (4.0 / dp).ln()) / mp
    });
    let total = core_term.unwrap_or(0.0) + vc_term.unwrap_or(0.0);

    let mut conditions = Vec::new();
    let positive: Vec<f64> = [core_mass, plus_mass].into_iter().filter(|&v| v > 0.0).collect();
    let min_sq = positive.iter().fold(f64::INFINITY, |a, &v| a.min(v * v));
    conditions.push(Condition {
        name: "m >= 2 ln(1/delta') / min(mu(C)^2, mu(C^c)^2)".into(),
        holds: m >= 2.0 * (1.0 / dp).ln() / min_sq,
    });
    conditions.push(Condition {
        name: "m >= 2 c^2 (ln n + ln(1/delta')) / mu(C)".into(),
        holds: core_mass == 0.0 || m >= 2.0 * c * c * (n.ln() + (1.0 / dp).ln()) / core_mass,
    });
    conditions.push(Condition {
        name: "epsilon < phi(0)/m".into(),
        holds: epsilon < phi0 / m,
    });
    let valid = conditions.iter().all(|c| c.holds);

    let mut notes = Vec::new();
    match loss {
        Loss::Hinge => notes.push("hinge: psi inverse taken as the identity".into()),
        Loss::Cone { logistic, exp } if *logistic > 0.0 && *exp > 0.0 => {
            notes.push("mixed cone loss: psi inverse is a heuristic bound".into())
        }
        _ => {}
    }

    Ok(BoundReport {
        inputs: inputs.clone(),
        loss: *loss,
        approx_error,
        delta_prime: dp,
        phi0,
        sample_split: sample_split_bounds(m, core_mass, dp)?,
        core_inner,
        core_term,
        vc_term,
        total,
        conditions,
        valid,
        notes,
    })
}

/// `c = max(2 L b √2, φ(b))` with `L` the slope of `φ` at `b`.
pub fn rademacher_constant(loss: &Loss, b: f64) -> f64 {
    (2.0 * loss.lipschitz_at(b) * b * 2f64.sqrt()).max(loss.value(b))
}

/// Uniform deviation `c(√ln n + √ln(2/δ))/√m` over `‖λ‖₁ ≤ b`.
pub fn rademacher_surrogate_deviation(
    n: f64,
    m: f64,
    b: f64,
    lipschitz_at_b: f64,
    phi_at_b: f64,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    if !(b > 0.0) || !(n >= 1.0) || !(m >= 1.0) || !(lipschitz_at_b >= 0.0) || !(phi_at_b >= 0.0) {
        return Err(Error::InvalidArgument("need b > 0, n ≥ 1, m ≥ 1 and nonnegative loss data".into()));
    }
    let c = (2.0 * lipschitz_at_b * b * 2f64.sqrt()).max(phi_at_b);
    Ok(c * (n.ln().sqrt() + (2.0 / delta).ln().sqrt()) / m.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedConstants {
    pub c: f64,
    pub b: f64,
}

/// Estimates `(c, b)`: `b` is the norm of the smallest weighting agreeing with
/// `lambda` on the core (at least 1), `c` the matching Rademacher constant.
pub fn estimate_constants(
    fm: &FeatureMatrix,
    loss: &Loss,
    cert: &HardCoreCertificate,
    lambda: &Weighting,
) -> Result<EstimatedConstants> {
    let rep = bounded_representation(fm, &cert.core, lambda)?;
    let b = rep.l1_norm().max(1.0);
    Ok(EstimatedConstants { c: rademacher_constant(loss, b), b })
}

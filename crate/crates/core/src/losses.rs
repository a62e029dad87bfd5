//! Convex surrogate losses.
//!
//! Every loss `φ` here is convex, nondecreasing, positive at the origin and
//! vanishes as `z → -∞`. It is applied to the *negated* margin, so a point
//! `(x, y)` scored by `f` contributes `φ(-y f(x))`.
//!
//! Besides values and subgradients the module provides the Fenchel conjugate
//! `φ*` (used by dual certificates) and the ψ-transform linking excess
//! surrogate risk to excess classification risk.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, golden_section_min};

/// Exponent clamp for `e^z`; beyond it values saturate instead of overflowing.
pub const EXP_CLAMP: f64 = 700.0;

/// Half-width of the interval searched by [`Loss::psi`].
const PSI_SEARCH_RADIUS: f64 = 50.0;
const PSI_SEARCH_WIDTH: f64 = 1e-8;

/// A surrogate loss from the supported family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Loss {
    /// `e^z`
    Exp,
    /// `ln(1 + e^z)`
    Logistic,
    /// `max(0, 1 + z)`
    Hinge,
    /// `c1 ln(1 + e^z) + c2 e^z` with `c1, c2 >= 0`, `c1 + c2 > 0`.
    Cone { logistic: f64, exp: f64 },
}

/// A loss value together with the overflow-guard flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Set when an exponent hit [`EXP_CLAMP`].
    pub saturated: bool,
}

fn clamped_exp(z: f64) -> (f64, bool) {
    if z > EXP_CLAMP {
        (EXP_CLAMP.exp(), true)
    } else {
        (z.exp(), false)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn exp_conjugate(g: f64) -> f64 {
    if g < 0.0 {
        f64::INFINITY
    } else if g == 0.0 {
        0.0
    } else {
        g * g.ln() - g
    }
}

fn logistic_conjugate(g: f64) -> f64 {
    if !(0.0..=1.0).contains(&g) {
        f64::INFINITY
    } else if g == 0.0 || g == 1.0 {
        0.0
    } else {
        g * g.ln() + (1.0 - g) * (1.0 - g).ln()
    }
}

impl Loss {
    /// Conic combination `c1 · logistic + c2 · exp`.
    pub fn cone(logistic: f64, exp: f64) -> Result<Self> {
        let loss = Loss::Cone { logistic, exp };
        loss.validate()?;
        Ok(loss)
    }

    pub fn validate(&self) -> Result<()> {
        if let Loss::Cone { logistic, exp } = *self {
            let ok = logistic.is_finite()
                && exp.is_finite()
                && logistic >= 0.0
                && exp >= 0.0
                && logistic + exp > 0.0;
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "cone coefficients must be nonnegative with positive sum, got ({logistic}, {exp})"
                )));
            }
        }
        Ok(())
    }

    /// `φ(z)` with the saturation flag.
    pub fn eval(&self, z: f64) -> LossValue {
        match *self {
            Loss::Exp => {
                let (value, saturated) = clamped_exp(z);
                LossValue { value, saturated }
            }
            Loss::Logistic => LossValue {
                value: softplus(z),
                saturated: false,
            },
            Loss::Hinge => LossValue {
                value: (1.0 + z).max(0.0),
                saturated: false,
            },
            Loss::Cone { logistic, exp } => {
                let (e, saturated) = if exp > 0.0 { clamped_exp(z) } else { (0.0, false) };
                let l = if logistic > 0.0 { softplus(z) } else { 0.0 };
                LossValue {
                    value: logistic * l + exp * e,
                    saturated,
                }
            }
        }
    }

    /// `φ(z)`.
    pub fn value(&self, z: f64) -> f64 {
        self.eval(z).value
    }

    /// An element of `∂φ(z)`. At the hinge kink `z = -1` this returns 0.
    pub fn subgradient(&self, z: f64) -> f64 {
        match *self {
            Loss::Exp => clamped_exp(z).0,
            Loss::Logistic => sigmoid(z),
            Loss::Hinge => {
                if z > -1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Loss::Cone { logistic, exp } => {
                let e = if exp > 0.0 { clamped_exp(z).0 } else { 0.0 };
                let s = if logistic > 0.0 { sigmoid(z) } else { 0.0 };
                logistic * s + exp * e
            }
        }
    }

    /// Largest element of `∂φ(z)`; the Lipschitz constant of `φ` on `(-∞, z]`.
    pub fn lipschitz_at(&self, z: f64) -> f64 {
        match self {
            Loss::Hinge => {
                if z >= -1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.subgradient(z),
        }
    }

    /// Fenchel conjugate `φ*(g) = sup_z g z - φ(z)`; `+∞` off the domain.
    pub fn conjugate(&self, g: f64) -> f64 {
        if g.is_nan() {
            return f64::NAN;
        }
        match *self {
            Loss::Exp => exp_conjugate(g),
            Loss::Logistic => logistic_conjugate(g),
            Loss::Hinge => {
                if g == 0.0 {
                    0.0
                } else if (0.0..=1.0).contains(&g) {
                    -g
                } else {
                    f64::INFINITY
                }
            }
            Loss::Cone { logistic, exp } => {
                if exp == 0.0 {
                    return logistic * logistic_conjugate(g / logistic);
                }
                if logistic == 0.0 {
                    return exp * exp_conjugate(g / exp);
                }
                if g < 0.0 {
                    return f64::INFINITY;
                }
                if g == 0.0 {
                    return 0.0;
                }
                // φ' is increasing from 0 to ∞; the supremum sits at φ'(z) = g.
                let lo = (g / (logistic + exp)).ln() - 1.0;
                let hi = (g / exp).ln() + 1.0;
                let z = bisect_increasing(|z| self.subgradient(z) - g, lo, hi, 1e-16);
                g * z - self.value(z)
            }
        }
    }

    /// `φ(0)`.
    pub fn value_at_origin(&self) -> f64 {
        self.value(0.0)
    }

    /// Every built-in loss is differentiable at the origin (the hinge kink is at -1).
    pub fn is_differentiable_at_zero(&self) -> bool {
        true
    }

    /// Closed-form upper bound on `ψ⁻¹(r)`.
    ///
    /// Exponential: `2√r`; logistic: `4√r`; hinge: `r`. A positive multiple
    /// `cφ` has `ψ⁻¹(r) = ψ_φ⁻¹(r / c)`, which covers single-component cones.
    /// For a cone with both components positive the bound `4√(r / (c1 + c2))`
    /// is a heuristic.
    pub fn psi_inverse_bound(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "psi inverse needs r >= 0, got {r}"
            )));
        }
        Ok(match *self {
            Loss::Exp => 2.0 * r.sqrt(),
            Loss::Logistic => 4.0 * r.sqrt(),
            Loss::Hinge => r,
            Loss::Cone { logistic, exp } => {
                if logistic == 0.0 {
                    2.0 * (r / exp).sqrt()
                } else if exp == 0.0 {
                    4.0 * (r / logistic).sqrt()
                } else {
                    4.0 * (r / (logistic + exp)).sqrt()
                }
            }
        })
    }

    /// Conditional φ-risk `η φ(-α) + (1-η) φ(α)`.
    fn conditional_risk(&self, eta: f64, alpha: f64) -> f64 {
        let pos = if eta > 0.0 { eta * self.value(-alpha) } else { 0.0 };
        let neg = if eta < 1.0 { (1.0 - eta) * self.value(alpha) } else { 0.0 };
        pos + neg
    }

    /// Optimal conditional risk `H(η)`, unconstrained over α.
    pub fn optimal_conditional_risk(&self, eta: f64) -> f64 {
        if eta == 0.0 || eta == 1.0 {
            return 0.0;
        }
        golden_section_min(
            |a| self.conditional_risk(eta, a),
            -PSI_SEARCH_RADIUS,
            PSI_SEARCH_RADIUS,
            PSI_SEARCH_WIDTH,
        )
        .1
    }

    /// Optimal conditional risk over predictions of the wrong sign, `H⁻(η)`.
    pub fn wrong_sign_conditional_risk(&self, eta: f64) -> f64 {
        let (lo, hi) = if eta >= 0.5 {
            (-PSI_SEARCH_RADIUS, 0.0)
        } else {
            (0.0, PSI_SEARCH_RADIUS)
        };
        golden_section_min(|a| self.conditional_risk(eta, a), lo, hi, PSI_SEARCH_WIDTH).1
    }

    /// Numerical ψ-transform, `ψ(θ) = H⁻((1+θ)/2) - H((1+θ)/2)` for `θ ∈ [0, 1]`.
    pub fn psi(&self, theta: f64) -> Result<f64> {
        if !self.is_differentiable_at_zero() {
            return Err(Error::UnsupportedLoss {
                loss: self.to_string(),
                operation: "psi",
            });
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "psi needs theta in [0, 1], got {theta}"
            )));
        }
        if theta == 0.0 {
            return Ok(0.0);
        }
        let eta = 0.5 * (1.0 + theta);
        let v = self.wrong_sign_conditional_risk(eta) - self.optimal_conditional_risk(eta);
        Ok(v.max(0.0))
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::Exp => write!(f, "exp"),
            Loss::Logistic => write!(f, "logistic"),
            Loss::Hinge => write!(f, "hinge"),
            Loss::Cone { logistic, exp } => write!(f, "cone:{logistic},{exp}"),
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exp" => Ok(Loss::Exp),
            "logistic" => Ok(Loss::Logistic),
            "hinge" => Ok(Loss::Hinge),
            other => {
                let coeffs = other
                    .strip_prefix("cone:")
                    .ok_or_else(|| Error::Parse(format!("unknown loss `{other}`")))?;
                let (a, b) = coeffs
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("cone needs `cone:<c1>,<c2>`, got `{other}`")))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad cone coefficient `{t}`: {e}")))
                };
                Loss::cone(parse(a)?, parse(b)?)
            }
        }
    }
}

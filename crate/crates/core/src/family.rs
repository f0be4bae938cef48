//! Parametric outcome families: log-density, η-derivatives and the
//! inverse-CDF outcome simulator used for common random numbers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special;

/// Conditional density `f(y | x; α, θ)`.
///
/// For `Probit` and `Poisson` the density depends on the linear index
/// `η = x'θ + α`. `NeymanScott` has no regressors: the index reduces to the
/// individual mean `η = α` and the scalar parameter is the common variance,
/// passed as `theta_extra`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Probit,
    Poisson,
    NeymanScott,
}

/// Direction in which an individual's effect diverges when its outcomes carry
/// no variation the family can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separation {
    /// Likelihood increases without bound as α → +∞ (probit, all ones).
    Upper,
    /// Likelihood increases without bound as α → −∞ (probit all zeros, poisson all zeros).
    Lower,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Probit, Family::Poisson, Family::NeymanScott];

    pub fn name(self) -> &'static str {
        match self {
            Family::Probit => "probit",
            Family::Poisson => "poisson",
            Family::NeymanScott => "neyman-scott",
        }
    }

    /// Whether the density depends on regressors through `x'θ + α`.
    pub fn has_index(self) -> bool {
        !matches!(self, Family::NeymanScott)
    }

    /// Length of θ for a panel with `p` regressors.
    pub fn theta_dim(self, p: usize) -> usize {
        if self.has_index() {
            p
        } else {
            1
        }
    }

    pub fn validate_outcome<S: Scalar>(self, y: S) -> Result<()> {
        let ok = match self {
            Family::Probit => y == S::zero() || y == S::one(),
            Family::Poisson => y >= S::zero() && y.fract() == S::zero() && y.is_finite(),
            Family::NeymanScott => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("outcome {y} invalid for family {}", self.name())))
        }
    }

    fn variance<S: Scalar>(self, theta_extra: Option<S>) -> Result<f64> {
        match (self, theta_extra) {
            (Family::NeymanScott, Some(v)) if v > S::zero() && v.is_finite() => Ok(v.as_f64()),
            (Family::NeymanScott, _) => {
                Err(Error::Domain("neyman-scott requires a positive variance".into()))
            }
            _ => Ok(f64::NAN),
        }
    }

    /// `ln f(y | η)`. Probit indices are clamped to ±37 so the value is always
    /// finite.
    pub fn log_density<S: Scalar>(self, y: S, eta: S, theta_extra: Option<S>) -> Result<S> {
        self.validate_outcome(y)?;
        check_finite(eta)?;
        let var = self.variance(theta_extra)?;
        Ok(S::lit(self.terms(y.as_f64(), eta.as_f64(), var).0))
    }

    /// First and second derivatives of `ln f(y | η)` with respect to η.
    pub fn score_and_hessian<S: Scalar>(
        self,
        y: S,
        eta: S,
        theta_extra: Option<S>,
    ) -> Result<(S, S)> {
        self.validate_outcome(y)?;
        check_finite(eta)?;
        let var = self.variance(theta_extra)?;
        let (_, d1, d2) = self.terms(y.as_f64(), eta.as_f64(), var);
        Ok((S::lit(d1), S::lit(d2)))
    }

    /// `(ln f, ∂ln f/∂η, ∂²ln f/∂η²)` without validation. `var` is only read
    /// by the Neyman–Scott family.
    #[inline]
    pub(crate) fn terms(self, y: f64, eta: f64, var: f64) -> (f64, f64, f64) {
        match self {
            Family::Probit => {
                let q = 2.0 * y - 1.0;
                let (ll, d1, d2) = special::log_cdf_derivs(q * eta);
                (ll, q * d1, d2)
            }
            Family::Poisson => {
                let eta = eta.min(700.0);
                let lambda = eta.exp();
                (y * eta - lambda - special::ln_factorial(y), y - lambda, -lambda)
            }
            Family::NeymanScott => {
                let r = y - eta;
                (
                    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - r * r / (2.0 * var),
                    r / var,
                    -1.0 / var,
                )
            }
        }
    }

    /// Score in η only; the inner loop of the probit effect solver.
    #[inline]
    pub(crate) fn eta_derivs(self, y: f64, eta: f64, var: f64) -> (f64, f64) {
        match self {
            Family::Probit => {
                let q = 2.0 * y - 1.0;
                let z = special::clamp_probit(q * eta);
                let lambda = special::inv_mills(z);
                (q * lambda, -lambda * (z + lambda))
            }
            _ => {
                let (_, d1, d2) = self.terms(y, eta, var);
                (d1, d2)
            }
        }
    }

    /// Draws an outcome from the family at index `eta` by inverting its CDF at
    /// the uniform shock `v`. Nondecreasing in `eta` for fixed `v`, which is
    /// what makes the common-random-number coupling monotone.
    pub fn simulate_outcome<S: Scalar>(self, eta: S, v: S, theta_extra: Option<S>) -> Result<S> {
        if !(v > S::zero() && v < S::one()) {
            return Err(Error::Domain(format!("shock {v} outside (0,1)")));
        }
        check_finite(eta)?;
        let var = self.variance(theta_extra)?;
        Ok(S::lit(self.simulate_unchecked(eta.as_f64(), v.as_f64(), var)))
    }

    #[inline]
    pub(crate) fn simulate_unchecked(self, eta: f64, v: f64, var: f64) -> f64 {
        match self {
            Family::Probit => {
                if eta >= special::norm_quantile(v) {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Poisson => special::poisson_inverse_cdf(eta.min(700.0).exp(), v),
            Family::NeymanScott => eta + var.sqrt() * special::norm_quantile(v),
        }
    }

    /// Whether an individual's outcomes make its effect unbounded.
    pub fn separation<S: Scalar>(self, y: &[S]) -> Option<Separation> {
        match self {
            Family::Probit => {
                if y.iter().all(|v| *v == S::one()) {
                    Some(Separation::Upper)
                } else if y.iter().all(|v| *v == S::zero()) {
                    Some(Separation::Lower)
                } else {
                    None
                }
            }
            Family::Poisson => {
                if y.iter().all(|v| *v == S::zero()) {
                    Some(Separation::Lower)
                } else {
                    None
                }
            }
            Family::NeymanScott => None,
        }
    }
}

fn check_finite<S: Scalar>(eta: S) -> Result<()> {
    if eta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite index {eta}")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "probit" => Ok(Family::Probit),
            "poisson" => Ok(Family::Poisson),
            "neyman-scott" | "ns" | "normal" => Ok(Family::NeymanScott),
            other => Err(Error::Config(format!("unknown family {other:?}"))),
        }
    }
}

//! SCAD and LASSO penalties `p_λ(|φ|)` with their first two derivatives.
//!
//! SCAD is linear on `[0, λ]`, a concave quadratic on `(λ, aλ)` and flat at
//! `(a+1)λ²/2` from `aλ` on. At the knots the derivative takes the left
//! branch and the second derivative is 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 2.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Scad,
    Lasso,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub kind: PenaltyKind,
    pub lambda: f64,
    /// Second SCAD tuning parameter; unused by LASSO.
    pub a: f64,
}

impl Penalty {
    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        let pen = Penalty { kind: PenaltyKind::Scad, lambda, a };
        pen.validate()?;
        Ok(pen)
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        let pen = Penalty { kind: PenaltyKind::Lasso, lambda, a: f64::NAN };
        pen.validate()?;
        Ok(pen)
    }

    pub fn new(kind: PenaltyKind, lambda: f64, a: f64) -> Result<Self> {
        match kind {
            PenaltyKind::Scad => Self::scad(lambda, a),
            PenaltyKind::Lasso => Self::lasso(lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if self.kind == PenaltyKind::Scad && !(self.a.is_finite() && self.a > 2.0) {
            return Err(Error::invalid(format!("SCAD requires a > 2, got {}", self.a)));
        }
        Ok(())
    }

    /// `a` when meaningful (SCAD), `None` for LASSO.
    pub fn a_param(&self) -> Option<f64> {
        (self.kind == PenaltyKind::Scad).then_some(self.a)
    }

    /// `p_λ(|φ|)`.
    pub fn value(&self, phi: f64) -> f64 {
        let x = phi.abs();
        let lam = self.lambda;
        match self.kind {
            PenaltyKind::Lasso => lam * x,
            PenaltyKind::Scad => {
                let a = self.a;
                if x <= lam {
                    lam * x
                } else if x < a * lam {
                    (a * lam * x - 0.5 * x * x - 0.5 * lam * lam) / (a - 1.0)
                } else {
                    0.5 * (a + 1.0) * lam * lam
                }
            }
        }
    }

    /// `p'_λ(|φ|)` for `|φ| ≥ 0`.
    pub fn derivative(&self, abs_phi: f64) -> Result<f64> {
        check_nonneg(abs_phi)?;
        Ok(self.derivative_unchecked(abs_phi))
    }

    pub(crate) fn derivative_unchecked(&self, x: f64) -> f64 {
        let lam = self.lambda;
        match self.kind {
            PenaltyKind::Lasso => lam,
            PenaltyKind::Scad => {
                if x <= lam {
                    lam
                } else {
                    (self.a * lam - x).max(0.0) / (self.a - 1.0)
                }
            }
        }
    }

    /// `p''_λ(|φ|)` for `|φ| ≥ 0`.
    pub fn second_derivative(&self, abs_phi: f64) -> Result<f64> {
        check_nonneg(abs_phi)?;
        let lam = self.lambda;
        Ok(match self.kind {
            PenaltyKind::Lasso => 0.0,
            PenaltyKind::Scad if abs_phi > lam && abs_phi < self.a * lam => -1.0 / (self.a - 1.0),
            PenaltyKind::Scad => 0.0,
        })
    }

    /// `Σ_j p_λ(|φ_j|)`.
    pub fn total(&self, coefficients: &[f64]) -> f64 {
        crate::numeric::compensated_sum(coefficients.iter().map(|&c| self.value(c)))
    }

    /// `a_N = max{ p'_λ(|φ_j|) : φ_j ≠ 0 }` over the true coefficients; 0 when
    /// every coefficient is zero.
    pub fn bias_bound(&self, true_coefficients: &[f64]) -> f64 {
        true_coefficients
            .iter()
            .filter(|c| **c != 0.0)
            .map(|c| self.derivative_unchecked(c.abs()))
            .fold(0.0, f64::max)
    }

    /// True when the penalty leaves every nonzero true coefficient
    /// unpenalized, i.e. `a_N = 0`. For SCAD this holds exactly when
    /// `min |φ_j| ≥ aλ`; LASSO with `λ > 0` never qualifies.
    pub fn is_bias_free(&self, true_coefficients: &[f64]) -> bool {
        self.bias_bound(true_coefficients) == 0.0
    }
}

fn check_nonneg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::invalid(format!("penalty derivatives are defined on |φ| ≥ 0, got {x}")))
    } else {
        Ok(())
    }
}

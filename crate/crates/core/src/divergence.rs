//! Bregman divergence generators on the positive orthant: KL, perturbed KL,
//! Euclidean, and the alpha family whose limits recover KL and reverse KL.

use crate::error::{MdsError, Result};
use crate::simplex::check_same_len;

/// Floor applied to log arguments so that numerically-zero weights from
/// far-tail samples do not poison a divergence evaluation.
pub const LOG_FLOOR: f64 = 1e-300;

/// Choice of convex generator for a Bregman divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BregmanSpec {
    /// Negative entropy: `phi(x) = sum x_i ln x_i`.
    Kl,
    /// `psi(x) = eps * sum (x_i + eps) ln(x_i + eps)`, defined for
    /// entries above `-eps`. Its simplex prox is solvable in O(m log m).
    PerturbedKl { epsilon: f64 },
    /// `phi(x) = 0.5 * |x|^2`, giving half squared Euclidean distance.
    EuclideanSimplex,
    /// `phi_a(x) = 2/(1+a) * sum (1 + (1-a)/2 * x_i)^(2/(1-a))`, `a != ±1`.
    Alpha { alpha: f64 },
}

impl BregmanSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BregmanSpec::Kl | BregmanSpec::EuclideanSimplex => Ok(()),
            BregmanSpec::PerturbedKl { epsilon } => {
                if epsilon > 0.0 && epsilon.is_finite() {
                    Ok(())
                } else {
                    Err(MdsError::InvalidParameter {
                        name: "epsilon",
                        reason: format!("{epsilon} must be a positive real"),
                    })
                }
            }
            BregmanSpec::Alpha { alpha } => {
                if !alpha.is_finite() || alpha == 1.0 || alpha == -1.0 {
                    Err(MdsError::InvalidParameter {
                        name: "alpha",
                        reason: format!("{alpha} must be finite and different from +1 and -1"),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        let check = |pred: &dyn Fn(f64) -> bool, requirement: &'static str| -> Result<()> {
            for (i, &v) in x.iter().enumerate() {
                if !v.is_finite() || !pred(v) {
                    return Err(MdsError::DomainViolation {
                        index: i,
                        value: v,
                        requirement,
                    });
                }
            }
            Ok(())
        };
        match *self {
            // Exact zeros are admitted and clamped to LOG_FLOOR: the
            // discretization of far-tail samples underflows to 0.
            BregmanSpec::Kl => check(&|v| v >= 0.0, "entry >= 0"),
            BregmanSpec::PerturbedKl { epsilon } => {
                for (i, &v) in x.iter().enumerate() {
                    if !v.is_finite() || v + epsilon < 0.0 {
                        return Err(MdsError::DomainViolation {
                            index: i,
                            value: v,
                            requirement: "entry > -epsilon",
                        });
                    }
                }
                Ok(())
            }
            BregmanSpec::EuclideanSimplex => check(&|_| true, "finite"),
            BregmanSpec::Alpha { alpha } => {
                let half = (1.0 - alpha) / 2.0;
                for (i, &v) in x.iter().enumerate() {
                    if !v.is_finite() || 1.0 + half * v <= 0.0 {
                        return Err(MdsError::DomainViolation {
                            index: i,
                            value: v,
                            requirement: "1 + (1-alpha)/2 * entry > 0",
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// Generator value `phi(x)`.
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        self.validate()?;
        self.check_domain(x)?;
        Ok(self.potential_unchecked(x))
    }

    pub(crate) fn potential_unchecked(&self, x: &[f64]) -> f64 {
        match *self {
            BregmanSpec::Kl => x.iter().map(|&v| v * v.max(LOG_FLOOR).ln()).sum(),
            BregmanSpec::PerturbedKl { epsilon } => {
                epsilon
                    * x.iter()
                        .map(|&v| {
                            let s = (v + epsilon).max(LOG_FLOOR);
                            s * s.ln()
                        })
                        .sum::<f64>()
            }
            BregmanSpec::EuclideanSimplex => 0.5 * x.iter().map(|&v| v * v).sum::<f64>(),
            BregmanSpec::Alpha { alpha } => {
                let half = (1.0 - alpha) / 2.0;
                let exponent = 2.0 / (1.0 - alpha);
                2.0 / (1.0 + alpha)
                    * x.iter().map(|&v| (1.0 + half * v).powf(exponent)).sum::<f64>()
            }
        }
    }

    /// Generator gradient.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        self.check_domain(x)?;
        Ok(self.gradient_unchecked(x))
    }

    pub(crate) fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            BregmanSpec::Kl => x.iter().map(|&v| v.max(LOG_FLOOR).ln() + 1.0).collect(),
            BregmanSpec::PerturbedKl { epsilon } => x
                .iter()
                .map(|&v| epsilon * ((v + epsilon).max(LOG_FLOOR).ln() + 1.0))
                .collect(),
            BregmanSpec::EuclideanSimplex => x.to_vec(),
            BregmanSpec::Alpha { alpha } => {
                let half = (1.0 - alpha) / 2.0;
                let exponent = (1.0 + alpha) / (1.0 - alpha);
                let scale = 2.0 / (1.0 + alpha);
                x.iter()
                    .map(|&v| scale * (1.0 + half * v).powf(exponent))
                    .collect()
            }
        }
    }
}

/// KL divergence `sum x_i ln(x_i / y_i)` between positive vectors of equal
/// length. Exact zeros are clamped to [`LOG_FLOOR`]; negative entries are
/// rejected.
pub fn kl_divergence(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(MdsError::Empty);
    }
    check_same_len(x, y)?;
    for (i, &v) in x.iter().chain(y.iter()).enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(MdsError::DomainViolation {
                index: i % x.len(),
                value: v,
                requirement: "entry >= 0",
            });
        }
    }
    Ok(x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else {
                a * (a.max(LOG_FLOOR) / b.max(LOG_FLOOR)).ln()
            }
        })
        .sum())
}

/// Bregman divergence `B_phi(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>`.
pub fn bregman(spec: &BregmanSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(MdsError::Empty);
    }
    check_same_len(x, y)?;
    spec.validate()?;
    spec.check_domain(x)?;
    spec.check_domain(y)?;
    let grad_y = spec.gradient_unchecked(y);
    let linear: f64 = grad_y
        .iter()
        .zip(x.iter().zip(y))
        .map(|(&g, (&a, &b))| g * (a - b))
        .sum();
    Ok(spec.potential_unchecked(x) - spec.potential_unchecked(y) - linear)
}

/// Evaluates the alpha-family divergence at `alpha_near` (close to +1 or
/// -1) under the substitutions that recover KL and reverse KL, returning
/// `(alpha-family value, closed-form KL value)`.
///
/// Near +1 the substitution is `x = ln p, y = ln q` and the closed form is
/// `sum q_i ln(q_i / p_i)`; near -1 it is `x = p - 1, y = q - 1` with
/// closed form `sum p_i ln(p_i / q_i)`.
pub fn alpha_limit_check(p: &[f64], q: &[f64], alpha_near: f64) -> Result<(f64, f64)> {
    if alpha_near == 1.0 || alpha_near == -1.0 {
        return Err(MdsError::InvalidParameter {
            name: "alpha_near",
            reason: "must differ from +1 and -1".to_string(),
        });
    }
    check_same_len(p, q)?;
    for (i, &v) in p.iter().chain(q.iter()).enumerate() {
        if !(v > 0.0) {
            return Err(MdsError::DomainViolation {
                index: i % p.len(),
                value: v,
                requirement: "entry > 0",
            });
        }
    }
    let spec = BregmanSpec::Alpha { alpha: alpha_near };
    if alpha_near > 0.0 {
        let x: Vec<f64> = p.iter().map(|&v| v.ln()).collect();
        let y: Vec<f64> = q.iter().map(|&v| v.ln()).collect();
        let b = bregman(&spec, &x, &y)?;
        let kl = kl_divergence(q, p)?;
        Ok((b, kl))
    } else {
        let x: Vec<f64> = p.iter().map(|&v| v - 1.0).collect();
        let y: Vec<f64> = q.iter().map(|&v| v - 1.0).collect();
        let b = bregman(&spec, &x, &y)?;
        let kl = kl_divergence(p, q)?;
        Ok((b, kl))
    }
}

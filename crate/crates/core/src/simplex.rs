//! Weight vectors on the probability simplex and the cost vectors paired
//! with them by every update rule.

use crate::error::{MdsError, Result};

/// Tolerance on the sum-to-one invariant.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// A discretized distribution over m support points: nonnegative entries
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Validates nonnegativity and the sum-to-one invariant.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(MdsError::Empty);
        }
        for (i, &v) in w.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(MdsError::DomainViolation {
                    index: i,
                    value: v,
                    requirement: "finite and >= 0",
                });
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(MdsError::InvalidParameter {
                name: "weights",
                reason: format!("sum is {sum}, expected 1 within {SIMPLEX_SUM_TOL}"),
            });
        }
        Ok(Self(w))
    }

    /// Normalizes an unnormalized nonnegative vector. Fails with a
    /// degenerate-update error when the mass is zero or non-finite.
    pub fn normalized(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(MdsError::Empty);
        }
        for (i, &v) in w.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(MdsError::DomainViolation {
                    index: i,
                    value: v,
                    requirement: "finite and >= 0",
                });
            }
        }
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(MdsError::DegenerateUpdate { sum });
        }
        for v in &mut w {
            *v /= sum;
        }
        Ok(Self(w))
    }

    /// Uniform distribution over `m` atoms.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(MdsError::Empty);
        }
        Ok(Self(vec![1.0 / m as f64; m]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest weight (ties resolved to the lowest index).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        check_same_len(self.as_slice(), other.as_slice())?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(MdsError::InvalidParameter {
                name: "lambda",
                reason: format!("{lambda} not in [0, 1]"),
            });
        }
        let w = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Ok(Self(w))
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Per-sample costs; finite entries only.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(j: Vec<f64>) -> Result<Self> {
        if j.is_empty() {
            return Err(MdsError::Empty);
        }
        for (i, &v) in j.iter().enumerate() {
            if !v.is_finite() {
                return Err(MdsError::DomainViolation {
                    index: i,
                    value: v,
                    requirement: "finite",
                });
            }
        }
        Ok(Self(j))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(MdsError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Euclidean projection onto the probability simplex, sort-based in
/// O(m log m).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// log(sum(exp(x))) over entries, skipping -inf terms; returns -inf when
/// all terms are -inf.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = x.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_is_valid() {
        let q = SimplexWeights::uniform(4).unwrap();
        assert_eq!(q.as_slice(), &[0.25; 4]);
    }

    #[test]
    fn rejects_negative_entries() {
        assert!(SimplexWeights::new(vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn rejects_bad_sum() {
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn normalized_rejects_zero_mass() {
        let err = SimplexWeights::normalized(vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, MdsError::DegenerateUpdate { .. }));
    }

    #[test]
    fn cost_vector_rejects_nan() {
        assert!(CostVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(CostVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let q = vec![0.3, 0.7];
        let p = project_to_simplex(&q);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(v in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
            let p = project_to_simplex(&v);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn projection_is_closest_among_probes(
            (v, probe) in (2usize..8).prop_flat_map(|m| (
                proptest::collection::vec(-3.0f64..3.0, m),
                proptest::collection::vec(0.01f64..1.0, m),
            )),
        ) {
            let p = project_to_simplex(&v);
            let total: f64 = probe.iter().sum();
            let probe: Vec<f64> = probe.iter().map(|x| x / total).collect();
            let d = |a: &[f64]| -> f64 {
                a.iter().zip(&v).map(|(x, y)| (x - y) * (x - y)).sum()
            };
            prop_assert!(d(&p) <= d(&probe) + 1e-9);
        }
    }
}

//! Exponentiated-gradient updates factored over a finite Markov chain: a
//! backward value recursion reweights each conditional so that the path
//! marginals match the flat update on the full path space.

use crate::error::{MdsError, Result};
use crate::simplex::log_sum_exp;

/// A finite-horizon Markov chain over `|S|` states: the distribution of the
/// first state plus one row-stochastic transition matrix per subsequent
/// step. The horizon (number of state draws) is `1 + transitions.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    pub initial: Vec<f64>,
    /// `transitions[t][from][to]`
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl FiniteChain {
    pub fn new(initial: Vec<f64>, transitions: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let states = initial.len();
        if states == 0 {
            return Err(MdsError::Empty);
        }
        check_distribution(&initial, 0, 0)?;
        for (t, matrix) in transitions.iter().enumerate() {
            if matrix.len() != states {
                return Err(MdsError::DimensionMismatch {
                    left: matrix.len(),
                    right: states,
                });
            }
            for (from, row) in matrix.iter().enumerate() {
                if row.len() != states {
                    return Err(MdsError::DimensionMismatch {
                        left: row.len(),
                        right: states,
                    });
                }
                check_distribution(row, t + 1, from)?;
            }
        }
        Ok(Self {
            initial,
            transitions,
        })
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    pub fn horizon(&self) -> usize {
        1 + self.transitions.len()
    }

    /// Probability of a full path of length `horizon()`.
    pub fn path_probability(&self, path: &[usize]) -> f64 {
        let mut p = self.initial[path[0]];
        for (t, window) in path.windows(2).enumerate() {
            p *= self.transitions[t][window[0]][window[1]];
        }
        p
    }
}

fn check_distribution(row: &[f64], step: usize, state: usize) -> Result<()> {
    let mut sum = 0.0;
    for &v in row {
        if !v.is_finite() || v < 0.0 {
            return Err(MdsError::UnnormalizableConditional { step, state });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(MdsError::UnnormalizableConditional { step, state });
    }
    Ok(())
}

/// Applies one exponentiated-gradient update with step `eta` to the chain,
/// for the additive path cost `sum_t step_costs[state_t]`.
///
/// Backward messages `W_t(s)` accumulate `exp(-cost/eta)` expectations; each
/// conditional is reweighted by the downstream message and renormalized.
/// All accumulation happens in log space.
pub fn dp_exponentiated_update(
    chain: &FiniteChain,
    step_costs: &[f64],
    eta: f64,
) -> Result<FiniteChain> {
    let states = chain.states();
    if step_costs.len() != states {
        return Err(MdsError::DimensionMismatch {
            left: step_costs.len(),
            right: states,
        });
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(MdsError::InvalidParameter {
            name: "eta",
            reason: format!("{eta} must be positive"),
        });
    }
    for (i, &c) in step_costs.iter().enumerate() {
        if !c.is_finite() {
            return Err(MdsError::DomainViolation {
                index: i,
                value: c,
                requirement: "finite",
            });
        }
    }
    let horizon = chain.horizon();

    // log W_t(s): at the last step exp(-F/eta), earlier steps fold in the
    // expected downstream message.
    let mut log_w = vec![vec![0.0f64; states]; horizon];
    for s in 0..states {
        log_w[horizon - 1][s] = -step_costs[s] / eta;
    }
    for t in (0..horizon - 1).rev() {
        for s in 0..states {
            let terms: Vec<f64> = (0..states)
                .map(|next| {
                    let p = chain.transitions[t][s][next];
                    if p > 0.0 {
                        p.ln() + log_w[t + 1][next]
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            log_w[t][s] = -step_costs[s] / eta + log_sum_exp(&terms);
        }
    }

    let reweight = |row: &[f64], messages: &[f64], step: usize, state: usize| -> Result<Vec<f64>> {
        let logs: Vec<f64> = row
            .iter()
            .zip(messages)
            .map(|(&p, &lw)| if p > 0.0 { p.ln() + lw } else { f64::NEG_INFINITY })
            .collect();
        let norm = log_sum_exp(&logs);
        if norm == f64::NEG_INFINITY {
            return Err(MdsError::UnnormalizableConditional { step, state });
        }
        Ok(logs.iter().map(|&l| (l - norm).exp()).collect())
    };

    let initial = reweight(&chain.initial, &log_w[0], 0, 0)?;
    let mut transitions = Vec::with_capacity(chain.transitions.len());
    for (t, matrix) in chain.transitions.iter().enumerate() {
        let mut rows = Vec::with_capacity(states);
        for (from, row) in matrix.iter().enumerate() {
            rows.push(reweight(row, &log_w[t + 1], t + 1, from)?);
        }
        transitions.push(rows);
    }
    FiniteChain::new(initial, transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mirror::md_step_kl;
    use crate::simplex::{CostVector, SimplexWeights};

    #[test]
    fn horizon_one_reduces_to_exponentiated_gradient() {
        let chain = FiniteChain::new(vec![0.2, 0.3, 0.5], vec![]).unwrap();
        let costs = [1.0, 0.5, 2.0];
        let updated = dp_exponentiated_update(&chain, &costs, 0.7).unwrap();
        let q = md_step_kl(
            &SimplexWeights::new(chain.initial.clone()).unwrap(),
            &CostVector::new(costs.to_vec()).unwrap(),
            0.7,
        )
        .unwrap();
        for (a, b) in updated.initial.iter().zip(q.as_slice()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_costs_leave_chain_unchanged() {
        let chain = FiniteChain::new(
            vec![0.4, 0.6],
            vec![vec![vec![0.7, 0.3], vec![0.2, 0.8]]],
        )
        .unwrap();
        let updated = dp_exponentiated_update(&chain, &[3.0, 3.0], 1.0).unwrap();
        for (a, b) in updated.initial.iter().zip(&chain.initial) {
            assert!((a - b).abs() < 1e-12);
        }
        for (ma, mb) in updated.transitions.iter().zip(&chain.transitions) {
            for (ra, rb) in ma.iter().zip(mb) {
                for (a, b) in ra.iter().zip(rb) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    fn enumerate_paths(states: usize, horizon: usize) -> Vec<Vec<usize>> {
        let mut paths = vec![vec![]];
        for _ in 0..horizon {
            let mut next = Vec::new();
            for p in &paths {
                for s in 0..states {
                    let mut q = p.clone();
                    q.push(s);
                    next.push(q);
                }
            }
            paths = next;
        }
        paths
    }

    #[test]
    fn path_marginals_match_flat_update_on_random_chain() {
        use rand::Rng;
        let mut rng = crate::rng::substream(99, &[0]);
        for _ in 0..10 {
            let states = 3;
            let horizon = 3;
            let random_row = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.05..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / sum).collect()
            };
            let initial = random_row(&mut rng);
            let transitions: Vec<Vec<Vec<f64>>> = (0..horizon - 1)
                .map(|_| (0..states).map(|_| random_row(&mut rng)).collect())
                .collect();
            let chain = FiniteChain::new(initial, transitions).unwrap();
            let costs: Vec<f64> = (0..states).map(|_| rng.random_range(0.0..3.0)).collect();
            let eta = rng.random_range(0.5..2.0);

            let updated = dp_exponentiated_update(&chain, &costs, eta).unwrap();

            // Flat oracle: reweight every full path by exp(-J/eta).
            let paths = enumerate_paths(states, horizon);
            let mut flat: Vec<f64> = paths
                .iter()
                .map(|p| {
                    let path_cost: f64 = p.iter().map(|&s| costs[s]).sum();
                    chain.path_probability(p) * (-path_cost / eta).exp()
                })
                .collect();
            let z: f64 = flat.iter().sum();
            for v in &mut flat {
                *v /= z;
            }
            for (p, &expected) in paths.iter().zip(&flat) {
                let got = updated.path_probability(p);
                assert!((got - expected).abs() < 1e-8, "path {p:?}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn rejects_unnormalized_rows() {
        assert!(FiniteChain::new(vec![0.5, 0.6], vec![]).is_err());
        let bad = FiniteChain::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.9, 0.0], vec![0.5, 0.5]]],
        );
        assert!(bad.is_err());
    }
}

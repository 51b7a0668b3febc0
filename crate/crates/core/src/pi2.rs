//! Path-integral policy improvement baseline: per-time-step softmin
//! weighting of basis-projected exploration noise with time-decaying
//! aggregation. No cost normalization and no annealing heuristics.

use crate::error::{MdsError, Result};
use crate::exec::try_map_indexed;
use crate::gaussian::{Covariance, GaussianSearchState};
use crate::rng::substream;
use crate::simplex::SimplexWeights;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Task surface the baseline drives: per-step basis activations plus a
/// rollout evaluation under externally supplied forcing values.
pub trait Pi2Task: Sync {
    /// Number of parallel policy dimensions (one set of basis weights each).
    fn dims(&self) -> usize;
    fn n_basis(&self) -> usize;
    /// Number of integration steps T.
    fn steps(&self) -> usize;
    /// Basis regressor at step `t` (shared across dimensions).
    fn basis(&self, t: usize) -> &[f64];
    /// Per-step state costs (effort plus the via penalty folded into its
    /// step) for a rollout driven by `forcing[dim][t]`.
    fn state_costs(&self, forcing: &[Vec<f64>]) -> Result<Vec<f64>>;
    /// Terminal cost added to every cost-to-go.
    fn terminal_cost(&self) -> f64;
    /// Per-dimension weight on the quadratic parameter penalty.
    fn control_weight(&self, dim: usize) -> f64;
    /// Per-step parameter penalty of the task cost (the `0.5 theta'theta`
    /// term, control-weighted across dimensions).
    fn parameter_penalty(&self, theta: &[Vec<f64>]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplorationMode {
    /// One noise vector per rollout, held for the whole episode.
    Episode,
    /// Noise redrawn at every time step.
    PerStep,
}

/// Configuration of the baseline.
#[derive(Debug, Clone)]
pub struct Pi2Config {
    /// Positive-definite control-cost matrix over basis coefficients.
    pub r_matrix: DMatrix<f64>,
    pub lambda_temp: f64,
    pub rollouts: usize,
    pub updates: usize,
    pub exploration: Covariance,
    pub mode: ExplorationMode,
}

impl Pi2Config {
    pub fn validate(&self, n_basis: usize) -> Result<()> {
        if self.r_matrix.nrows() != n_basis || self.r_matrix.ncols() != n_basis {
            return Err(MdsError::DimensionMismatch {
                left: self.r_matrix.nrows(),
                right: n_basis,
            });
        }
        if !(self.lambda_temp.is_finite() && self.lambda_temp > 0.0) {
            return Err(MdsError::InvalidParameter {
                name: "lambda_temp",
                reason: format!("{} must be positive", self.lambda_temp),
            });
        }
        if self.rollouts == 0 || self.updates == 0 {
            return Err(MdsError::InvalidParameter {
                name: "rollouts/updates",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.exploration.dim() != n_basis {
            return Err(MdsError::DimensionMismatch {
                left: self.exploration.dim(),
                right: n_basis,
            });
        }
        Ok(())
    }
}

/// `M = R^-1 g g' / (g' R^-1 g)`: the rank-one projector onto the basis
/// direction under the R inner product, satisfying `M M = M`.
pub fn projection_matrix(g: &[f64], r_matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let action = ProjectionAction::new(r_matrix)?;
    let (y, denom) = action.solve(g)?;
    let n = g.len();
    let mut m = DMatrix::zeros(n, n);
    for row in 0..n {
        for col in 0..n {
            m[(row, col)] = y[row] * g[col] / denom;
        }
    }
    Ok(m)
}

/// Shared Cholesky factor of R, applying `M` without materializing it.
pub(crate) struct ProjectionAction {
    chol: Cholesky<f64, Dyn>,
}

impl ProjectionAction {
    pub(crate) fn new(r_matrix: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(r_matrix.clone()).ok_or(MdsError::InvalidParameter {
            name: "r_matrix",
            reason: "not positive definite".to_string(),
        })?;
        Ok(Self { chol })
    }

    /// Returns `(y, g'y)` with `y = R^-1 g`; errors on a zero activation.
    pub(crate) fn solve(&self, g: &[f64]) -> Result<(DVector<f64>, f64)> {
        let gv = DVector::from_column_slice(g);
        if gv.iter().all(|&v| v == 0.0) {
            return Err(MdsError::InvalidParameter {
                name: "basis",
                reason: "zero activation vector".to_string(),
            });
        }
        let y = self.chol.solve(&gv);
        let denom = gv.dot(&y);
        if !(denom.is_finite() && denom > 0.0) {
            return Err(MdsError::InvalidParameter {
                name: "r_matrix",
                reason: format!("quadratic form g'R^-1 g = {denom} is not positive"),
            });
        }
        Ok((y, denom))
    }
}

/// Softmin probabilities `P_i ∝ exp(-S_i / lambda)`, shift-invariant and
/// guarded against underflow by subtracting the minimum cost.
pub fn softmin_weights(path_costs: &[f64], lambda_temp: f64) -> Result<SimplexWeights> {
    if path_costs.is_empty() {
        return Err(MdsError::Empty);
    }
    if !(lambda_temp.is_finite() && lambda_temp > 0.0) {
        return Err(MdsError::InvalidParameter {
            name: "lambda_temp",
            reason: format!("{lambda_temp} must be positive"),
        });
    }
    for (i, &v) in path_costs.iter().enumerate() {
        if !v.is_finite() {
            return Err(MdsError::DomainViolation {
                index: i,
                value: v,
                requirement: "finite",
            });
        }
    }
    let min = path_costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = path_costs
        .iter()
        .map(|&s| (-(s - min) / lambda_temp).exp())
        .collect();
    SimplexWeights::normalized(w)
}

/// Per-update evaluation of a rollout batch: path costs, the per-time-step
/// probabilities derived from them, and the exploration noise that
/// produced each rollout.
#[derive(Debug, Clone)]
pub struct Pi2RolloutEval {
    /// `path_costs[t][i]`: cost-to-go of rollout `i` from step `t`.
    pub path_costs: Vec<Vec<f64>>,
    /// `probabilities[t]`: softmin weights over rollouts at step `t`.
    pub probabilities: Vec<SimplexWeights>,
    /// `noise[i][t]`: exploration noise vector of rollout `i` at step `t`
    /// (constant over `t` in episode mode).
    pub noise: Vec<Vec<Vec<f64>>>,
}

/// Parameter update for one policy dimension:
/// `dtheta_t = sum_i P[t][i] M_t eps[t][i]`, aggregated over time with
/// weights `T - t`, added onto the previous parameters.
pub fn pi2_update(
    theta_prev: &[f64],
    eval: &Pi2RolloutEval,
    basis: &[Vec<f64>],
    r_matrix: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let steps = basis.len();
    if eval.probabilities.len() != steps || eval.path_costs.len() != steps {
        return Err(MdsError::DimensionMismatch {
            left: eval.probabilities.len(),
            right: steps,
        });
    }
    let n = theta_prev.len();
    let action = ProjectionAction::new(r_matrix)?;
    let mut proj = Vec::with_capacity(steps);
    for g in basis {
        if g.len() != n {
            return Err(MdsError::DimensionMismatch {
                left: g.len(),
                right: n,
            });
        }
        proj.push(action.solve(g)?);
    }
    for probs in &eval.probabilities {
        if probs.len() != eval.noise.len() {
            return Err(MdsError::DimensionMismatch {
                left: probs.len(),
                right: eval.noise.len(),
            });
        }
    }
    let delta = aggregate_delta(
        n,
        steps,
        &proj,
        |t| &basis[t],
        &eval.probabilities,
        |i, t| &eval.noise[i][t],
    );
    Ok(theta_prev.iter().zip(&delta).map(|(&a, &b)| a + b).collect())
}

/// `sum_t (T-t)/norm * sum_i P[t][i] * M_t eps(i, t)` using the rank-one
/// action of the projector.
fn aggregate_delta<'a>(
    n: usize,
    steps: usize,
    proj: &[(DVector<f64>, f64)],
    basis: impl Fn(usize) -> &'a [f64],
    probabilities: &[SimplexWeights],
    noise_at: impl Fn(usize, usize) -> &'a [f64],
) -> Vec<f64> {
    let mut delta = vec![0.0; n];
    let total_time_weight = (steps * (steps + 1)) as f64 / 2.0;
    for t in 0..steps {
        let g = basis(t);
        let (y, denom) = &proj[t];
        let probs = &probabilities[t];
        let time_weight = (steps - t) as f64 / total_time_weight;
        for i in 0..probs.len() {
            let eps = noise_at(i, t);
            let along: f64 = g.iter().zip(eps).map(|(&a, &b)| a * b).sum();
            let scale = probs[i] * time_weight * along / denom;
            for (d, &yv) in delta.iter_mut().zip(y.iter()) {
                *d += scale * yv;
            }
        }
    }
    delta
}

/// Full baseline run: per update, draw exploration noise, evaluate the
/// batch, build cost-to-go tables including the projected quadratic
/// control term, convert them to per-step probabilities, and apply the
/// aggregated parameter update. Returns the batch-mean task cost per
/// update and the final parameters (one vector per dimension).
pub fn pi2_run<T: Pi2Task>(
    task: &T,
    initial_theta: &[Vec<f64>],
    cfg: &Pi2Config,
    rng_seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dims = task.dims();
    let n = task.n_basis();
    let steps = task.steps();
    cfg.validate(n)?;
    if initial_theta.len() != dims {
        return Err(MdsError::DimensionMismatch {
            left: initial_theta.len(),
            right: dims,
        });
    }
    for theta in initial_theta {
        if theta.len() != n {
            return Err(MdsError::DimensionMismatch {
                left: theta.len(),
                right: n,
            });
        }
    }

    let action = ProjectionAction::new(&cfg.r_matrix)?;
    // Per-step projection scalars are rollout-independent.
    let mut proj: Vec<(DVector<f64>, f64)> = Vec::with_capacity(steps);
    for t in 0..steps {
        proj.push(action.solve(task.basis(t))?);
    }
    let noise_source = GaussianSearchState::new(vec![0.0; n], cfg.exploration.clone())?;

    let mut theta: Vec<Vec<f64>> = initial_theta.to_vec();
    let mut curve = Vec::with_capacity(cfg.updates);
    for k in 1..=cfg.updates {
        // theta' R theta and theta' g_t per dimension, reused by every
        // rollout's control term.
        let theta_r_theta: Vec<f64> = theta
            .iter()
            .map(|td| {
                let tv = DVector::from_column_slice(td);
                tv.dot(&(&cfg.r_matrix * &tv))
            })
            .collect();
        let theta_dot_g: Vec<Vec<f64>> = (0..steps)
            .map(|t| {
                let g = task.basis(t);
                theta
                    .iter()
                    .map(|td| g.iter().zip(td).map(|(&a, &b)| a * b).sum())
                    .collect()
            })
            .collect();

        let theta_ref = &theta;
        let proj_ref = &proj;
        let theta_r_theta_ref = &theta_r_theta;
        let theta_dot_g_ref = &theta_dot_g;
        struct RolloutOutcome {
            cost_to_go: Vec<f64>,
            /// `[dim][t][basis]`
            noise: Vec<Vec<Vec<f64>>>,
            task_cost: f64,
        }
        let batch: Vec<RolloutOutcome> = try_map_indexed(cfg.rollouts, |i| {
            let mut rng = substream(rng_seed, &[k as u64, i as u64]);
            // noise[t][basis] per dimension-major draw order.
            let per_dim_noise: Vec<Vec<Vec<f64>>> = (0..dims)
                .map(|_| match cfg.mode {
                    ExplorationMode::Episode => {
                        let eps = noise_source.sample(&mut rng);
                        vec![eps; steps]
                    }
                    ExplorationMode::PerStep => {
                        (0..steps).map(|_| noise_source.sample(&mut rng)).collect()
                    }
                })
                .collect();

            let forcing: Vec<Vec<f64>> = (0..dims)
                .map(|d| {
                    (0..steps)
                        .map(|t| {
                            let g = task.basis(t);
                            let td = &theta_ref[d];
                            let eps = &per_dim_noise[d][t];
                            g.iter()
                                .zip(td.iter().zip(eps))
                                .map(|(&gv, (&tv, &ev))| gv * (tv + ev))
                                .sum()
                        })
                        .collect()
                })
                .collect();
            let state_costs = task.state_costs(&forcing)?;

            // Quadratic control term per step via the rank-one action:
            // 0.5 (theta + M eps)' R (theta + M eps)
            //   = 0.5 (theta'R theta + 2 (theta'g)(g'eps)/(g'y) + (g'eps)^2/(g'y)).
            let mut control = vec![0.0; steps];
            let mut penalty = vec![0.0; steps];
            for t in 0..steps {
                let g = task.basis(t);
                let (_, denom) = &proj_ref[t];
                let mut ctrl = 0.0;
                let mut pen = 0.0;
                for d in 0..dims {
                    let eps = &per_dim_noise[d][t];
                    let along: f64 = g.iter().zip(eps).map(|(&a, &b)| a * b).sum();
                    let quad = theta_r_theta_ref[d] + 2.0 * theta_dot_g_ref[t][d] * along / denom
                        + along * along / denom;
                    ctrl += task.control_weight(d) * 0.5 * quad;
                    let norm_sq: f64 = theta_ref[d]
                        .iter()
                        .zip(eps)
                        .map(|(&tv, &ev)| (tv + ev) * (tv + ev))
                        .sum();
                    pen += task.control_weight(d) * 0.5 * norm_sq;
                }
                control[t] = ctrl;
                penalty[t] = pen;
            }

            // Cost-to-go from each step, plus the terminal cost.
            let mut cost_to_go = vec![0.0; steps];
            let mut acc = task.terminal_cost();
            for t in (0..steps).rev() {
                acc += state_costs[t] + control[t];
                cost_to_go[t] = acc;
            }
            let task_cost = state_costs.iter().sum::<f64>()
                + penalty.iter().sum::<f64>()
                + task.terminal_cost();

            Ok::<_, MdsError>(RolloutOutcome {
                cost_to_go,
                noise: per_dim_noise,
                task_cost,
            })
        })?;

        curve.push(batch.iter().map(|r| r.task_cost).sum::<f64>() / cfg.rollouts as f64);

        // Per-step probabilities and the aggregated update, one dimension
        // at a time.
        let mut probabilities = Vec::with_capacity(steps);
        for t in 0..steps {
            let s_t: Vec<f64> = batch.iter().map(|r| r.cost_to_go[t]).collect();
            probabilities.push(softmin_weights(&s_t, cfg.lambda_temp)?);
        }
        let mut new_theta = theta.clone();
        for (d, target) in new_theta.iter_mut().enumerate() {
            let delta = aggregate_delta(
                n,
                steps,
                &proj,
                |t| task.basis(t),
                &probabilities,
                |i, t| &batch[i].noise[d][t],
            );
            for (tv, dv) in target.iter_mut().zip(&delta) {
                *tv += dv;
            }
        }
        theta = new_theta;
    }
    Ok((curve, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mirror::md_step_kl;
    use crate::rng::substream;
    use crate::simplex::CostVector;
    use rand::Rng;

    #[test]
    fn projection_with_identity_and_unit_basis() {
        let r = DMatrix::identity(3, 3);
        let g = [1.0, 0.0, 0.0];
        let m = projection_matrix(&g, &r).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 0)] = 1.0;
        assert!((m - expected).abs().max() < 1e-12);
    }

    #[test]
    fn projection_with_identity_is_normalized_outer_product() {
        let r = DMatrix::identity(2, 2);
        let g = [3.0, 4.0];
        let m = projection_matrix(&g, &r).unwrap();
        let norm_sq = 25.0;
        for row in 0..2 {
            for col in 0..2 {
                assert!((m[(row, col)] - g[row] * g[col] / norm_sq).abs() < 1e-12);
            }
        }
        let m2 = &m * &m;
        assert!((m2 - m).abs().max() < 1e-12);
    }

    #[test]
    fn projection_matches_dense_formula_for_diagonal_r() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let g = [1.0, 1.0];
        let m = projection_matrix(&g, &r).unwrap();
        // R^-1 g = [1, 0.5], g' R^-1 g = 1.5.
        let expected = DMatrix::from_row_slice(2, 2, &[
            1.0 / 1.5,
            1.0 / 1.5,
            0.5 / 1.5,
            0.5 / 1.5,
        ]);
        assert!((&m - expected).abs().max() < 1e-12);
        let m2 = &m * &m;
        assert!((m2 - &m).abs().max() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_on_random_spd_r() {
        let mut rng = substream(4, &[0]);
        for _ in 0..20 {
            let n = 4;
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let r = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = projection_matrix(&g, &r).unwrap();
            let m2 = &m * &m;
            assert!((m2 - &m).abs().max() < 1e-9);
        }
    }

    #[test]
    fn projection_rejects_zero_activation() {
        let r = DMatrix::identity(2, 2);
        assert!(projection_matrix(&[0.0, 0.0], &r).is_err());
    }

    #[test]
    fn softmin_equal_costs_uniform() {
        let p = softmin_weights(&[4.0; 5], 1.0).unwrap();
        for &v in p.as_slice() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn softmin_closed_form() {
        let lam = 0.7;
        let p = softmin_weights(&[0.0, lam * 4.0f64.ln()], lam).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-12);
        assert!((p[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn softmin_single_rollout() {
        let p = softmin_weights(&[123.4], 2.0).unwrap();
        assert_eq!(p.as_slice(), &[1.0]);
    }

    #[test]
    fn softmin_matches_md_step_on_uniform_prior() {
        let mut rng = substream(8, &[1]);
        for _ in 0..50 {
            let m = rng.random_range(2..9usize);
            let costs: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
            let lam = rng.random_range(0.2..3.0);
            let a = softmin_weights(&costs, lam).unwrap();
            let b = md_step_kl(
                &SimplexWeights::uniform(m).unwrap(),
                &CostVector::new(costs).unwrap(),
                lam,
            )
            .unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn update_with_zero_noise_is_identity() {
        let steps = 3;
        let basis = vec![vec![1.0, 0.5], vec![0.5, 1.0], vec![0.2, 0.2]];
        let eval = Pi2RolloutEval {
            path_costs: vec![vec![1.0, 2.0]; steps],
            probabilities: vec![softmin_weights(&[1.0, 2.0], 1.0).unwrap(); steps],
            noise: vec![vec![vec![0.0, 0.0]; steps]; 2],
        };
        let theta = pi2_update(&[0.3, -0.7], &eval, &basis, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(theta, vec![0.3, -0.7]);
    }

    #[test]
    fn update_single_step_single_rollout() {
        let basis = vec![vec![1.0, 0.0]];
        let eps = vec![0.4, 0.9];
        let eval = Pi2RolloutEval {
            path_costs: vec![vec![5.0]],
            probabilities: vec![softmin_weights(&[5.0], 1.0).unwrap()],
            noise: vec![vec![eps.clone()]],
        };
        let r = DMatrix::identity(2, 2);
        let theta = pi2_update(&[0.0, 0.0], &eval, &basis, &r).unwrap();
        // M eps with g = e1 projects onto the first coordinate.
        assert!((theta[0] - 0.4).abs() < 1e-12);
        assert!(theta[1].abs() < 1e-12);
    }

    #[test]
    fn update_matches_direct_triple_loop() {
        let mut rng = substream(12, &[5]);
        let steps = 2;
        let m = 3;
        let n = 2;
        let basis: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..n).map(|_| rng.random_range(0.1..1.0)).collect())
            .collect();
        let noise: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|_| {
                (0..steps)
                    .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let path_costs: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..m).map(|_| rng.random_range(0.0..4.0)).collect())
            .collect();
        let probabilities: Vec<SimplexWeights> = path_costs
            .iter()
            .map(|s| softmin_weights(s, 1.0).unwrap())
            .collect();
        let r = DMatrix::identity(n, n);
        let eval = Pi2RolloutEval {
            path_costs: path_costs.clone(),
            probabilities: probabilities.clone(),
            noise: noise.clone(),
        };
        let theta0 = vec![0.5, -0.5];
        let got = pi2_update(&theta0, &eval, &basis, &r).unwrap();

        // Direct summation with explicit projection matrices.
        let mut delta = vec![0.0; n];
        let total: f64 = (1..=steps).sum::<usize>() as f64;
        for t in 0..steps {
            let g = &basis[t];
            let m_mat = projection_matrix(g, &r).unwrap();
            let w = (steps - t) as f64 / total;
            for i in 0..m {
                let p = probabilities[t][i];
                for row in 0..n {
                    let me: f64 = (0..n).map(|c| m_mat[(row, c)] * noise[i][t][c]).sum();
                    delta[row] += w * p * me;
                }
            }
        }
        for d in 0..n {
            assert!((got[d] - (theta0[d] + delta[d])).abs() < 1e-12);
        }
    }

    #[test]
    fn time_weights_sum_to_one() {
        let steps = 7usize;
        let total = (steps * (steps + 1)) as f64 / 2.0;
        let sum: f64 = (0..steps).map(|t| (steps - t) as f64 / total).sum();
        assert_eq!(sum, 1.0);
    }
}

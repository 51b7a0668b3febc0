//! Episode-level optimizers: plain and accelerated mirror-descent search on
//! finite candidate sets, their Gaussian mean-update approximations, and
//! the online single-rollout mode.

use crate::divergence::BregmanSpec;
use crate::error::{MdsError, Result};
use crate::exec::try_map_indexed;
use crate::gaussian::{AmdGaussianState, GaussianSearchState};
use crate::mirror::{amd_mix, amd_step, generic_md_step, md_step_kl, AmdSchedule};
use crate::rng::substream;
use crate::simplex::{log_sum_exp, CostVector, SimplexWeights};
use rand::Rng;

/// Black-box objective over a continuous parameter space.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn cost(&self, theta: &[f64]) -> Result<f64>;
}

impl<F> Objective for (usize, F)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn cost(&self, theta: &[f64]) -> Result<f64> {
        Ok((self.1)(theta))
    }
}

/// Mirror-descent search on a fixed finite support: K exponentiated-gradient
/// updates against the support's cost vector. On a finite support the
/// density re-estimation step is the identity, so the whole run reduces to
/// iterating the KL update.
pub fn mds_run(
    costs: &CostVector,
    q0: &SimplexWeights,
    eta: f64,
    updates: usize,
) -> Result<SimplexWeights> {
    if updates == 0 {
        return Err(MdsError::InvalidParameter {
            name: "updates",
            reason: "at least one update required".to_string(),
        });
    }
    let mut q = q0.clone();
    for _ in 0..updates {
        q = generic_md_step(&BregmanSpec::Kl, &q, costs, eta)?;
    }
    Ok(q)
}

/// Online variant: each update applies the exponentiated-gradient step to a
/// freshly drawn noisy cost vector whose expectation is the true cost.
pub fn online_mds_run<F>(
    mut draw_costs: F,
    q0: &SimplexWeights,
    eta: f64,
    updates: usize,
) -> Result<SimplexWeights>
where
    F: FnMut(usize) -> Result<CostVector>,
{
    if updates == 0 {
        return Err(MdsError::InvalidParameter {
            name: "updates",
            reason: "at least one update required".to_string(),
        });
    }
    let mut q = q0.clone();
    for k in 0..updates {
        let j = draw_costs(k)?;
        q = md_step_kl(&q, &j, eta)?;
    }
    Ok(q)
}

/// Weighted-sample-mean estimate `mu_prev + sum w_j (theta_j - mu_prev)`.
pub fn gaussian_mean_update(
    mu_prev: &[f64],
    samples: &[Vec<f64>],
    weights: &SimplexWeights,
) -> Result<Vec<f64>> {
    if samples.len() != weights.len() {
        return Err(MdsError::DimensionMismatch {
            left: samples.len(),
            right: weights.len(),
        });
    }
    let mut mu = mu_prev.to_vec();
    for (theta, &w) in samples.iter().zip(weights.as_slice()) {
        if theta.len() != mu_prev.len() {
            return Err(MdsError::DimensionMismatch {
                left: theta.len(),
                right: mu_prev.len(),
            });
        }
        for (m, (&t, &p)) in mu.iter_mut().zip(theta.iter().zip(mu_prev)) {
            *m += w * (t - p);
        }
    }
    Ok(mu)
}

fn check_rollouts(rollouts: usize) -> Result<()> {
    if rollouts < 2 {
        return Err(MdsError::InvalidParameter {
            name: "rollouts",
            reason: "episodic search needs at least 2 rollouts per update".to_string(),
        });
    }
    Ok(())
}

/// Per-update record of a Gaussian search run.
#[derive(Debug, Clone)]
pub struct UpdateTrace {
    /// Mean of the rollout costs in this update's batch.
    pub batch_mean_cost: f64,
}

/// Gaussian mirror-descent search: sample a batch from the current
/// Gaussian, weight it by the exponentiated-gradient step on a uniform
/// prior (each draw is one sample of the prior, so its discretization is
/// uniform), and move the mean to the weighted sample mean. The covariance
/// is never touched.
pub fn gmds_run(
    objective: &dyn Objective,
    init: &GaussianSearchState,
    eta: f64,
    rollouts: usize,
    updates: usize,
    rng_seed: u64,
) -> Result<(GaussianSearchState, Vec<UpdateTrace>)> {
    check_rollouts(rollouts)?;
    if objective.dim() != init.dim() {
        return Err(MdsError::DimensionMismatch {
            left: objective.dim(),
            right: init.dim(),
        });
    }
    let mut state = init.clone();
    let mut trace = Vec::with_capacity(updates);
    for k in 1..=updates {
        let state_ref = &state;
        let batch: Vec<(Vec<f64>, f64)> = try_map_indexed(rollouts, |i| {
            let mut rng = substream(rng_seed, &[k as u64, i as u64]);
            let theta = state_ref.sample(&mut rng);
            let cost = objective.cost(&theta)?;
            Ok::<_, MdsError>((theta, cost))
        })?;
        let costs = CostVector::new(batch.iter().map(|(_, c)| *c).collect())?;
        let weights = md_step_kl(&SimplexWeights::uniform(rollouts)?, &costs, eta)?;
        let samples: Vec<Vec<f64>> = batch.into_iter().map(|(t, _)| t).collect();
        let mean = gaussian_mean_update(state.mean(), &samples, &weights)?;
        trace.push(UpdateTrace {
            batch_mean_cost: costs.as_slice().iter().sum::<f64>() / rollouts as f64,
        });
        state = state.with_mean(mean)?;
    }
    Ok((state, trace))
}

/// Accelerated mirror-descent search on a fixed finite support: mix the two
/// weight sequences, take the paired z/x step against the support costs,
/// and return the final mixed distribution.
pub fn amds_run(
    costs: &CostVector,
    qz0: &SimplexWeights,
    qx0: &SimplexWeights,
    sched: &AmdSchedule,
    epsilon: f64,
    updates: usize,
) -> Result<SimplexWeights> {
    if updates == 0 {
        return Err(MdsError::InvalidParameter {
            name: "updates",
            reason: "at least one update required".to_string(),
        });
    }
    let mut qz = qz0.clone();
    let mut qx = qx0.clone();
    let mut q_mixed = qz.clone();
    for k in 1..=updates {
        let sched_k = sched.at(k)?;
        q_mixed = amd_mix(&qz, &qx, &sched_k)?;
        let (z, x) = amd_step(&qz, &q_mixed, costs, &sched_k, epsilon)?;
        qz = z;
        qx = x;
    }
    Ok(q_mixed)
}

/// Normalized pointwise density evaluations of a Gaussian at a shared
/// sample set, computed in log space so far-tail samples underflow to
/// exact zeros instead of poisoning the normalization.
fn discretize_at(state: &GaussianSearchState, samples: &[Vec<f64>]) -> Result<SimplexWeights> {
    let logs: Vec<f64> = samples
        .iter()
        .map(|s| state.log_density(s))
        .collect::<Result<_>>()?;
    let norm = log_sum_exp(&logs);
    if norm == f64::NEG_INFINITY {
        return Err(MdsError::DegenerateUpdate { sum: 0.0 });
    }
    SimplexWeights::normalized(logs.iter().map(|&l| (l - norm).exp()).collect())
}

/// Gaussian accelerated mirror-descent search. Per update: draw each
/// rollout from the lambda-mixture of the z and x Gaussians (a Bernoulli
/// component choice gives exact mixture sampling), discretize both priors
/// at the shared samples, run the accelerated step on the weights, and move
/// both means to their weighted sample means. Covariances stay fixed.
pub fn gamds_run(
    objective: &dyn Objective,
    init: &AmdGaussianState,
    rollouts: usize,
    updates: usize,
    rng_seed: u64,
) -> Result<(AmdGaussianState, Vec<UpdateTrace>)> {
    check_rollouts(rollouts)?;
    if objective.dim() != init.dim() {
        return Err(MdsError::DimensionMismatch {
            left: objective.dim(),
            right: init.dim(),
        });
    }
    let mut state = init.clone();
    let mut trace = Vec::with_capacity(updates);
    for k in 1..=updates {
        let sched_k = state.sched.at(k)?;
        let lambda = sched_k.lambda();
        let z_ref = &state.z_state;
        let x_ref = &state.x_state;
        let batch: Vec<(Vec<f64>, f64)> = try_map_indexed(rollouts, |i| {
            let mut rng = substream(rng_seed, &[k as u64, i as u64]);
            let pick_z: f64 = rng.random();
            let theta = if pick_z < lambda {
                z_ref.sample(&mut rng)
            } else {
                x_ref.sample(&mut rng)
            };
            let cost = objective.cost(&theta)?;
            Ok::<_, MdsError>((theta, cost))
        })?;
        let samples: Vec<Vec<f64>> = batch.iter().map(|(t, _)| t.clone()).collect();
        let costs = CostVector::new(batch.iter().map(|(_, c)| *c).collect())?;

        let qz_prior = discretize_at(&state.z_state, &samples)?;
        let qx_prior = discretize_at(&state.x_state, &samples)?;
        let q_mixed = amd_mix(&qz_prior, &qx_prior, &sched_k)?;
        let (qz, qx) = amd_step(&qz_prior, &q_mixed, &costs, &sched_k, state.epsilon)?;

        let z_mean = gaussian_mean_update(state.z_state.mean(), &samples, &qz)?;
        let x_mean = gaussian_mean_update(state.x_state.mean(), &samples, &qx)?;
        trace.push(UpdateTrace {
            batch_mean_cost: costs.as_slice().iter().sum::<f64>() / rollouts as f64,
        });
        state = AmdGaussianState::new(
            state.z_state.with_mean(z_mean)?,
            state.x_state.with_mean(x_mean)?,
            sched_k.at(k + 1)?,
            state.epsilon,
        )?;
    }
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(v: &[f64]) -> SimplexWeights {
        SimplexWeights::new(v.to_vec()).unwrap()
    }

    fn costs(v: &[f64]) -> CostVector {
        CostVector::new(v.to_vec()).unwrap()
    }

    struct Sphere(usize);
    impl Objective for Sphere {
        fn dim(&self) -> usize {
            self.0
        }
        fn cost(&self, theta: &[f64]) -> Result<f64> {
            Ok(theta.iter().map(|&t| t * t).sum())
        }
    }

    #[test]
    fn mds_single_atom_is_fixed() {
        let q = mds_run(&costs(&[3.0]), &weights(&[1.0]), 1.0, 5).unwrap();
        assert_eq!(q.as_slice(), &[1.0]);
    }

    #[test]
    fn mds_concentrates_on_argmin() {
        let q0 = SimplexWeights::uniform(3).unwrap();
        let q = mds_run(&costs(&[0.0, 1.0, 2.0]), &q0, 1.0, 20).unwrap();
        assert!(q[0] > 0.99, "{:?}", q.as_slice());
        assert_eq!(q.argmax(), 0);
    }

    #[test]
    fn mds_constant_costs_leave_weights() {
        let q0 = weights(&[0.2, 0.3, 0.5]);
        let q = mds_run(&costs(&[4.0; 3]), &q0, 1.0, 7).unwrap();
        for (a, b) in q.as_slice().iter().zip(q0.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn online_with_zero_noise_matches_mds_bitwise() {
        let q0 = SimplexWeights::uniform(4).unwrap();
        let j = costs(&[0.3, 1.2, 0.9, 2.2]);
        for updates in [1, 3, 10, 50] {
            let exact = mds_run(&j, &q0, 2.0, updates).unwrap();
            let online = online_mds_run(|_| Ok(j.clone()), &q0, 2.0, updates).unwrap();
            assert_eq!(exact.as_slice(), online.as_slice());
        }
    }

    #[test]
    fn online_single_atom() {
        let q = online_mds_run(|_| Ok(costs(&[1.0])), &weights(&[1.0]), 1.0, 10).unwrap();
        assert_eq!(q.as_slice(), &[1.0]);
    }

    #[test]
    fn mean_update_symmetric_samples_cancel() {
        let mu = vec![1.0, 2.0];
        let samples = vec![vec![1.5, 2.5], vec![0.5, 1.5]];
        let w = SimplexWeights::uniform(2).unwrap();
        let out = gaussian_mean_update(&mu, &samples, &w).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert!((out[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mean_update_one_hot_selects_sample() {
        let mu = vec![0.0];
        let samples = vec![vec![3.0], vec![7.0]];
        let w = weights(&[0.0, 1.0]);
        let out = gaussian_mean_update(&mu, &samples, &w).unwrap();
        assert!((out[0] - 7.0).abs() < 1e-15);
    }

    #[test]
    fn mean_update_matches_direct_dot_product() {
        let mu = vec![1.0, -1.0, 0.5];
        let samples = vec![vec![2.0, 0.0, 1.0], vec![-1.0, 3.0, 0.0], vec![0.5, 0.5, 0.5]];
        let w = weights(&[0.2, 0.3, 0.5]);
        let out = gaussian_mean_update(&mu, &samples, &w).unwrap();
        for d in 0..3 {
            let direct: f64 = (0..3).map(|jj| w[jj] * samples[jj][d]).sum();
            assert!((out[d] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_update_rejects_dimension_mismatch() {
        let err = gaussian_mean_update(
            &[0.0, 0.0],
            &[vec![1.0]],
            &SimplexWeights::uniform(1).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, MdsError::DimensionMismatch { .. }));
    }

    #[test]
    fn gmds_equal_costs_move_mean_to_sample_mean() {
        let flat = (2usize, |_: &[f64]| 5.0);
        let init = GaussianSearchState::isotropic(vec![1.0, -1.0], 1.0).unwrap();
        let (state, _) = gmds_run(&flat, &init, 1.0, 30, 1, 42).unwrap();
        // Rebuild the batch from the same substreams.
        let mut acc = vec![0.0; 2];
        for i in 0..30 {
            let mut rng = substream(42, &[1, i]);
            let theta = init.sample(&mut rng);
            acc[0] += theta[0] / 30.0;
            acc[1] += theta[1] / 30.0;
        }
        for (a, b) in state.mean().iter().zip(&acc) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn gmds_huge_cost_gap_selects_best_sample() {
        // Whatever pair is drawn, the lower-cost sample takes all weight.
        let obj = (1usize, |t: &[f64]| if t[0] > 0.0 { 1e12 } else { 0.0 });
        let init = GaussianSearchState::isotropic(vec![0.0], 1.0).unwrap();
        let (state, _) = gmds_run(&obj, &init, 1.0, 2, 1, 9).unwrap();
        let mut best = f64::INFINITY;
        let mut arg = 0.0;
        for i in 0..2 {
            let mut rng = substream(9, &[1, i]);
            let theta = init.sample(&mut rng);
            let c = if theta[0] > 0.0 { 1e12 } else { 0.0 };
            if c < best {
                best = c;
                arg = theta[0];
            }
        }
        assert!((state.mean()[0] - arg).abs() < 1e-9);
    }

    #[test]
    fn gmds_sphere_converges_near_origin() {
        let init = GaussianSearchState::isotropic(vec![5.0, 5.0], 1.0).unwrap();
        let (state, trace) = gmds_run(&Sphere(2), &init, 10.0, 50, 100, 20240501).unwrap();
        let norm: f64 = state.mean().iter().map(|m| m * m).sum::<f64>().sqrt();
        assert!(norm < 0.5, "final mean norm {norm}");
        assert!(trace[0].batch_mean_cost > trace[99].batch_mean_cost);
    }

    #[test]
    fn gmds_huge_eta_moves_to_batch_mean() {
        let init = GaussianSearchState::isotropic(vec![2.0, -3.0], 1.0).unwrap();
        let (state, _) = gmds_run(&Sphere(2), &init, 1e12, 25, 1, 77).unwrap();
        let mut acc = vec![0.0; 2];
        for i in 0..25 {
            let mut rng = substream(77, &[1, i]);
            let theta = init.sample(&mut rng);
            acc[0] += theta[0] / 25.0;
            acc[1] += theta[1] / 25.0;
        }
        for (a, b) in state.mean().iter().zip(&acc) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn gmds_covariance_is_bitwise_fixed() {
        let init = GaussianSearchState::isotropic(vec![1.0, 2.0], 0.7).unwrap();
        let (state, _) = gmds_run(&Sphere(2), &init, 5.0, 10, 20, 3).unwrap();
        assert!(state.covariance().bits_eq(init.covariance()));
    }

    #[test]
    fn amds_first_update_returns_z_start() {
        let qz = weights(&[0.7, 0.3]);
        let qx = weights(&[0.1, 0.9]);
        let sched = AmdSchedule::new(3.0, 1.0, 0.1, 1).unwrap();
        let q = amds_run(&costs(&[5.0, 1.0]), &qz, &qx, &sched, 1.0, 1).unwrap();
        assert_eq!(q.as_slice(), qz.as_slice());
    }

    #[test]
    fn amds_constant_costs_are_fixed_point() {
        let q0 = SimplexWeights::uniform(3).unwrap();
        let sched = AmdSchedule::new(3.0, 1.0, 0.1, 1).unwrap();
        let q = amds_run(&costs(&[2.0; 3]), &q0, &q0, &sched, 1.0, 25).unwrap();
        for &v in q.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn amds_concentrates_faster_than_mds() {
        let j = costs(&[0.0, 1.0, 2.0, 3.0]);
        let q0 = SimplexWeights::uniform(4).unwrap();
        let sched = AmdSchedule::new(3.0, 1.0, 0.1, 1).unwrap();
        let q_final = amds_run(&j, &q0, &q0, &sched, 1.0, 50).unwrap();
        assert_eq!(q_final.argmax(), 0);

        let threshold = |run: &dyn Fn(usize) -> SimplexWeights| -> usize {
            (1..=60)
                .find(|&k| run(k)[0] > 0.9)
                .unwrap_or(usize::MAX)
        };
        let amds_k = threshold(&|k| amds_run(&j, &q0, &q0, &sched, 1.0, k).unwrap());
        let mds_k = threshold(&|k| mds_run(&j, &q0, 1.0 / sched.step, k).unwrap());
        assert!(
            amds_k < mds_k,
            "accelerated reached 0.9 at {amds_k}, plain at {mds_k}"
        );
    }

    #[test]
    fn gamds_first_update_samples_only_z() {
        let init = AmdGaussianState::new(
            GaussianSearchState::isotropic(vec![10.0, 10.0], 0.5).unwrap(),
            GaussianSearchState::isotropic(vec![-10.0, -10.0], 0.5).unwrap(),
            AmdSchedule::new(3.0, 1.0, 0.1, 1).unwrap(),
            1.0,
        )
        .unwrap();
        let seed = 31;
        let (_, _) = gamds_run(&Sphere(2), &init, 8, 1, seed).unwrap();
        // Replay the draws: lambda_0 = 1, so every rollout must have taken
        // the z branch.
        for i in 0..8 {
            let mut rng = substream(seed, &[1, i]);
            let pick: f64 = rng.random();
            assert!(pick < 1.0);
            let theta = init.z_state.sample(&mut rng);
            assert!(theta[0] > 0.0, "sample {i} not from the z component");
        }
    }

    #[test]
    fn gamds_covariances_bitwise_fixed_and_outperforms_gmds_on_sphere() {
        let z = GaussianSearchState::isotropic(vec![5.0, 5.0], 1.0).unwrap();
        let x = z.clone();
        let sched = AmdSchedule::new(3.0, 1.0, 0.1, 1).unwrap();
        let init = AmdGaussianState::new(z, x, sched, 1.0).unwrap();
        let seed = 20240502;
        let (state, _) = gamds_run(&Sphere(2), &init, 50, 100, seed).unwrap();
        assert!(state.z_state.covariance().bits_eq(init.z_state.covariance()));
        assert!(state.x_state.covariance().bits_eq(init.x_state.covariance()));

        let gmds_init = GaussianSearchState::isotropic(vec![5.0, 5.0], 1.0).unwrap();
        let (gmds_state, _) = gmds_run(&Sphere(2), &gmds_init, 10.0, 50, 100, seed).unwrap();
        let norm = |v: &[f64]| v.iter().map(|m| m * m).sum::<f64>().sqrt();
        let accel = norm(&state.mixed_mean());
        let plain = norm(gmds_state.mean());
        assert!(
            accel < plain,
            "accelerated mean norm {accel} vs plain {plain}"
        );
    }
}

//! Dynamic movement primitives: a critically damped point attractor per
//! output dimension, shaped by a phase-gated learnable forcing term, plus
//! minimum-jerk reference trajectories and the locally weighted fit of
//! basis weights to a reference.

use crate::error::{MdsError, Result};

/// Attractor gain of the transformation system.
pub const ALPHA_Z: f64 = 25.0;
/// Damping ratio term, `ALPHA_Z / 4` for critical damping.
pub const BETA_Z: f64 = ALPHA_Z / 4.0;

/// One trajectory of a single output dimension.
#[derive(Debug, Clone)]
pub struct Trajectory1D {
    /// Positions, `steps + 1` samples including the start.
    pub positions: Vec<f64>,
    /// Accelerations at each integration step, `steps` samples.
    pub accelerations: Vec<f64>,
}

/// A DMP shared by several output dimensions: common canonical phase,
/// Gaussian basis and integration grid; per-dimension start and goal.
///
/// The canonical phase decays as `dx = -alpha_x * x / tau` with
/// `alpha_x = ln(100)` over the duration, so the phase reaches about 0.01
/// at the end of the movement. Basis centers are equally spaced in phase
/// and the forcing term is the normalized activation blend scaled by the
/// phase: `f(x) = sum(psi_b(x) w_b) * x / sum(psi_b(x))`.
#[derive(Debug, Clone)]
pub struct DmpPolicy {
    dims: usize,
    n_basis: usize,
    duration: f64,
    dt: f64,
    steps: usize,
    start: Vec<f64>,
    goal: Vec<f64>,
    phases: Vec<f64>,
    /// Raw activations `psi_b(x_t)`, indexed `[t][b]`.
    activations: Vec<Vec<f64>>,
    /// Forcing regressor `psi_b(x_t) * x_t / sum_b psi_b(x_t)`, indexed `[t][b]`.
    regressor: Vec<Vec<f64>>,
}

impl DmpPolicy {
    pub fn new(
        start: Vec<f64>,
        goal: Vec<f64>,
        n_basis: usize,
        duration: f64,
        dt: f64,
    ) -> Result<Self> {
        if start.is_empty() || start.len() != goal.len() {
            return Err(MdsError::DimensionMismatch {
                left: start.len(),
                right: goal.len(),
            });
        }
        if n_basis == 0 {
            return Err(MdsError::InvalidParameter {
                name: "n_basis",
                reason: "at least one basis function required".to_string(),
            });
        }
        if !(dt > 0.0 && duration > 0.0) {
            return Err(MdsError::InvalidParameter {
                name: "dt/duration",
                reason: "must be positive".to_string(),
            });
        }
        let ratio = duration / dt;
        let steps = ratio.round() as usize;
        if steps == 0 || (ratio - steps as f64).abs() > 1e-9 * ratio {
            return Err(MdsError::InvalidParameter {
                name: "duration",
                reason: format!("{duration} is not an integral number of steps of {dt}"),
            });
        }

        let alpha_x = 100.0f64.ln();
        let decay = 1.0 - alpha_x * dt / duration;
        if decay <= 0.0 {
            return Err(MdsError::InvalidParameter {
                name: "dt",
                reason: "too coarse for the canonical decay".to_string(),
            });
        }
        let mut phases = Vec::with_capacity(steps + 1);
        let mut x = 1.0;
        for _ in 0..=steps {
            phases.push(x);
            x *= decay;
        }

        let x_min = phases[steps];
        let centers: Vec<f64> = if n_basis == 1 {
            vec![0.5 * (1.0 + x_min)]
        } else {
            (0..n_basis)
                .map(|b| x_min + (1.0 - x_min) * b as f64 / (n_basis - 1) as f64)
                .collect()
        };
        let spacing = if n_basis == 1 {
            1.0 - x_min
        } else {
            (1.0 - x_min) / (n_basis - 1) as f64
        };
        let width = 1.0 / (2.0 * (0.3 * spacing).powi(2));

        let mut activations = Vec::with_capacity(steps);
        let mut regressor = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = phases[t];
            let psi: Vec<f64> = centers
                .iter()
                .map(|&c| (-width * (xt - c) * (xt - c)).exp())
                .collect();
            let total: f64 = psi.iter().sum();
            let reg: Vec<f64> = psi.iter().map(|&p| p * xt / total).collect();
            activations.push(psi);
            regressor.push(reg);
        }

        Ok(Self {
            dims: start.len(),
            n_basis,
            duration,
            dt,
            steps,
            start,
            goal,
            phases,
            activations,
            regressor,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn goal(&self) -> &[f64] {
        &self.goal
    }

    pub fn phase(&self, t: usize) -> f64 {
        self.phases[t]
    }

    /// Forcing regressor at step `t`; the forcing value is its dot product
    /// with the basis weights.
    pub fn regressor(&self, t: usize) -> &[f64] {
        &self.regressor[t]
    }

    /// Forcing values for one dimension's weight vector.
    pub fn forcing(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.n_basis {
            return Err(MdsError::DimensionMismatch {
                left: weights.len(),
                right: self.n_basis,
            });
        }
        Ok(self
            .regressor
            .iter()
            .map(|g| g.iter().zip(weights).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Integrates one dimension under externally supplied forcing values
    /// (explicit Euler). The scaled system is
    /// `tau dv = alpha_z (beta_z (g - y) - v) + f`, `tau dy = v`.
    pub fn integrate_dim(&self, dim: usize, forcing: &[f64]) -> Result<Trajectory1D> {
        if forcing.len() != self.steps {
            return Err(MdsError::DimensionMismatch {
                left: forcing.len(),
                right: self.steps,
            });
        }
        let tau = self.duration;
        let g = self.goal[dim];
        let mut y = self.start[dim];
        let mut v = 0.0;
        let mut positions = Vec::with_capacity(self.steps + 1);
        let mut accelerations = Vec::with_capacity(self.steps);
        positions.push(y);
        for (t, &f) in forcing.iter().enumerate() {
            let dv = ALPHA_Z * (BETA_Z * (g - y) - v) + f;
            accelerations.push(dv / (tau * tau));
            v += self.dt * dv / tau;
            y += self.dt * v / tau;
            if !y.is_finite() || !v.is_finite() {
                return Err(MdsError::IntegrationBlowup { step: t });
            }
            positions.push(y);
        }
        Ok(Trajectory1D {
            positions,
            accelerations,
        })
    }

    /// Full rollout for per-dimension weight vectors.
    pub fn rollout(&self, weights: &[Vec<f64>]) -> Result<Vec<Trajectory1D>> {
        if weights.len() != self.dims {
            return Err(MdsError::DimensionMismatch {
                left: weights.len(),
                right: self.dims,
            });
        }
        weights
            .iter()
            .enumerate()
            .map(|(d, w)| {
                let f = self.forcing(w)?;
                self.integrate_dim(d, &f)
            })
            .collect()
    }

    /// Locally weighted regression of basis weights onto a forcing target
    /// derived from a reference trajectory given with its velocities and
    /// accelerations (time derivatives, `steps` samples each).
    pub fn fit_weights(
        &self,
        dim: usize,
        positions: &[f64],
        velocities: &[f64],
        accelerations: &[f64],
    ) -> Result<Vec<f64>> {
        if positions.len() != self.steps
            || velocities.len() != self.steps
            || accelerations.len() != self.steps
        {
            return Err(MdsError::DimensionMismatch {
                left: positions.len(),
                right: self.steps,
            });
        }
        let tau = self.duration;
        let g = self.goal[dim];
        let targets: Vec<f64> = (0..self.steps)
            .map(|t| {
                tau * tau * accelerations[t]
                    - ALPHA_Z * (BETA_Z * (g - positions[t]) - tau * velocities[t])
            })
            .collect();
        let mut weights = vec![0.0; self.n_basis];
        for (b, w) in weights.iter_mut().enumerate() {
            let mut num = 0.0;
            let mut den = 1e-12;
            for t in 0..self.steps {
                let psi = self.activations[t][b];
                let xi = self.phases[t];
                num += psi * xi * targets[t];
                den += psi * xi * xi;
            }
            *w = num / den;
        }
        Ok(weights)
    }
}

/// Minimum-jerk quintic position at normalized time `s` in [0, 1].
pub fn min_jerk_position(start: f64, goal: f64, s: f64) -> f64 {
    let s3 = s * s * s;
    start + (goal - start) * (10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s * s)
}

/// Derivative of the quintic with respect to `s` (zero at both endpoints).
pub fn min_jerk_velocity(start: f64, goal: f64, s: f64) -> f64 {
    let s2 = s * s;
    (goal - start) * (30.0 * s2 - 60.0 * s2 * s + 30.0 * s2 * s2)
}

/// Second derivative of the quintic with respect to `s`.
pub fn min_jerk_acceleration(start: f64, goal: f64, s: f64) -> f64 {
    (goal - start) * (60.0 * s - 180.0 * s * s + 120.0 * s * s * s)
}

/// Sampled minimum-jerk trajectory with `steps` points, `s = i / (steps-1)`.
pub fn min_jerk_init(start: f64, goal: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(MdsError::InvalidParameter {
            name: "steps",
            reason: "need at least two samples".to_string(),
        });
    }
    Ok((0..steps)
        .map(|i| min_jerk_position(start, goal, i as f64 / (steps - 1) as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_policy(n_basis: usize) -> DmpPolicy {
        DmpPolicy::new(vec![0.0], vec![1.0], n_basis, 1.0, 0.002).unwrap()
    }

    #[test]
    fn rejects_non_integral_step_count() {
        assert!(DmpPolicy::new(vec![0.0], vec![1.0], 5, 0.5, 0.0003).is_err());
    }

    #[test]
    fn zero_forcing_starts_at_start_and_converges_to_goal() {
        let policy = unit_policy(10);
        let traj = policy.rollout(&[vec![0.0; 10]]).unwrap();
        assert_eq!(traj[0].positions[0], 0.0);
        let last = *traj[0].positions.last().unwrap();
        assert!((last - 1.0).abs() < 1e-3, "final position {last}");
    }

    #[test]
    fn initial_position_is_exact_for_any_weights() {
        let policy = unit_policy(8);
        let traj = policy.rollout(&[vec![50.0; 8]]).unwrap();
        assert_eq!(traj[0].positions[0], 0.0);
    }

    #[test]
    fn activations_sum_positive_at_every_step() {
        let policy = unit_policy(20);
        for t in 0..policy.steps() {
            let sum: f64 = policy.activations[t].iter().sum();
            assert!(sum > 0.0);
        }
    }

    #[test]
    fn rollout_is_deterministic() {
        let policy = unit_policy(12);
        let w = vec![vec![3.0; 12]];
        let a = policy.rollout(&w).unwrap();
        let b = policy.rollout(&w).unwrap();
        assert_eq!(a[0].positions, b[0].positions);
    }

    #[test]
    fn non_finite_weights_blow_up_detectably() {
        let policy = unit_policy(4);
        let result = policy.rollout(&[vec![f64::NAN; 4]]);
        assert!(matches!(result, Err(MdsError::IntegrationBlowup { .. })));
    }

    #[test]
    fn min_jerk_boundary_conditions() {
        assert_eq!(min_jerk_position(2.0, 5.0, 0.0), 2.0);
        assert_eq!(min_jerk_position(2.0, 5.0, 1.0), 5.0);
        assert!((min_jerk_position(2.0, 5.0, 0.5) - 3.5).abs() < 1e-12);
        assert!(min_jerk_velocity(2.0, 5.0, 0.0).abs() < 1e-9);
        assert!(min_jerk_velocity(2.0, 5.0, 1.0).abs() < 1e-9);
    }

    #[test]
    fn min_jerk_init_samples_endpoints() {
        let traj = min_jerk_init(-1.0, 3.0, 11).unwrap();
        assert_eq!(traj[0], -1.0);
        assert_eq!(traj[10], 3.0);
        assert!((traj[5] - 1.0).abs() < 1e-12);
        assert!(min_jerk_init(0.0, 1.0, 1).is_err());
    }

    fn min_jerk_fit_error(n_basis: usize, amplitude: f64, duration: f64) -> f64 {
        let policy = DmpPolicy::new(vec![0.0], vec![amplitude], n_basis, duration, 0.002).unwrap();
        let steps = policy.steps();
        let tau = policy.duration();
        let positions: Vec<f64> = (0..steps)
            .map(|t| min_jerk_position(0.0, amplitude, t as f64 * policy.dt() / tau))
            .collect();
        let velocities: Vec<f64> = (0..steps)
            .map(|t| min_jerk_velocity(0.0, amplitude, t as f64 * policy.dt() / tau) / tau)
            .collect();
        let accelerations: Vec<f64> = (0..steps)
            .map(|t| {
                min_jerk_acceleration(0.0, amplitude, t as f64 * policy.dt() / tau) / (tau * tau)
            })
            .collect();
        let weights = policy
            .fit_weights(0, &positions, &velocities, &accelerations)
            .unwrap();
        let traj = policy.rollout(&[weights]).unwrap();
        traj[0]
            .positions
            .iter()
            .enumerate()
            .map(|(t, &y)| {
                let s = (t as f64 * policy.dt() / tau).min(1.0);
                (y - min_jerk_position(0.0, amplitude, s)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn fitted_weights_reproduce_min_jerk_quintic() {
        // The arm initialization fits min-jerk with 100 basis functions
        // over a 0.6 s movement of amplitude pi/2.
        let err = min_jerk_fit_error(100, std::f64::consts::FRAC_PI_2, 0.6);
        assert!(err < 1e-2, "max deviation {err}");
        // Equal-in-phase spacing leaves the tail of the movement coarser,
        // so low basis counts only track the quintic loosely.
        let coarse = min_jerk_fit_error(20, 1.0, 1.0);
        assert!(coarse < 5e-2, "max deviation {coarse}");
    }
}

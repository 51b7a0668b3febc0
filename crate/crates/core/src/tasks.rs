//! Via-point benchmark environments: a planar point driven by two DMPs and
//! a D-link planar arm driven by one DMP per joint, with quadratic effort
//! costs and a large penalty on missing the via point.

use crate::dmp::{min_jerk_acceleration, min_jerk_position, min_jerk_velocity, DmpPolicy};
use crate::error::{MdsError, Result};
use crate::pi2::Pi2Task;
use crate::search::Objective;

/// Which benchmark environment to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Point on the plane, steering from (0,0) toward (1,1), required to
    /// pass through (0.5, 0.2) at 250 ms.
    Point2D,
    /// Planar arm with `dof` equal links of total length one; the
    /// end-effector must pass through (0.5, 0.5) at 300 ms.
    ArmViaPoint { dof: usize },
}

/// Task parameters; `build` turns them into a ready-to-run environment.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub n_basis: usize,
    pub dt: f64,
    pub duration: f64,
    pub via_time: f64,
    pub via_point: (f64, f64),
    pub penalty_weight: f64,
    pub effort_weight: f64,
}

impl TaskSpec {
    pub fn point2d(n_basis: usize) -> Self {
        Self {
            kind: TaskKind::Point2D,
            n_basis,
            dt: 0.002,
            duration: 0.5,
            via_time: 0.25,
            via_point: (0.5, 0.2),
            penalty_weight: 1.0e10,
            effort_weight: 5000.0,
        }
    }

    pub fn arm(dof: usize, n_basis: usize) -> Self {
        Self {
            kind: TaskKind::ArmViaPoint { dof },
            n_basis,
            dt: 0.002,
            duration: 0.6,
            via_time: 0.3,
            via_point: (0.5, 0.5),
            penalty_weight: 1.0e8,
            effort_weight: 0.1,
        }
    }

    pub fn dims(&self) -> usize {
        match self.kind {
            TaskKind::Point2D => 2,
            TaskKind::ArmViaPoint { dof } => dof,
        }
    }

    pub fn build(&self) -> Result<ViaPointTask> {
        if self.via_time <= 0.0 || self.via_time >= self.duration {
            return Err(MdsError::InvalidParameter {
                name: "via_time",
                reason: format!(
                    "{} must lie strictly inside the horizon {}",
                    self.via_time, self.duration
                ),
            });
        }
        let via_ratio = self.via_time / self.dt;
        let via_step = via_ratio.round() as usize;
        if (via_ratio - via_step as f64).abs() > 1e-9 * via_ratio.max(1.0) {
            return Err(MdsError::InvalidParameter {
                name: "via_time",
                reason: format!("{} does not land on an integration step", self.via_time),
            });
        }

        match self.kind {
            TaskKind::Point2D => {
                let policy = DmpPolicy::new(
                    vec![0.0, 0.0],
                    vec![1.0, 1.0],
                    self.n_basis,
                    self.duration,
                    self.dt,
                )?;
                let initial_theta = vec![vec![0.0; self.n_basis]; 2];
                Ok(ViaPointTask {
                    spec: self.clone(),
                    policy,
                    via_step,
                    dof_weights: vec![1.0; 2],
                    initial_theta,
                })
            }
            TaskKind::ArmViaPoint { dof } => {
                if dof == 0 {
                    return Err(MdsError::InvalidParameter {
                        name: "dof",
                        reason: "at least one joint required".to_string(),
                    });
                }
                // Joint-space minimum jerk from the straight pose (pointing
                // along the x axis) to a 90-degree bend of the first joint,
                // ending with the end-effector at (0, 1).
                let mut goal = vec![0.0; dof];
                goal[0] = std::f64::consts::FRAC_PI_2;
                let policy = DmpPolicy::new(
                    vec![0.0; dof],
                    goal.clone(),
                    self.n_basis,
                    self.duration,
                    self.dt,
                )?;
                let steps = policy.steps();
                let tau = policy.duration();
                let mut initial_theta = Vec::with_capacity(dof);
                for d in 0..dof {
                    let (s0, s1) = (0.0, goal[d]);
                    let positions: Vec<f64> = (0..steps)
                        .map(|t| min_jerk_position(s0, s1, t as f64 * self.dt / tau))
                        .collect();
                    let velocities: Vec<f64> = (0..steps)
                        .map(|t| min_jerk_velocity(s0, s1, t as f64 * self.dt / tau) / tau)
                        .collect();
                    let accelerations: Vec<f64> = (0..steps)
                        .map(|t| {
                            min_jerk_acceleration(s0, s1, t as f64 * self.dt / tau) / (tau * tau)
                        })
                        .collect();
                    initial_theta.push(policy.fit_weights(
                        d,
                        &positions,
                        &velocities,
                        &accelerations,
                    )?);
                }
                let total: f64 = (1..=dof).sum::<usize>() as f64;
                let dof_weights: Vec<f64> =
                    (0..dof).map(|d| (dof - d) as f64 / total).collect();
                Ok(ViaPointTask {
                    spec: self.clone(),
                    policy,
                    via_step,
                    dof_weights,
                    initial_theta,
                })
            }
        }
    }
}

/// Planar forward kinematics of a chain of `angles.len()` equal links with
/// total length one; each angle is relative to the previous link.
pub fn arm_forward_kinematics(angles: &[f64]) -> (f64, f64) {
    let d = angles.len();
    let link = 1.0 / d as f64;
    let mut absolute = 0.0;
    let mut x = 0.0;
    let mut y = 0.0;
    for &a in angles {
        absolute += a;
        x += link * absolute.cos();
        y += link * absolute.sin();
    }
    (x, y)
}

/// One evaluated rollout.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub theta: Vec<Vec<f64>>,
    /// `positions[dim][t]`, `steps + 1` samples per dimension.
    pub positions: Vec<Vec<f64>>,
    /// `accelerations[dim][t]`, `steps` samples per dimension.
    pub accelerations: Vec<Vec<f64>>,
    /// Full per-step costs `r_t` (effort plus parameter penalty).
    pub step_costs: Vec<f64>,
    pub via_penalty: f64,
    pub total_cost: f64,
}

/// A built via-point environment: the shared DMP, the via-step index and
/// the cost weights.
#[derive(Debug, Clone)]
pub struct ViaPointTask {
    spec: TaskSpec,
    policy: DmpPolicy,
    via_step: usize,
    dof_weights: Vec<f64>,
    initial_theta: Vec<Vec<f64>>,
}

impl ViaPointTask {
    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn policy(&self) -> &DmpPolicy {
        &self.policy
    }

    pub fn via_step(&self) -> usize {
        self.via_step
    }

    /// Initial per-dimension basis weights (zero for the point task, the
    /// minimum-jerk fit for the arm).
    pub fn initial_theta(&self) -> &[Vec<f64>] {
        &self.initial_theta
    }

    pub fn initial_theta_flat(&self) -> Vec<f64> {
        self.initial_theta.concat()
    }

    pub fn parameter_dim(&self) -> usize {
        self.spec.dims() * self.spec.n_basis
    }

    pub fn split_theta(&self, flat: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.spec.n_basis;
        if flat.len() != self.parameter_dim() {
            return Err(MdsError::DimensionMismatch {
                left: flat.len(),
                right: self.parameter_dim(),
            });
        }
        Ok(flat.chunks(n).map(|c| c.to_vec()).collect())
    }

    /// Position of the cost-bearing point at the via step: the point itself
    /// for the planar task, the end-effector for the arm.
    fn via_position(&self, positions: &[Vec<f64>]) -> (f64, f64) {
        match self.spec.kind {
            TaskKind::Point2D => (positions[0][self.via_step], positions[1][self.via_step]),
            TaskKind::ArmViaPoint { .. } => {
                let angles: Vec<f64> = positions.iter().map(|p| p[self.via_step]).collect();
                arm_forward_kinematics(&angles)
            }
        }
    }

    fn via_penalty_at(&self, point: (f64, f64)) -> f64 {
        let (tx, ty) = self.spec.via_point;
        self.penalty_of_distance_sq((point.0 - tx).powi(2) + (point.1 - ty).powi(2))
    }

    fn penalty_of_distance_sq(&self, d2: f64) -> f64 {
        self.spec.penalty_weight * d2
    }

    /// Per-step effort cost from accelerations, control-weighted across
    /// dimensions.
    fn effort_cost(&self, accelerations: &[Vec<f64>], t: usize) -> f64 {
        self.dof_weights
            .iter()
            .zip(accelerations)
            .map(|(&w, acc)| w * self.spec.effort_weight * acc[t] * acc[t])
            .sum()
    }

    /// Full evaluation of an episode-constant parameter vector.
    pub fn evaluate(&self, theta: &[Vec<f64>]) -> Result<Rollout> {
        let trajs = self.policy.rollout(theta)?;
        let steps = self.policy.steps();
        let positions: Vec<Vec<f64>> = trajs.iter().map(|tr| tr.positions.clone()).collect();
        let accelerations: Vec<Vec<f64>> =
            trajs.iter().map(|tr| tr.accelerations.clone()).collect();
        let penalty = self.parameter_penalty(theta);
        let step_costs: Vec<f64> = (0..steps)
            .map(|t| self.effort_cost(&accelerations, t) + penalty)
            .collect();
        let via_penalty = self.via_penalty_at(self.via_position(&positions));
        let total_cost = step_costs.iter().sum::<f64>() + via_penalty;
        if !total_cost.is_finite() {
            return Err(MdsError::IntegrationBlowup { step: steps });
        }
        Ok(Rollout {
            theta: theta.to_vec(),
            positions,
            accelerations,
            step_costs,
            via_penalty,
            total_cost,
        })
    }
}

impl Objective for ViaPointTask {
    fn dim(&self) -> usize {
        self.parameter_dim()
    }

    fn cost(&self, theta: &[f64]) -> Result<f64> {
        let split = self.split_theta(theta)?;
        Ok(self.evaluate(&split)?.total_cost)
    }
}

impl Pi2Task for ViaPointTask {
    fn dims(&self) -> usize {
        self.spec.dims()
    }

    fn n_basis(&self) -> usize {
        self.spec.n_basis
    }

    fn steps(&self) -> usize {
        self.policy.steps()
    }

    fn basis(&self, t: usize) -> &[f64] {
        self.policy.regressor(t)
    }

    fn state_costs(&self, forcing: &[Vec<f64>]) -> Result<Vec<f64>> {
        let trajs: Vec<_> = forcing
            .iter()
            .enumerate()
            .map(|(d, f)| self.policy.integrate_dim(d, f))
            .collect::<Result<_>>()?;
        let steps = self.policy.steps();
        let accelerations: Vec<Vec<f64>> =
            trajs.iter().map(|tr| tr.accelerations.clone()).collect();
        let positions: Vec<Vec<f64>> = trajs.iter().map(|tr| tr.positions.clone()).collect();
        let mut costs: Vec<f64> = (0..steps)
            .map(|t| self.effort_cost(&accelerations, t))
            .collect();
        costs[self.via_step] += self.via_penalty_at(self.via_position(&positions));
        Ok(costs)
    }

    fn terminal_cost(&self) -> f64 {
        0.0
    }

    fn control_weight(&self, dim: usize) -> f64 {
        self.dof_weights[dim]
    }

    fn parameter_penalty(&self, theta: &[Vec<f64>]) -> f64 {
        self.dof_weights
            .iter()
            .zip(theta)
            .map(|(&w, td)| w * 0.5 * td.iter().map(|&v| v * v).sum::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn straight_arm_reaches_unit_x() {
        let (x, y) = arm_forward_kinematics(&[0.0; 5]);
        assert!((x - 1.0).abs() < 1e-12);
        assert!(y.abs() < 1e-12);
    }

    #[test]
    fn single_link_quarter_turn() {
        let (x, y) = arm_forward_kinematics(&[std::f64::consts::FRAC_PI_2]);
        assert!(x.abs() < 1e-12);
        assert!((y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_link_bend_lands_at_half_half() {
        let (x, y) =
            arm_forward_kinematics(&[std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2]);
        assert!((x - 0.5).abs() < 1e-12);
        assert!((y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn point_task_zero_weights_costs_only_penalty_and_attractor_effort() {
        let task = TaskSpec::point2d(20).build().unwrap();
        let rollout = task.evaluate(&[vec![0.0; 20], vec![0.0; 20]]).unwrap();
        assert!(rollout.via_penalty > 0.0);
        assert!(rollout.total_cost.is_finite());
        // The unforced attractor overshoots the via point badly; the
        // penalty dominates everything else.
        assert!(rollout.via_penalty > 1e9, "{}", rollout.via_penalty);
    }

    #[test]
    fn point_task_penalty_formula() {
        let task = TaskSpec::point2d(10).build().unwrap();
        // Distance 0.1 in x only: penalty 1e10 * 0.01 = 1e8.
        let penalty = task.via_penalty_at((0.4, 0.2));
        assert!((penalty - 1.0e8).abs() < 1e-3);
        assert_eq!(task.via_penalty_at((0.5, 0.2)), 0.0);
    }

    #[test]
    fn point_task_via_time_lands_on_step() {
        let task = TaskSpec::point2d(10).build().unwrap();
        assert_eq!(task.via_step(), 125);
        assert_eq!(task.policy().steps(), 250);
    }

    #[test]
    fn arm_task_dof_weights_normalized_and_decreasing() {
        let task = TaskSpec::arm(10, 12).build().unwrap();
        let sum: f64 = task.dof_weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for pair in task.dof_weights.windows(2) {
            assert!(pair[0] > pair[1]);
        }
    }

    #[test]
    fn arm_single_dof_weights_collapse_to_one() {
        let task = TaskSpec::arm(1, 8).build().unwrap();
        assert_eq!(task.dof_weights, vec![1.0]);
    }

    #[test]
    fn arm_initial_trajectory_reaches_goal_pose() {
        let task = TaskSpec::arm(3, 30).build().unwrap();
        let rollout = task.evaluate(task.initial_theta()).unwrap();
        let final_angles: Vec<f64> = rollout
            .positions
            .iter()
            .map(|p| *p.last().unwrap())
            .collect();
        assert!((final_angles[0] - std::f64::consts::FRAC_PI_2).abs() < 0.05);
        assert!(final_angles[1].abs() < 0.05);
        let (x, y) = arm_forward_kinematics(&final_angles);
        assert!((x - 0.0).abs() < 0.1, "end effector x {x}");
        assert!((y - 1.0).abs() < 0.1, "end effector y {y}");
    }

    #[test]
    fn arm_task_cost_matches_direct_weighted_sum() {
        let task = TaskSpec::arm(2, 6).build().unwrap();
        let theta = vec![vec![1.0; 6], vec![-2.0; 6]];
        let rollout = task.evaluate(&theta).unwrap();
        let steps = task.policy().steps();
        // Direct loop over the cost definition.
        let w = [2.0 / 3.0, 1.0 / 3.0];
        let mut expected = 0.0;
        for t in 0..steps {
            let mut r_t = 0.0;
            for d in 0..2 {
                let acc = rollout.accelerations[d][t];
                let theta_sq: f64 = theta[d].iter().map(|v| v * v).sum();
                r_t += w[d] * (0.1 * acc * acc + 0.5 * theta_sq);
            }
            expected += r_t;
        }
        expected += rollout.via_penalty;
        assert!(
            (rollout.total_cost - expected).abs() < expected.abs() * 1e-12,
            "{} vs {expected}",
            rollout.total_cost
        );
    }

    #[test]
    fn pi2_state_costs_place_penalty_at_via_step() {
        let task = TaskSpec::point2d(8).build().unwrap();
        let theta = vec![vec![0.0; 8], vec![0.0; 8]];
        let forcing: Vec<Vec<f64>> = (0..2)
            .map(|d| task.policy().forcing(&theta[d]).unwrap())
            .collect();
        let costs = task.state_costs(&forcing).unwrap();
        let rollout = task.evaluate(&theta).unwrap();
        let effort_at_via = task.effort_cost(&rollout.accelerations, task.via_step());
        assert!(
            (costs[task.via_step()] - effort_at_via - rollout.via_penalty).abs()
                < rollout.via_penalty * 1e-12
        );
    }

    proptest! {
        #[test]
        fn end_effector_stays_within_reach(angles in proptest::collection::vec(-3.2f64..3.2, 1..12)) {
            let (x, y) = arm_forward_kinematics(&angles);
            prop_assert!((x * x + y * y).sqrt() <= 1.0 + 1e-12);
        }
    }
}

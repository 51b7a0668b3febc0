//! Gaussian sampling distributions over parameter space: the state updated
//! by the mean-only search algorithms, with diagonal and full-covariance
//! forms.

use crate::error::{MdsError, Result};
use crate::mirror::AmdSchedule;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

const LOG_TWO_PI: f64 = 1.8378770664093453;

/// Covariance of a search distribution. The full form stores its Cholesky
/// factor once at construction; covariances are never updated during a run.
#[derive(Debug, Clone)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full {
        matrix: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
}

impl Covariance {
    pub fn diagonal(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(MdsError::Empty);
        }
        for (i, &v) in variances.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(MdsError::DomainViolation {
                    index: i,
                    value: v,
                    requirement: "variance > 0",
                });
            }
        }
        Ok(Self::Diagonal(variances))
    }

    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::diagonal(vec![variance; dim])
    }

    pub fn full(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(MdsError::InvalidParameter {
                name: "covariance",
                reason: format!("{}x{} is not square", matrix.nrows(), matrix.ncols()),
            });
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-9 {
            return Err(MdsError::InvalidParameter {
                name: "covariance",
                reason: format!("not symmetric (max asymmetry {asym:.3e})"),
            });
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(MdsError::InvalidParameter {
            name: "covariance",
            reason: "not positive definite".to_string(),
        })?;
        Ok(Self::Full { matrix, chol })
    }

    pub fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal(v) => v.len(),
            Covariance::Full { matrix, .. } => matrix.nrows(),
        }
    }

    fn log_det(&self) -> f64 {
        match self {
            Covariance::Diagonal(v) => v.iter().map(|x| x.ln()).sum(),
            Covariance::Full { chol, .. } => {
                2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
            }
        }
    }

    /// Entries compared bitwise; used to assert that runs never touch the
    /// covariance.
    pub fn bits_eq(&self, other: &Covariance) -> bool {
        match (self, other) {
            (Covariance::Diagonal(a), Covariance::Diagonal(b)) => {
                a.len() == b.len()
                    && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Covariance::Full { matrix: a, .. }, Covariance::Full { matrix: b, .. }) => {
                a.shape() == b.shape()
                    && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

/// Mean and covariance of the continuous sampling distribution.
#[derive(Debug, Clone)]
pub struct GaussianSearchState {
    mean: Vec<f64>,
    covariance: Covariance,
}

impl GaussianSearchState {
    pub fn new(mean: Vec<f64>, covariance: Covariance) -> Result<Self> {
        if mean.is_empty() {
            return Err(MdsError::Empty);
        }
        if mean.len() != covariance.dim() {
            return Err(MdsError::DimensionMismatch {
                left: mean.len(),
                right: covariance.dim(),
            });
        }
        for (i, &v) in mean.iter().enumerate() {
            if !v.is_finite() {
                return Err(MdsError::DomainViolation {
                    index: i,
                    value: v,
                    requirement: "finite",
                });
            }
        }
        Ok(Self { mean, covariance })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let cov = Covariance::isotropic(mean.len(), variance)?;
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    /// Replaces the mean, keeping the covariance untouched.
    pub fn with_mean(&self, mean: Vec<f64>) -> Result<Self> {
        Self::new(mean, self.covariance.clone())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        match &self.covariance {
            Covariance::Diagonal(vars) => self
                .mean
                .iter()
                .zip(vars.iter().zip(&z))
                .map(|(&m, (&v, &n))| m + v.sqrt() * n)
                .collect(),
            Covariance::Full { chol, .. } => {
                let shifted = chol.l_dirty().lower_triangle() * DVector::from_vec(z);
                self.mean.iter().zip(shifted.iter()).map(|(&m, &s)| m + s).collect()
            }
        }
    }

    /// Log density at a point; used to discretize priors at shared samples.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(MdsError::DimensionMismatch {
                left: theta.len(),
                right: self.dim(),
            });
        }
        let quad = match &self.covariance {
            Covariance::Diagonal(vars) => theta
                .iter()
                .zip(self.mean.iter().zip(vars))
                .map(|(&t, (&m, &v))| (t - m) * (t - m) / v)
                .sum::<f64>(),
            Covariance::Full { chol, .. } => {
                let diff = DVector::from_iterator(
                    self.dim(),
                    theta.iter().zip(&self.mean).map(|(&t, &m)| t - m),
                );
                let solved = chol.solve(&diff);
                diff.dot(&solved)
            }
        };
        Ok(-0.5 * (quad + self.dim() as f64 * LOG_TWO_PI + self.covariance.log_det()))
    }
}

/// Paired z/x states of the accelerated Gaussian search, together with the
/// schedule parameters and the prox perturbation.
#[derive(Debug, Clone)]
pub struct AmdGaussianState {
    pub z_state: GaussianSearchState,
    pub x_state: GaussianSearchState,
    pub sched: AmdSchedule,
    pub epsilon: f64,
}

impl AmdGaussianState {
    pub fn new(
        z_state: GaussianSearchState,
        x_state: GaussianSearchState,
        sched: AmdSchedule,
        epsilon: f64,
    ) -> Result<Self> {
        if z_state.dim() != x_state.dim() {
            return Err(MdsError::DimensionMismatch {
                left: z_state.dim(),
                right: x_state.dim(),
            });
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(MdsError::InvalidParameter {
                name: "epsilon",
                reason: format!("{epsilon} must be positive"),
            });
        }
        Ok(Self {
            z_state,
            x_state,
            sched,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.z_state.dim()
    }

    /// Mean of the mixture the next update would sample from.
    pub fn mixed_mean(&self) -> Vec<f64> {
        let lambda = self.sched.lambda();
        self.z_state
            .mean()
            .iter()
            .zip(self.x_state.mean())
            .map(|(&z, &x)| lambda * z + (1.0 - lambda) * x)
            .collect()
    }
}

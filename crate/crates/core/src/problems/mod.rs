//! Reward models used as gradient sources: an analytic quadratic, a bimodal
//! Bayesian posterior, Bayesian logistic regression, a constrained MDP and a
//! regime-switching wrapper.

pub mod cmdp;
pub mod logistic;
pub mod mixture;
pub mod switching;

pub use cmdp::{
    fold_angles, ground_truth_penalized, policy_to_spherical, simulate_cmdp,
    simulate_cmdp_penalized, spherical_to_policy, spsa_estimate, spsa_gradient, stationary_joint,
    CmdpModel, CmdpPools, CmdpSpec, Policy, SpsaSettings, StationaryJoint,
};
pub use logistic::{parse_libsvm, Dataset, LogisticModel, LogisticOracle, LogisticParams, A9A_FEATURES};
pub use mixture::{MixtureModel, MixtureOracle};
pub use switching::{generator_stationary, SwitchingReward};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::GradientOracle;
use crate::rng::RngStream;
use crate::vector::ParamVector;

/// Gradient of `R(θ) = −a‖θ − m‖²/2` plus optional Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticOracle {
    pub curvature: f64,
    #[serde(default)]
    pub noise_std: f64,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

impl QuadraticOracle {
    pub fn new(curvature: f64, noise_std: f64, dim: usize) -> Result<Self> {
        let q = QuadraticOracle {
            curvature,
            noise_std,
            dim,
            center: None,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn centered(mut self, center: Vec<f64>) -> Result<Self> {
        self.center = Some(center);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.curvature > 0.0 && self.curvature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "curvature must be positive, got {}",
                self.curvature
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if let Some(c) = &self.center {
            if c.len() != self.dim {
                return Err(Error::mismatch("quadratic center", self.dim, c.len()));
            }
        }
        Ok(())
    }

    /// Variance `1/(aβ)` of each coordinate under `exp(β R)`.
    pub fn gibbs_variance(&self, beta: f64) -> f64 {
        1.0 / (self.curvature * beta)
    }

    pub fn reward(&self, theta: &[f64]) -> f64 {
        let sq: f64 = theta
            .iter()
            .enumerate()
            .map(|(i, t)| (t - self.center.as_ref().map_or(0.0, |c| c[i])).powi(2))
            .sum();
        -0.5 * self.curvature * sq
    }
}

impl GradientOracle for QuadraticOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        point.check_dim(self.dim, "quadratic oracle input")?;
        let g = point
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let m = self.center.as_ref().map_or(0.0, |c| c[i]);
                let noise = if self.noise_std > 0.0 {
                    self.noise_std * rng.standard_normal()
                } else {
                    0.0
                };
                -self.curvature * (t - m) + noise
            })
            .collect();
        ParamVector::from_update(g, "quadratic gradient")
    }
}

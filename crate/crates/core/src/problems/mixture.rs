//! Bayesian posterior with a two-component mixture likelihood.
//!
//! Prior `N(0, diag(10, 2))`; observations
//! `y ~ ½ N(θ°(1), 2) + ½ N(θ°(1) + θ°(2), 2)`. The reward is
//! `E{log p(θ) + T log p(y|θ)}`, which for θ° = (0, 1) has two maxima,
//! near (0, 1) and (1, −1).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::GradientOracle;
use crate::rng::RngStream;
use crate::vector::ParamVector;

pub const PRIOR_VARIANCE: [f64; 2] = [10.0, 2.0];
pub const COMPONENT_VARIANCE: f64 = 2.0;

fn default_obs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureModel {
    pub theta_true: [f64; 2],
    /// T, the weight on the log-likelihood.
    pub likelihood_weight: f64,
    /// Observations averaged per gradient evaluation.
    #[serde(default = "default_obs")]
    pub obs_per_gradient: usize,
}

impl MixtureModel {
    pub fn new(theta_true: [f64; 2], likelihood_weight: f64) -> Result<Self> {
        let m = MixtureModel {
            theta_true,
            likelihood_weight,
            obs_per_gradient: 1,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_obs_per_gradient(mut self, n: usize) -> Self {
        self.obs_per_gradient = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.likelihood_weight >= 0.0 && self.likelihood_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "likelihood_weight must be nonnegative, got {}",
                self.likelihood_weight
            )));
        }
        if self.obs_per_gradient == 0 {
            return Err(Error::InvalidConfig("obs_per_gradient must be >= 1".into()));
        }
        if self.theta_true.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("theta_true"));
        }
        Ok(())
    }

    pub fn sample_obs(&self, rng: &mut RngStream) -> f64 {
        let [a, b] = self.theta_true;
        let mean = if rng.uniform() < 0.5 { a } else { a + b };
        mean + COMPONENT_VARIANCE.sqrt() * rng.standard_normal()
    }

    /// `log p(y|θ)`
    pub fn log_likelihood(theta: &[f64], y: f64) -> f64 {
        let (l1, l2) = component_logs(theta, y);
        let m = l1.max(l2);
        m + ((l1 - m).exp() + (l2 - m).exp()).ln() + 0.5f64.ln()
            - 0.5 * (2.0 * std::f64::consts::PI * COMPONENT_VARIANCE).ln()
    }

    /// `log p(θ)` up to a constant.
    pub fn log_prior(theta: &[f64]) -> f64 {
        -0.5 * (theta[0] * theta[0] / PRIOR_VARIANCE[0] + theta[1] * theta[1] / PRIOR_VARIANCE[1])
    }

    /// `∇ log p(y|θ)`
    pub fn likelihood_grad(theta: &[f64], y: f64) -> [f64; 2] {
        let (l1, l2) = component_logs(theta, y);
        // responsibility of the second component
        let r2 = 1.0 / (1.0 + (l1 - l2).exp());
        let r1 = 1.0 - r2;
        let e1 = (y - theta[0]) / COMPONENT_VARIANCE;
        let e2 = (y - theta[0] - theta[1]) / COMPONENT_VARIANCE;
        [r1 * e1 + r2 * e2, r2 * e2]
    }

    /// `∇ log p(θ) + T ∇ log p(y|θ)`
    pub fn grad(&self, theta: &ParamVector, y: f64) -> Result<ParamVector> {
        theta.check_dim(2, "mixture parameter")?;
        let t = theta.as_slice();
        let lg = Self::likelihood_grad(t, y);
        ParamVector::from_update(
            vec![
                -t[0] / PRIOR_VARIANCE[0] + self.likelihood_weight * lg[0],
                -t[1] / PRIOR_VARIANCE[1] + self.likelihood_weight * lg[1],
            ],
            "mixture gradient",
        )
    }

    /// Reward up to a constant, `log p(θ) + T E_{θ°} log p(y|θ)`, by Gauss–Hermite
    /// quadrature over each mixture component of the observation law.
    pub fn reward(&self, theta: &[f64]) -> f64 {
        let (nodes, weights) = gauss_hermite_20();
        let [a, b] = self.theta_true;
        let s = (2.0 * COMPONENT_VARIANCE).sqrt();
        let mut expect = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            for mean in [a, a + b] {
                let y = mean + s * x;
                expect += 0.5 * w * Self::log_likelihood(theta, y);
            }
        }
        expect /= std::f64::consts::PI.sqrt();
        Self::log_prior(theta) + self.likelihood_weight * expect
    }
}

fn component_logs(theta: &[f64], y: f64) -> (f64, f64) {
    let d1 = y - theta[0];
    let d2 = y - theta[0] - theta[1];
    (
        -d1 * d1 / (2.0 * COMPONENT_VARIANCE),
        -d2 * d2 / (2.0 * COMPONENT_VARIANCE),
    )
}

/// Noisy gradient oracle: averages `obs_per_gradient` fresh observations.
#[derive(Debug, Clone)]
pub struct MixtureOracle {
    model: MixtureModel,
}

impl MixtureOracle {
    pub fn new(model: MixtureModel) -> Result<Self> {
        model.validate()?;
        Ok(MixtureOracle { model })
    }

    pub fn model(&self) -> &MixtureModel {
        &self.model
    }
}

impl GradientOracle for MixtureOracle {
    fn dim(&self) -> usize {
        2
    }

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        point.check_dim(2, "mixture parameter")?;
        let n = self.model.obs_per_gradient;
        let t = point.as_slice();
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let y = self.model.sample_obs(rng);
            let g = MixtureModel::likelihood_grad(t, y);
            acc[0] += g[0];
            acc[1] += g[1];
        }
        let w = self.model.likelihood_weight / n as f64;
        ParamVector::from_update(
            vec![
                -t[0] / PRIOR_VARIANCE[0] + w * acc[0],
                -t[1] / PRIOR_VARIANCE[1] + w * acc[1],
            ],
            "mixture gradient",
        )
    }
}

/// 20-point Gauss–Hermite rule for `∫ f(x) e^{-x²} dx`, via Golub–Welsch.
/// Computed once.
fn gauss_hermite_20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(golub_welsch_20)
}

fn golub_welsch_20() -> (Vec<f64>, Vec<f64>) {
    let n = 20;
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            ((i.max(j)) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let weights: Vec<f64> = (0..n)
        .map(|k| sqrt_pi * eig.eigenvectors[(0, k)].powi(2))
        .collect();
    (nodes, weights)
}

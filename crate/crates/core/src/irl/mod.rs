//! Inverse-learner samplers.
//!
//! Every variant is a Langevin-type recursion whose stationary law is the
//! Gibbs measure `exp(β R(ð))`. They differ in what they may observe:
//!
//! | variant                  | input                 | gradient used            |
//! |--------------------------|-----------------------|--------------------------|
//! | `passive-generalized`    | stream (θ_k, g_k)     | kernel-weighted, π-scaled noise |
//! | `passive-generalized-b`  | stream                | kernel-weighted, π(θ_k) terms   |
//! | `passive-classical`      | stream                | kernel-weighted, divided by π(ð) |
//! | `multi-kernel`           | pools of L samples    | self-normalized weights  |
//! | `active`                 | oracle at ð + v       | kernel / conditional density |
//! | `non-reversible`         | stream                | `(I + S)` times passive-classical |
//! | `classical-langevin`     | oracle at ð           | exact evaluation point   |
//! | `naive`                  | stream                | g_k as if taken at ð     |

mod run;
mod trajectory;

pub use run::{run_sampler, run_sampler_partial, ChunkedPools, PoolSource, ResampledPools, SampleSource};
pub use trajectory::{config_fingerprint, Trajectory, TrajectoryMetadata};

use serde::{Deserialize, Serialize};
use std::borrow::{Borrow, Cow};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::{GradientOracle, InitDensity};
use crate::kernels::Kernel;
use crate::rng::RngStream;
use crate::vector::{GradientSample, ParamVector};

/// Divisions by π(ð) or p(θ|ð) below this value are refused.
pub const DENSITY_FLOOR: f64 = 1e-300;

const SKEW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    PassiveGeneralized,
    PassiveGeneralizedB,
    PassiveClassical,
    MultiKernel,
    Active,
    NonReversible,
    ClassicalLangevin,
    Naive,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::PassiveGeneralized,
        Variant::PassiveGeneralizedB,
        Variant::PassiveClassical,
        Variant::MultiKernel,
        Variant::Active,
        Variant::NonReversible,
        Variant::ClassicalLangevin,
        Variant::Naive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::PassiveGeneralized => "passive-generalized",
            Variant::PassiveGeneralizedB => "passive-generalized-b",
            Variant::PassiveClassical => "passive-classical",
            Variant::MultiKernel => "multi-kernel",
            Variant::Active => "active",
            Variant::NonReversible => "non-reversible",
            Variant::ClassicalLangevin => "classical-langevin",
            Variant::Naive => "naive",
        }
    }

    pub fn input_kind(&self) -> InputKind {
        match self {
            Variant::MultiKernel => InputKind::Pool,
            Variant::Active | Variant::ClassicalLangevin => InputKind::Oracle,
            _ => InputKind::Stream,
        }
    }

    fn needs_kernel(&self) -> bool {
        matches!(
            self,
            Variant::PassiveGeneralized
                | Variant::PassiveGeneralizedB
                | Variant::PassiveClassical
                | Variant::Active
                | Variant::NonReversible
        )
    }

    fn needs_density(&self) -> bool {
        matches!(
            self,
            Variant::PassiveGeneralized
                | Variant::PassiveGeneralizedB
                | Variant::PassiveClassical
                | Variant::NonReversible
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sampler variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Stream,
    Pool,
    Oracle,
}

fn default_burn_in() -> f64 {
    0.1
}

fn default_pool() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// μ
    pub step: f64,
    /// β, the inverse temperature. Independent of the forward agents' step.
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    /// L, pool size of the multi-kernel variant.
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    /// σ of the conditional density p(θ|ð) = N(θ - ð; 0, σ²I).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Skew-symmetric S, row-major, for the non-reversible variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<Vec<Vec<f64>>>,
    /// π, the forward agents' initialization density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_density: Option<InitDensity>,
    /// ð_0
    pub initial: ParamVector,
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    /// Optional box `[low, high]` applied to every coordinate by reflection
    /// after each step. Useful when the parameter is an angle whose canonical
    /// range is bounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflect: Option<[f64; 2]>,
}

impl SamplerConfig {
    pub fn new(step: f64, beta: f64, initial: ParamVector) -> Self {
        SamplerConfig {
            step,
            beta,
            kernel: None,
            pool_size: 1,
            sigma: None,
            skew: None,
            init_density: None,
            initial,
            burn_in_fraction: default_burn_in(),
            reflect: None,
        }
    }

    pub fn with_reflect(mut self, low: f64, high: f64) -> Self {
        self.reflect = Some([low, high]);
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn with_init_density(mut self, pi: InitDensity) -> Self {
        self.init_density = Some(pi);
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_pool_size(mut self, l: usize) -> Self {
        self.pool_size = l;
        self
    }

    pub fn with_skew(mut self, s: Vec<Vec<f64>>) -> Self {
        self.skew = Some(s);
        self
    }

    pub fn with_burn_in(mut self, fraction: f64) -> Self {
        self.burn_in_fraction = fraction;
        self
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// μ / Δ^N, which must be small for the second generalized implementation.
    pub fn step_bandwidth_ratio(&self) -> Option<f64> {
        self.kernel
            .as_ref()
            .map(|k| self.step / k.bandwidth().powi(k.dim() as i32))
    }

    pub fn validate(&self, variant: Variant) -> Result<()> {
        let n = self.dim();
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.step, "step")?;
        positive(self.beta, "beta")?;
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidConfig(format!(
                "burn_in_fraction must lie in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if variant.needs_kernel() {
            let k = self.kernel.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!("variant {variant} requires a kernel"))
            })?;
            if k.dim() != n {
                return Err(Error::mismatch("kernel.dim vs initial", n, k.dim()));
            }
        }
        if variant.needs_density() {
            let pi = self.init_density.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!("variant {variant} requires init_density"))
            })?;
            if pi.dim() != n {
                return Err(Error::mismatch("init_density vs initial", n, pi.dim()));
            }
        }
        if matches!(variant, Variant::MultiKernel | Variant::Active) {
            positive(
                self.sigma.ok_or_else(|| {
                    Error::InvalidConfig(format!("variant {variant} requires sigma"))
                })?,
                "sigma",
            )?;
        }
        if variant == Variant::MultiKernel && self.pool_size == 0 {
            return Err(Error::InvalidConfig("pool_size must be >= 1".into()));
        }
        if let Some([lo, hi]) = self.reflect {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "reflect box must satisfy low < high, got [{lo}, {hi}]"
                )));
            }
            if self.initial.iter().any(|v| *v < lo || *v > hi) {
                return Err(Error::InvalidConfig("initial lies outside the reflect box".into()));
            }
        }
        if let Some(s) = &self.skew {
            if s.len() != n || s.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidConfig(format!("skew matrix must be {n}x{n}")));
            }
            for i in 0..n {
                for j in 0..n {
                    if !s[i][j].is_finite() || (s[i][j] + s[j][i]).abs() > SKEW_TOLERANCE {
                        return Err(Error::InvalidConfig(format!(
                            "skew matrix is not skew-symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Folds `v` into `[lo, hi]` by repeated mirror reflection at the walls.
pub fn reflect_into(v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let r = (v - lo).rem_euclid(2.0 * w);
    if r <= w {
        lo + r
    } else {
        lo + 2.0 * w - r
    }
}

/// What one step consumes.
pub enum StepInput<'a> {
    Sample(&'a GradientSample),
    Pool(&'a [Cow<'a, GradientSample>]),
    Oracle(&'a mut dyn GradientOracle),
}

/// A validated sampler for one variant.
#[derive(Debug, Clone)]
pub struct Sampler {
    variant: Variant,
    cfg: SamplerConfig,
    sqrt_step: f64,
    /// Gaussian with bandwidth σ, i.e. p(θ|ð), for active and multi-kernel.
    conditional: Option<Kernel>,
    weight_resets: usize,
    scratch: Vec<f64>,
    noise_buf: Vec<f64>,
}

impl Sampler {
    pub fn new(variant: Variant, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate(variant)?;
        let conditional = match cfg.sigma {
            Some(s) => Some(Kernel::gaussian(s, cfg.dim())?),
            None => None,
        };
        Ok(Sampler {
            variant,
            sqrt_step: cfg.step.sqrt(),
            scratch: vec![0.0; cfg.dim()],
            noise_buf: vec![0.0; cfg.dim()],
            cfg,
            conditional,
            weight_resets: 0,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    /// How many multi-kernel steps fell back to uniform weights.
    pub fn weight_resets(&self) -> usize {
        self.weight_resets
    }

    /// One step `ð_k -> ð_{k+1}` drawing w_k (and v_k for the active variant) from `rng`.
    pub fn step(
        &mut self,
        current: &ParamVector,
        input: StepInput<'_>,
        rng: &mut RngStream,
    ) -> Result<ParamVector> {
        current.check_dim(self.dim(), "sampler state")?;
        let next = self.raw_step(current, input, rng)?;
        Ok(match self.cfg.reflect {
            Some([lo, hi]) => next.map(|v| reflect_into(v, lo, hi)),
            None => next,
        })
    }

    fn raw_step(
        &mut self,
        current: &ParamVector,
        input: StepInput<'_>,
        rng: &mut RngStream,
    ) -> Result<ParamVector> {
        match (self.variant, input) {
            (Variant::MultiKernel, StepInput::Pool(pool)) => {
                let w = self.noise(rng);
                self.multikernel_update(current, pool, &w)
            }
            (Variant::Active, StepInput::Oracle(oracle)) => {
                let sigma = self.cfg.sigma.expect("validated");
                let v: Vec<f64> = (0..self.dim()).map(|_| sigma * rng.standard_normal()).collect();
                let theta = ParamVector::from_update(
                    current.iter().zip(&v).map(|(a, b)| a + b).collect(),
                    "active evaluation point",
                )?;
                let g = oracle.gradient(&theta, rng)?;
                g.check_dim(self.dim(), "oracle gradient")?;
                let w = self.noise(rng);
                self.active_update(current, &theta, &g, &w)
            }
            (Variant::ClassicalLangevin, StepInput::Oracle(oracle)) => {
                let g = oracle.gradient(current, rng)?;
                g.check_dim(self.dim(), "oracle gradient")?;
                let w = self.noise(rng);
                self.classical_update(current, &g, &w)
            }
            (v, StepInput::Sample(sample)) if v.input_kind() == InputKind::Stream => {
                sample.point().check_dim(self.dim(), "gradient sample")?;
                let mut w = std::mem::take(&mut self.noise_buf);
                rng.fill_normal(&mut w);
                let next = self.stream_update(current, sample, &w);
                self.noise_buf = w;
                next
            }
            (v, _) => Err(Error::InvalidConfig(format!(
                "variant {v} was given the wrong kind of input"
            ))),
        }
    }

    fn noise(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        rng.fill_normal(&mut w);
        w
    }

    /// Update for the stream-driven variants with explicit Brownian increment `w`.
    pub fn stream_update(
        &mut self,
        current: &ParamVector,
        sample: &GradientSample,
        w: &[f64],
    ) -> Result<ParamVector> {
        let cur = current.as_slice();
        let theta = sample.point().as_slice();
        let g = sample.gradient().as_slice();
        let mu = self.cfg.step;
        let half_beta = 0.5 * self.cfg.beta;
        let sqrt_mu = self.sqrt_step;
        let next: Vec<f64> = match self.variant {
            Variant::PassiveGeneralized => {
                let k = self.kernel().scaled_between(theta, cur);
                let mut dpi = std::mem::take(&mut self.scratch);
                let pi = self.density().density_and_grad_into(cur, &mut dpi);
                let next = (0..cur.len())
                    .map(|i| {
                        cur[i] + mu * (k * half_beta * g[i] + dpi[i]) * pi + sqrt_mu * pi * w[i]
                    })
                    .collect();
                self.scratch = dpi;
                next
            }
            Variant::PassiveGeneralizedB => {
                let k = self.kernel().scaled_between(theta, cur);
                if k == 0.0 {
                    return Ok(current.clone());
                }
                let mut dpi = std::mem::take(&mut self.scratch);
                let pi = self.density().density_and_grad_into(theta, &mut dpi);
                let amp = (mu * k * pi).sqrt();
                let next = (0..cur.len())
                    .map(|i| cur[i] + mu * k * (half_beta * g[i] * pi + dpi[i]) + amp * w[i])
                    .collect();
                self.scratch = dpi;
                next
            }
            Variant::PassiveClassical | Variant::NonReversible => {
                let pi = self.density().density(cur);
                if pi < DENSITY_FLOOR {
                    return Err(Error::DensityFloor { step: 0, value: pi });
                }
                let k = self.kernel().scaled_between(theta, cur);
                let gain = mu * k * half_beta / pi;
                let drift = match (&self.cfg.skew, self.variant) {
                    (Some(s), Variant::NonReversible) => Cow::Owned(skew_apply(s, g)),
                    _ => Cow::Borrowed(g),
                };
                (0..cur.len())
                    .map(|i| cur[i] + gain * drift[i] + sqrt_mu * w[i])
                    .collect()
            }
            Variant::Naive => (0..cur.len())
                .map(|i| cur[i] + mu * half_beta * g[i] + sqrt_mu * w[i])
                .collect(),
            v => {
                return Err(Error::InvalidConfig(format!(
                    "variant {v} does not consume a sample stream"
                )))
            }
        };
        ParamVector::from_update(next, self.variant.name())
    }

    /// Self-normalized weights γ_i ∝ p(ð|θ_i), computed in the log domain.
    /// Returns the weights and whether the uniform fallback was used.
    pub fn pool_weights<S: Borrow<GradientSample>>(&self, current: &ParamVector, pool: &[S]) -> (Vec<f64>, bool) {
        let sigma = self.cfg.sigma.expect("validated");
        let inv = 1.0 / (2.0 * sigma * sigma);
        let cur = current.as_slice();
        let logs: Vec<f64> = pool
            .iter()
            .map(|s| {
                let d: f64 = s
                    .borrow()
                    .point()
                    .iter()
                    .zip(cur)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                -d * inv
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        if !max.is_finite() || !(total > 0.0) || !total.is_finite() {
            let u = 1.0 / pool.len() as f64;
            return (vec![u; pool.len()], true);
        }
        for x in w.iter_mut() {
            *x /= total;
        }
        (w, false)
    }

    /// Multi-kernel update with explicit Brownian increment `w`.
    pub fn multikernel_update<S: Borrow<GradientSample>>(
        &mut self,
        current: &ParamVector,
        pool: &[S],
        w: &[f64],
    ) -> Result<ParamVector> {
        if pool.is_empty() {
            return Err(Error::InvalidConfig("empty gradient pool".into()));
        }
        for s in pool {
            s.borrow().point().check_dim(self.dim(), "pool sample")?;
        }
        let (weights, reset) = self.pool_weights(current, pool);
        if reset {
            self.weight_resets += 1;
        }
        let n = self.dim();
        let mut est = vec![0.0; n];
        for (gamma, s) in weights.iter().zip(pool) {
            for (e, g) in est.iter_mut().zip(s.borrow().gradient().iter()) {
                *e += gamma * g;
            }
        }
        let scale = self.cfg.step * 0.5 * self.cfg.beta;
        let next = (0..n)
            .map(|i| current[i] + scale * est[i] + self.sqrt_step * w[i])
            .collect();
        ParamVector::from_update(next, self.variant.name())
    }

    /// Active update given the perturbed point θ = ð + v, its gradient and `w`.
    pub fn active_update(
        &mut self,
        current: &ParamVector,
        theta: &ParamVector,
        gradient: &ParamVector,
        w: &[f64],
    ) -> Result<ParamVector> {
        let cur = current.as_slice();
        let k = self.kernel().scaled_between(theta.as_slice(), cur);
        let p = self
            .conditional
            .as_ref()
            .expect("validated")
            .scaled_between(theta.as_slice(), cur);
        if p < DENSITY_FLOOR {
            return Err(Error::DensityFloor { step: 0, value: p });
        }
        let gain = self.cfg.step * (k / p) * 0.5 * self.cfg.beta;
        let next = (0..cur.len())
            .map(|i| cur[i] + gain * gradient[i] + self.sqrt_step * w[i])
            .collect();
        ParamVector::from_update(next, self.variant.name())
    }

    /// `ð + μ (β/2) g + √μ w`.
    pub fn classical_update(
        &mut self,
        current: &ParamVector,
        gradient: &ParamVector,
        w: &[f64],
    ) -> Result<ParamVector> {
        let scale = self.cfg.step * 0.5 * self.cfg.beta;
        let next = (0..self.dim())
            .map(|i| current[i] + scale * gradient[i] + self.sqrt_step * w[i])
            .collect();
        ParamVector::from_update(next, self.variant.name())
    }

    fn kernel(&self) -> &Kernel {
        self.cfg.kernel.as_ref().expect("validated")
    }

    fn density(&self) -> &InitDensity {
        self.cfg.init_density.as_ref().expect("validated")
    }
}

/// `(I + S) g`
fn skew_apply(s: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    s.iter()
        .zip(g)
        .map(|(row, gi)| gi + row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

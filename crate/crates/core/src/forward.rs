//! Forward learners: randomly initialized stochastic-gradient agents whose
//! (point, gradient) pairs feed every passive sampler.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::{GradientSample, ParamVector};

/// A source of noisy reward gradients, `θ -> ∇r_k(θ)`.
pub trait GradientOracle {
    fn dim(&self) -> usize;

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector>;
}

impl<O: GradientOracle + ?Sized> GradientOracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        (**self).gradient(point, rng)
    }
}

impl<O: GradientOracle + ?Sized> GradientOracle for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        (**self).gradient(point, rng)
    }
}

/// Adapts a closure into an oracle.
#[derive(Clone)]
pub struct FnOracle<F> {
    dim: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: FnMut(&ParamVector, &mut RngStream) -> Vec<f64>,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOracle { dim, f }
    }
}

impl<F> GradientOracle for FnOracle<F>
where
    F: FnMut(&ParamVector, &mut RngStream) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        point.check_dim(self.dim, "oracle input")?;
        let g = (self.f)(point, rng);
        if g.len() != self.dim {
            return Err(Error::mismatch("oracle output", self.dim, g.len()));
        }
        ParamVector::from_update(g, "oracle gradient")
    }
}

/// Initialization density π of the forward agents (Gaussian, diagonal covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InitDensitySpec", into = "InitDensitySpec")]
pub struct InitDensity {
    mean: Vec<f64>,
    variance: Vec<f64>,
    log_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitDensitySpec {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl TryFrom<InitDensitySpec> for InitDensity {
    type Error = Error;

    fn try_from(s: InitDensitySpec) -> Result<Self> {
        InitDensity::gaussian(s.mean, s.variance)
    }
}

impl From<InitDensity> for InitDensitySpec {
    fn from(d: InitDensity) -> Self {
        InitDensitySpec {
            mean: d.mean,
            variance: d.variance,
        }
    }
}

impl InitDensity {
    pub fn gaussian(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variance.len() {
            return Err(Error::InvalidConfig(format!(
                "init density mean has length {} but variance has length {}",
                mean.len(),
                variance.len()
            )));
        }
        if variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("init density variances must be positive".into()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("init density mean must be finite".into()));
        }
        let log_norm = variance.iter().map(|v| -0.5 * (2.0 * PI * v).ln()).sum();
        Ok(InitDensity {
            mean,
            variance,
            log_norm,
        })
    }

    pub fn standard(dim: usize) -> Self {
        InitDensity::gaussian(vec![0.0; dim], vec![1.0; dim]).expect("valid standard normal")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn density(&self, point: &[f64]) -> f64 {
        let q: f64 = point
            .iter()
            .zip(&self.mean)
            .zip(&self.variance)
            .map(|((x, m), v)| (x - m) * (x - m) / v)
            .sum();
        (self.log_norm - 0.5 * q).exp()
    }

    /// π(point), writing ∇π(point) into `grad`.
    pub fn density_and_grad_into(&self, point: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.density(point);
        for (i, g) in grad.iter_mut().enumerate() {
            *g = -p * (point[i] - self.mean[i]) / self.variance[i];
        }
        p
    }

    pub fn density_and_grad(&self, point: &ParamVector) -> Result<(f64, ParamVector)> {
        point.check_dim(self.dim(), "init density argument")?;
        let mut grad = vec![0.0; self.dim()];
        let p = self.density_and_grad_into(point.as_slice(), &mut grad);
        Ok((p, ParamVector::from_update(grad, "init density gradient")?))
    }

    pub fn sample(&self, rng: &mut RngStream) -> ParamVector {
        let v = self
            .mean
            .iter()
            .zip(&self.variance)
            .map(|(m, var)| m + var.sqrt() * rng.standard_normal())
            .collect();
        ParamVector::new(v).expect("finite draw")
    }

    /// Marginal CDF of coordinate `i`.
    pub fn marginal_cdf(&self, i: usize, x: f64) -> f64 {
        let z = (x - self.mean[i]) / self.variance[i].sqrt();
        0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunLength {
    Fixed(usize),
    /// Uniform on `min..=max`.
    Uniform { min: usize, max: usize },
}

impl RunLength {
    fn draw(&self, rng: &mut RngStream) -> usize {
        match *self {
            RunLength::Fixed(n) => n,
            RunLength::Uniform { min, max } => min + rng.index(max - min + 1),
        }
    }

    pub fn max(&self) -> usize {
        match *self {
            RunLength::Fixed(n) => n,
            RunLength::Uniform { max, .. } => max,
        }
    }
}

impl Default for RunLength {
    fn default() -> Self {
        RunLength::Fixed(100)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPoolConfig {
    pub step: f64,
    pub num_agents: usize,
    #[serde(default)]
    pub run_length: RunLength,
    pub dim: usize,
}

impl AgentPoolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "agent step must be positive, got {}",
                self.step
            )));
        }
        if self.num_agents == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("num_agents and dim must be >= 1".into()));
        }
        match self.run_length {
            RunLength::Fixed(0) => {
                return Err(Error::InvalidConfig("run_length must be >= 1".into()))
            }
            RunLength::Uniform { min, max } if min == 0 || min > max => {
                return Err(Error::InvalidConfig(format!(
                    "run_length range {min}..={max} is invalid"
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// Number of samples emitted when the run length is fixed.
    pub fn fixed_stream_len(&self) -> Option<usize> {
        match self.run_length {
            RunLength::Fixed(n) => Some(n * self.num_agents),
            RunLength::Uniform { .. } => None,
        }
    }
}

/// One emitted gradient sample, tagged with its producer.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub agent: usize,
    pub step: usize,
    pub sample: GradientSample,
}

/// Agents running `θ_{k+1} = θ_k + ε ∇r_k(θ_k)` one after another.
pub struct AgentStream<'a, O: ?Sized> {
    oracle: &'a mut O,
    init: &'a InitDensity,
    cfg: AgentPoolConfig,
    rng: &'a mut RngStream,
    agent: usize,
    step: usize,
    horizon: usize,
    current: Option<ParamVector>,
    failed: bool,
}

impl<'a, O: GradientOracle + ?Sized> AgentStream<'a, O> {
    /// Draws the next sample. The oracle may be swapped between calls, which
    /// is how a switching reward is routed to the agents.
    fn advance(&mut self) -> Option<Result<Emission>> {
        if self.failed || self.agent >= self.cfg.num_agents {
            return None;
        }
        if self.current.is_none() {
            self.horizon = self.cfg.run_length.draw(self.rng);
            self.current = Some(self.init.sample(self.rng));
            self.step = 0;
        }
        let theta = self.current.take().expect("initialized above");
        let grad = match self.oracle.gradient(&theta, self.rng) {
            Ok(g) => g,
            Err(e) => {
                self.failed = true;
                return Some(Err(self.tag(e)));
            }
        };
        let next: Vec<f64> = theta
            .iter()
            .zip(grad.iter())
            .map(|(t, g)| t + self.cfg.step * g)
            .collect();
        let emission = Emission {
            agent: self.agent,
            step: self.step,
            sample: match GradientSample::new(theta, grad) {
                Ok(s) => s,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            },
        };
        self.step += 1;
        if self.step >= self.horizon {
            self.agent += 1;
        } else {
            match ParamVector::from_update(next, "agent iterate") {
                Ok(v) => self.current = Some(v),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(self.tag(e)));
                }
            }
        }
        Some(Ok(emission))
    }

    fn tag(&self, e: Error) -> Error {
        match e {
            Error::NonFinite { context, .. } => Error::NonFinite {
                step: self.step,
                context: format!("agent {}: {context}", self.agent),
            },
            other => other,
        }
    }
}

impl<O: GradientOracle + ?Sized> Iterator for AgentStream<'_, O> {
    type Item = Result<Emission>;

    fn next(&mut self) -> Option<Self::Item> {
        self.advance()
    }
}

/// Lazily runs the agent pool; the stream has `num_agents × run_length` items.
pub fn run_agent_pool<'a, O: GradientOracle + ?Sized>(
    oracle: &'a mut O,
    init: &'a InitDensity,
    cfg: &AgentPoolConfig,
    rng: &'a mut RngStream,
) -> Result<AgentStream<'a, O>> {
    cfg.validate()?;
    if oracle.dim() != cfg.dim {
        return Err(Error::mismatch("oracle dimension vs agent config", cfg.dim, oracle.dim()));
    }
    if init.dim() != cfg.dim {
        return Err(Error::mismatch("init density vs agent config", cfg.dim, init.dim()));
    }
    Ok(AgentStream {
        oracle,
        init,
        cfg: cfg.clone(),
        rng,
        agent: 0,
        step: 0,
        horizon: 0,
        current: None,
        failed: false,
    })
}

/// Materializes the agent stream, optionally shuffling its order.
pub fn collect_agent_pool<O: GradientOracle + ?Sized>(
    oracle: &mut O,
    init: &InitDensity,
    cfg: &AgentPoolConfig,
    shuffle: bool,
    rng: &mut RngStream,
) -> Result<Vec<Emission>> {
    let mut out: Vec<Emission> = run_agent_pool(oracle, init, cfg, rng)?.collect::<Result<_>>()?;
    if shuffle {
        out.shuffle(rng);
    }
    Ok(out)
}

/// Splits the agents over `workers` threads, each with `rng.child(w)` and its
/// own oracle clone. Output is ordered by worker, then by emission.
pub fn collect_agent_pool_parallel<O>(
    oracle: &O,
    init: &InitDensity,
    cfg: &AgentPoolConfig,
    workers: usize,
    rng: &RngStream,
) -> Result<Vec<Emission>>
where
    O: GradientOracle + Clone + Send,
{
    cfg.validate()?;
    let workers = workers.max(1).min(cfg.num_agents);
    let base = cfg.num_agents / workers;
    let extra = cfg.num_agents % workers;
    let results: Vec<Result<Vec<Emission>>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        let mut offset = 0;
        for w in 0..workers {
            let count = base + usize::from(w < extra);
            let mut local_cfg = cfg.clone();
            local_cfg.num_agents = count;
            let mut local_oracle = oracle.clone();
            let mut local_rng = rng.child(w as u64);
            let first_agent = offset;
            offset += count;
            handles.push(scope.spawn(move || {
                let stream = run_agent_pool(&mut local_oracle, init, &local_cfg, &mut local_rng)?;
                stream
                    .map(|e| {
                        e.map(|mut e| {
                            e.agent += first_agent;
                            e
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("agent worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(cfg.fixed_stream_len().unwrap_or(0));
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Writes `agent,step,theta_1..theta_N,grad_1..grad_N` rows.
pub fn write_stream_csv<W: Write>(mut out: W, emissions: &[Emission]) -> Result<()> {
    let Some(first) = emissions.first() else {
        return Ok(());
    };
    let n = first.sample.dim();
    let mut header = String::from("agent,step");
    for i in 1..=n {
        header.push_str(&format!(",theta_{i}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",grad_{i}"));
    }
    writeln!(out, "{header}")?;
    for e in emissions {
        write!(out, "{},{}", e.agent, e.step)?;
        for v in e.sample.point().iter().chain(e.sample.gradient().iter()) {
            write!(out, ",{v:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

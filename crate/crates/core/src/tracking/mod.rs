//! Running a sampler against a reward whose regime switches over time, and
//! scoring how well windowed statistics follow the hidden regime.
//!
//! The hyper-state drives only the gradient oracle. It is recorded for
//! scoring and never handed to the sampler.

use std::borrow::Cow;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{EmpiricalDensity, GridSpec};
use crate::error::{Error, Result};
use crate::forward::{GradientOracle, InitDensity};
use crate::irl::{InputKind, Sampler, SamplerConfig, StepInput, Trajectory, Variant};
use crate::problems::SwitchingReward;
use crate::rng::RngStream;
use crate::vector::GradientSample;

/// Relation between the sampler step μ and the switching rate η.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// η = μ
    Matched,
    /// η = μ^(1+Δ̃)
    SlowSwitch,
    /// η = μ^Δ̃ with 0 < Δ̃ < 1
    FastSwitch,
    /// η = 0, the degenerate slow limit.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    pub regime: Regime,
    /// Δ̃
    #[serde(default)]
    pub exponent: f64,
    /// Steps per window.
    pub window: usize,
    /// Optional grid for per-window histograms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Law of the evaluation points handed to stream and pool variants.
    /// Falls back to the sampler's `init_density`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<InitDensity>,
}

const ETA_REL_TOL: f64 = 1e-12;

impl TrackingConfig {
    pub fn new(regime: Regime, exponent: f64, window: usize) -> Self {
        TrackingConfig {
            regime,
            exponent,
            window,
            grid: None,
            proposal: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("window must be >= 1".into()));
        }
        match self.regime {
            Regime::FastSwitch if !(self.exponent > 0.0 && self.exponent < 1.0) => Err(
                Error::InvalidConfig(format!(
                    "fast_switch needs exponent in (0, 1), got {}",
                    self.exponent
                )),
            ),
            Regime::SlowSwitch if !(self.exponent > 0.0 && self.exponent.is_finite()) => Err(
                Error::InvalidConfig(format!(
                    "slow_switch needs a positive exponent, got {}",
                    self.exponent
                )),
            ),
            _ => Ok(()),
        }
    }

    /// The switching rate implied by the regime for sampler step `mu`.
    pub fn eta_for(&self, mu: f64) -> f64 {
        match self.regime {
            Regime::Matched => mu,
            Regime::SlowSwitch => mu.powf(1.0 + self.exponent),
            Regime::FastSwitch => mu.powf(self.exponent),
            Regime::Frozen => 0.0,
        }
    }
}

/// Statistics of one window of consecutive sampler steps.
#[derive(Debug, Clone)]
pub struct TrackingWindow {
    pub index: usize,
    /// First step (1-based, ð_0 excluded) covered by the window.
    pub start: usize,
    /// Fraction of steps spent in each hyper-state.
    pub occupancy: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub density: Option<EmpiricalDensity>,
}

impl TrackingWindow {
    /// Most occupied hyper-state.
    pub fn mode_state(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.occupancy.iter().enumerate() {
            if *v > self.occupancy[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackingMetadata {
    pub regime: Regime,
    pub exponent: f64,
    pub step: f64,
    pub eta: f64,
    pub window: usize,
    pub variant: Variant,
    pub weight_resets: usize,
}

#[derive(Debug, Clone)]
pub struct TrackingRun {
    pub trajectory: Trajectory,
    /// Hyper-state in force at each step 1..=n.
    pub states: Vec<usize>,
    pub windows: Vec<TrackingWindow>,
    pub metadata: TrackingMetadata,
}

/// Runs `variant` for `num_steps` against `switching`. Each step first moves
/// the hyper-state, then queries gradients from the active regime.
///
/// Stream variants receive one point drawn from the proposal law per step;
/// the multi-kernel variant receives `pool_size` such points.
pub fn run_tracking(
    variant: Variant,
    switching: &mut SwitchingReward<'_>,
    sampler_cfg: &SamplerConfig,
    cfg: &TrackingConfig,
    num_steps: usize,
    rng: &mut RngStream,
) -> Result<TrackingRun> {
    cfg.validate()?;
    if cfg.window > num_steps {
        return Err(Error::InvalidConfig(format!(
            "window {} exceeds total steps {num_steps}",
            cfg.window
        )));
    }
    let mu = sampler_cfg.step;
    let want = cfg.eta_for(mu);
    let eta = switching.eta();
    let matches = if want == 0.0 {
        eta == 0.0
    } else {
        ((eta - want) / want).abs() <= ETA_REL_TOL
    };
    if !matches {
        return Err(Error::InvalidConfig(format!(
            "switching rate {eta} does not satisfy the {:?} relation (expected {want})",
            cfg.regime
        )));
    }
    let dim = sampler_cfg.dim();
    if switching.dim() != dim {
        return Err(Error::mismatch("switching oracle vs sampler", dim, switching.dim()));
    }
    let mut sampler = Sampler::new(variant, sampler_cfg.clone())?;
    let proposal = match variant.input_kind() {
        InputKind::Oracle => None,
        _ => Some(
            cfg.proposal
                .as_ref()
                .or(sampler_cfg.init_density.as_ref())
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "variant {variant} needs a proposal law for tracking"
                    ))
                })?
                .clone(),
        ),
    };
    if let Some(p) = &proposal {
        if p.dim() != dim {
            return Err(Error::mismatch("proposal vs sampler", dim, p.dim()));
        }
    }

    let mut data = Vec::with_capacity((num_steps + 1) * dim);
    data.extend_from_slice(sampler_cfg.initial.as_slice());
    let mut states = Vec::with_capacity(num_steps);
    let mut current = sampler_cfg.initial.clone();
    for k in 0..num_steps {
        states.push(switching.switching_step(rng));
        let next = match variant.input_kind() {
            InputKind::Oracle => sampler.step(&current, StepInput::Oracle(switching), rng),
            InputKind::Stream => {
                let s = draw_sample(switching, proposal.as_ref().expect("set above"), rng)?;
                sampler.step(&current, StepInput::Sample(&s), rng)
            }
            InputKind::Pool => {
                let pool = (0..sampler_cfg.pool_size)
                    .map(|_| draw_sample(switching, proposal.as_ref().expect("set above"), rng).map(Cow::Owned))
                    .collect::<Result<Vec<_>>>()?;
                sampler.step(&current, StepInput::Pool(&pool), rng)
            }
        }
        .map_err(|e| e.at_step(k + 1))?;
        data.extend_from_slice(next.as_slice());
        current = next;
    }
    let trajectory = Trajectory::from_samples(dim, data, sampler_cfg.burn_in_fraction)?;
    let windows = summarize_windows(&trajectory, &states, switching.num_states(), cfg)?;
    Ok(TrackingRun {
        trajectory,
        states,
        windows,
        metadata: TrackingMetadata {
            regime: cfg.regime,
            exponent: cfg.exponent,
            step: mu,
            eta,
            window: cfg.window,
            variant,
            weight_resets: sampler.weight_resets(),
        },
    })
}

fn draw_sample(
    oracle: &mut SwitchingReward<'_>,
    proposal: &InitDensity,
    rng: &mut RngStream,
) -> Result<GradientSample> {
    let theta = proposal.sample(rng);
    let g = oracle.gradient(&theta, rng)?;
    GradientSample::new(theta, g)
}

fn summarize_windows(
    traj: &Trajectory,
    states: &[usize],
    num_states: usize,
    cfg: &TrackingConfig,
) -> Result<Vec<TrackingWindow>> {
    let dim = traj.dim();
    let n = states.len();
    let mut out = Vec::with_capacity(n / cfg.window);
    for (index, start) in (1..=n).step_by(cfg.window).enumerate() {
        let end = (start + cfg.window).min(n + 1);
        if end - start < cfg.window {
            break;
        }
        let len = (end - start) as f64;
        let mut counts = vec![0usize; num_states];
        for s in &states[start - 1..end - 1] {
            counts[*s] += 1;
        }
        let occupancy = counts.iter().map(|c| *c as f64 / len).collect();
        let mut mean = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for k in start..end {
            for (i, v) in traj.sample(k).iter().enumerate() {
                mean[i] += v;
                sq[i] += v * v;
            }
        }
        let variance = (0..dim)
            .map(|i| {
                mean[i] /= len;
                if len > 1.0 {
                    (sq[i] - len * mean[i] * mean[i]) / (len - 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let density = match &cfg.grid {
            Some(g) => Some(EmpiricalDensity::from_points((start..end).map(|k| traj.sample(k)), g)?),
            None => None,
        };
        out.push(TrackingWindow {
            index,
            start,
            occupancy,
            mean,
            variance,
            density,
        });
    }
    Ok(out)
}

/// Writes `window,hyper_state_mode,ð_mean_1..N,ð_var_1..N`.
pub fn write_windows_csv<W: Write>(windows: &[TrackingWindow], mut out: W) -> Result<()> {
    let dim = windows.first().map_or(0, |w| w.mean.len());
    let mut header = vec!["window".to_string(), "hyper_state_mode".to_string()];
    header.extend((1..=dim).map(|i| format!("mean_{i}")));
    header.extend((1..=dim).map(|i| format!("var_{i}")));
    writeln!(out, "{}", header.join(","))?;
    for w in windows {
        let mut row = vec![w.index.to_string(), w.mode_state().to_string()];
        row.extend(w.mean.iter().map(|v| format!("{v:e}")));
        row.extend(w.variance.iter().map(|v| format!("{v:e}")));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Maximal runs of a constant hyper-state, as `(state, first step, length)`
/// with steps counted from 1.
pub fn dwell_segments(states: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let mut j = i;
        while j < states.len() && states[j] == states[i] {
            j += 1;
        }
        out.push((states[i], i + 1, j - i));
        i = j;
    }
    out
}

/// Result of scoring windowed means against the active regime's mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignAccuracy {
    pub correct: usize,
    pub scored: usize,
}

impl SignAccuracy {
    pub fn fraction(&self) -> f64 {
        if self.scored == 0 {
            f64::NAN
        } else {
            self.correct as f64 / self.scored as f64
        }
    }
}

/// Scores windows that lie wholly inside a dwell segment longer than
/// `min_dwell` steps: a window is correct when the sign of its mean in
/// `coordinate` matches the sign of `regime_modes[state]`.
pub fn mode_sign_accuracy(
    run: &TrackingRun,
    regime_modes: &[f64],
    coordinate: usize,
    min_dwell: usize,
) -> Result<SignAccuracy> {
    if coordinate >= run.trajectory.dim() {
        return Err(Error::mismatch("coordinate", run.trajectory.dim(), coordinate));
    }
    let segments = dwell_segments(&run.states);
    let mut acc = SignAccuracy { correct: 0, scored: 0 };
    let mut seg = 0;
    for w in &run.windows {
        let end = w.start + run.metadata.window;
        while seg < segments.len() && segments[seg].1 + segments[seg].2 <= w.start {
            seg += 1;
        }
        let Some(&(state, first, len)) = segments.get(seg) else {
            break;
        };
        if len <= min_dwell || end > first + len {
            continue;
        }
        let target = *regime_modes
            .get(state)
            .ok_or_else(|| Error::mismatch("regime modes", state + 1, regime_modes.len()))?;
        acc.scored += 1;
        if w.mean[coordinate].signum() == target.signum() {
            acc.correct += 1;
        }
    }
    Ok(acc)
}

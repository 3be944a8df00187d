//! Two 1-D regimes R(θ, ±) = −(θ ∓ 1)²/2 under a symmetric generator, tracked
//! by the multi-kernel sampler drawing its pools from a wide Gaussian.

use passive_irl::analysis::{integrated_autocorr_time, ks_two_sample, thin_by_autocorr, Ecdf};
use passive_irl::problems::{QuadraticOracle, SwitchingReward};
use passive_irl::tracking::{mode_sign_accuracy, run_tracking, Regime, TrackingConfig, TrackingRun};
use passive_irl::{GradientOracle, InitDensity, ParamVector, RngStream, SamplerConfig, Variant};

use crate::{Outcome, Verdict};

const SEED: u64 = 8;
const MODE: f64 = 1.0;
const STEP: f64 = 1e-2;
const KS_LEVEL: f64 = 0.001;
const FAST_STEPS: usize = 1_000_000;
const SLOW_STEPS: usize = 1_000_000;
const WINDOW: usize = 100;

fn regime(center: f64) -> passive_irl::Result<Box<dyn GradientOracle>> {
    Ok(Box::new(QuadraticOracle::new(1.0, 0.0, 1)?.centered(vec![center])?))
}

fn two_regimes(eta: f64) -> passive_irl::Result<SwitchingReward<'static>> {
    SwitchingReward::new(
        vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
        eta,
        vec![regime(MODE)?, regime(-MODE)?],
        0,
    )
}

fn sampler(initial: f64) -> passive_irl::Result<SamplerConfig> {
    Ok(SamplerConfig::new(STEP, 2.0, ParamVector::new(vec![initial])?)
        .with_sigma(0.2)
        .with_pool_size(20))
}

fn track(
    sw: &mut SwitchingReward<'_>,
    regime: Regime,
    exponent: f64,
    initial: f64,
    steps: usize,
    seed: u64,
) -> passive_irl::Result<TrackingRun> {
    let mut t = TrackingConfig::new(regime, exponent, WINDOW);
    t.proposal = Some(InitDensity::gaussian(vec![0.0], vec![2.0])?);
    run_tracking(Variant::MultiKernel, sw, &sampler(initial)?, &t, steps, &mut RngStream::new(seed))
}

pub fn run() -> Outcome {
    // fast: η = μ^½ = 0.1, against a chain on ½[R(·,+) + R(·,−)] = −θ²/2 + const
    let fast = track(&mut two_regimes(STEP.sqrt())?, Regime::FastSwitch, 0.5, 0.0, FAST_STEPS, SEED)?;
    let mut averaged = SwitchingReward::new(vec![vec![0.0]], 0.0, vec![regime(0.0)?], 0)?;
    let plain = track(&mut averaged, Regime::Frozen, 0.0, 0.0, FAST_STEPS, SEED + 1)?;
    let a = Ecdf::new(thin_by_autocorr(&fast.trajectory.coordinate(0))?)?;
    let b = Ecdf::new(thin_by_autocorr(&plain.trajectory.coordinate(0))?)?;
    let ks = ks_two_sample(&a, &b);

    // slow: η = μ² = 1e-4, mean dwell 10^4 steps
    let frozen = track(&mut two_regimes(0.0)?, Regime::Frozen, 0.0, MODE, FAST_STEPS / 4, SEED + 2)?;
    let iat = integrated_autocorr_time(&frozen.trajectory.coordinate(0))?;
    let min_dwell = (10.0 * iat).ceil() as usize;
    let slow = track(&mut two_regimes(STEP * STEP)?, Regime::SlowSwitch, 1.0, MODE, SLOW_STEPS, SEED + 3)?;
    let acc = mode_sign_accuracy(&slow, &[MODE, -MODE], 0, min_dwell)?;
    let switches = slow.states.windows(2).filter(|w| w[0] != w[1]).count();

    let pass = ks.passes(KS_LEVEL) && acc.scored > 0 && acc.fraction() >= 0.9;
    Ok(Verdict::new(
        pass,
        format!(
            "fast switch vs averaged reward KS p = {:.3} ({} vs {} thinned draws); slow switch sign accuracy {:.3} over {} windows in segments > {min_dwell} steps (10 x IAT {iat:.0}, {switches} switches)",
            ks.p_value,
            a.len(),
            b.len(),
            acc.fraction(),
            acc.scored
        ),
    ))
}

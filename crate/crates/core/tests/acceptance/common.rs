use passive_irl::analysis::{ks_one_sample, thin_by_autocorr, Ecdf, KsResult};
use passive_irl::forward::{collect_agent_pool, RunLength};
use passive_irl::problems::QuadraticOracle;
use passive_irl::{AgentPoolConfig, GradientSample, InitDensity, RngStream};

/// Samples emitted by `num_agents` forward agents on the quadratic reward,
/// each starting from π = N(0, I), shuffled across agents.
pub fn quadratic_stream(
    dim: usize,
    num_agents: usize,
    run_length: usize,
    agent_step: f64,
    noise: f64,
    rng: &mut RngStream,
) -> Vec<GradientSample> {
    let mut oracle = QuadraticOracle::new(1.0, noise, dim).unwrap();
    let cfg = AgentPoolConfig {
        step: agent_step,
        num_agents,
        run_length: RunLength::Fixed(run_length),
        dim,
    };
    let shuffled: Vec<GradientSample> = collect_agent_pool(&mut oracle, &InitDensity::standard(dim), &cfg, true, rng)
        .unwrap()
        .into_iter()
        .map(|e| e.sample)
        .collect();
    // re-allocated in reading order, which keeps long runs cache friendly
    shuffled.to_vec()
}

/// KS test of `xs`, thinned by its integrated autocorrelation time, against N(0, var).
pub fn ks_vs_centered_normal(xs: &[f64], var: f64) -> passive_irl::Result<KsResult> {
    let thinned = thin_by_autocorr(xs)?;
    let law = InitDensity::gaussian(vec![0.0], vec![var])?;
    Ok(ks_one_sample(&Ecdf::new(thinned)?, |x| law.marginal_cdf(0, x)))
}

pub fn rel_err(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

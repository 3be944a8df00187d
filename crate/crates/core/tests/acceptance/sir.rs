//! θ_i ~ N(0, 1), gradient θ, ð = 0.5, σ = 0.3. The self-normalized
//! estimate Σγ_iθ_i tends to E[θ | ð] = ð/(1 + σ²).

use passive_irl::analysis::{mean, variance};
use passive_irl::irl::Sampler;
use passive_irl::{GradientSample, ParamVector, RngStream, SamplerConfig, Variant};

use crate::{Outcome, Verdict};

const SEEDS: u64 = 50;
const POOL_SIZES: [usize; 3] = [100, 1_000, 10_000];
const CURRENT: f64 = 0.5;
const SIGMA: f64 = 0.3;

fn estimate(sampler: &Sampler, l: usize, rng: &mut RngStream) -> passive_irl::Result<f64> {
    let pool = (0..l)
        .map(|_| {
            let t = ParamVector::new(vec![rng.standard_normal()])?;
            GradientSample::new(t.clone(), t)
        })
        .collect::<passive_irl::Result<Vec<_>>>()?;
    let (w, _) = sampler.pool_weights(&ParamVector::new(vec![CURRENT])?, &pool);
    Ok(w.iter().zip(&pool).map(|(g, s)| g * s.gradient()[0]).sum())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run() -> Outcome {
    let truth = CURRENT / (1.0 + SIGMA * SIGMA);
    let cfg = SamplerConfig::new(1e-3, 1.0, ParamVector::new(vec![CURRENT])?)
        .with_sigma(SIGMA)
        .with_pool_size(1);
    let sampler = Sampler::new(Variant::MultiKernel, cfg)?;
    let mut medians = Vec::new();
    let mut last = Vec::new();
    for l in POOL_SIZES {
        let ests = (0..SEEDS)
            .map(|s| estimate(&sampler, l, &mut RngStream::new(1000 * l as u64 + s)))
            .collect::<passive_irl::Result<Vec<f64>>>()?;
        medians.push(median(ests.iter().map(|e| (e - truth).abs()).collect()));
        last = ests;
    }
    let monotone = medians.windows(2).all(|w| w[1] < w[0]);
    // spread of one L = 10^4 estimate, and of the 50-seed average
    let sd = variance(&last).sqrt();
    let se_mean = sd / (SEEDS as f64).sqrt();
    let bias = (mean(&last) - truth).abs();
    let typical = medians[2];
    let pass = monotone && typical <= 3.0 * sd && bias <= 3.0 * se_mean;
    Ok(Verdict::new(
        pass,
        format!(
            "median |err| {:.4} > {:.4} > {:.4}; at L=1e4 median |err| {typical:.4} vs 3 sd {:.4}, |mean - {truth:.4}| {bias:.5} vs 3 se {:.5}",
            medians[0],
            medians[1],
            medians[2],
            3.0 * sd,
            3.0 * se_mean
        ),
    ))
}

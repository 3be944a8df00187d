//! Bayesian logistic regression on the bundled a9a-shaped fixture, cut down
//! to the 20 most frequent features plus bias.

use passive_irl::analysis::{wasserstein1, Ecdf};
use passive_irl::forward::{collect_agent_pool, RunLength};
use passive_irl::irl::{ResampledPools, SampleSource};
use passive_irl::problems::{parse_libsvm, LogisticModel, LogisticOracle, LogisticParams, A9A_FEATURES};
use passive_irl::{run_sampler, AgentPoolConfig, GradientSample, InitDensity, ParamVector, RngStream, SamplerConfig, Trajectory, Variant};

use crate::{Outcome, Verdict};

const SEED: u64 = 1;
const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/synthetic_a9a.libsvm");
const ROWS: usize = 2000;
const FEATURES: usize = 20;
const NUM_AGENTS: usize = 10_000;
const RUN_LENGTH: usize = 100;
const AGENT_STEP: f64 = 1e-3;
const STEP: f64 = 2.5e-4;
const SIGMA: f64 = 0.1;
const POOL: usize = 100;
const STEPS: usize = 1_000_000;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn marginal_w1(a: &Trajectory, b: &Trajectory) -> passive_irl::Result<Vec<f64>> {
    (0..a.dim())
        .map(|i| Ok(wasserstein1(&Ecdf::from_trajectory(a, i)?, &Ecdf::from_trajectory(b, i)?)))
        .collect()
}

pub fn run() -> Outcome {
    let file = std::fs::File::open(FIXTURE)?;
    let full = parse_libsvm(std::io::BufReader::new(file), A9A_FEATURES)?;
    let mut rng = RngStream::new(SEED);
    let data = full.desk_subset(ROWS, FEATURES, &mut rng)?;
    let dim = data.dim();
    let model = LogisticModel::new(data, LogisticParams::default())?;

    let agents = AgentPoolConfig {
        step: AGENT_STEP,
        num_agents: NUM_AGENTS,
        run_length: RunLength::Fixed(RUN_LENGTH),
        dim,
    };
    let mut oracle = LogisticOracle::new(model.clone());
    let shuffled: Vec<GradientSample> = collect_agent_pool(&mut oracle, &InitDensity::standard(dim), &agents, true, &mut rng)?
        .into_iter()
        .map(|e| e.sample)
        .collect();
    let stream = shuffled.to_vec();

    let base = SamplerConfig::new(STEP, 1.0, ParamVector::zeros(dim));
    let langevin = |seed| {
        run_sampler(
            Variant::ClassicalLangevin,
            SampleSource::oracle(LogisticOracle::new(model.clone())),
            &base,
            STEPS,
            &mut RngStream::new(seed),
        )
    };
    let truth = langevin(SEED + 1)?;
    let replicate = langevin(SEED + 2)?;
    let mk = run_sampler(
        Variant::MultiKernel,
        SampleSource::pools(ResampledPools::new(&stream)?),
        &base.clone().with_sigma(SIGMA).with_pool_size(POOL),
        STEPS,
        &mut RngStream::new(SEED + 3),
    )?;
    let naive = run_sampler(
        Variant::Naive,
        SampleSource::slice(&stream),
        &base,
        STEPS.min(stream.len()),
        &mut RngStream::new(SEED + 4),
    )?;

    let [floor, mk_w1, naive_w1] = [&replicate, &mk, &naive].map(|t| marginal_w1(t, &truth).map(median));
    let (floor, mk_w1, naive_w1) = (floor?, mk_w1?, naive_w1?);
    Ok(Verdict::new(
        mk_w1 < naive_w1,
        format!(
            "{dim}-d; median marginal W1 vs langevin: multi-kernel {mk_w1:.3} < naive {naive_w1:.3}; second langevin run {floor:.3}"
        ),
    ))
}

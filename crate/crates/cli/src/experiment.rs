//! Wires a validated config into agents, samplers and analysis, and writes
//! every artifact of a run into one directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use passive_irl::analysis::{
    find_modes, integrated_autocorr_time, mean, variance, variational_distance, wasserstein1, Axis, Ecdf,
    EmpiricalDensity, GridSpec, Mode, MIN_AUTOCORR_LEN,
};
use passive_irl::forward::{collect_agent_pool, write_stream_csv};
use passive_irl::irl::{run_sampler_partial, ChunkedPools, InputKind, ResampledPools, SampleSource};
use passive_irl::problems::{
    parse_libsvm, CmdpModel, CmdpPools, LogisticModel, LogisticOracle, LogisticParams, MixtureModel, MixtureOracle,
    QuadraticOracle, SpsaSettings,
};
use passive_irl::rng::RNG_ALGORITHM;
use passive_irl::{GradientSample, InitDensity, RngStream, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, PoolMode, ProblemSpec, SamplerSpec};

pub const MANIFEST_VERSION: u32 = 1;
/// Baseline chain `c` draws from `child(BASELINE_STREAMS + c)`.
const BASELINE_STREAMS: u64 = 1 << 32;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub name: String,
    pub library_version: String,
    pub rng: String,
    pub seed: u64,
    pub chains: usize,
    pub scale: String,
    /// The effective config, after the scale overlay and command-line overrides.
    pub config: ExperimentConfig,
}

enum Problem {
    Quadratic(QuadraticOracle),
    Mixture(MixtureModel),
    Logistic(LogisticModel),
    Cmdp(CmdpModel, SpsaSettings),
}

impl Problem {
    fn build(spec: &ProblemSpec, rng: &mut RngStream) -> Result<Self> {
        Ok(match spec {
            ProblemSpec::Quadratic(q) => Problem::Quadratic(q.clone()),
            ProblemSpec::Mixture(m) => Problem::Mixture(m.clone()),
            ProblemSpec::Logistic(l) => {
                let file = File::open(&l.data).with_context(|| format!("opening {}", l.data.display()))?;
                let mut data = parse_libsvm(std::io::BufReader::new(file), l.num_features)
                    .with_context(|| format!("parsing {}", l.data.display()))?;
                if l.rows.is_some() || l.features.is_some() {
                    let rows = l.rows.unwrap_or(data.len());
                    data = data.desk_subset(rows, l.features.unwrap_or(l.num_features), rng)?;
                }
                let params = LogisticParams {
                    likelihood_weight: l.likelihood_weight,
                };
                Problem::Logistic(LogisticModel::new(data, params)?)
            }
            ProblemSpec::Cmdp(c) => {
                let model = match &c.model {
                    Some(p) => CmdpModel::from_json_file(p)?,
                    None => CmdpModel::example(),
                };
                Problem::Cmdp(model, c.spsa)
            }
        })
    }

    fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.dim,
            Problem::Mixture(_) => 2,
            Problem::Logistic(m) => m.dim(),
            Problem::Cmdp(m, _) => m.angle_dim(),
        }
    }

    fn oracle<'a>(&self) -> Result<SampleSource<'a>> {
        Ok(match self {
            Problem::Quadratic(q) => SampleSource::oracle(q.clone()),
            Problem::Mixture(m) => SampleSource::oracle(MixtureOracle::new(m.clone())?),
            Problem::Logistic(m) => SampleSource::oracle(LogisticOracle::new(m.clone())),
            Problem::Cmdp(..) => return Err(anyhow!("the cmdp problem has no gradient oracle")),
        })
    }

    fn agent_stream(&self, cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<Vec<passive_irl::forward::Emission>> {
        let agents = cfg.agents.as_ref().expect("validated");
        let dim = self.dim();
        let pool = agents.pool_config(dim);
        let init = agents.init.clone().unwrap_or_else(|| InitDensity::standard(dim));
        Ok(match self {
            Problem::Quadratic(q) => collect_agent_pool(&mut q.clone(), &init, &pool, agents.shuffle, rng)?,
            Problem::Mixture(m) => {
                collect_agent_pool(&mut MixtureOracle::new(m.clone())?, &init, &pool, agents.shuffle, rng)?
            }
            Problem::Logistic(m) => {
                collect_agent_pool(&mut LogisticOracle::new(m.clone()), &init, &pool, agents.shuffle, rng)?
            }
            Problem::Cmdp(..) => Vec::new(),
        })
    }
}

/// One finished chain, possibly cut short.
struct Chain {
    trajectory: Trajectory,
    failure: Option<passive_irl::Error>,
}

fn run_chains(
    problem: &Problem,
    spec: &SamplerSpec,
    stream: &[GradientSample],
    chains: usize,
    root: &RngStream,
    stream_offset: u64,
) -> Result<Vec<Chain>> {
    let n = stream.len();
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = root.child(stream_offset + c as u64);
            // stream-fed chains start at evenly spaced offsets and wrap around
            let off = if n == 0 { 0 } else { c * n / chains };
            let cyclic = || stream[off..].iter().chain(&stream[..off]);
            let source = match (spec.variant.input_kind(), problem) {
                (InputKind::Oracle, p) => p.oracle()?,
                (InputKind::Stream, _) => SampleSource::borrowed(cyclic()),
                (InputKind::Pool, Problem::Cmdp(model, spsa)) => SampleSource::pools(CmdpPools::new(model, *spsa)),
                (InputKind::Pool, _) => match spec.pools {
                    PoolMode::Resampled => SampleSource::pools(ResampledPools::new(stream)?),
                    PoolMode::Chunked => SampleSource::pools(ChunkedPools::new(cyclic().cloned().map(Ok))),
                },
            };
            let (trajectory, failure) = run_sampler_partial(spec.variant, source, &spec.config, spec.steps, &mut rng)?;
            Ok(Chain { trajectory, failure })
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Same layout as the library's trajectory CSV, keeping every `stride`-th row.
fn write_trajectory(path: &Path, t: &Trajectory, stride: usize) -> Result<()> {
    let mut out = create(path)?;
    let header: Vec<String> = std::iter::once("step".to_string())
        .chain((1..=t.dim()).map(|i| format!("theta_{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (k, row) in t.rows().enumerate().step_by(stride) {
        write!(out, "{k}")?;
        for v in row {
            write!(out, ",{v:e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn write_chains(dir: &Path, prefix: &str, chains: &[Chain], stride: usize) -> Result<()> {
    for (c, ch) in chains.iter().enumerate() {
        // a chain that failed keeps every row
        let stride = if ch.failure.is_some() { 1 } else { stride };
        write_trajectory(&dir.join(format!("{prefix}trajectory_{c}.csv")), &ch.trajectory, stride)?;
        let mut meta = create(&dir.join(format!("{prefix}trajectory_{c}.json")))?;
        ch.trajectory.write_metadata(&mut meta)?;
        writeln!(meta)?;
        meta.flush()?;
    }
    Ok(())
}

/// Post-burn-in values of every coordinate, all chains pooled.
fn pooled_coordinates(chains: &[Chain]) -> Vec<Vec<f64>> {
    let dim = chains[0].trajectory.dim();
    (0..dim)
        .map(|i| chains.iter().flat_map(|c| c.trajectory.coordinate(i)).collect())
        .collect()
}

#[derive(Debug, Serialize)]
struct ChainSummary {
    variant: String,
    chains: usize,
    steps: usize,
    post_burn_in_samples: usize,
    mean: Vec<f64>,
    variance: Vec<f64>,
    /// Mean over chains; `None` when the chains are too short to estimate it.
    autocorr_time: Vec<Option<f64>>,
    weight_resets: usize,
}

fn summarize(spec: &SamplerSpec, chains: &[Chain], coords: &[Vec<f64>]) -> ChainSummary {
    let autocorr_time = (0..coords.len())
        .map(|i| {
            let taus: Option<Vec<f64>> = chains
                .iter()
                .map(|c| {
                    let x = c.trajectory.coordinate(i);
                    (x.len() >= MIN_AUTOCORR_LEN)
                        .then(|| integrated_autocorr_time(&x).ok())
                        .flatten()
                })
                .collect();
            taus.map(|t| mean(&t))
        })
        .collect();
    ChainSummary {
        variant: spec.variant.to_string(),
        chains: chains.len(),
        steps: spec.steps,
        post_burn_in_samples: coords.first().map_or(0, Vec::len),
        mean: coords.iter().map(|x| mean(x)).collect(),
        variance: coords.iter().map(|x| variance(x)).collect(),
        autocorr_time,
        weight_resets: chains
            .iter()
            .filter_map(|c| c.trajectory.metadata())
            .map(|m| m.weight_resets)
            .sum(),
    }
}

#[derive(Debug, Serialize)]
struct GibbsTarget {
    mean: Vec<f64>,
    /// 1/(aβ) for every coordinate.
    variance: f64,
    variance_relative_error: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct BaselineComparison {
    baseline: ChainSummary,
    /// Per-marginal W1 against the baseline.
    wasserstein1: Vec<f64>,
    median_wasserstein1: f64,
    /// Per-marginal variational distance against the baseline, d(1), d(2), ...
    variational_distance: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Metrics {
    name: String,
    dim: usize,
    sampler: ChainSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    gibbs_target: Option<GibbsTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<BaselineComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<Mode>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_modes: Option<Vec<Mode>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

/// The 1-D grid for marginal `i`: the configured axis, or `bins` equal cells
/// spanning both samples.
pub fn marginal_axis(configured: Option<&[Axis]>, i: usize, a: &[f64], b: &[f64], bins: usize) -> Result<Axis> {
    if let Some(axes) = configured {
        return Ok(axes[i]);
    }
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let pad = if hi > lo { 1e-9 * (hi - lo) } else { 0.5 };
    Ok(Axis::new(lo - pad, hi + pad, bins)?)
}

pub fn histogram_1d(values: &[f64], axis: &Axis) -> Result<EmpiricalDensity> {
    let grid = GridSpec::new(vec![*axis])?;
    Ok(EmpiricalDensity::from_points(values.iter().map(std::slice::from_ref), &grid)?)
}

/// One marginal's axis with the two histograms on it.
pub type MarginalPair = (Axis, EmpiricalDensity, EmpiricalDensity);

/// Per-marginal W1 and variational distance between two pooled samples.
pub fn marginal_distances(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    configured: Option<&[Axis]>,
    bins: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<MarginalPair>)> {
    let mut w1 = Vec::with_capacity(a.len());
    let mut vd = Vec::with_capacity(a.len());
    let mut hists = Vec::with_capacity(a.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        w1.push(wasserstein1(&Ecdf::new(x.clone())?, &Ecdf::new(y.clone())?));
        let axis = marginal_axis(configured, i, x, y, bins)?;
        let (hx, hy) = (histogram_1d(x, &axis)?, histogram_1d(y, &axis)?);
        vd.push(variational_distance(&hx, &hy)?);
        hists.push((axis, hx, hy));
    }
    Ok((w1, vd, hists))
}

pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Plot-ready marginals, one row per (axis, cell).
fn write_marginals(path: &Path, hists: &[MarginalPair], labels: [&str; 2]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["axis", "x", labels[0], labels[1]])?;
    for (i, (axis, a, b)) in hists.iter().enumerate() {
        for (k, (ma, mb)) in a.mass().iter().zip(b.mass()).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                axis.center(k).to_string(),
                ma.to_string(),
                mb.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Where the run ended up and whether it completed.
pub struct RunOutcome {
    pub dir: PathBuf,
    pub failure: Option<String>,
}

pub fn run(cfg: &ExperimentConfig, scale: &str, dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let failed = dir.join("FAILED");
    if failed.exists() {
        std::fs::remove_file(&failed)?;
    }
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            manifest_version: MANIFEST_VERSION,
            name: cfg.name.clone(),
            library_version: passive_irl::VERSION.to_string(),
            rng: RNG_ALGORITHM.to_string(),
            seed: cfg.seed,
            chains: cfg.chains,
            scale: scale.to_string(),
            config: cfg.clone(),
        },
    )?;

    let root = RngStream::new(cfg.seed);
    let mut rng = root.clone();
    let problem = Problem::build(&cfg.problem, &mut rng)?;
    let dim = problem.dim();
    if dim != cfg.sampler.config.dim() {
        return Err(anyhow!(
            "problem has dimension {dim} but the sampler starts in dimension {}",
            cfg.sampler.config.dim()
        ));
    }
    let emissions = if cfg.agents.is_some() {
        eprintln!("collecting agent stream");
        problem.agent_stream(cfg, &mut rng)?
    } else {
        Vec::new()
    };
    if cfg.analysis.write_stream {
        let mut out = create(&dir.join("stream.csv"))?;
        write_stream_csv(&mut out, &emissions)?;
        out.flush()?;
    }
    let stream: Vec<GradientSample> = emissions.into_iter().map(|e| e.sample).collect();

    eprintln!("running {} x {} chain(s) of {} steps", cfg.chains, cfg.sampler.variant, cfg.sampler.steps);
    let chains = run_chains(&problem, &cfg.sampler, &stream, cfg.chains, &root, 0)?;
    let stride = cfg.analysis.trajectory_stride;
    write_chains(dir, "", &chains, stride)?;
    let baseline = match &cfg.baseline {
        Some(b) => {
            eprintln!("running {} x {} baseline chain(s) of {} steps", cfg.chains, b.variant, b.steps);
            let chains = run_chains(&problem, b, &stream, cfg.chains, &root, BASELINE_STREAMS)?;
            write_chains(dir, "baseline_", &chains, stride)?;
            Some(chains)
        }
        None => None,
    };

    let failures: Vec<String> = [("sampler", Some(&chains)), ("baseline", baseline.as_ref())]
        .into_iter()
        .filter_map(|(what, cs)| cs.map(|cs| (what, cs)))
        .flat_map(|(what, cs)| {
            cs.iter()
                .enumerate()
                .filter_map(move |(c, ch)| ch.failure.as_ref().map(|e| format!("{what} chain {c}: {e}")))
        })
        .collect();
    if !failures.is_empty() {
        std::fs::write(&failed, failures.join("\n") + "\n")?;
        return Ok(RunOutcome {
            dir: dir.to_path_buf(),
            failure: Some(failures.join("; ")),
        });
    }

    let metrics = analyze(cfg, dim, &chains, baseline.as_deref(), dir)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        failure: None,
    })
}

fn analyze(cfg: &ExperimentConfig, dim: usize, chains: &[Chain], baseline: Option<&[Chain]>, dir: &Path) -> Result<Metrics> {
    let coords = pooled_coordinates(chains);
    let mut warnings = Vec::new();
    let gibbs_target = match &cfg.problem {
        ProblemSpec::Quadratic(q) => {
            let target = q.gibbs_variance(cfg.sampler.config.beta);
            let v: Vec<f64> = coords.iter().map(|x| variance(x)).collect();
            Some(GibbsTarget {
                mean: q.center.clone().unwrap_or_else(|| vec![0.0; dim]),
                variance: target,
                variance_relative_error: v.iter().map(|v| (v - target).abs() / target).collect(),
            })
        }
        _ => None,
    };

    let grid = cfg.analysis.grid.as_ref().map(|a| GridSpec::new(a.clone())).transpose()?;
    let all_rows = |cs: &[Chain]| -> Vec<Vec<f64>> {
        cs.iter()
            .flat_map(|c| c.trajectory.post_burn_in().map(<[f64]>::to_vec).collect::<Vec<_>>())
            .collect()
    };
    let mut modes = None;
    let mut baseline_modes = None;
    if let Some(grid) = &grid {
        let rows = all_rows(chains);
        let density = EmpiricalDensity::from_points(rows.iter().map(Vec::as_slice), grid)?;
        warnings.extend(density.warning().map(|w| format!("sampler density: {w}")));
        let mut out = create(&dir.join("density.csv"))?;
        density.write_csv(&mut out)?;
        out.flush()?;
        if let Some(m) = &cfg.analysis.modes {
            modes = Some(find_modes(grid, &density.pdf(), m.min_fraction, m.smooth)?);
        }
        if let Some(b) = baseline {
            let rows = all_rows(b);
            let density = EmpiricalDensity::from_points(rows.iter().map(Vec::as_slice), grid)?;
            warnings.extend(density.warning().map(|w| format!("baseline density: {w}")));
            let mut out = create(&dir.join("baseline_density.csv"))?;
            density.write_csv(&mut out)?;
            out.flush()?;
            if let Some(m) = &cfg.analysis.modes {
                baseline_modes = Some(find_modes(grid, &density.pdf(), m.min_fraction, m.smooth)?);
            }
        }
    }

    let axes = cfg.analysis.grid.as_deref();
    let comparison = match (baseline, &cfg.baseline) {
        (Some(b), Some(spec)) => {
            let bcoords = pooled_coordinates(b);
            let (w1, vd, hists) = marginal_distances(&coords, &bcoords, axes, cfg.analysis.marginal_bins)?;
            write_marginals(&dir.join("marginals.csv"), &hists, ["sampler", "baseline"])?;
            Some(BaselineComparison {
                baseline: summarize(spec, b, &bcoords),
                median_wasserstein1: median(&w1),
                wasserstein1: w1,
                variational_distance: vd,
            })
        }
        _ => {
            let hists = (0..dim)
                .map(|i| {
                    let axis = marginal_axis(axes, i, &coords[i], &[], cfg.analysis.marginal_bins)?;
                    let h = histogram_1d(&coords[i], &axis)?;
                    Ok((axis, h.clone(), h))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut w = csv::Writer::from_path(dir.join("marginals.csv"))?;
            w.write_record(["axis", "x", "sampler"])?;
            for (i, (axis, h, _)) in hists.iter().enumerate() {
                for (k, m) in h.mass().iter().enumerate() {
                    w.write_record([(i + 1).to_string(), axis.center(k).to_string(), m.to_string()])?;
                }
            }
            w.flush()?;
            None
        }
    };

    Ok(Metrics {
        name: cfg.name.clone(),
        dim,
        sampler: summarize(&cfg.sampler, chains, &coords),
        gibbs_target,
        comparison,
        modes,
        baseline_modes,
        warnings,
    })
}

//! Experiment configuration: JSON with a schema version, optional named
//! scale overlays, and validation that names the offending fields.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use passive_irl::analysis::{Axis, GridSpec};
use passive_irl::forward::RunLength;
use passive_irl::irl::InputKind;
use passive_irl::problems::{CmdpModel, MixtureModel, QuadraticOracle, SpsaSettings, A9A_FEATURES};
use passive_irl::{AgentPoolConfig, InitDensity, SamplerConfig, Variant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// A problem in the configuration file: exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Independent chains, pooled after burn-in.
    #[serde(default = "one")]
    pub chains: usize,
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<AgentsSpec>,
    pub sampler: SamplerSpec,
    /// Reference run compared against `sampler`, typically classical Langevin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<SamplerSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    /// Named partial configs merged over the base, e.g. "desk" and "paper".
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scales: BTreeMap<String, Value>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic(QuadraticOracle),
    Mixture(MixtureModel),
    Logistic(LogisticSpec),
    Cmdp(CmdpSpecRef),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticSpec {
    /// libsvm file; relative paths resolve against the config file.
    pub data: PathBuf,
    #[serde(default = "a9a_features")]
    pub num_features: usize,
    /// Random row subset; all rows when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    /// Most frequent features kept; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    #[serde(default = "logistic_weight")]
    pub likelihood_weight: f64,
}

fn a9a_features() -> usize {
    A9A_FEATURES
}

fn logistic_weight() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmdpSpecRef {
    /// Model file; the built-in two-state example when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub spsa: SpsaSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSpec {
    pub step: f64,
    pub num_agents: usize,
    #[serde(default)]
    pub run_length: RunLength,
    /// π; standard normal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitDensity>,
    #[serde(default = "yes")]
    pub shuffle: bool,
}

impl AgentsSpec {
    pub fn pool_config(&self, dim: usize) -> AgentPoolConfig {
        AgentPoolConfig {
            step: self.step,
            num_agents: self.num_agents,
            run_length: self.run_length,
            dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Drawn with replacement from the whole stream.
    #[default]
    Resampled,
    /// Consecutive chunks of the stream.
    Chunked,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub variant: Variant,
    pub steps: usize,
    pub config: SamplerConfig,
    #[serde(default)]
    pub pools: PoolMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub min_fraction: f64,
    #[serde(default = "yes")]
    pub smooth: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Histogram grid, one axis per coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Axis>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModeSpec>,
    /// Write every n-th iterate to the trajectory files.
    #[serde(default = "one")]
    pub trajectory_stride: usize,
    #[serde(default)]
    pub write_stream: bool,
    /// Bins of the automatic 1-D grids used for marginals when `grid` is absent.
    #[serde(default = "fifty")]
    pub marginal_bins: usize,
}

fn fifty() -> usize {
    50
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            grid: None,
            modes: None,
            trajectory_stride: 1,
            write_stream: false,
            marginal_bins: 50,
        }
    }
}

/// Command-line overrides applied after the scale overlay.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub data: Option<PathBuf>,
}

/// RFC 7386 merge patch.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    b.remove(k);
                } else {
                    merge(b.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn parse<T: serde::de::DeserializeOwned>(value: Value, origin: &str) -> anyhow::Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "(top level)".to_string() } else { path };
        config_error(format!("{origin}: field `{field}`: {}", e.inner()))
    })
}

/// A sampler without `config.initial` starts at the origin.
fn fill_initial(value: &mut Value, origin: &str, base: &Path) -> anyhow::Result<()> {
    let Some(problem) = value.get("problem") else {
        return Ok(());
    };
    let problem: ProblemSpec = serde_path_to_error::deserialize(problem.clone()).map_err(|e| {
        config_error(format!("{origin}: field `problem.{}`: {}", e.path(), e.inner()))
    })?;
    let mut probe = ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: String::new(),
        seed: 0,
        chains: 1,
        problem,
        agents: None,
        sampler: SamplerSpec {
            variant: Variant::Naive,
            steps: 1,
            config: SamplerConfig::new(1.0, 1.0, passive_irl::ParamVector::zeros(1)),
            pools: PoolMode::Resampled,
        },
        baseline: None,
        analysis: AnalysisSpec::default(),
        scales: BTreeMap::new(),
    };
    probe.resolve_paths(base);
    let dim = probe
        .declared_dim()
        .map_err(|e| config_error(format!("{origin}: {e}")))?
        .expect("every problem declares its dimension");
    for key in ["sampler", "baseline"] {
        if let Some(Value::Object(cfg)) = value.get_mut(key).and_then(|s| s.get_mut("config")) {
            cfg.entry("initial").or_insert_with(|| Value::from(vec![0.0; dim]));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads a config file, or the `config` member of a run manifest, applies
    /// the named scale and the overrides, and validates the result.
    pub fn load(path: &Path, scale: &str, overrides: &Overrides) -> anyhow::Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {origin}: {e}")))?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("{origin}: not valid JSON: {e}")))?;
        if let Some(inner) = value.get("config").filter(|_| value.get("manifest_version").is_some()) {
            value = inner.clone();
        }
        let scales = value
            .as_object_mut()
            .and_then(|o| o.remove("scales"))
            .unwrap_or(Value::Null);
        match scales.get(scale) {
            Some(patch) => merge(&mut value, patch),
            None if scale == "desk" => {}
            None => {
                return Err(config_error(format!(
                    "{origin}: field `scales`: no scale named '{scale}'"
                )))
            }
        }
        let base = path.parent().unwrap_or(Path::new("."));
        fill_initial(&mut value, &origin, base)?;
        let mut cfg: ExperimentConfig = parse(value, &origin)?;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(chains) = overrides.chains {
            cfg.chains = chains;
        }
        if let ProblemSpec::Logistic(l) = &mut cfg.problem {
            if let Some(d) = &overrides.data {
                l.data = d.clone();
            }
        }
        cfg.resolve_paths(base);
        cfg.validate().map_err(|e| config_error(format!("{origin}: {e}")))?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        // absolute, so that a manifest reruns from any directory
        let fix = |p: &mut PathBuf| {
            let joined = if p.is_relative() { base.join(&*p) } else { p.clone() };
            *p = std::path::absolute(&joined).unwrap_or(joined);
        };
        match &mut self.problem {
            ProblemSpec::Logistic(l) => fix(&mut l.data),
            ProblemSpec::Cmdp(c) => {
                if let Some(m) = &mut c.model {
                    fix(m)
                }
            }
            _ => {}
        }
    }

    /// Dimension of the parameter, where it is known without reading data.
    pub fn declared_dim(&self) -> Result<Option<usize>, String> {
        Ok(match &self.problem {
            ProblemSpec::Quadratic(q) => Some(q.dim),
            ProblemSpec::Mixture(_) => Some(2),
            ProblemSpec::Logistic(l) => Some(l.features.unwrap_or(l.num_features) + 1),
            ProblemSpec::Cmdp(c) => Some(match &c.model {
                Some(p) => CmdpModel::from_json_file(p)
                    .map_err(|e| format!("field `problem.model`: {e}"))?
                    .angle_dim(),
                None => CmdpModel::example().angle_dim(),
            }),
        })
    }

    fn dim_source(&self) -> &'static str {
        match &self.problem {
            ProblemSpec::Quadratic(_) => "problem.dim",
            ProblemSpec::Mixture(_) => "problem.theta_true",
            ProblemSpec::Logistic(l) if l.features.is_some() => "problem.features",
            ProblemSpec::Logistic(_) => "problem.num_features",
            ProblemSpec::Cmdp(_) => "problem.model",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "field `schema_version`: expected {SCHEMA_VERSION}, found {}",
                self.schema_version
            ));
        }
        if self.chains == 0 {
            return Err("field `chains`: must be >= 1".into());
        }
        match &self.problem {
            ProblemSpec::Quadratic(q) => q.validate().map_err(|e| format!("field `problem`: {e}"))?,
            ProblemSpec::Mixture(m) => m.validate().map_err(|e| format!("field `problem`: {e}"))?,
            ProblemSpec::Logistic(l) => {
                if !l.data.is_file() {
                    return Err(format!("field `problem.data`: no file at {}", l.data.display()));
                }
                if l.features.is_some_and(|f| f == 0 || f > l.num_features) {
                    return Err(format!(
                        "field `problem.features`: must lie in 1..={} (problem.num_features)",
                        l.num_features
                    ));
                }
                if l.rows == Some(0) {
                    return Err("field `problem.rows`: must be >= 1".into());
                }
            }
            ProblemSpec::Cmdp(_) => {}
        }
        let dim = self.declared_dim()?.expect("every problem declares its dimension");
        let dim_field = self.dim_source();
        self.validate_sampler(&self.sampler, "sampler", dim, dim_field)?;
        if let Some(b) = &self.baseline {
            self.validate_sampler(b, "baseline", dim, dim_field)?;
        }
        let needs_agents = self
            .samplers()
            .any(|(_, s)| s.variant.input_kind() != InputKind::Oracle)
            && !matches!(self.problem, ProblemSpec::Cmdp(_));
        match (&self.agents, needs_agents) {
            (None, true) => {
                return Err(format!(
                    "field `agents`: required by variant {}",
                    self.sampler.variant
                ))
            }
            (Some(a), _) => {
                a.pool_config(dim)
                    .validate()
                    .map_err(|e| format!("field `agents`: {e}"))?;
                if let Some(pi) = &a.init {
                    if pi.dim() != dim {
                        return Err(format!(
                            "field `agents.init` has dimension {} but {dim_field} implies {dim}",
                            pi.dim()
                        ));
                    }
                }
                if let Some(len) = a.pool_config(dim).fixed_stream_len() {
                    for (field, s) in self.samplers() {
                        let needed = match (s.variant.input_kind(), s.pools) {
                            (InputKind::Stream, _) => s.steps,
                            (InputKind::Pool, PoolMode::Chunked) => s.steps * s.config.pool_size,
                            _ => 0,
                        };
                        if needed > len {
                            return Err(format!(
                                "field `{field}.steps` needs {needed} samples but `agents.num_agents` x `agents.run_length` gives {len}"
                            ));
                        }
                    }
                }
            }
            (None, false) => {}
        }
        if let Some(axes) = &self.analysis.grid {
            if axes.len() != dim {
                return Err(format!(
                    "field `analysis.grid` has {} axes but {dim_field} implies dimension {dim}",
                    axes.len()
                ));
            }
            GridSpec::new(axes.clone()).map_err(|e| format!("field `analysis.grid`: {e}"))?;
        }
        if self.analysis.modes.is_some() && self.analysis.grid.is_none() {
            return Err("field `analysis.modes`: needs `analysis.grid`".into());
        }
        if self.analysis.marginal_bins < 2 {
            return Err("field `analysis.marginal_bins`: must be >= 2".into());
        }
        if self.analysis.trajectory_stride == 0 {
            return Err("field `analysis.trajectory_stride`: must be >= 1".into());
        }
        Ok(())
    }

    /// The main sampler and the baseline, with their field names.
    pub fn samplers(&self) -> impl Iterator<Item = (&'static str, &SamplerSpec)> {
        std::iter::once(("sampler", &self.sampler)).chain(self.baseline.iter().map(|b| ("baseline", b)))
    }

    fn validate_sampler(&self, s: &SamplerSpec, field: &str, dim: usize, dim_field: &str) -> Result<(), String> {
        let n = s.config.dim();
        if n != dim {
            return Err(format!(
                "field `{field}.config.initial` has dimension {n} but {dim_field} implies {dim}"
            ));
        }
        if s.steps == 0 {
            return Err(format!("field `{field}.steps`: must be >= 1"));
        }
        s.config
            .validate(s.variant)
            .map_err(|e| format!("field `{field}.config`: {e}"))?;
        if let ProblemSpec::Cmdp(_) = self.problem {
            if s.variant != Variant::MultiKernel {
                return Err(format!(
                    "field `{field}.variant`: the cmdp problem only feeds multi-kernel pools, got {}",
                    s.variant
                ));
            }
        }
        Ok(())
    }
}

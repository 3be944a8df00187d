use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;

use super::{Sampler, SamplerConfig, Variant};
use crate::error::{Error, Result};
use crate::rng::RNG_ALGORITHM;
use crate::vector::ParamVector;

/// The iterates ð_0, ..., ð_n of one chain, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
    burn_in: usize,
    meta: Option<TrajectoryMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetadata {
    pub variant: Variant,
    pub config: SamplerConfig,
    pub seed: u64,
    pub rng: String,
    pub weight_resets: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_bandwidth_ratio: Option<f64>,
    pub fingerprint: String,
}

/// SHA-256 of the canonical JSON of (variant, config).
pub fn config_fingerprint(variant: Variant, cfg: &SamplerConfig) -> String {
    let json = serde_json::to_vec(&(variant, cfg)).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

impl Trajectory {
    pub(super) fn from_run(sampler: &Sampler, data: Vec<f64>, seed: u64) -> Result<Self> {
        let cfg = sampler.config();
        let meta = TrajectoryMetadata {
            variant: sampler.variant(),
            config: cfg.clone(),
            seed,
            rng: RNG_ALGORITHM.to_string(),
            weight_resets: sampler.weight_resets(),
            step_bandwidth_ratio: match sampler.variant() {
                Variant::PassiveGeneralizedB => cfg.step_bandwidth_ratio(),
                _ => None,
            },
            fingerprint: config_fingerprint(sampler.variant(), cfg),
        };
        let mut t = Trajectory::from_samples(cfg.dim(), data, cfg.burn_in_fraction)?;
        t.meta = Some(meta);
        Ok(t)
    }

    /// Builds a trajectory from raw row-major samples, without run metadata.
    pub fn from_samples(dim: usize, data: Vec<f64>, burn_in_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&burn_in_fraction) {
            return Err(Error::InvalidConfig(format!(
                "burn_in_fraction must lie in [0, 1), got {burn_in_fraction}"
            )));
        }
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::mismatch("trajectory storage", dim, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: i / dim,
                context: "trajectory sample".into(),
            });
        }
        let len = data.len() / dim;
        let burn_in = ((len as f64) * burn_in_fraction).floor() as usize;
        Ok(Trajectory {
            dim,
            data,
            burn_in: burn_in.min(len - 1),
            meta: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored iterates, including ð_0.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn set_burn_in(&mut self, burn_in: usize) -> Result<()> {
        if burn_in >= self.len() {
            return Err(Error::InvalidConfig(format!(
                "burn-in {burn_in} must be below trajectory length {}",
                self.len()
            )));
        }
        self.burn_in = burn_in;
        Ok(())
    }

    pub fn metadata(&self) -> Option<&TrajectoryMetadata> {
        self.meta.as_ref()
    }

    pub fn fingerprint(&self) -> Option<&str> {
        self.meta.as_ref().map(|m| m.fingerprint.as_str())
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> ParamVector {
        ParamVector::new(self.sample(self.len() - 1).to_vec()).expect("samples are finite")
    }

    /// All iterates including burn-in.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Iterates after burn-in.
    pub fn post_burn_in(&self) -> impl Iterator<Item = &[f64]> {
        self.data[self.burn_in * self.dim..].chunks_exact(self.dim)
    }

    /// Post-burn-in values of coordinate `i`.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.post_burn_in().map(|r| r[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("step".to_string())
            .chain((1..=self.dim).map(|i| format!("theta_{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (k, row) in self.rows().enumerate() {
            write!(out, "{k}")?;
            for v in row {
                write!(out, ",{v:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_metadata<W: Write>(&self, out: W) -> Result<()> {
        let meta = self
            .meta
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("trajectory has no run metadata".into()))?;
        serde_json::to_writer_pretty(out, meta)?;
        Ok(())
    }
}

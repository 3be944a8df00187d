//! Distances between the pooled post-burn-in samples of two run directories.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use crate::config::config_error;
use crate::experiment::{marginal_distances, median, Manifest};

/// Pooled samples of one run, one vector per coordinate.
struct RunSamples {
    manifest: Manifest,
    variant: String,
    which: Chains,
    coords: Vec<Vec<f64>>,
    files: usize,
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn trajectory_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(usize, PathBuf)> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let c = name.strip_prefix(prefix)?.strip_prefix("trajectory_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((c, p))
        })
        .collect();
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Rows of one trajectory CSV at or after `floor(fraction * (last step + 1))`.
fn read_post_burn_in(path: &Path, fraction: f64, coords: &mut Vec<Vec<f64>>) -> Result<()> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let dim = reader.headers()?.len().saturating_sub(1);
    if dim == 0 {
        bail!("{} has no coordinate columns", path.display());
    }
    if coords.is_empty() {
        coords.resize(dim, Vec::new());
    } else if coords.len() != dim {
        bail!("{} has {dim} coordinates, earlier chains have {}", path.display(), coords.len());
    }
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| anyhow!("{} row {}: bad number '{s}'", path.display(), n + 2))
        };
        let step = rec[0]
            .parse()
            .map_err(|_| anyhow!("{} row {}: bad step '{}'", path.display(), n + 2, &rec[0]))?;
        let values = rec.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        rows.push((step, values));
    }
    let last = rows.last().map_or(0, |r| r.0);
    let burn = (fraction * (last + 1) as f64).floor() as usize;
    for (_, values) in rows.into_iter().filter(|r| r.0 >= burn) {
        for (c, v) in coords.iter_mut().zip(values) {
            c.push(v);
        }
    }
    Ok(())
}

/// Which chains of a run directory to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Chains {
    Sampler,
    Baseline,
}

fn load(dir: &Path, which: Chains) -> Result<RunSamples> {
    let manifest = read_manifest(dir)?;
    let (spec, prefix) = match which {
        Chains::Sampler => (&manifest.config.sampler, ""),
        Chains::Baseline => (
            manifest
                .config
                .baseline
                .as_ref()
                .ok_or_else(|| anyhow!("{} has no baseline run", dir.display()))?,
            "baseline_",
        ),
    };
    let fraction = spec.config.burn_in_fraction;
    let variant = spec.variant.to_string();
    let files = trajectory_files(dir, prefix)?;
    if files.is_empty() {
        bail!("no {prefix}trajectory files in {}", dir.display());
    }
    let mut coords = Vec::new();
    for f in &files {
        read_post_burn_in(f, fraction, &mut coords)?;
    }
    if coords.first().is_none_or(Vec::is_empty) {
        bail!("{} has no post-burn-in samples", dir.display());
    }
    Ok(RunSamples {
        manifest,
        variant,
        which,
        coords,
        files: files.len(),
    })
}

#[derive(Debug, Serialize)]
struct Side {
    dir: PathBuf,
    name: String,
    which: Chains,
    variant: String,
    chains: usize,
    samples: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    min: f64,
    median: f64,
    mean: f64,
    max: f64,
}

impl Summary {
    fn of(v: &[f64]) -> Self {
        Summary {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            median: median(v),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    a: Side,
    b: Side,
    dim: usize,
    /// Per-marginal W1, then the variational distance on A's marginal grid.
    wasserstein1: Vec<f64>,
    variational_distance: Vec<f64>,
    wasserstein1_summary: Summary,
    variational_distance_summary: Summary,
}

fn side(dir: &Path, r: &RunSamples) -> Side {
    Side {
        dir: dir.to_path_buf(),
        name: r.manifest.name.clone(),
        which: r.which,
        variant: r.variant.clone(),
        chains: r.files,
        samples: r.coords[0].len(),
    }
}

pub fn compare(a: (&Path, Chains), b: (&Path, Chains), out: Option<&Path>) -> Result<Comparison> {
    let (dir_a, dir_b) = (a.0, b.0);
    let a = load(a.0, a.1)?;
    let b = load(b.0, b.1)?;
    if a.coords.len() != b.coords.len() {
        return Err(config_error(format!(
            "dimension mismatch: {} has dimension {}, {} has dimension {}",
            dir_a.display(),
            a.coords.len(),
            dir_b.display(),
            b.coords.len()
        )));
    }
    let analysis = &a.manifest.config.analysis;
    let (w1, vd, _) = marginal_distances(&a.coords, &b.coords, analysis.grid.as_deref(), analysis.marginal_bins)?;
    let cmp = Comparison {
        a: side(dir_a, &a),
        b: side(dir_b, &b),
        dim: w1.len(),
        wasserstein1_summary: Summary::of(&w1),
        variational_distance_summary: Summary::of(&vd),
        wasserstein1: w1,
        variational_distance: vd,
    };
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        let json = serde_json::to_string_pretty(&cmp)? + "\n";
        std::fs::write(out.join("compare.json"), json)?;
        let mut w = csv::Writer::from_path(out.join("compare.csv"))?;
        w.write_record(["marginal", "wasserstein1", "variational_distance"])?;
        for (i, (x, y)) in cmp.wasserstein1.iter().zip(&cmp.variational_distance).enumerate() {
            w.write_record([(i + 1).to_string(), x.to_string(), y.to_string()])?;
        }
        w.flush()?;
    }
    Ok(cmp)
}

//! Bayesian logistic regression with a Laplacian prior.
//!
//! Reward gradient for row k: `−sgn(θ) + T ψ_k (y_k − σ(ψ_kᵀθ))`, where ψ_k
//! is the regression vector with a constant bias component prepended.

use serde::{Deserialize, Serialize};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::forward::GradientOracle;
use crate::rng::RngStream;
use crate::vector::ParamVector;

/// Feature count of the a9a benchmark before bias augmentation.
pub const A9A_FEATURES: usize = 123;

/// Bias-augmented rows `ψ_k = [1, ψ̄_k]` and binary labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::mismatch("rows vs labels", rows.len(), labels.len()));
        }
        if let Some(first) = rows.first() {
            if let Some(r) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(Error::mismatch("feature dimension", first.len(), r.len()));
            }
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
        }
        Ok(Dataset { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Dimension of ψ_k, bias included. Zero for an empty dataset.
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn label(&self, k: usize) -> f64 {
        self.labels[k]
    }

    /// Nonzero count of each feature column, bias excluded.
    pub fn feature_frequencies(&self) -> Vec<usize> {
        let d = self.dim().saturating_sub(1);
        let mut freq = vec![0; d];
        for r in &self.rows {
            for (f, v) in freq.iter_mut().zip(&r[1..]) {
                if *v != 0.0 {
                    *f += 1;
                }
            }
        }
        freq
    }

    /// Random subset of `max_rows` rows restricted to the `top_features` most
    /// frequent features (ties broken by lower index), bias kept in front.
    pub fn desk_subset(&self, max_rows: usize, top_features: usize, rng: &mut RngStream) -> Result<Dataset> {
        if self.is_empty() {
            return Err(Error::Degenerate("cannot subset an empty dataset".into()));
        }
        let freq = self.feature_frequencies();
        let mut order: Vec<usize> = (0..freq.len()).collect();
        order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
        order.truncate(top_features);
        order.sort_unstable();
        let mut idx: Vec<usize> = (0..self.len()).collect();
        // partial Fisher–Yates
        let take = max_rows.min(self.len());
        for i in 0..take {
            let j = i + rng.index(self.len() - i);
            idx.swap(i, j);
        }
        idx.truncate(take);
        idx.sort_unstable();
        let rows = idx
            .iter()
            .map(|&k| {
                std::iter::once(1.0)
                    .chain(order.iter().map(|&f| self.rows[k][f + 1]))
                    .collect()
            })
            .collect();
        let labels = idx.iter().map(|&k| self.labels[k]).collect();
        Dataset::new(rows, labels)
    }
}

/// Parses libsvm text, `<label> <index>:<value> ...` with 1-based indices up
/// to `num_features`. Labels −1/0 map to 0 and +1 to 1.
pub fn parse_libsvm<R: BufRead>(reader: R, num_features: usize) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno, message };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("line is non-empty");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("bad label '{label_tok}'")))?;
        let y = if label == 1.0 {
            1.0
        } else if label == -1.0 || label == 0.0 {
            0.0
        } else {
            return Err(err(format!("label must be -1, 0 or +1, got '{label_tok}'")));
        };
        let mut row = vec![0.0; num_features + 1];
        row[0] = 1.0;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, got '{tok}'")))?;
            let i: usize = i.parse().map_err(|_| err(format!("bad index '{i}'")))?;
            let v: f64 = v.parse().map_err(|_| err(format!("bad value '{v}'")))?;
            if i == 0 || i > num_features {
                return Err(err(format!("index {i} outside 1..={num_features}")));
            }
            if !v.is_finite() {
                return Err(err(format!("non-finite value at index {i}")));
            }
            row[i] = v;
        }
        rows.push(row);
        labels.push(y);
    }
    Dataset::new(rows, labels)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// T, the weight on each log-likelihood term.
    pub likelihood_weight: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            likelihood_weight: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    data: Dataset,
    params: LogisticParams,
}

impl LogisticModel {
    pub fn new(data: Dataset, params: LogisticParams) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Degenerate("logistic model needs at least one row".into()));
        }
        if !(params.likelihood_weight >= 0.0) {
            return Err(Error::InvalidConfig("likelihood_weight must be nonnegative".into()));
        }
        Ok(LogisticModel { data, params })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// `ψ_k (y_k − σ(ψ_kᵀθ))`
    pub fn likelihood_grad(&self, theta: &[f64], k: usize) -> Vec<f64> {
        let psi = self.data.row(k);
        let z: f64 = psi.iter().zip(theta).map(|(a, b)| a * b).sum();
        let r = self.data.label(k) - sigmoid(z);
        psi.iter().map(|p| p * r).collect()
    }

    /// `log p(y_k|θ)`
    pub fn log_likelihood(&self, theta: &[f64], k: usize) -> f64 {
        let psi = self.data.row(k);
        let z: f64 = psi.iter().zip(theta).map(|(a, b)| a * b).sum();
        // y z − log(1 + e^z), computed stably
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        self.data.label(k) * z - softplus
    }

    /// `−sgn(θ) + T ∇ log p(y_k|θ)`
    pub fn grad(&self, theta: &ParamVector, k: usize) -> Result<ParamVector> {
        theta.check_dim(self.dim(), "logistic parameter")?;
        if k >= self.data.len() {
            return Err(Error::mismatch("row index", self.data.len(), k));
        }
        let t = theta.as_slice();
        let lg = self.likelihood_grad(t, k);
        let g = t
            .iter()
            .zip(lg)
            .map(|(th, l)| -sgn(*th) + self.params.likelihood_weight * l)
            .collect();
        ParamVector::from_update(g, "logistic gradient")
    }
}

/// Gradient oracle drawing a uniformly random row per call.
#[derive(Debug, Clone)]
pub struct LogisticOracle {
    model: LogisticModel,
}

impl LogisticOracle {
    pub fn new(model: LogisticModel) -> Self {
        LogisticOracle { model }
    }
}

impl GradientOracle for LogisticOracle {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        let k = rng.index(self.model.data.len());
        self.model.grad(point, k)
    }
}

//! Parameter vectors and the gradient samples exchanged between forward
//! agents and inverse learners.

use serde::{Deserialize, Serialize};
use std::ops::Index;

use crate::error::{Error, Result};

/// A finite point in R^N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("parameter vector must have length >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("entry {i} is {}", values[i])));
        }
        Ok(ParamVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be >= 1");
        ParamVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `self - other`, used for the kernel argument θ − ð.
    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Applies a map that sends finite values to finite values.
    pub(crate) fn map(self, f: impl Fn(f64) -> f64) -> ParamVector {
        ParamVector(self.0.into_iter().map(f).collect())
    }

    pub fn check_dim(&self, expected: usize, what: &str) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::mismatch(what, expected, self.dim()));
        }
        Ok(())
    }

    /// Wraps raw values produced by an update rule, failing on NaN/Inf.
    pub(crate) fn from_update(values: Vec<f64>, what: &str) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("{what}: coordinate {i} is {}", values[i])));
        }
        Ok(ParamVector(values))
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Vec<f64> {
        v.0
    }
}

/// The pair (θ_k, ∇r_k(θ_k)): where a forward agent evaluated its noisy
/// gradient, and the value it obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSample {
    point: ParamVector,
    gradient: ParamVector,
}

impl GradientSample {
    pub fn new(point: ParamVector, gradient: ParamVector) -> Result<Self> {
        gradient.check_dim(point.dim(), "gradient sample")?;
        Ok(GradientSample { point, gradient })
    }

    pub fn point(&self) -> &ParamVector {
        &self.point
    }

    pub fn gradient(&self) -> &ParamVector {
        &self.gradient
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }
}

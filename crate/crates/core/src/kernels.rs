//! Smoothing kernels for passive gradient reweighting.
//!
//! A [`Kernel`] evaluates the scaled weight `Δ^{-N} K(u / Δ)` that measures how
//! useful a gradient taken at θ is for the learner sitting at ð. Both families
//! are radially symmetric and integrate to one.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// Radius (in bandwidth units) at which the truncated family is cut.
pub const TRUNCATION_RADIUS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Gaussian,
    TruncatedGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct Kernel {
    family: KernelFamily,
    bandwidth: f64,
    dim: usize,
    /// Δ^{-N} times the normalizing constant of K.
    scale: f64,
    inv_two_bw_sq: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub dim: usize,
}

impl Kernel {
    pub fn new(family: KernelFamily, bandwidth: f64, dim: usize) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("kernel dimension must be >= 1".into()));
        }
        let n = dim as f64;
        let gaussian_norm = (2.0 * PI).powf(-n / 2.0) * bandwidth.powf(-n);
        let scale = match family {
            KernelFamily::Gaussian => gaussian_norm,
            // P(|Z|^2 <= r^2) for Z ~ N(0, I_N) is a chi-square CDF.
            KernelFamily::TruncatedGaussian => {
                let inside = gamma_lr(n / 2.0, TRUNCATION_RADIUS * TRUNCATION_RADIUS / 2.0);
                gaussian_norm / inside
            }
        };
        Ok(Kernel {
            family,
            bandwidth,
            dim,
            scale,
            inv_two_bw_sq: 1.0 / (2.0 * bandwidth * bandwidth),
        })
    }

    pub fn gaussian(bandwidth: f64, dim: usize) -> Result<Self> {
        Kernel::new(KernelFamily::Gaussian, bandwidth, dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at the origin, `Δ^{-N} K(0)`.
    pub fn peak(&self) -> f64 {
        self.scale
    }

    /// `Δ^{-N} K(diff / Δ)`.
    pub fn scaled_eval(&self, diff: &ParamVector) -> Result<f64> {
        diff.check_dim(self.dim, "kernel argument")?;
        Ok(self.eval_sq(diff.norm_sq()))
    }

    /// `Δ^{-N} K((a - b) / Δ)` without allocating the difference.
    pub fn scaled_between(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.eval_sq(sq)
    }

    fn eval_sq(&self, dist_sq: f64) -> f64 {
        let u_sq = dist_sq * self.inv_two_bw_sq * 2.0;
        if self.family == KernelFamily::TruncatedGaussian
            && u_sq > TRUNCATION_RADIUS * TRUNCATION_RADIUS
        {
            return 0.0;
        }
        self.scale * (-dist_sq * self.inv_two_bw_sq).exp()
    }
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        Kernel::new(spec.family, spec.bandwidth, spec.dim)
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        KernelSpec {
            family: k.family,
            bandwidth: k.bandwidth,
            dim: k.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelAxiomReport {
    pub mass: f64,
    pub second_moment: f64,
    pub symmetry_max_err: f64,
}

/// Trapezoid quadrature of the kernel over `[-8Δ, 8Δ]^N` with
/// `points_per_axis` nodes per axis.
pub fn verify_kernel_axioms(kernel: &Kernel, points_per_axis: usize) -> Result<KernelAxiomReport> {
    let n = kernel.dim();
    if n > 3 {
        return Err(Error::InvalidConfig(format!(
            "quadrature check supports dim <= 3, got {n}"
        )));
    }
    if points_per_axis < 3 {
        return Err(Error::InvalidConfig("need at least 3 quadrature points".into()));
    }
    let half = 8.0 * kernel.bandwidth();
    let h = 2.0 * half / (points_per_axis - 1) as f64;
    let node = |i: usize| -half + h * i as f64;
    let weight = |i: usize| if i == 0 || i == points_per_axis - 1 { 0.5 } else { 1.0 };

    let mut mass = 0.0;
    let mut second = 0.0;
    let mut sym = 0.0f64;
    let total = points_per_axis.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut u = vec![0.0; n];
    let mut neg = vec![0.0; n];
    let zero = vec![0.0; n];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for d in 0..n {
            idx[d] = rem % points_per_axis;
            rem /= points_per_axis;
            u[d] = node(idx[d]);
            neg[d] = -u[d];
            w *= weight(idx[d]);
        }
        let k = kernel.scaled_between(&u, &zero);
        let k_neg = kernel.scaled_between(&neg, &zero);
        sym = sym.max((k - k_neg).abs());
        let r_sq: f64 = u.iter().map(|x| x * x).sum();
        mass += w * k;
        second += w * k * r_sq;
    }
    let cell = h.powi(n as i32);
    let bw_sq = kernel.bandwidth() * kernel.bandwidth();
    Ok(KernelAxiomReport {
        mass: mass * cell,
        // reported for the unscaled kernel K(u), i.e. in bandwidth units
        second_moment: second * cell / bw_sq,
        symmetry_max_err: sym,
    })
}

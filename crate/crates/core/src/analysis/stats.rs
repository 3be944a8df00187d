use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::irl::Trajectory;

/// Minimum series length accepted by [`autocorr_time`].
pub const MIN_AUTOCORR_LEN: usize = 1000;

/// Empirical CDF of one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("ECDF of an empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("ECDF sample"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted: values })
    }

    /// Post-burn-in marginal `i` of a trajectory.
    pub fn from_trajectory(traj: &Trajectory, i: usize) -> Result<Self> {
        if i >= traj.dim() {
            return Err(Error::mismatch("ECDF coordinate", traj.dim(), i));
        }
        Ecdf::new(traj.coordinate(i))
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }
}

/// Walks the merged breakpoints of two ECDFs, calling `f(x, next_x, Fa, Fb)`
/// with both CDFs evaluated just after `x`.
fn merged_walk(a: &Ecdf, b: &Ecdf, mut f: impl FnMut(f64, Option<f64>, f64, f64)) {
    let (xa, xb) = (&a.sorted, &b.sorted);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => Some(u.min(v)),
            (Some(&u), None) => Some(u),
            (None, Some(&v)) => Some(v),
            (None, None) => None,
        };
        f(x, next, i as f64 / na, j as f64 / nb);
    }
}

/// `∫ |F_a − F_b| dx`, exact for step functions.
pub fn wasserstein1(a: &Ecdf, b: &Ecdf) -> f64 {
    let mut total = 0.0;
    merged_walk(a, b, |x, next, fa, fb| {
        if let Some(nx) = next {
            total += (fa - fb).abs() * (nx - x);
        }
    });
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the asymptotic p-value.
    pub effective_n: f64,
}

impl KsResult {
    /// True when the null is not rejected at `level`.
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Asymptotic Kolmogorov tail `Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &Ecdf, b: &Ecdf) -> KsResult {
    let mut d = 0.0f64;
    merged_walk(a, b, |_, _, fa, fb| d = d.max((fa - fb).abs()));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ne = na * nb / (na + nb);
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, ne),
        effective_n: ne,
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(a: &Ecdf, cdf: impl Fn(f64) -> f64) -> KsResult {
    let n = a.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in a.sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        effective_n: n,
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Normalized autocorrelation ρ_0..ρ_{n−1} via zero-padded FFT.
pub fn autocorrelation(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Degenerate("autocorrelation needs at least 2 samples".into()));
    }
    let m = mean(values);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300 * n as f64) {
        return Err(Error::Degenerate("constant series has no autocorrelation".into()));
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Integrated autocorrelation time `1 + 2 Σ ρ_t`, truncated by Geyer's
/// initial positive (and monotone) sequence.
pub fn integrated_autocorr_time(values: &[f64]) -> Result<f64> {
    if values.len() < MIN_AUTOCORR_LEN {
        return Err(Error::Degenerate(format!(
            "autocorrelation time needs >= {MIN_AUTOCORR_LEN} samples, got {}",
            values.len()
        )));
    }
    let rho = autocorrelation(values)?;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for k in 0..rho.len() / 2 {
        let pair = rho[2 * k] + rho[2 * k + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
    }
    Ok((2.0 * sum - 1.0).max(f64::MIN_POSITIVE))
}

/// Integrated autocorrelation time of post-burn-in coordinate `i`.
pub fn autocorr_time(traj: &Trajectory, i: usize) -> Result<f64> {
    if i >= traj.dim() {
        return Err(Error::mismatch("autocorrelation coordinate", traj.dim(), i));
    }
    integrated_autocorr_time(&traj.coordinate(i))
}

/// Every `stride`-th value.
pub fn thin(values: &[f64], stride: usize) -> Vec<f64> {
    values.iter().step_by(stride.max(1)).copied().collect()
}

/// Thins by the (ceiled) integrated autocorrelation time so that the
/// retained values are approximately independent.
pub fn thin_by_autocorr(values: &[f64]) -> Result<Vec<f64>> {
    let tau = integrated_autocorr_time(values)?;
    Ok(thin(values, tau.ceil() as usize))
}

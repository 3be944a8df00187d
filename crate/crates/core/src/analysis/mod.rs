//! From trajectories to reward estimates and distances.
//!
//! The log of a histogram of post-burn-in iterates estimates `β R` up to an
//! additive constant. Marginals are compared through ECDFs (Wasserstein-1,
//! Kolmogorov–Smirnov) and gridded densities through the variational distance.

mod density;
mod stats;

pub use density::{
    build_density, find_modes, fit_quadratic, variational_distance, Axis, EmpiricalDensity,
    GridSpec, Mode,
};
pub use stats::{
    autocorr_time, autocorrelation, integrated_autocorr_time, ks_one_sample, ks_two_sample, mean,
    thin, thin_by_autocorr, variance, wasserstein1, Ecdf, KsResult, MIN_AUTOCORR_LEN,
};

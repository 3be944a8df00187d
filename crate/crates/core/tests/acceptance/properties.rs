use passive_irl::irl::{ResampledPools, SampleSource, Sampler};
use passive_irl::kernels::{verify_kernel_axioms, KernelFamily};
use passive_irl::problems::{
    policy_to_spherical, spherical_to_policy, Dataset, LogisticModel, LogisticParams, MixtureModel,
    QuadraticOracle,
};
use passive_irl::{
    run_sampler, GradientOracle, GradientSample, InitDensity, Kernel, ParamVector, RngStream,
    SamplerConfig, Variant,
};

use crate::common::quadratic_stream;
use crate::{Outcome, Verdict};

const FD_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;

/// Largest relative error of `grad` against central differences of `f` at `x`.
fn fd_error(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[i] += FD_STEP;
        m[i] -= FD_STEP;
        let fd = (f(&p) - f(&m)) / (2.0 * FD_STEP);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1e-3));
    }
    worst
}

fn gradients(rng: &mut RngStream) -> passive_irl::Result<(f64, String)> {
    let mut worst = [0.0f64; 4];

    let mix = MixtureModel::new([0.0, 1.0], 300.0)?;
    for _ in 0..200 {
        let t = [1.5 * rng.standard_normal(), 1.5 * rng.standard_normal()];
        let y = mix.sample_obs(rng);
        let g = mix.grad(&ParamVector::new(t.to_vec())?, y)?;
        let f = |x: &[f64]| MixtureModel::log_prior(x) + 300.0 * MixtureModel::log_likelihood(x, y);
        worst[0] = worst[0].max(fd_error(f, &t, g.as_slice()));
    }

    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            std::iter::once(1.0)
                .chain((0..8).map(|_| if rng.uniform() < 0.3 { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let labels = (0..50).map(|_| if rng.uniform() < 0.5 { 1.0 } else { 0.0 }).collect();
    let params = LogisticParams::default();
    let model = LogisticModel::new(Dataset::new(rows, labels)?, params)?;
    for _ in 0..200 {
        // keep clear of the kink of −|θ| at zero
        let t: Vec<f64> = (0..9)
            .map(|_| {
                let v = rng.standard_normal();
                v + 0.1 * v.signum()
            })
            .collect();
        let k = rng.index(50);
        let g = model.grad(&ParamVector::new(t.clone())?, k)?;
        let f = |x: &[f64]| {
            -x.iter().map(|v| v.abs()).sum::<f64>()
                + params.likelihood_weight * model.log_likelihood(x, k)
        };
        worst[1] = worst[1].max(fd_error(f, &t, g.as_slice()));
    }

    let mut quad = QuadraticOracle::new(2.0, 0.0, 3)?.centered(vec![0.5, -1.0, 2.0])?;
    for _ in 0..200 {
        let t: Vec<f64> = (0..3).map(|_| 2.0 * rng.standard_normal()).collect();
        let g = quad.gradient(&ParamVector::new(t.clone())?, rng)?;
        worst[2] = worst[2].max(fd_error(|x| quad.reward(x), &t, g.as_slice()));
    }

    let pi = InitDensity::gaussian(vec![0.3, -0.2], vec![1.5, 0.7])?;
    for _ in 0..200 {
        let t: Vec<f64> = (0..2).map(|_| rng.standard_normal()).collect();
        let (_, g) = pi.density_and_grad(&ParamVector::new(t.clone())?)?;
        worst[3] = worst[3].max(fd_error(|x| pi.density(x), &t, g.as_slice()));
    }

    let max = worst.iter().copied().fold(0.0, f64::max);
    Ok((
        max,
        format!(
            "fd rel err mixture {:.1e}, logistic {:.1e}, quadratic {:.1e}, π {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn kernel_axioms() -> passive_irl::Result<(bool, String)> {
    let cases = [
        (KernelFamily::Gaussian, 0.1, 1, 20_001),
        (KernelFamily::Gaussian, 0.3, 2, 801),
        (KernelFamily::Gaussian, 0.05, 3, 161),
        (KernelFamily::TruncatedGaussian, 0.2, 1, 100_001),
    ];
    let mut mass_err = 0.0f64;
    let mut sym = 0.0f64;
    for (family, bw, dim, points) in cases {
        let r = verify_kernel_axioms(&Kernel::new(family, bw, dim)?, points)?;
        mass_err = mass_err.max((r.mass - 1.0).abs());
        sym = sym.max(r.symmetry_max_err);
    }
    Ok((
        mass_err <= 1e-6 && sym < 1e-12,
        format!("kernel mass err {mass_err:.1e}, asymmetry {sym:.1e}"),
    ))
}

/// |∫K_Δ(θ − x) h(θ) dθ − h(x)| by trapezoid quadrature, for a smooth `h`.
fn smoothing_error(bw: f64, x: f64, h: impl Fn(f64) -> f64) -> passive_irl::Result<f64> {
    let k = Kernel::gaussian(bw, 1)?;
    let half = 10.0 * bw;
    let m = 20_001;
    let step = 2.0 * half / (m - 1) as f64;
    let mut acc = 0.0;
    for i in 0..m {
        let t = x - half + step * i as f64;
        let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
        acc += w * k.scaled_between(&[t], &[x]) * h(t);
    }
    Ok((acc * step - h(x)).abs())
}

fn smoothing_ratios() -> passive_irl::Result<(bool, String)> {
    let mut ratios = Vec::new();
    for (x, h) in [
        (0.3, (|t: f64| t.cos()) as fn(f64) -> f64),
        (0.7, |t: f64| (-t * t / 2.0).exp()),
    ] {
        for bw in [0.2, 0.1, 0.05] {
            ratios.push(smoothing_error(bw, x, h)? / smoothing_error(bw / 2.0, x, h)?);
        }
    }
    let ok = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok((ok, format!("Δ-halving ratios in [{lo:.3}, {hi:.3}]")))
}

fn weight_normalization(rng: &mut RngStream) -> passive_irl::Result<(bool, String)> {
    let cfg = SamplerConfig::new(1e-3, 1.0, ParamVector::zeros(3))
        .with_sigma(0.2)
        .with_pool_size(50);
    let sampler = Sampler::new(Variant::MultiKernel, cfg)?;
    let mut worst = 0.0f64;
    let mut fallbacks = 0;
    for trial in 0..1000 {
        // spread grows with the trial so some pools lie far from ð and underflow
        let spread = 1.0 + trial as f64 / 10.0;
        let pool = (0..50)
            .map(|_| {
                let p: Vec<f64> = (0..3).map(|_| spread * rng.standard_normal()).collect();
                GradientSample::new(ParamVector::new(p.clone())?, ParamVector::new(p)?)
            })
            .collect::<passive_irl::Result<Vec<_>>>()?;
        let cur: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
        let (w, fallback) = sampler.pool_weights(&ParamVector::new(cur)?, &pool);
        fallbacks += fallback as usize;
        let sum: f64 = w.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        if w.iter().any(|v| v.is_nan() || *v < 0.0) {
            worst = f64::INFINITY;
        }
    }
    Ok((
        worst <= 1e-12,
        format!("weight sum err {worst:.1e} over 1000 pools ({fallbacks} uniform fallbacks)"),
    ))
}

fn spherical_round_trip(rng: &mut RngStream) -> passive_irl::Result<(bool, String)> {
    let mut angle_err = 0.0f64;
    let mut policy_err = 0.0f64;
    for _ in 0..1000 {
        let states = 1 + rng.index(4);
        let actions = 2 + rng.index(4);
        let lo = 0.01;
        let hi = std::f64::consts::FRAC_PI_2 - 0.01;
        let angles: Vec<f64> = (0..states * (actions - 1))
            .map(|_| lo + (hi - lo) * rng.uniform())
            .collect();
        let policy = spherical_to_policy(&angles, states, actions)?;
        let back = policy_to_spherical(&policy)?;
        for (a, b) in angles.iter().zip(&back) {
            angle_err = angle_err.max((a - b).abs());
        }
        let again = spherical_to_policy(&back, states, actions)?;
        for (r1, r2) in policy.rows().iter().zip(again.rows()) {
            for (p, q) in r1.iter().zip(r2) {
                policy_err = policy_err.max((p - q).abs());
            }
        }
    }
    Ok((
        angle_err <= 1e-10 && policy_err <= 1e-10,
        format!("spherical round trip err angles {angle_err:.1e}, policies {policy_err:.1e}"),
    ))
}

/// Trajectory CSV and metadata bytes of one run.
fn run_bytes(variant: Variant, seed: u64, stream: &[GradientSample]) -> passive_irl::Result<Vec<u8>> {
    let base = SamplerConfig::new(1e-3, 2.0, ParamVector::zeros(1));
    let passive = base
        .clone()
        .with_kernel(Kernel::gaussian(0.1, 1)?)
        .with_init_density(InitDensity::standard(1));
    let steps = 20_000;
    let mut rng = RngStream::new(seed);
    let traj = match variant {
        Variant::MultiKernel => run_sampler(
            variant,
            SampleSource::pools(ResampledPools::new(stream)?),
            &base.with_sigma(0.1).with_pool_size(50),
            steps,
            &mut rng,
        )?,
        Variant::Active => run_sampler(
            variant,
            SampleSource::oracle(QuadraticOracle::new(1.0, 0.5, 1)?),
            &passive.with_sigma(0.2),
            steps,
            &mut rng,
        )?,
        Variant::ClassicalLangevin => run_sampler(
            variant,
            SampleSource::oracle(QuadraticOracle::new(1.0, 0.5, 1)?),
            &base,
            steps,
            &mut rng,
        )?,
        Variant::NonReversible => run_sampler(
            variant,
            SampleSource::slice(stream),
            &passive.with_skew(vec![vec![0.0]]),
            steps,
            &mut rng,
        )?,
        _ => run_sampler(variant, SampleSource::slice(stream), &passive, steps, &mut rng)?,
    };
    let mut out = Vec::new();
    traj.write_csv(&mut out)?;
    traj.write_metadata(&mut out)?;
    Ok(out)
}

fn reproducibility() -> passive_irl::Result<(bool, String)> {
    let stream = quadratic_stream(1, 1000, 100, 1e-3, 0.5, &mut RngStream::new(5));
    let variants = [
        Variant::PassiveGeneralized,
        Variant::PassiveGeneralizedB,
        Variant::PassiveClassical,
        Variant::NonReversible,
        Variant::MultiKernel,
        Variant::Active,
        Variant::ClassicalLangevin,
        Variant::Naive,
    ];
    let mut same = 0;
    let mut seed_matters = 0;
    for v in variants {
        let a = run_bytes(v, 11, &stream)?;
        same += (a == run_bytes(v, 11, &stream)?) as usize;
        seed_matters += (a != run_bytes(v, 12, &stream)?) as usize;
    }
    let n = variants.len();
    Ok((
        same == n && seed_matters == n,
        format!("{same}/{n} variants byte-identical on rerun, {seed_matters}/{n} change with the seed"),
    ))
}

pub fn run() -> Outcome {
    let mut rng = RngStream::new(9);
    let (fd, fd_detail) = gradients(&mut rng)?;
    let checks = [
        (fd < FD_TOL, fd_detail),
        kernel_axioms()?,
        smoothing_ratios()?,
        weight_normalization(&mut rng)?,
        spherical_round_trip(&mut rng)?,
        reproducibility()?,
    ];
    let pass = checks.iter().all(|(ok, _)| *ok);
    let detail = checks
        .iter()
        .map(|(ok, s)| format!("{s}{}", if *ok { "" } else { " (!)" }))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Verdict::new(pass, detail))
}

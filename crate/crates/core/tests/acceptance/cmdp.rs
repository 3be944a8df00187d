use passive_irl::analysis::{mean, variance};
use passive_irl::irl::SampleSource;
use passive_irl::problems::{
    ground_truth_penalized, simulate_cmdp, spherical_to_policy, stationary_joint, CmdpModel,
    CmdpPools, Policy, SpsaSettings,
};
use passive_irl::{run_sampler, ParamVector, RngStream, SamplerConfig, Variant};
use std::f64::consts::FRAC_PI_2;

use crate::{Outcome, Verdict};

const SEED: u64 = 7;
const SIM_POLICIES: usize = 10;
// 10^7 steps per policy, as independent replications so the spread between
// them gives the standard error
const REPLICATIONS: usize = 100;
const REPLICATION_LEN: usize = 100_000;
const GRID: usize = 101;

fn random_policy(model: &CmdpModel, rng: &mut RngStream) -> passive_irl::Result<Policy> {
    let angles: Vec<f64> = (0..model.angle_dim()).map(|_| FRAC_PI_2 * rng.uniform()).collect();
    spherical_to_policy(&angles, model.states(), model.actions())
}

pub fn ground_truth() -> Outcome {
    let model = CmdpModel::example();
    let mut rng = RngStream::new(SEED);
    let mut checks: Vec<(String, bool)> = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        worst = worst.max(stationary_joint(&model, &random_policy(&model, &mut rng)?)?.residual);
    }
    checks.push((format!("max balance residual {worst:.1e} over 1000 policies"), worst < 1e-10));

    let mut worst_z = 0.0f64;
    for _ in 0..SIM_POLICIES {
        let policy = random_policy(&model, &mut rng)?;
        let exact = stationary_joint(&model, &policy)?;
        let reps = (0..REPLICATIONS)
            .map(|_| simulate_cmdp(&model, &policy, REPLICATION_LEN, &mut rng))
            .collect::<passive_irl::Result<Vec<_>>>()?;
        for (k, truth) in [exact.j, exact.b].into_iter().enumerate() {
            let xs: Vec<f64> = reps.iter().map(|r| if k == 0 { r.0 } else { r.1 }).collect();
            let se = (variance(&xs) / REPLICATIONS as f64).sqrt();
            worst_z = worst_z.max((mean(&xs) - truth).abs() / se);
        }
    }
    checks.push((
        format!("simulated (J, B) within {worst_z:.2} se of exact on {SIM_POLICIES} policies"),
        worst_z <= 3.0,
    ));

    // penalized reward over (φ(1|1), φ(1|2)) on cell centers
    let mut cells = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        for j in 0..GRID {
            let p = Policy::two_by_two((i as f64 + 0.5) / GRID as f64, (j as f64 + 0.5) / GRID as f64)?;
            let st = stationary_joint(&model, &p)?;
            cells.push((ground_truth_penalized(&model, &p, model.lambda())?, st.b, i, j));
        }
    }
    let feasible: Vec<(usize, usize)> = cells
        .iter()
        .filter(|c| c.1 <= model.gamma())
        .map(|c| (c.2, c.3))
        .collect();
    // the constraint set is not convex: some pair of feasible cells has an
    // infeasible midpoint
    let nonconvex = feasible.iter().any(|a| {
        feasible.iter().any(|b| {
            (a.0 + b.0) % 2 == 0 && (a.1 + b.1) % 2 == 0 && cells[(a.0 + b.0) / 2 * GRID + (a.1 + b.1) / 2].1 > model.gamma()
        })
    });
    checks.push((
        format!("{} feasible cells, non-convex {nonconvex}", feasible.len()),
        !feasible.is_empty() && nonconvex,
    ));

    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = &cells[..GRID * GRID / 100];
    let max_dev = top.iter().map(|c| (c.1 - model.gamma()).abs()).fold(0.0, f64::max);
    checks.push((
        format!("top 1% of {GRID}x{GRID} cells have |B - γ| <= {max_dev:.4}"),
        max_dev < 0.1,
    ));

    let pass = checks.iter().all(|(_, ok)| *ok);
    Ok(Verdict::new(pass, join(&checks)))
}

fn join(checks: &[(String, bool)]) -> String {
    checks
        .iter()
        .map(|(s, ok)| format!("{s}{}", if *ok { "" } else { " (!)" }))
        .collect::<Vec<_>>()
        .join("; ")
}

// exp(R) itself; with λ = 10^5 the penalty already pins the law to the constraint
const BETA: f64 = 1.0;
const IRL_STEPS: usize = 100_000;
const TOLERANCE: f64 = 0.15;

pub fn irl() -> Outcome {
    let model = CmdpModel::example();
    let cfg = SamplerConfig::new(5e-6, BETA, ParamVector::new(vec![FRAC_PI_2 / 2.0; 2])?)
        .with_sigma(0.1)
        .with_pool_size(50)
        .with_reflect(0.0, FRAC_PI_2);
    let traj = run_sampler(
        Variant::MultiKernel,
        SampleSource::pools(CmdpPools::new(&model, SpsaSettings::default())),
        &cfg,
        IRL_STEPS,
        &mut RngStream::new(SEED + 1),
    )?;
    let mut near = 0usize;
    let mut total = 0usize;
    let mut span = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    for row in traj.post_burn_in() {
        let p = spherical_to_policy(row, model.states(), model.actions())?;
        for (x, s) in span.iter_mut().enumerate() {
            *s = (s.0.min(p.prob(x, 0)), s.1.max(p.prob(x, 0)));
        }
        let b = stationary_joint(&model, &p)?.b;
        near += ((b - model.gamma()).abs() < TOLERANCE) as usize;
        total += 1;
    }
    let frac = near as f64 / total as f64;
    let resets = traj.metadata().map_or(0, |m| m.weight_resets);
    Ok(Verdict::new(
        frac >= 0.7,
        format!(
            "{:.1}% of {total} post-burn-in samples have |B - γ| < {TOLERANCE}; φ(1|1) in [{:.2}, {:.2}], φ(1|2) in [{:.2}, {:.2}]; {resets} uniform-weight steps",
            100.0 * frac,
            span[0].0,
            span[0].1,
            span[1].0,
            span[1].1
        ),
    ))
}

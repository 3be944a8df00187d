//! Average-reward constrained MDP with randomized stationary policies.
//!
//! Policies are parametrized by spherical angles so that every real angle
//! vector maps to a valid conditional action distribution. The reward seen
//! by the forward agents is the quadratic penalty `J − λ(B − γ)²`, estimated
//! from finite-horizon simulations and differentiated by SPSA.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use crate::error::{Error, Result};
use crate::irl::PoolSource;
use std::borrow::Cow;
use crate::rng::RngStream;
use crate::vector::{GradientSample, ParamVector};

const ROW_TOL: f64 = 1e-12;
const BALANCE_TOL: f64 = 1e-10;
const MAX_POWER_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CmdpSpec", into = "CmdpSpec")]
pub struct CmdpModel {
    spec: CmdpSpec,
}

/// On-disk layout of a CMDP model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdpSpec {
    pub states: usize,
    pub actions: usize,
    /// `P[u][i][j]`
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
    /// `rho[x][u]`
    pub rho: Vec<Vec<f64>>,
    /// `constraint_cost[x][u]`
    pub constraint_cost: Vec<Vec<f64>>,
    pub gamma: f64,
    pub lambda: f64,
}

impl TryFrom<CmdpSpec> for CmdpModel {
    type Error = Error;

    fn try_from(spec: CmdpSpec) -> Result<Self> {
        CmdpModel::new(spec)
    }
}

impl From<CmdpModel> for CmdpSpec {
    fn from(m: CmdpModel) -> Self {
        m.spec
    }
}

fn check_matrix(m: &[Vec<f64>], rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.len() != rows {
        return Err(Error::mismatch(format!("{what} rows"), rows, m.len()));
    }
    for r in m {
        if r.len() != cols {
            return Err(Error::mismatch(format!("{what} columns"), cols, r.len()));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(what.to_string()));
        }
    }
    Ok(())
}

impl CmdpModel {
    pub fn new(spec: CmdpSpec) -> Result<Self> {
        let (x, u) = (spec.states, spec.actions);
        if x == 0 || u == 0 {
            return Err(Error::InvalidConfig("states and actions must be >= 1".into()));
        }
        if spec.p.len() != u {
            return Err(Error::mismatch("P (one matrix per action)", u, spec.p.len()));
        }
        for (a, m) in spec.p.iter().enumerate() {
            check_matrix(m, x, x, &format!("P[{a}]"))?;
            for (i, row) in m.iter().enumerate() {
                let s: f64 = row.iter().sum();
                if row.iter().any(|v| *v < 0.0) || (s - 1.0).abs() > ROW_TOL {
                    return Err(Error::InvalidConfig(format!(
                        "P[{a}] row {i} is not stochastic (sum {s})"
                    )));
                }
            }
        }
        check_matrix(&spec.rho, x, u, "rho")?;
        if spec.rho.iter().flatten().any(|v| *v < 0.0) {
            return Err(Error::InvalidConfig("rho must be nonnegative".into()));
        }
        check_matrix(&spec.constraint_cost, x, u, "constraint_cost")?;
        if !spec.gamma.is_finite() || !(spec.lambda >= 0.0 && spec.lambda.is_finite()) {
            return Err(Error::InvalidConfig("gamma must be finite and lambda >= 0".into()));
        }
        Ok(CmdpModel { spec })
    }

    /// Two-state, two-action example with an active constraint at γ = 1.
    pub fn example() -> Self {
        CmdpModel::new(CmdpSpec {
            states: 2,
            actions: 2,
            p: vec![
                vec![vec![0.8, 0.2], vec![0.3, 0.7]],
                vec![vec![0.6, 0.4], vec![0.1, 0.9]],
            ],
            rho: vec![vec![1.0, 100.0], vec![30.0, 2.0]],
            constraint_cost: vec![vec![0.2, 0.3], vec![2.0, 1.0]],
            gamma: 1.0,
            lambda: 1e5,
        })
        .expect("example model is valid")
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn states(&self) -> usize {
        self.spec.states
    }

    pub fn actions(&self) -> usize {
        self.spec.actions
    }

    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    /// Number of spherical angles, `(U − 1) X`.
    pub fn angle_dim(&self) -> usize {
        (self.spec.actions - 1) * self.spec.states
    }
}

/// Conditional action probabilities `φ(u|x)`, one row per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    rows: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidConfig("policy needs at least one state and action".into()));
        }
        let u = rows[0].len();
        for (x, r) in rows.iter().enumerate() {
            if r.len() != u {
                return Err(Error::mismatch("policy row", u, r.len()));
            }
            let s: f64 = r.iter().sum();
            if r.iter().any(|p| !(0.0..=1.0).contains(p)) || (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidConfig(format!(
                    "policy row {x} is not a distribution (sum {s})"
                )));
            }
        }
        Ok(Policy { rows })
    }

    /// Two-state, two-action policy given `(φ(1|1), φ(1|2))`.
    pub fn two_by_two(p11: f64, p12: f64) -> Result<Self> {
        Policy::new(vec![vec![p11, 1.0 - p11], vec![p12, 1.0 - p12]])
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn prob(&self, x: usize, u: usize) -> f64 {
        self.rows[x][u]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn check_model(&self, m: &CmdpModel) -> Result<()> {
        if self.states() != m.states() || self.actions() != m.actions() {
            return Err(Error::InvalidConfig(format!(
                "policy is {}x{}, model is {}x{}",
                self.states(),
                self.actions(),
                m.states(),
                m.actions()
            )));
        }
        Ok(())
    }
}

/// Spherical map: `φ(1|x) = cos²θ(x,1)`, `φ(u|x) = cos²θ(x,u) Π_{p<u} sin²θ(x,p)`,
/// `φ(U|x) = Π_{p<U} sin²θ(x,p)`. Angles are laid out state by state.
pub fn spherical_to_policy(angles: &[f64], states: usize, actions: usize) -> Result<Policy> {
    if actions == 0 || states == 0 {
        return Err(Error::InvalidConfig("states and actions must be >= 1".into()));
    }
    let per = actions - 1;
    if angles.len() != per * states {
        return Err(Error::mismatch("angle vector", per * states, angles.len()));
    }
    let rows = (0..states)
        .map(|x| {
            let th = &angles[x * per..(x + 1) * per];
            let mut row = Vec::with_capacity(actions);
            let mut tail = 1.0;
            for &t in th {
                let (s, c) = t.sin_cos();
                row.push(tail * c * c);
                tail *= s * s;
            }
            row.push(tail);
            // the terms telescope to one; renormalize the last bits of rounding
            let sum: f64 = row.iter().sum();
            row.iter().map(|p| p / sum).collect()
        })
        .collect();
    Ok(Policy { rows })
}

/// Inverse of [`spherical_to_policy`] with principal square roots, giving
/// angles in `[0, π/2]`. Fails on boundary policies where some φ = 0.
pub fn policy_to_spherical(policy: &Policy) -> Result<Vec<f64>> {
    let per = policy.actions() - 1;
    let mut out = Vec::with_capacity(per * policy.states());
    for (x, row) in policy.rows.iter().enumerate() {
        if row.iter().any(|&p| p <= 0.0) {
            return Err(Error::Degenerate(format!(
                "policy row {x} has a zero probability; angles are not unique"
            )));
        }
        // θ(x,u) splits the mass left after u - 1 actions into φ(u|x) and the
        // rest; atan2 stays well conditioned where acos would not
        for u in 0..per {
            let rest: f64 = row[u + 1..].iter().sum();
            out.push(rest.sqrt().atan2(row[u].sqrt()));
        }
    }
    Ok(out)
}

/// Reflects every angle into `[0, π/2]`. The policy map depends on each angle
/// only through cos², so the policy is unchanged.
pub fn fold_angles(angles: &mut [f64]) {
    for a in angles.iter_mut() {
        let r = a.rem_euclid(std::f64::consts::PI);
        *a = if r > FRAC_PI_2 { std::f64::consts::PI - r } else { r };
    }
}

/// Finite-horizon averages `(J_T, B_T)` along one simulated path from state 1.
pub fn simulate_cmdp(model: &CmdpModel, policy: &Policy, horizon: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    policy.check_model(model)?;
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    let s = &model.spec;
    let draw = |probs: &[f64], rng: &mut RngStream| {
        let r = rng.uniform();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if r < acc {
                return i;
            }
        }
        probs.len() - 1
    };
    let mut x = 0;
    let (mut j, mut b) = (0.0, 0.0);
    for _ in 0..horizon {
        let u = draw(&policy.rows[x], rng);
        j += s.rho[x][u];
        b += s.constraint_cost[x][u];
        x = draw(&s.p[u][x], rng);
    }
    let t = horizon as f64;
    Ok((j / t, b / t))
}

/// Sample-path penalized objective `J_T − λ(B_T − γ)²`.
pub fn simulate_cmdp_penalized(
    model: &CmdpModel,
    policy: &Policy,
    horizon: usize,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    let (j, b) = simulate_cmdp(model, policy, horizon, rng)?;
    Ok(j - lambda * (b - model.gamma()).powi(2))
}

/// Two-sided simultaneous-perturbation gradient of `f` at `theta`. Both
/// evaluations start from the same random state (common random numbers).
pub fn spsa_estimate<F>(mut f: F, theta: &[f64], c: f64, rng: &mut RngStream) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut RngStream) -> Result<f64>,
{
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("SPSA perturbation must be positive, got {c}")));
    }
    let delta: Vec<f64> = theta.iter().map(|_| rng.rademacher()).collect();
    let plus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + c * d).collect();
    let minus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t - c * d).collect();
    let mut shared = rng.clone();
    let fp = f(&plus, &mut shared)?;
    let mut shared = rng.clone();
    let fm = f(&minus, &mut shared)?;
    *rng = shared;
    let diff = (fp - fm) / (2.0 * c);
    Ok(delta.iter().map(|d| diff / d).collect())
}

/// SPSA gradient of the penalized objective in angle coordinates.
pub fn spsa_gradient(
    model: &CmdpModel,
    angles: &[f64],
    horizon: usize,
    c: f64,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (x, u) = (model.states(), model.actions());
    spsa_estimate(
        |a, r| simulate_cmdp_penalized(model, &spherical_to_policy(a, x, u)?, horizon, lambda, r),
        angles,
        c,
        rng,
    )
}

/// Long-run joint law of (state, action) with exact `J` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryJoint {
    /// `joint[x][u] = φ̄(x, u)`
    pub joint: Vec<Vec<f64>>,
    pub j: f64,
    pub b: f64,
    /// Max-norm residual of the balance equations.
    pub residual: f64,
}

/// Solves the balance equations by power iteration on the lazy state chain.
/// Runs from every start state and requires them to agree, otherwise the
/// chain has more than one recurrent class.
pub fn stationary_joint(model: &CmdpModel, policy: &Policy) -> Result<StationaryJoint> {
    policy.check_model(model)?;
    let s = &model.spec;
    let n = s.states;
    let chain: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..s.actions).map(|u| policy.rows[i][u] * s.p[u][i][j]).sum())
                .collect()
        })
        .collect();
    let step = |v: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[j] += v[i] * chain[i][j];
            }
        }
        // lazy chain: same stationary law, no periodicity
        w.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect()
    };
    let mut limits: Vec<Vec<f64>> = Vec::with_capacity(n);
    for start in 0..n {
        let mut v = vec![0.0; n];
        v[start] = 1.0;
        let mut converged = false;
        for _ in 0..MAX_POWER_ITERS {
            let w = step(&v);
            let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            if delta < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotUnichain {
                iterations: MAX_POWER_ITERS,
            });
        }
        let total: f64 = v.iter().sum();
        limits.push(v.iter().map(|p| p / total).collect());
    }
    let nu = &limits[0];
    for other in &limits[1..] {
        if nu.iter().zip(other).any(|(a, b)| (a - b).abs() > 1e-8) {
            return Err(Error::NotUnichain {
                iterations: MAX_POWER_ITERS,
            });
        }
    }
    let joint: Vec<Vec<f64>> = (0..n)
        .map(|x| (0..s.actions).map(|u| nu[x] * policy.rows[x][u]).collect())
        .collect();
    let mut residual = 0.0f64;
    for jx in 0..n {
        for a in 0..s.actions {
            let mut rhs = 0.0;
            for i in 0..n {
                for ab in 0..s.actions {
                    rhs += joint[i][ab] * s.p[ab][i][jx];
                }
            }
            residual = residual.max((joint[jx][a] - rhs * policy.rows[jx][a]).abs());
        }
    }
    let mass: f64 = joint.iter().flatten().sum();
    residual = residual.max((mass - 1.0).abs());
    if residual >= BALANCE_TOL {
        return Err(Error::NotUnichain {
            iterations: MAX_POWER_ITERS,
        });
    }
    let dot = |m: &Vec<Vec<f64>>| -> f64 {
        joint
            .iter()
            .zip(m)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
            .sum()
    };
    Ok(StationaryJoint {
        j: dot(&s.rho),
        b: dot(&s.constraint_cost),
        joint,
        residual,
    })
}

/// `J(φ) − λ(B(φ) − γ)²` from the exact stationary law.
pub fn ground_truth_penalized(model: &CmdpModel, policy: &Policy, lambda: f64) -> Result<f64> {
    let st = stationary_joint(model, policy)?;
    Ok(st.j - lambda * (st.b - model.gamma()).powi(2))
}

/// Settings for the forward agents' SPSA gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpsaSettings {
    pub horizon: usize,
    pub perturbation: f64,
}

impl Default for SpsaSettings {
    fn default() -> Self {
        SpsaSettings {
            horizon: 100,
            perturbation: 0.05,
        }
    }
}

/// Pools of `L` policies drawn with angles uniform on `[0, π/2]^N`, each
/// paired with an SPSA gradient of the penalized objective.
pub struct CmdpPools<'a> {
    model: &'a CmdpModel,
    spsa: SpsaSettings,
}

impl<'a> CmdpPools<'a> {
    pub fn new(model: &'a CmdpModel, spsa: SpsaSettings) -> Self {
        CmdpPools { model, spsa }
    }

    pub fn draw(&self, rng: &mut RngStream) -> Result<GradientSample> {
        let n = self.model.angle_dim();
        let angles: Vec<f64> = (0..n).map(|_| FRAC_PI_2 * rng.uniform()).collect();
        let g = spsa_gradient(
            self.model,
            &angles,
            self.spsa.horizon,
            self.spsa.perturbation,
            self.model.lambda(),
            rng,
        )?;
        GradientSample::new(ParamVector::new(angles)?, ParamVector::from_update(g, "SPSA gradient")?)
    }
}

impl PoolSource for CmdpPools<'_> {
    fn next_pool(&mut self, size: usize, rng: &mut RngStream) -> Option<Result<Vec<Cow<'_, GradientSample>>>> {
        Some((0..size).map(|_| self.draw(rng).map(Cow::Owned)).collect())
    }
}

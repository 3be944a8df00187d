//! Reward that switches between regimes following a slow Markov chain with
//! transition matrix `I + ηQ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forward::GradientOracle;
use crate::rng::RngStream;
use crate::vector::ParamVector;

fn check_generator(q: &[Vec<f64>]) -> Result<()> {
    let n = q.len();
    if n == 0 {
        return Err(Error::InvalidConfig("generator must be non-empty".into()));
    }
    for (i, row) in q.iter().enumerate() {
        if row.len() != n {
            return Err(Error::mismatch("generator row", n, row.len()));
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() || (i != j && *v < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "generator entry ({i}, {j}) = {v} is invalid"
                )));
            }
        }
        let s: f64 = row.iter().sum();
        if s.abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("generator row {i} sums to {s}, not 0")));
        }
    }
    Ok(())
}

/// Stationary law ν of an irreducible generator, `νQ = 0`, `Σν = 1`.
pub fn generator_stationary(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_generator(q)?;
    let n = q.len();
    let mut a = DMatrix::from_fn(n, n, |i, j| q[j][i]);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let nu = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Degenerate("generator is not irreducible".into()))?;
    Ok(nu.iter().copied().collect())
}

/// Regime-switching gradient oracle. The hyper-state is visible to callers
/// for scoring only; samplers see nothing but gradients.
pub struct SwitchingReward<'a> {
    generator: Vec<Vec<f64>>,
    eta: f64,
    transition: Vec<Vec<f64>>,
    oracles: Vec<Box<dyn GradientOracle + 'a>>,
    state: usize,
}

impl<'a> SwitchingReward<'a> {
    pub fn new(
        generator: Vec<Vec<f64>>,
        eta: f64,
        oracles: Vec<Box<dyn GradientOracle + 'a>>,
        initial_state: usize,
    ) -> Result<Self> {
        check_generator(&generator)?;
        let n = generator.len();
        if oracles.len() != n {
            return Err(Error::mismatch("regime oracles", n, oracles.len()));
        }
        let dim = oracles[0].dim();
        if let Some(o) = oracles.iter().find(|o| o.dim() != dim) {
            return Err(Error::mismatch("regime oracle dimension", dim, o.dim()));
        }
        if initial_state >= n {
            return Err(Error::mismatch("initial hyper-state", n, initial_state));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be >= 0, got {eta}")));
        }
        let transition: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 1.0 } else { 0.0 } + eta * generator[i][j])
                    .collect()
            })
            .collect();
        if let Some(i) = (0..n).find(|&i| transition[i][i] < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta = {eta} too large: I + eta Q has negative diagonal in row {i}"
            )));
        }
        Ok(SwitchingReward {
            generator,
            eta,
            transition,
            oracles,
            state: initial_state,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn num_states(&self) -> usize {
        self.generator.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    /// One transition of the hyper-state.
    pub fn switching_step(&mut self, rng: &mut RngStream) -> usize {
        if self.eta > 0.0 {
            let row = &self.transition[self.state];
            let r = rng.uniform();
            let mut acc = 0.0;
            let mut next = row.len() - 1;
            for (j, p) in row.iter().enumerate() {
                acc += p;
                if r < acc {
                    next = j;
                    break;
                }
            }
            self.state = next;
        }
        self.state
    }
}

impl GradientOracle for SwitchingReward<'_> {
    fn dim(&self) -> usize {
        self.oracles[0].dim()
    }

    fn gradient(&mut self, point: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        self.oracles[self.state].gradient(point, rng)
    }
}

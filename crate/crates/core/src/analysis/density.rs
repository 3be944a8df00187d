use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::irl::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub low: f64,
    pub high: f64,
    pub bins: usize,
}

impl Axis {
    pub fn new(low: f64, high: f64, bins: usize) -> Result<Self> {
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidConfig(format!("axis needs low < high, got [{low}, {high}]")));
        }
        if bins < 2 {
            return Err(Error::InvalidConfig(format!("axis needs >= 2 bins, got {bins}")));
        }
        Ok(Axis { low, high, bins })
    }

    pub fn width(&self) -> f64 {
        (self.high - self.low) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.low + (i as f64 + 0.5) * self.width()
    }

    /// Half-open bins `[low, high)`, except that `high` falls in the last bin.
    pub fn bin(&self, x: f64) -> Option<usize> {
        if x == self.high {
            return Some(self.bins - 1);
        }
        if !(x >= self.low && x < self.high) {
            return None;
        }
        let i = ((x - self.low) / self.width()).floor() as usize;
        Some(i.min(self.bins - 1))
    }
}

/// Dense rectangular grid, at most three dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Axis>", into = "Vec<Axis>")]
pub struct GridSpec {
    axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::InvalidConfig(format!(
                "dense grids support 1 to 3 dimensions, got {}",
                axes.len()
            )));
        }
        for a in &axes {
            Axis::new(a.low, a.high, a.bins)?;
        }
        Ok(GridSpec { axes })
    }

    pub fn uniform(low: f64, high: f64, bins: usize, dim: usize) -> Result<Self> {
        GridSpec::new(vec![Axis::new(low, high, bins)?; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn num_cells(&self) -> usize {
        self.axes.iter().map(|a| a.bins).product()
    }

    /// Row-major flat index, last axis fastest.
    pub fn cell_of(&self, point: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (a, &x) in self.axes.iter().zip(point) {
            flat = flat * a.bins + a.bin(x)?;
        }
        Some(flat)
    }

    pub fn indices(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.axes[d].bins;
            flat /= self.axes[d].bins;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.bins + i)
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.indices(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.center(i))
            .collect()
    }
}

impl TryFrom<Vec<Axis>> for GridSpec {
    type Error = Error;

    fn try_from(axes: Vec<Axis>) -> Result<Self> {
        GridSpec::new(axes)
    }
}

impl From<GridSpec> for Vec<Axis> {
    fn from(g: GridSpec) -> Self {
        g.axes
    }
}

/// Normalized histogram. Cell masses plus the out-of-range fraction sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDensity {
    grid: GridSpec,
    mass: Vec<f64>,
    out_of_range_fraction: f64,
    count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

impl EmpiricalDensity {
    /// Histogram of arbitrary points.
    pub fn from_points<'a, I>(points: I, grid: &GridSpec) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut counts = vec![0u64; grid.num_cells()];
        let mut outside = 0u64;
        let mut total = 0u64;
        for p in points {
            if p.len() != grid.dim() {
                return Err(Error::mismatch("grid vs sample", grid.dim(), p.len()));
            }
            total += 1;
            match grid.cell_of(p) {
                Some(c) => counts[c] += 1,
                None => outside += 1,
            }
        }
        if total == 0 {
            return Err(Error::Degenerate("no samples to histogram".into()));
        }
        let n = total as f64;
        let warning = (outside == total)
            .then(|| format!("all {total} samples fall outside the grid"));
        Ok(EmpiricalDensity {
            grid: grid.clone(),
            mass: counts.iter().map(|&c| c as f64 / n).collect(),
            out_of_range_fraction: outside as f64 / n,
            count: total as usize,
            warning,
        })
    }

    /// Wraps precomputed cell masses. They and `out_of_range` must be
    /// nonnegative and sum to one within 1e-12.
    pub fn from_masses(grid: &GridSpec, mass: Vec<f64>, out_of_range: f64) -> Result<Self> {
        if mass.len() != grid.num_cells() {
            return Err(Error::mismatch("cell masses", grid.num_cells(), mass.len()));
        }
        if mass.iter().chain([&out_of_range]).any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidConfig("cell masses must be finite and nonnegative".into()));
        }
        let total: f64 = mass.iter().sum::<f64>() + out_of_range;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("cell masses sum to {total}, not 1")));
        }
        Ok(EmpiricalDensity {
            grid: grid.clone(),
            mass,
            out_of_range_fraction: out_of_range,
            count: 0,
            warning: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn out_of_range_fraction(&self) -> f64 {
        self.out_of_range_fraction
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Mass divided by cell volume.
    pub fn pdf(&self) -> Vec<f64> {
        let vol: f64 = self.grid.axes().iter().map(|a| a.width()).product();
        self.mass.iter().map(|m| m / vol).collect()
    }

    /// 1-D marginal along `axis`. Out-of-range mass is carried over unchanged.
    pub fn marginal(&self, axis: usize) -> Result<EmpiricalDensity> {
        if axis >= self.grid.dim() {
            return Err(Error::mismatch("marginal axis", self.grid.dim(), axis));
        }
        let a = self.grid.axes()[axis];
        let mut mass = vec![0.0; a.bins];
        for (flat, m) in self.mass.iter().enumerate() {
            mass[self.grid.indices(flat)[axis]] += m;
        }
        Ok(EmpiricalDensity {
            grid: GridSpec::new(vec![a])?,
            mass,
            out_of_range_fraction: self.out_of_range_fraction,
            count: self.count,
            warning: self.warning.clone(),
        })
    }

    /// `log mass` per cell; empty cells are `None`.
    pub fn log_density(&self) -> Vec<Option<f64>> {
        self.mass
            .iter()
            .map(|&m| (m > 0.0).then(|| m.ln()))
            .collect()
    }

    /// CSV with one row per cell: `i_1..i_N,x_1..x_N,mass,log_mass` (`NA` when empty).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.grid.dim();
        let mut header: Vec<String> = (1..=n).map(|d| format!("i_{d}")).collect();
        header.extend((1..=n).map(|d| format!("x_{d}")));
        header.push("mass".into());
        header.push("log_mass".into());
        writeln!(out, "{}", header.join(","))?;
        for (flat, (m, lm)) in self.mass.iter().zip(self.log_density()).enumerate() {
            let idx = self.grid.indices(flat);
            let c = self.grid.center(flat);
            let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            row.extend(c.iter().map(|x| x.to_string()));
            row.push(m.to_string());
            row.push(lm.map_or_else(|| "NA".to_string(), |v| v.to_string()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Histogram of a trajectory's post-burn-in samples.
pub fn build_density(traj: &Trajectory, grid: &GridSpec) -> Result<EmpiricalDensity> {
    if traj.dim() != grid.dim() {
        return Err(Error::mismatch("grid vs trajectory", traj.dim(), grid.dim()));
    }
    EmpiricalDensity::from_points(traj.post_burn_in(), grid)
}

/// Half the L1 distance between two histograms on the same grid, with the
/// out-of-range mass treated as one extra cell.
pub fn variational_distance(a: &EmpiricalDensity, b: &EmpiricalDensity) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::InvalidConfig("variational distance needs identical grids".into()));
    }
    let inside: f64 = a.mass.iter().zip(&b.mass).map(|(x, y)| (x - y).abs()).sum();
    let d = 0.5 * (inside + (a.out_of_range_fraction - b.out_of_range_fraction).abs());
    Ok(d.clamp(0.0, 1.0))
}

/// Least-squares fit `y ≈ c0 + c1 x + c2 x²`.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    if xs.len() != ys.len() {
        return Err(Error::mismatch("quadratic fit", xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate("quadratic fit needs at least 3 points".into()));
    }
    let a = nalgebra::DMatrix::from_fn(xs.len(), 3, |r, c| xs[r].powi(c as i32));
    let y = nalgebra::DVector::from_column_slice(ys);
    let sol = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok([sol[0], sol[1], sol[2]])
}

/// A local maximum of a gridded function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mode {
    pub center: Vec<f64>,
    pub value: f64,
}

/// Local maxima of `values` over `grid` whose value is at least
/// `min_fraction` of the global maximum. With `smooth`, values are first
/// replaced by their 3^N neighbourhood mean. Sorted by value, largest first.
pub fn find_modes(grid: &GridSpec, values: &[f64], min_fraction: f64, smooth: bool) -> Result<Vec<Mode>> {
    if values.len() != grid.num_cells() {
        return Err(Error::mismatch("mode search", grid.num_cells(), values.len()));
    }
    let offsets = neighbour_offsets(grid.dim());
    let neighbours = |flat: usize| -> Vec<usize> {
        let idx = grid.indices(flat);
        offsets
            .iter()
            .filter_map(|off| {
                let mut j = Vec::with_capacity(idx.len());
                for ((&i, &o), a) in idx.iter().zip(off).zip(grid.axes()) {
                    let v = i as isize + o;
                    if v < 0 || v >= a.bins as isize {
                        return None;
                    }
                    j.push(v as usize);
                }
                Some(grid.flat(&j))
            })
            .collect()
    };
    let field: Vec<f64> = if smooth {
        (0..values.len())
            .map(|f| {
                let nb = neighbours(f);
                (values[f] + nb.iter().map(|&j| values[j]).sum::<f64>()) / (nb.len() + 1) as f64
            })
            .collect()
    } else {
        values.to_vec()
    };
    let peak = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Ok(Vec::new());
    }
    let mut modes: Vec<Mode> = (0..field.len())
        .filter(|&f| field[f] >= min_fraction * peak)
        .filter(|&f| {
            // ties are broken toward the lower flat index
            neighbours(f)
                .iter()
                .all(|&j| field[f] > field[j] || (field[f] == field[j] && f < j))
        })
        .map(|f| Mode {
            center: grid.center(f),
            value: field[f],
        })
        .collect();
    modes.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(modes)
}

fn neighbour_offsets(dim: usize) -> Vec<Vec<isize>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                [-1isize, 0, 1].into_iter().map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                })
            })
            .collect();
    }
    out.retain(|v| v.iter().any(|&o| o != 0));
    out
}

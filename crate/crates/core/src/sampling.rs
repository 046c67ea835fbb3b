//! Drawing configurations from `|ψ|²` and evaluating its marginal CDFs.
//!
//! `|ψ|²` is treated as piecewise constant on cells `[x_j − Δx/2, x_j + Δx/2)`
//! centred on the nodes (periodically wrapped). Sampling picks a cell with
//! probability `|ψ_j|²·ΔV` and jitters uniformly inside it; the marginal CDF
//! integrates the same piecewise-constant density, so the two agree exactly.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::state::Configuration;
use crate::wave::WaveFunction;

/// Inverse-CDF sampler over the grid cells of one state.
#[derive(Clone, Debug)]
pub struct CellSampler {
    cumulative: Vec<f64>,
}

impl CellSampler {
    pub fn new(psi: &WaveFunction) -> Result<Self> {
        Self::from_weights(psi.amplitudes().iter().map(|a| a.norm_sqr()))
    }

    pub fn from_weights(weights: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if !(acc.is_finite() && acc > 0.0) {
            return Err(Error::DegenerateState);
        }
        cumulative.iter_mut().for_each(|c| *c /= acc);
        Ok(CellSampler { cumulative })
    }

    /// Flat index of a random cell.
    pub fn sample_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    /// A random point: random cell plus uniform jitter, wrapped into the domain.
    pub fn sample_point<R: Rng + ?Sized>(&self, grid: &Grid, rng: &mut R) -> Vec<f64> {
        let flat = self.sample_cell(rng);
        grid.axes()
            .iter()
            .enumerate()
            .map(|(k, ax)| {
                let jitter: f64 = rng.random::<f64>() - 0.5;
                let x = ax.coord(grid.index_along(flat, k)) + jitter * ax.spacing();
                ax.wrap(x).0
            })
            .collect()
    }
}

/// Draws `Q(0)` from `|ψ0|²`.
pub fn sample_initial_configuration<R: Rng + ?Sized>(
    psi0: &WaveFunction,
    rng: &mut R,
) -> Result<Configuration> {
    let sampler = CellSampler::new(psi0)?;
    let grid = psi0.grid();
    Ok(Configuration::new(sampler.sample_point(grid, rng), grid.dim(), 0.0))
}

/// Uniform draw over the whole domain (a deliberately wrong initial law).
pub fn sample_uniform_configuration<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> Configuration {
    let q = grid
        .axes()
        .iter()
        .map(|ax| ax.lo + rng.random::<f64>() * ax.width())
        .collect();
    Configuration::new(q, grid.dim(), 0.0)
}

/// CDF of the marginal of `|ψ|²` along one axis, on `[lo, hi)`.
#[derive(Clone, Debug)]
pub struct MarginalCdf {
    lo: f64,
    spacing: f64,
    mass: Vec<f64>,
    /// `upper[j]` = F at the upper edge of cell `j`, i.e. at `x_j + Δx/2`.
    upper: Vec<f64>,
}

impl MarginalCdf {
    pub fn new(psi: &WaveFunction, axis: usize) -> Self {
        let ax = psi.grid().axis(axis);
        let mut mass = psi.marginal(axis);
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        let mut upper = Vec::with_capacity(mass.len());
        let mut acc = 0.5 * mass[0];
        upper.push(acc);
        for m in &mass[1..] {
            acc += m;
            upper.push(acc);
        }
        MarginalCdf {
            lo: ax.lo,
            spacing: ax.spacing(),
            mass,
            upper,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let m = self.mass.len();
        let u = (x - self.lo) / self.spacing;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= m as f64 {
            return 1.0;
        }
        if u < 0.5 {
            return u * self.mass[0];
        }
        if u >= m as f64 - 0.5 {
            return (1.0 - (m as f64 - u) * self.mass[0]).min(1.0);
        }
        let j = (u + 0.5).floor() as usize;
        let below = self.upper[j - 1];
        let frac = u - (j as f64 - 0.5);
        (below + frac * self.mass[j]).min(1.0)
    }
}

//! Collapse timing, the Gaussian localization operator and the three rules
//! for choosing the collapse center.
//!
//! Distances `q_i − X` use the minimum-image convention of the periodic grid;
//! for states localized away from the domain edges this is the plain
//! difference.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sampling::CellSampler;
use crate::state::Configuration;
use crate::wave::WaveFunction;

/// Collapses with `C` below this are treated as numerically void.
pub const VOID_THRESHOLD: f64 = 1e-300;

/// Isotropic `d`-dimensional Gaussian density `(2πσ²)^{−d/2}·exp(−q²/2σ²)`.
pub fn gaussian_g(q: &[f64], sigma: f64) -> f64 {
    let d = q.len() as f64;
    let r2: f64 = q.iter().map(|x| x * x).sum();
    (2.0 * PI * sigma * sigma).powf(-0.5 * d) * (-r2 / (2.0 * sigma * sigma)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseSchedule {
    pub time: f64,
    pub particle: usize,
}

/// Next collapse of the superposed rate-`λ` processes of `n` particles.
pub fn next_collapse<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    lambda: f64,
    t_now: f64,
) -> Result<CollapseSchedule> {
    if !(lambda > 0.0 && lambda.is_finite()) || n == 0 {
        return Err(Error::Usage(
            "collapse scheduling needs lambda > 0 (bohm_only runs must not schedule)".into(),
        ));
    }
    let wait: f64 = Exp::new(n as f64 * lambda)
        .expect("positive rate")
        .sample(rng);
    let particle = rng.random_range(0..n);
    Ok(CollapseSchedule {
        time: t_now + wait,
        particle,
    })
}

/// Per-axis factors `(2πσ²)^{−1/4}·exp(−Δ²/4σ²)` for each of particle `i`'s
/// axes; their product over axes is `√g(q_i − X)`.
fn root_g_factors(grid: &Grid, i: usize, center: &[f64], sigma: f64) -> Vec<Vec<f64>> {
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    (0..grid.dim())
        .map(|c| {
            let ax = grid.axis(grid.axis_of(i, c));
            (0..ax.points)
                .map(|j| {
                    let dx = ax.displacement(ax.coord(j), center[c]);
                    norm * (-dx * dx / (4.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect()
}

/// Multiplies raw amplitudes by `√g(q_i − X)`, normalizes, and returns `C`.
pub(crate) fn collapse_in_place(
    grid: &Grid,
    amps: &mut [Complex64],
    i: usize,
    center: &[f64],
    sigma: f64,
) -> Result<f64> {
    let factors = root_g_factors(grid, i, center, sigma);
    let axes: Vec<usize> = (0..grid.dim()).map(|c| grid.axis_of(i, c)).collect();
    for (flat, a) in amps.iter_mut().enumerate() {
        let f: f64 = axes
            .iter()
            .zip(&factors)
            .map(|(&k, fk)| fk[grid.index_along(flat, k)])
            .product();
        *a *= f;
    }
    let c = (crate::wave::norm_sq(amps, grid.cell_volume())).sqrt();
    if !(c >= VOID_THRESHOLD) || !c.is_finite() {
        return Err(Error::VoidCollapse { c, time: f64::NAN });
    }
    let inv = c.recip();
    amps.iter_mut().for_each(|a| *a *= inv);
    Ok(c)
}

/// `ψ_{T+} = √g(q_i − X)·ψ_{T−}/C`. Returns the collapsed state and `C`.
pub fn apply_collapse(psi: &WaveFunction, i: usize, center: &[f64], sigma: f64) -> Result<(WaveFunction, f64)> {
    let grid = psi.grid();
    let mut amps = psi.amplitudes().to_vec();
    let c = collapse_in_place(grid, &mut amps, i, center, sigma)?;
    Ok((WaveFunction::from_parts_unchecked(grid.clone(), amps), c))
}

/// Quadrature of `ρ(x) = ∫ |ψ|² g(q_i − x) dq` on the grid.
pub fn collapse_density_rho(psi: &WaveFunction, i: usize, x: &[f64], sigma: f64) -> f64 {
    collapse_density_raw(psi.grid(), psi.amplitudes(), i, x, sigma)
}

pub(crate) fn collapse_density_raw(grid: &Grid, amps: &[Complex64], i: usize, x: &[f64], sigma: f64) -> f64 {
    let d = grid.dim();
    let mut disp = [0.0; crate::grid::MAX_AXES];
    let total: f64 = amps
        .iter()
        .enumerate()
        .map(|(flat, a)| {
            for c in 0..d {
                let k = grid.axis_of(i, c);
                let ax = grid.axis(k);
                disp[c] = ax.displacement(ax.coord(grid.index_along(flat, k)), x[c]);
            }
            a.norm_sqr() * gaussian_g(&disp[..d], sigma)
        })
        .sum();
    total * grid.cell_volume()
}

/// `X = Q_i + Z` with `Z ~ g` drawn fresh.
pub fn choose_center_grwp<R: Rng + ?Sized>(
    q: &Configuration,
    i: usize,
    sigma: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = (0..q.dim)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    center_with_offset(q, i, z)
}

/// `X = Q_i + Z` for a given offset.
pub fn center_with_offset(q: &Configuration, i: usize, z: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let x = q.particle(i).iter().zip(&z).map(|(a, b)| a + b).collect();
    (x, z)
}

/// `X` drawn from `ρ`: `q ~ |ψ|²`, `Z ~ g`, `X = q_i + Z`. Returns `(X, Z)`.
pub fn choose_center_grw<R: Rng + ?Sized>(
    psi: &WaveFunction,
    i: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sampler = CellSampler::new(psi)?;
    Ok(sample_grw_center(&sampler, psi.grid(), i, sigma, rng))
}

pub(crate) fn sample_grw_center<R: Rng + ?Sized>(
    sampler: &CellSampler,
    grid: &Grid,
    i: usize,
    sigma: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let q = sampler.sample_point(grid, rng);
    let q = Configuration::new(q, grid.dim(), 0.0);
    choose_center_grwp(&q, i, sigma, rng)
}

/// `X = Q_i` exactly.
pub fn choose_center_pinned(q: &Configuration, i: usize) -> Vec<f64> {
    q.particle(i).to_vec()
}

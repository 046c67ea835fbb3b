//! Configuration-space grids.
//!
//! The configuration space of `N` particles in `d` dimensions has `D = N·d`
//! axes. Axis `i·d + c` carries coordinate `c` of particle `i`. Amplitudes are
//! stored row-major: the last axis is contiguous.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of configuration-space axes.
pub const MAX_AXES: usize = 3;

/// Smallest number of grid points allowed along an axis.
pub const MIN_POINTS: usize = 8;

/// One periodic axis `[lo, hi)` sampled at `points` nodes `lo + j·Δx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Axis { lo, hi, points }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn spacing(&self) -> f64 {
        self.width() / self.points as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.spacing()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Angular wavenumber of DFT bin `j` in standard FFT ordering.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let m = self.points as i64;
        let j = j as i64;
        let signed = if j < (m + 1) / 2 { j } else { j - m };
        2.0 * PI * signed as f64 / self.width()
    }

    /// Wavenumber used for spectral first derivatives: the unpaired Nyquist
    /// bin of an even-length axis is zeroed so real fields stay real.
    pub fn derivative_wavenumber(&self, j: usize) -> f64 {
        if self.points % 2 == 0 && j == self.points / 2 {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    /// Maps `x` periodically into `[lo, hi)`. Returns the wrapped value and
    /// whether a wrap happened.
    pub fn wrap(&self, x: f64) -> (f64, bool) {
        if x >= self.lo && x < self.hi {
            return (x, false);
        }
        let w = self.width();
        let mut y = self.lo + (x - self.lo).rem_euclid(w);
        if y >= self.hi {
            y = self.lo;
        }
        (y, true)
    }

    /// Minimum-image displacement `x - y` on the periodic axis.
    pub fn displacement(&self, x: f64, y: f64) -> f64 {
        let w = self.width();
        let d = x - y;
        d - w * (d / w).round()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    particles: usize,
    dim: usize,
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(particles: usize, dim: usize, axes: Vec<Axis>) -> Result<Self> {
        let mut errors = Vec::new();
        if particles == 0 {
            errors.push("particle count must be at least 1".to_string());
        }
        if !(1..=3).contains(&dim) {
            errors.push(format!("spatial dimension d={dim} must be 1, 2 or 3"));
        }
        let total = particles * dim;
        if total > MAX_AXES {
            errors.push(format!("D={total} exceeds desk-scale cap of {MAX_AXES}"));
        }
        if axes.len() != total {
            errors.push(format!(
                "grid has {} axes but N*d = {total}",
                axes.len()
            ));
        }
        for (k, ax) in axes.iter().enumerate() {
            if ax.points < MIN_POINTS {
                errors.push(format!(
                    "axis {k}: {} points, need at least {MIN_POINTS}",
                    ax.points
                ));
            }
            if !(ax.lo.is_finite() && ax.hi.is_finite() && ax.hi > ax.lo) {
                errors.push(format!("axis {k}: domain width must be positive"));
            }
        }
        if !errors.is_empty() {
            return Err(Error::InvalidConfig(errors));
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].points;
        }
        let len = axes.iter().map(|a| a.points).product();
        Ok(Grid {
            particles,
            dim,
            axes,
            strides,
            len,
        })
    }

    /// A grid for one particle on a single axis.
    pub fn line(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Grid::new(1, 1, vec![Axis::new(lo, hi, points)])
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of configuration-space axes `D = N·d`.
    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Volume element `∏ Δx_k`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(Axis::width).product()
    }

    /// Axis index carrying coordinate `component` of `particle`.
    pub fn axis_of(&self, particle: usize, component: usize) -> usize {
        particle * self.dim + component
    }

    /// Particle owning configuration-space axis `k`.
    pub fn particle_of(&self, k: usize) -> usize {
        k / self.dim
    }

    /// Index along axis `k` of the flat node index `flat`.
    pub fn index_along(&self, flat: usize, k: usize) -> usize {
        (flat / self.strides[k]) % self.axes[k].points
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(&j, &s)| j * s)
            .sum()
    }

    /// Coordinates of node `flat`.
    pub fn node(&self, flat: usize) -> [f64; MAX_AXES] {
        let mut x = [0.0; MAX_AXES];
        for (k, ax) in self.axes.iter().enumerate() {
            x[k] = ax.coord(self.index_along(flat, k));
        }
        x
    }

    /// Per-axis coordinate vectors.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        self.axes
            .iter()
            .map(|a| (0..a.points).map(|j| a.coord(j)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_four_axes() {
        let axes = vec![Axis::new(-1.0, 1.0, 8); 4];
        let err = Grid::new(2, 2, axes).unwrap_err();
        assert!(err.to_string().contains("D=4 exceeds desk-scale cap"));
    }

    #[test]
    fn strides_are_row_major() {
        let g = Grid::new(
            3,
            1,
            vec![
                Axis::new(0.0, 1.0, 8),
                Axis::new(0.0, 1.0, 10),
                Axis::new(0.0, 1.0, 12),
            ],
        )
        .unwrap();
        assert_eq!(g.strides(), &[120, 12, 1]);
        let flat = g.flat_index(&[3, 4, 5]);
        assert_eq!(g.index_along(flat, 0), 3);
        assert_eq!(g.index_along(flat, 1), 4);
        assert_eq!(g.index_along(flat, 2), 5);
    }

    #[test]
    fn wavenumbers_follow_fft_ordering() {
        let ax = Axis::new(0.0, 2.0 * PI, 8);
        let ks: Vec<f64> = (0..8).map(|j| ax.wavenumber(j)).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        assert_eq!(ax.derivative_wavenumber(4), 0.0);
    }

    #[test]
    fn wrap_and_displacement() {
        let ax = Axis::new(-1.0, 1.0, 8);
        assert_eq!(ax.wrap(0.5), (0.5, false));
        let (y, wrapped) = ax.wrap(1.25);
        assert!(wrapped);
        assert!((y + 0.75).abs() < 1e-15);
        assert!((ax.displacement(0.9, -0.9) + 0.2).abs() < 1e-15);
    }
}

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Tolerance on the discrete norm for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// A normalized complex field on a configuration-space grid.
///
/// The discrete norm is `Σ |ψ_j|² · ∏ Δx_k`.
#[derive(Clone, Debug)]
pub struct WaveFunction {
    grid: Arc<Grid>,
    amps: Vec<Complex64>,
}

impl WaveFunction {
    /// Wraps amplitudes that are already normalized.
    pub fn new(grid: Arc<Grid>, amps: Vec<Complex64>) -> Result<Self> {
        assert_eq!(amps.len(), grid.len(), "amplitude count must match grid");
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("wave function amplitudes"));
        }
        let n2 = norm_sq(&amps, grid.cell_volume());
        if (n2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(n2));
        }
        Ok(WaveFunction { grid, amps })
    }

    /// Normalizes arbitrary amplitudes.
    pub fn normalized(grid: Arc<Grid>, mut amps: Vec<Complex64>) -> Result<Self> {
        assert_eq!(amps.len(), grid.len(), "amplitude count must match grid");
        let n2 = norm_sq(&amps, grid.cell_volume());
        if !n2.is_finite() || n2 <= 0.0 {
            return Err(Error::DegenerateState);
        }
        let scale = n2.sqrt().recip();
        amps.iter_mut().for_each(|a| *a *= scale);
        Ok(WaveFunction { grid, amps })
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<Grid>, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), grid.len());
        WaveFunction { grid, amps }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.amps, self.grid.cell_volume())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Discrete inner product `⟨self, other⟩ = Σ conj(self_j)·other_j·ΔV`.
    pub fn inner(&self, other: &WaveFunction) -> Complex64 {
        let dv = self.grid.cell_volume();
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * dv
    }

    /// Discrete L2 distance `‖self − other‖`.
    pub fn distance(&self, other: &WaveFunction) -> f64 {
        let dv = self.grid.cell_volume();
        let s: f64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * dv).sqrt()
    }

    /// Cell probabilities `|ψ_j|² · ΔV`.
    pub fn cell_probabilities(&self) -> Vec<f64> {
        let dv = self.grid.cell_volume();
        self.amps.iter().map(|a| a.norm_sqr() * dv).collect()
    }

    /// Probability mass per node along axis `k`, summed over all other axes.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let grid = &self.grid;
        let mut out = vec![0.0; grid.axis(k).points];
        let dv = grid.cell_volume();
        for (flat, a) in self.amps.iter().enumerate() {
            out[grid.index_along(flat, k)] += a.norm_sqr() * dv;
        }
        out
    }

    /// `⟨x_k⟩` and `Var(x_k)` by direct quadrature of `|ψ|²`.
    pub fn moments(&self, k: usize) -> (f64, f64) {
        let ax = self.grid.axis(k);
        let m = self.marginal(k);
        let mean: f64 = m.iter().enumerate().map(|(j, p)| p * ax.coord(j)).sum();
        let var: f64 = m
            .iter()
            .enumerate()
            .map(|(j, p)| p * (ax.coord(j) - mean).powi(2))
            .sum();
        (mean, var)
    }
}

pub(crate) fn norm_sq(amps: &[Complex64], cell_volume: f64) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * cell_volume
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_and_non_finite() {
        let grid = Arc::new(Grid::line(0.0, 1.0, 8).unwrap());
        let amps = vec![Complex64::new(2.0, 0.0); 8];
        assert!(matches!(
            WaveFunction::new(grid.clone(), amps.clone()),
            Err(Error::NotNormalized(_))
        ));
        let mut bad = amps.clone();
        bad[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            WaveFunction::new(grid.clone(), bad),
            Err(Error::NonFinite(_))
        ));
        let psi = WaveFunction::normalized(grid.clone(), amps).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-15);
        assert!(matches!(
            WaveFunction::normalized(grid, vec![Complex64::new(0.0, 0.0); 8]),
            Err(Error::DegenerateState)
        ));
    }
}

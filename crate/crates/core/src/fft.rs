//! Multi-dimensional FFTs over row-major grids, built from 1D `rustfft` plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Reusable buffers for one thread of work.
#[derive(Debug, Default)]
pub struct FftScratch {
    work: Vec<Complex64>,
    lines: Vec<Complex64>,
}

pub struct FftNd {
    shape: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    scratch_len: usize,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("shape", &self.shape).finish()
    }
}

impl FftNd {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let shape = grid.shape();
        let forward: Vec<_> = shape.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        let inverse: Vec<_> = shape.iter().map(|&m| planner.plan_fft_inverse(m)).collect();
        let scratch_len = forward
            .iter()
            .chain(&inverse)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        FftNd {
            strides: grid.strides().to_vec(),
            len: grid.len(),
            shape,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut FftScratch) {
        self.transform(data, &self.forward, scratch);
    }

    /// Inverse transform in place, including the `1/len` factor.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut FftScratch) {
        self.transform(data, &self.inverse, scratch);
        let s = 1.0 / self.len as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>], scratch: &mut FftScratch) {
        assert_eq!(data.len(), self.len);
        if scratch.work.len() < self.scratch_len {
            scratch.work.resize(self.scratch_len, Complex64::default());
        }
        let last = self.shape.len() - 1;
        // Last axis is contiguous: rustfft handles the batch directly.
        plans[last].process_with_scratch(data, &mut scratch.work[..self.scratch_len]);
        for k in 0..last {
            let m = self.shape[k];
            let stride = self.strides[k];
            let outer = self.len / (m * stride);
            scratch.lines.resize(self.len, Complex64::default());
            // Gather every line along axis k into contiguous storage.
            let mut line = 0;
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * m * stride + s;
                    let dst = &mut scratch.lines[line * m..(line + 1) * m];
                    for (j, z) in dst.iter_mut().enumerate() {
                        *z = data[base + j * stride];
                    }
                    line += 1;
                }
            }
            plans[k].process_with_scratch(&mut scratch.lines, &mut scratch.work[..self.scratch_len]);
            let mut line = 0;
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * m * stride + s;
                    let src = &scratch.lines[line * m..(line + 1) * m];
                    for (j, z) in src.iter().enumerate() {
                        data[base + j * stride] = *z;
                    }
                    line += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use std::f64::consts::PI;

    fn naive_dft(grid: &Grid, data: &[Complex64]) -> Vec<Complex64> {
        let shape = grid.shape();
        (0..grid.len())
            .map(|out| {
                let mut acc = Complex64::default();
                for (inp, z) in data.iter().enumerate() {
                    let mut phase = 0.0;
                    for (k, &m) in shape.iter().enumerate() {
                        let a = grid.index_along(out, k) as f64;
                        let b = grid.index_along(inp, k) as f64;
                        phase -= 2.0 * PI * a * b / m as f64;
                    }
                    acc += z * Complex64::from_polar(1.0, phase);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_three_dimensions() {
        let grid = Grid::new(
            3,
            1,
            vec![
                Axis::new(0.0, 1.0, 8),
                Axis::new(0.0, 1.0, 10),
                Axis::new(0.0, 1.0, 12),
            ],
        )
        .unwrap();
        let data: Vec<Complex64> = (0..grid.len())
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos()))
            .collect();
        let fft = FftNd::new(&grid);
        let mut scratch = FftScratch::default();
        let mut fast = data.clone();
        fft.forward(&mut fast, &mut scratch);
        let slow = naive_dft(&grid, &data);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
        fft.inverse(&mut fast, &mut scratch);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}

//! Unitary propagation between collapses by Strang splitting: half potential
//! phase, full kinetic phase in Fourier space, half potential phase. With
//! `V = 0` the step is the exact free evolution of the periodic band-limited
//! state.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fft::{FftNd, FftScratch};
use crate::grid::{Axis, Grid};
use crate::params::PhysicalParams;
use crate::wave::WaveFunction;

/// Precomputed phase multipliers for one step size.
#[derive(Debug)]
pub struct PropagatorPlan {
    grid: Arc<Grid>,
    fft: FftNd,
    dt: f64,
    /// `Σ_k ħ k_k² / 2m_k` at each frequency node.
    kinetic_freq: Vec<f64>,
    /// `V/ħ` at each spatial node; `None` when the potential vanishes.
    potential_freq: Option<Vec<f64>>,
    kinetic_phase: Vec<Complex64>,
    potential_half_phase: Option<Vec<Complex64>>,
}

impl PropagatorPlan {
    pub fn new(grid: Arc<Grid>, params: &PhysicalParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Usage(format!("step size must be positive, got {dt}")));
        }
        let masses = params.axis_masses(&grid);
        let hbar = params.hbar;
        let kinetic_freq: Vec<f64> = (0..grid.len())
            .map(|flat| {
                (0..grid.ndim())
                    .map(|k| {
                        let kk = grid.axis(k).wavenumber(grid.index_along(flat, k));
                        hbar * kk * kk / (2.0 * masses[k])
                    })
                    .sum()
            })
            .collect();
        let potential_freq = params
            .potential
            .sample(&grid, &params.masses)
            .map(|v| v.into_iter().map(|x| x / hbar).collect::<Vec<_>>());
        let kinetic_phase = phases(&kinetic_freq, dt);
        let potential_half_phase = potential_freq.as_deref().map(|v| phases(v, 0.5 * dt));
        Ok(PropagatorPlan {
            fft: FftNd::new(&grid),
            grid,
            dt,
            kinetic_freq,
            potential_freq,
            kinetic_phase,
            potential_half_phase,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn fft(&self) -> &FftNd {
        &self.fft
    }

    pub fn kinetic_phases(&self) -> &[Complex64] {
        &self.kinetic_phase
    }

    pub fn potential_half_phases(&self) -> Option<&[Complex64]> {
        self.potential_half_phase.as_deref()
    }

    pub fn has_potential(&self) -> bool {
        self.potential_freq.is_some()
    }

    /// One Strang step of length `dt_override` (or the plan's `dt`).
    pub fn step(&self, psi: &WaveFunction, dt_override: Option<f64>) -> Result<WaveFunction> {
        assert!(Arc::ptr_eq(psi.grid(), &self.grid) || **psi.grid() == *self.grid);
        let mut amps = psi.amplitudes().to_vec();
        let mut scratch = FftScratch::default();
        self.step_in_place(&mut amps, dt_override, &mut scratch)?;
        Ok(WaveFunction::from_parts_unchecked(psi.grid().clone(), amps))
    }

    /// In-place Strang step on raw amplitudes.
    pub fn step_in_place(
        &self,
        amps: &mut [Complex64],
        dt_override: Option<f64>,
        scratch: &mut FftScratch,
    ) -> Result<()> {
        match dt_override {
            Some(h) if h != self.dt => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::Usage(format!("step size must be positive, got {h}")));
                }
                let pot = self.potential_freq.as_deref().map(|v| phases(v, 0.5 * h));
                let kin = phases(&self.kinetic_freq, h);
                self.apply(amps, pot.as_deref(), &kin, scratch);
            }
            _ => self.apply(
                amps,
                self.potential_half_phase.as_deref(),
                &self.kinetic_phase,
                scratch,
            ),
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("propagated amplitudes"));
        }
        Ok(())
    }

    fn apply(
        &self,
        amps: &mut [Complex64],
        potential_half: Option<&[Complex64]>,
        kinetic: &[Complex64],
        scratch: &mut FftScratch,
    ) {
        if let Some(p) = potential_half {
            amps.iter_mut().zip(p).for_each(|(a, p)| *a *= p);
        }
        self.fft.forward(amps, scratch);
        amps.iter_mut().zip(kinetic).for_each(|(a, k)| *a *= k);
        self.fft.inverse(amps, scratch);
        if let Some(p) = potential_half {
            amps.iter_mut().zip(p).for_each(|(a, p)| *a *= p);
        }
    }
}

fn phases(freq: &[f64], dt: f64) -> Vec<Complex64> {
    freq.iter()
        .map(|w| Complex64::from_polar(1.0, -w * dt))
        .collect()
}

/// Free-particle Gaussian `ψ0(x) ∝ exp(−(x−mean)²/4s0² + i k x)` along one
/// axis and its exact evolution under `V = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeGaussian {
    pub mean: f64,
    pub s0: f64,
    pub k: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl FreeGaussian {
    /// `ħt / 2ms0²`.
    fn tau(&self, t: f64) -> f64 {
        self.hbar * t / (2.0 * self.mass * self.s0 * self.s0)
    }

    fn group_velocity(&self) -> f64 {
        self.hbar * self.k / self.mass
    }

    pub fn amplitude(&self, x: f64, t: f64) -> Complex64 {
        let one_it = Complex64::new(1.0, self.tau(t));
        let y = x - self.mean - self.group_velocity() * t;
        let pref = (2.0 * std::f64::consts::PI * self.s0 * self.s0).powf(-0.25) / one_it.sqrt();
        let exponent = -Complex64::new(y * y, 0.0) / (4.0 * self.s0 * self.s0 * one_it)
            + Complex64::new(0.0, self.k * x - 0.5 * self.hbar * self.k * self.k * t / self.mass);
        pref * exponent.exp()
    }

    /// Standard deviation of `|ψ_t|²`: `s0·√(1 + τ²)`.
    pub fn density_std(&self, t: f64) -> f64 {
        self.s0 * (1.0 + self.tau(t).powi(2)).sqrt()
    }

    pub fn density_mean(&self, t: f64) -> f64 {
        self.mean + self.group_velocity() * t
    }

    /// Guidance velocity `(ħ/m)·∂_x arg ψ` at `(x, t)`.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let tau = self.tau(t);
        let y = x - self.density_mean(t);
        (self.hbar / self.mass) * (self.k + y * tau / (2.0 * self.s0 * self.s0 * (1.0 + tau * tau)))
    }

    /// Exact guided path from `x0`: the flow scales distances from the moving
    /// mean by `s(t)/s0`.
    pub fn bohm_path(&self, x0: f64, t: f64) -> f64 {
        self.density_mean(t) + (x0 - self.mean) * self.density_std(t) / self.s0
    }
}

/// Product of per-axis free Gaussians evaluated on the grid at time `t`.
pub fn analytic_free_gaussian(grid: &Arc<Grid>, packets: &[FreeGaussian], t: f64) -> Result<WaveFunction> {
    assert_eq!(packets.len(), grid.ndim());
    let amps = (0..grid.len())
        .map(|flat| {
            let x = grid.node(flat);
            packets
                .iter()
                .enumerate()
                .map(|(k, p)| p.amplitude(x[k], t))
                .product()
        })
        .collect();
    WaveFunction::new(grid.clone(), amps)
}

/// Harmonic-oscillator coherent state with classical orbit through
/// `(x0, p0)` at `t = 0`, ground-state width `√(ħ/2mω)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentState {
    pub omega: f64,
    pub mass: f64,
    pub hbar: f64,
    pub x0: f64,
    pub p0: f64,
}

impl CoherentState {
    pub fn ground_width(&self) -> f64 {
        (self.hbar / (2.0 * self.mass * self.omega)).sqrt()
    }

    pub fn classical(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega * t).sin_cos();
        let m_w = self.mass * self.omega;
        (self.x0 * c + self.p0 / m_w * s, self.p0 * c - m_w * self.x0 * s)
    }

    /// `e^{−iωt/2}·⟨x|α(t)⟩`, the exact solution including its global phase.
    pub fn amplitude(&self, x: f64, t: f64) -> Complex64 {
        let (xc, pc) = self.classical(t);
        let a = self.mass * self.omega / self.hbar;
        let pref = (a / std::f64::consts::PI).powf(0.25);
        let re = -0.5 * a * (x - xc).powi(2);
        let im = pc * x / self.hbar - xc * pc / (2.0 * self.hbar) - 0.5 * self.omega * t;
        pref * Complex64::new(re, im).exp()
    }

    pub fn on_grid(&self, grid: &Arc<Grid>, t: f64) -> Result<WaveFunction> {
        assert_eq!(grid.ndim(), 1);
        let ax = grid.axis(0);
        let amps = (0..ax.points).map(|j| self.amplitude(ax.coord(j), t)).collect();
        WaveFunction::new(grid.clone(), amps)
    }
}

/// Analytic mass of `Normal(mean, s0²)` outside `[lo, hi)`.
fn tail_mass(ax: &Axis, mean: f64, s0: f64) -> f64 {
    let z = std::f64::consts::SQRT_2 * s0;
    0.5 * erfc((mean - ax.lo) / z) + 0.5 * erfc((ax.hi - mean) / z)
}

/// Largest packet mass allowed outside the domain.
pub const PACKET_TAIL_LIMIT: f64 = 1e-10;

/// Normalized `ψ(x) ∝ exp(−Σ (x_k − mean_k)²/4s0_k² + i k·x)` on the grid.
pub fn build_gaussian_packet(
    grid: &Arc<Grid>,
    mean: &[f64],
    s0: &[f64],
    k: &[f64],
) -> Result<WaveFunction> {
    let d = grid.ndim();
    assert!(mean.len() == d && s0.len() == d && k.len() == d);
    if s0.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Usage("packet width must be positive".into()));
    }
    let inside: f64 = grid
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| 1.0 - tail_mass(ax, mean[a], s0[a]))
        .product();
    let outside = 1.0 - inside;
    if outside >= PACKET_TAIL_LIMIT || grid.axes().iter().zip(mean).any(|(ax, &m)| !ax.contains(m)) {
        return Err(Error::PacketTooWide(outside));
    }
    let amps = (0..grid.len())
        .map(|flat| {
            let x = grid.node(flat);
            let (mut re, mut im) = (0.0, 0.0);
            for a in 0..d {
                re -= (x[a] - mean[a]).powi(2) / (4.0 * s0[a] * s0[a]);
                im += k[a] * x[a];
            }
            Complex64::new(re, im).exp()
        })
        .collect();
    WaveFunction::normalized(grid.clone(), amps)
}

/// `|ψ|²` weight on nodes within `margin_cells` of any domain edge.
pub fn boundary_mass(psi: &WaveFunction, margin_cells: usize) -> f64 {
    let grid = psi.grid();
    boundary_mass_raw(grid, psi.amplitudes(), margin_cells)
}

pub(crate) fn boundary_mass_raw(grid: &Grid, amps: &[Complex64], margin_cells: usize) -> f64 {
    let margin = margin_cells.max(1);
    let dv = grid.cell_volume();
    let mut total = 0.0;
    for (flat, a) in amps.iter().enumerate() {
        let near = grid.axes().iter().enumerate().any(|(k, ax)| {
            let j = grid.index_along(flat, k);
            j < margin || j + margin >= ax.points
        });
        if near {
            total += a.norm_sqr();
        }
    }
    total * dv
}

const DUMP_MAGIC: &[u8; 8] = b"GRWPPSI1";

/// Writes `ψ` as a little-endian binary record: magic, axis count (u32),
/// per axis `lo`, `hi` (f64) and `points` (u64), then interleaved re/im f64.
pub fn write_dump<W: Write>(psi: &WaveFunction, mut w: W) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    let grid = psi.grid();
    w.write_all(&(grid.ndim() as u32).to_le_bytes())?;
    for ax in grid.axes() {
        w.write_all(&ax.lo.to_le_bytes())?;
        w.write_all(&ax.hi.to_le_bytes())?;
        w.write_all(&(ax.points as u64).to_le_bytes())?;
    }
    for z in psi.amplitudes() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dump back as axes and raw amplitudes.
pub fn read_dump<R: Read>(mut r: R) -> Result<(Vec<Axis>, Vec<Complex64>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Parse {
            line: 0,
            msg: "not a wave-function dump".into(),
        });
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let ndim = u32::from_le_bytes(b4) as usize;
    let word = |r: &mut R| -> Result<[u8; 8]> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let mut axes = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let lo = f64::from_le_bytes(word(&mut r)?);
        let hi = f64::from_le_bytes(word(&mut r)?);
        let points = u64::from_le_bytes(word(&mut r)?) as usize;
        axes.push(Axis::new(lo, hi, points));
    }
    let len: usize = axes.iter().map(|a| a.points).product();
    let mut amps = Vec::with_capacity(len);
    for _ in 0..len {
        let re = f64::from_le_bytes(word(&mut r)?);
        let im = f64::from_le_bytes(word(&mut r)?);
        amps.push(Complex64::new(re, im));
    }
    Ok((axes, amps))
}

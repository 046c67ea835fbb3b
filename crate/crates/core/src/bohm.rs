//! The guidance law: velocity fields `v_k = (ħ/m_k)·Im(∂_kψ/ψ)` computed
//! spectrally on the grid, interpolated to the actual configuration, and
//! integrated with the explicit midpoint rule.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{FftNd, FftScratch};
use crate::grid::{Grid, MAX_AXES};
use crate::params::PhysicalParams;
use crate::schrodinger::PropagatorPlan;
use crate::state::Configuration;
use crate::wave::WaveFunction;

/// Relative size of the additive regularization `ε = 1e−12·max|ψ|²`.
pub const REGULARIZATION: f64 = 1e-12;

/// Fraction of a cell a particle may cross per full time step.
pub const CLAMP_CELL_FRACTION: f64 = 0.25;

/// Node velocities, interleaved: `values[node·D + k]`.
#[derive(Clone, Debug)]
pub struct VelocityField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    epsilon: f64,
    time: f64,
}

impl VelocityField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Velocity vector at node `flat`.
    pub fn at_node(&self, flat: usize) -> &[f64] {
        let d = self.grid.ndim();
        &self.values[flat * d..(flat + 1) * d]
    }

    /// A spatially constant field (test fixture and control).
    pub fn uniform(grid: Arc<Grid>, v: &[f64]) -> Self {
        assert_eq!(v.len(), grid.ndim());
        let values = (0..grid.len()).flat_map(|_| v.iter().copied()).collect();
        VelocityField {
            grid,
            values,
            epsilon: 0.0,
            time: 0.0,
        }
    }
}

#[derive(Debug, Default)]
pub struct GuidanceScratch {
    fft: FftScratch,
    spectrum: Vec<Complex64>,
    gradient: Vec<Complex64>,
}

/// Spectral gradient machinery for one grid and set of masses.
#[derive(Debug)]
pub struct Guidance {
    grid: Arc<Grid>,
    fft: FftNd,
    /// `ħ/m_k` per axis.
    factors: Vec<f64>,
    /// Derivative wavenumber of axis `k` at every flat index.
    wavenumbers: Vec<Vec<f64>>,
}

impl Guidance {
    pub fn new(grid: Arc<Grid>, params: &PhysicalParams) -> Self {
        let factors = params
            .axis_masses(&grid)
            .into_iter()
            .map(|m| params.hbar / m)
            .collect();
        let wavenumbers = (0..grid.ndim())
            .map(|k| {
                let ax = grid.axis(k);
                (0..grid.len())
                    .map(|flat| ax.derivative_wavenumber(grid.index_along(flat, k)))
                    .collect()
            })
            .collect();
        Guidance {
            fft: FftNd::new(&grid),
            grid,
            factors,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Velocity field of the raw amplitudes `amps`.
    pub fn field(&self, amps: &[Complex64], time: f64, scratch: &mut GuidanceScratch) -> VelocityField {
        let grid = &self.grid;
        let d = grid.ndim();
        let max_density = amps.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
        let epsilon = REGULARIZATION * max_density;

        scratch.spectrum.clear();
        scratch.spectrum.extend_from_slice(amps);
        self.fft.forward(&mut scratch.spectrum, &mut scratch.fft);

        let mut values = vec![0.0; grid.len() * d];
        for k in 0..d {
            let ks = &self.wavenumbers[k];
            scratch.gradient.clear();
            scratch.gradient.extend(
                scratch
                    .spectrum
                    .iter()
                    .zip(ks)
                    .map(|(z, &kk)| Complex64::new(-z.im * kk, z.re * kk)),
            );
            self.fft.inverse(&mut scratch.gradient, &mut scratch.fft);
            let factor = self.factors[k];
            for ((v, psi), grad) in values.iter_mut().skip(k).step_by(d).zip(amps).zip(&scratch.gradient) {
                let current = psi.re * grad.im - psi.im * grad.re;
                *v = factor * current / (psi.norm_sqr() + epsilon);
            }
        }
        VelocityField {
            grid: grid.clone(),
            values,
            epsilon,
            time,
        }
    }
}

/// Velocity field of `ψ` (builds its own FFT plans).
pub fn velocity_field(psi: &WaveFunction, params: &PhysicalParams) -> VelocityField {
    let guidance = Guidance::new(psi.grid().clone(), params);
    guidance.field(psi.amplitudes(), 0.0, &mut GuidanceScratch::default())
}

/// Per-axis speed limit `0.25·Δx_k/dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampLimits {
    vmax: [f64; MAX_AXES],
}

impl ClampLimits {
    pub fn new(grid: &Grid, dt: f64) -> Self {
        let mut vmax = [f64::INFINITY; MAX_AXES];
        for (k, ax) in grid.axes().iter().enumerate() {
            vmax[k] = CLAMP_CELL_FRACTION * ax.spacing() / dt;
        }
        ClampLimits { vmax }
    }

    pub fn unlimited() -> Self {
        ClampLimits {
            vmax: [f64::INFINITY; MAX_AXES],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GuidanceCounters {
    pub evaluations: u64,
    pub clamps: u64,
    pub wraps: u64,
}

/// Multilinear interpolation of the node velocities to `q`, clamped per axis.
pub fn velocity_at(
    field: &VelocityField,
    q: &[f64],
    limits: &ClampLimits,
    counters: &mut GuidanceCounters,
) -> [f64; MAX_AXES] {
    let grid = &field.grid;
    let d = grid.ndim();
    debug_assert_eq!(q.len(), d);
    let mut lower = [0usize; MAX_AXES];
    let mut upper = [0usize; MAX_AXES];
    let mut frac = [0.0; MAX_AXES];
    for (k, ax) in grid.axes().iter().enumerate() {
        let u = (q[k] - ax.lo) / ax.spacing();
        let base = u.floor();
        frac[k] = u - base;
        let j = (base as i64).rem_euclid(ax.points as i64) as usize;
        lower[k] = j;
        upper[k] = (j + 1) % ax.points;
    }
    let strides = grid.strides();
    let mut v = [0.0; MAX_AXES];
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0;
        for k in 0..d {
            if corner >> k & 1 == 1 {
                w *= frac[k];
                flat += upper[k] * strides[k];
            } else {
                w *= 1.0 - frac[k];
                flat += lower[k] * strides[k];
            }
        }
        if w == 0.0 {
            continue;
        }
        for (k, vk) in field.at_node(flat).iter().enumerate() {
            v[k] += w * vk;
        }
    }
    counters.evaluations += 1;
    for k in 0..d {
        let limit = limits.vmax[k];
        if v[k].abs() > limit {
            v[k] = limit.copysign(v[k]);
            counters.clamps += 1;
        }
    }
    v
}

/// One explicit midpoint step of length `h` given the fields at the start and
/// middle of the step.
pub fn advance_with_fields(
    q: &Configuration,
    now: &VelocityField,
    mid: &VelocityField,
    h: f64,
    limits: &ClampLimits,
    counters: &mut GuidanceCounters,
) -> Result<Configuration> {
    let grid = now.grid.clone();
    let d = grid.ndim();
    let k1 = velocity_at(now, &q.positions, limits, counters);
    let q_mid: Vec<f64> = (0..d).map(|k| q.positions[k] + 0.5 * h * k1[k]).collect();
    let k2 = velocity_at(mid, &q_mid, limits, counters);
    let mut out = Vec::with_capacity(d);
    for (k, ax) in grid.axes().iter().enumerate() {
        let x = q.positions[k] + h * k2[k];
        if !x.is_finite() {
            return Err(Error::NonFinite("particle position"));
        }
        let (x, wrapped) = ax.wrap(x);
        counters.wraps += u64::from(wrapped);
        out.push(x);
    }
    Ok(Configuration::new(out, q.dim, q.time + h))
}

/// Midpoint step from the states at `t` and `t + dt/2`.
pub fn advance_trajectory(
    guidance: &Guidance,
    q: &Configuration,
    psi_now: &WaveFunction,
    psi_mid: &WaveFunction,
    dt: f64,
    limits: &ClampLimits,
    counters: &mut GuidanceCounters,
) -> Result<Configuration> {
    if !(dt > 0.0) {
        return Err(Error::Usage("time step must be positive".into()));
    }
    let mut scratch = GuidanceScratch::default();
    let now = guidance.field(psi_now.amplitudes(), q.time, &mut scratch);
    let mid = guidance.field(psi_mid.amplitudes(), q.time + 0.5 * dt, &mut scratch);
    advance_with_fields(q, &now, &mid, dt, limits, counters)
}

/// A wave function together with its velocity field, advanced in lockstep.
///
/// Each step of length `h` is taken as two Strang half-steps so that the
/// midpoint state `ψ(t + h/2)` needed by the midpoint rule is materialized.
#[derive(Clone, Debug)]
pub struct GuidedState {
    pub amps: Vec<Complex64>,
    pub field: VelocityField,
    pub time: f64,
}

#[derive(Debug, Default)]
pub struct StepScratch {
    pub(crate) fft: FftScratch,
    pub(crate) guidance: GuidanceScratch,
}

/// Evolution driver pairing a half-step propagator with the guidance context.
#[derive(Debug)]
pub struct Guide {
    /// Propagator built for half of the nominal step.
    pub half_plan: PropagatorPlan,
    pub guidance: Guidance,
    pub dt: f64,
    pub limits: ClampLimits,
}

impl Guide {
    pub fn new(grid: Arc<Grid>, params: &PhysicalParams, dt: f64) -> Result<Self> {
        Ok(Guide {
            half_plan: PropagatorPlan::new(grid.clone(), params, 0.5 * dt)?,
            limits: ClampLimits::new(&grid, dt),
            guidance: Guidance::new(grid, params),
            dt,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.guidance.grid()
    }

    pub fn start(&self, amps: Vec<Complex64>, time: f64, scratch: &mut StepScratch) -> GuidedState {
        let field = self.guidance.field(&amps, time, &mut scratch.guidance);
        GuidedState { amps, field, time }
    }

    /// Advances `state` by `h`; returns the midpoint field. `state.field` is
    /// left holding the field at the new time.
    pub fn step_psi(&self, state: &mut GuidedState, h: f64, scratch: &mut StepScratch) -> Result<VelocityField> {
        let half = if h == self.dt { None } else { Some(0.5 * h) };
        self.half_plan.step_in_place(&mut state.amps, half, &mut scratch.fft)?;
        let mid = self
            .guidance
            .field(&state.amps, state.time + 0.5 * h, &mut scratch.guidance);
        self.half_plan.step_in_place(&mut state.amps, half, &mut scratch.fft)?;
        state.time += h;
        state.field = self.guidance.field(&state.amps, state.time, &mut scratch.guidance);
        Ok(mid)
    }

    /// Advances ψ and `q` together by `h`.
    pub fn step(
        &self,
        state: &mut GuidedState,
        q: &Configuration,
        h: f64,
        scratch: &mut StepScratch,
        counters: &mut GuidanceCounters,
    ) -> Result<Configuration> {
        let now = state.field.clone();
        let mid = self.step_psi(state, h, scratch)?;
        let mut next = advance_with_fields(q, &now, &mid, h, &self.limits, counters)?;
        next.time = state.time;
        Ok(next)
    }
}

/// Pure guided evolution with no collapses: `steps` full steps of `dt` from
/// `(ψ0, Q0)`, returning the configuration after each step.
pub fn integrate_path(
    guide: &Guide,
    psi0: &WaveFunction,
    q0: &Configuration,
    steps: usize,
) -> Result<Vec<Configuration>> {
    let mut scratch = StepScratch::default();
    let mut state = guide.start(psi0.amplitudes().to_vec(), q0.time, &mut scratch);
    let mut q = q0.clone();
    let mut counters = GuidanceCounters::default();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        q = guide.step(&mut state, &q, guide.dt, &mut scratch, &mut counters)?;
        out.push(q.clone());
    }
    Ok(out)
}

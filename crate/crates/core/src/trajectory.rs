//! One realization of the dynamics: `Q(0) ~ |ψ0|²`, then ψ and `Q` advance
//! together until the next collapse time, where the center is chosen by the
//! mode's rule, ψ is collapsed, `Q` is left unchanged, and the cycle repeats.
//!
//! Steps are split exactly at collapse and snapshot times, so the guidance
//! integrator never straddles a collapse.

use std::sync::{Arc, OnceLock};

use crate::bohm::{advance_with_fields, GuidanceCounters, GuidedState, Guide, StepScratch, VelocityField};
use crate::collapse::{
    choose_center_grwp, choose_center_pinned, collapse_density_raw, collapse_in_place, next_collapse,
    sample_grw_center,
};
use crate::config::{InitialSampling, SimConfig};
use crate::error::{Error, Result};
use crate::params::Mode;
use crate::sampling::{sample_uniform_configuration, CellSampler, MarginalCdf};
use crate::schrodinger::{boundary_mass_raw, build_gaussian_packet};
use crate::seed::trajectory_rng;
use crate::state::{CollapseEvent, Configuration, Diagnostics, Snapshot, TrajectoryRecord};
use crate::wave::{norm_sq, WaveFunction};

/// Mid-run boundary mass above which a trajectory is aborted.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

/// Steps landing within this fraction of `dt` of a stop time snap onto it.
const SNAP_TOLERANCE: f64 = 1e-9;

/// Width of the edge band watched for periodic wrap-around, in cells.
pub fn boundary_margin(grid: &crate::grid::Grid) -> usize {
    grid.axes().iter().map(|a| (a.points / 16).max(1)).min().unwrap_or(1)
}

/// Where the next step ends.
#[derive(Clone, Copy, Debug)]
struct StepPlan {
    target: f64,
    /// Propagation length; exactly `dt` for regular steps.
    h: f64,
    /// Whether the step ends on a stop time (collapse, snapshot or `t_final`).
    on_stop: bool,
}

/// Step clock: regular multiples of `dt` counted from the last stop.
#[derive(Clone, Copy, Debug)]
struct Clock {
    t: f64,
    anchor: f64,
    steps_since: u64,
    dt: f64,
}

impl Clock {
    fn new(dt: f64) -> Self {
        Clock {
            t: 0.0,
            anchor: 0.0,
            steps_since: 0,
            dt,
        }
    }

    fn plan(&self, stop: f64) -> StepPlan {
        let nominal = self.anchor + (self.steps_since + 1) as f64 * self.dt;
        if stop <= nominal + SNAP_TOLERANCE * self.dt {
            let h = stop - self.t;
            let h = if (h - self.dt).abs() <= SNAP_TOLERANCE * self.dt {
                self.dt
            } else {
                h
            };
            StepPlan {
                target: stop,
                h,
                on_stop: true,
            }
        } else {
            StepPlan {
                target: nominal,
                h: self.dt,
                on_stop: false,
            }
        }
    }

    fn advance(&mut self, plan: &StepPlan) {
        self.t = plan.target;
        if plan.on_stop {
            self.anchor = plan.target;
            self.steps_since = 0;
        } else {
            self.steps_since += 1;
        }
    }
}

/// The ψ evolution shared by every trajectory of a collapse-free run.
#[derive(Debug)]
struct SharedPath {
    steps: Vec<SharedStep>,
    /// Snapshot CDFs, in snapshot order.
    snapshot_cdfs: Vec<MarginalCdf>,
    abort: Option<(usize, String)>,
    max_drift: f64,
}

#[derive(Debug)]
struct SharedStep {
    h: f64,
    target: f64,
    mid: VelocityField,
    end: VelocityField,
    snapshots: usize,
    boundary_mass: f64,
}

/// Everything a trajectory needs that does not depend on its seed.
#[derive(Debug)]
pub struct RunContext {
    pub config: SimConfig,
    pub guide: Guide,
    pub psi0: WaveFunction,
    field0: VelocityField,
    sampler0: CellSampler,
    margin: usize,
    shared: OnceLock<std::result::Result<Arc<SharedPath>, String>>,
}

impl RunContext {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let grid = config.grid.clone();
        let init = &config.initial;
        let psi0 = build_gaussian_packet(&grid, &init.mean, &init.width, &init.momentum)?;
        let guide = Guide::new(grid.clone(), &config.params, config.run.dt)?;
        let mut scratch = StepScratch::default();
        let start = guide.start(psi0.amplitudes().to_vec(), 0.0, &mut scratch);
        Ok(RunContext {
            sampler0: CellSampler::new(&psi0)?,
            field0: start.field,
            margin: boundary_margin(&grid),
            config: config.clone(),
            guide,
            psi0,
            shared: OnceLock::new(),
        })
    }

    fn initial_configuration(&self, rng: &mut crate::seed::TrajectoryRng) -> Configuration {
        let grid = &self.config.grid;
        match self.config.initial.sampling {
            InitialSampling::Born => Configuration::new(self.sampler0.sample_point(grid, rng), grid.dim(), 0.0),
            InitialSampling::Uniform => sample_uniform_configuration(grid, rng),
        }
    }

    /// Runs trajectory `index` with its own `seed`. Runtime failures are
    /// recorded in the returned record rather than returned as errors.
    pub fn run(&self, index: usize, seed: u64) -> TrajectoryRecord {
        if self.config.collapses_enabled() {
            self.run_live(index, seed)
        } else {
            self.run_shared(index, seed)
        }
    }

    fn empty_record(&self, index: usize, seed: u64, q: &Configuration) -> TrajectoryRecord {
        TrajectoryRecord {
            index,
            seed,
            events: Vec::new(),
            collapse_positions: Vec::new(),
            collapse_pit: Vec::new(),
            snapshots: Vec::new(),
            pending_collapse: None,
            final_configuration: q.clone(),
            diagnostics: Diagnostics::default(),
            abort: None,
        }
    }

    fn run_live(&self, index: usize, seed: u64) -> TrajectoryRecord {
        let cfg = &self.config;
        let grid = &cfg.grid;
        let params = &cfg.params;
        let t_final = cfg.run.t_final;
        let snaps = &cfg.run.snapshot_times;

        let mut rng = trajectory_rng(seed);
        let mut q = self.initial_configuration(&mut rng);
        let mut rec = self.empty_record(index, seed, &q);
        let mut counters = GuidanceCounters::default();
        let mut scratch = StepScratch::default();
        let mut state = GuidedState {
            amps: self.psi0.amplitudes().to_vec(),
            field: self.field0.clone(),
            time: 0.0,
        };
        let n = grid.particles();
        let mut next = match next_collapse(&mut rng, n, params.lambda, 0.0) {
            Ok(s) => Some(s),
            Err(e) => {
                rec.abort = Some(e.to_string());
                return rec;
            }
        };
        let mut s = 0;
        let mut clock = Clock::new(cfg.run.dt);
        let dv = grid.cell_volume();

        let result: Result<()> = (|| {
            while s < snaps.len() && snaps[s] <= 0.0 {
                rec.snapshots.push(self.snapshot(&state, &q));
                s += 1;
            }
            while clock.t < t_final {
                let t_collapse = next.map_or(f64::INFINITY, |c| c.time);
                let t_snap = snaps.get(s).copied().unwrap_or(f64::INFINITY);
                let plan = clock.plan(t_collapse.min(t_snap).min(t_final));

                if plan.target > clock.t {
                    let now = std::mem::replace(&mut state.field, self.field0.clone());
                    let mid = self.guide.step_psi(&mut state, plan.h, &mut scratch)?;
                    q = advance_with_fields(&q, &now, &mid, plan.h, &self.guide.limits, &mut counters)?;
                    rec.diagnostics.steps += 1;
                }
                clock.advance(&plan);
                state.time = plan.target;
                q.time = plan.target;

                let drift = (norm_sq(&state.amps, dv) - 1.0).abs();
                rec.diagnostics.max_norm_drift = rec.diagnostics.max_norm_drift.max(drift);
                let edge = boundary_mass_raw(grid, &state.amps, self.margin);
                rec.diagnostics.max_boundary_mass = rec.diagnostics.max_boundary_mass.max(edge);
                if edge > BOUNDARY_MASS_LIMIT {
                    return Err(Error::BoundaryMass {
                        mass: edge,
                        time: plan.target,
                    });
                }

                while s < snaps.len() && snaps[s] <= plan.target && plan.on_stop {
                    rec.snapshots.push(self.snapshot(&state, &q));
                    s += 1;
                }

                if plan.on_stop && plan.target == t_collapse {
                    let i = next.expect("scheduled").particle;
                    self.collapse(&mut state, &q, i, &mut rng, &mut rec, &mut scratch)?;
                    if cfg.run.max_events.is_some_and(|m| rec.events.len() >= m) {
                        next = None;
                        break;
                    }
                    next = Some(next_collapse(&mut rng, n, params.lambda, plan.target)?);
                }
            }
            Ok(())
        })();

        if let Err(e) = result {
            rec.abort = Some(e.to_string());
        } else if let Some(c) = next {
            if c.time > t_final {
                rec.pending_collapse = Some(c.time);
            }
        }
        rec.diagnostics.velocity_evaluations = counters.evaluations;
        rec.diagnostics.clamp_events = counters.clamps;
        rec.diagnostics.wrap_events = counters.wraps;
        rec.final_configuration = q;
        rec
    }

    fn snapshot(&self, state: &GuidedState, q: &Configuration) -> Snapshot {
        let psi = WaveFunction::from_parts_unchecked(self.config.grid.clone(), state.amps.clone());
        Snapshot {
            time: state.time,
            positions: q.positions.clone(),
            pit: MarginalCdf::new(&psi, 0).eval(q.positions[0]),
        }
    }

    fn collapse(
        &self,
        state: &mut GuidedState,
        q: &Configuration,
        i: usize,
        rng: &mut crate::seed::TrajectoryRng,
        rec: &mut TrajectoryRecord,
        scratch: &mut StepScratch,
    ) -> Result<()> {
        let cfg = &self.config;
        let grid = &cfg.grid;
        let sigma = cfg.params.sigma;
        let (center, offset) = match cfg.mode {
            Mode::Grwp => choose_center_grwp(q, i, sigma, rng),
            Mode::Pinned => (choose_center_pinned(q, i), vec![0.0; grid.dim()]),
            Mode::Grw => {
                let sampler = CellSampler::from_weights(state.amps.iter().map(|a| a.norm_sqr()))?;
                sample_grw_center(&sampler, grid, i, sigma, rng)
            }
            Mode::BohmOnly => unreachable!("bohm_only never schedules collapses"),
        };
        let rho = collapse_density_raw(grid, &state.amps, i, &center, sigma);
        let c = collapse_in_place(grid, &mut state.amps, i, &center, sigma).map_err(|e| match e {
            Error::VoidCollapse { c, .. } => Error::VoidCollapse { c, time: state.time },
            e => e,
        })?;
        let d = &mut rec.diagnostics;
        d.max_identity_residual = d.max_identity_residual.max((c * c - rho).abs());
        d.max_collapse_norm_error = d
            .max_collapse_norm_error
            .max((norm_sq(&state.amps, grid.cell_volume()) - 1.0).abs());
        state.field = self.guide.guidance.field(&state.amps, state.time, &mut scratch.guidance);

        let psi = WaveFunction::from_parts_unchecked(grid.clone(), state.amps.clone());
        let axis = grid.axis_of(i, 0);
        rec.collapse_pit
            .push(MarginalCdf::new(&psi, axis).eval(q.positions[axis]));
        rec.collapse_positions.push(q.positions.clone());
        rec.events.push(CollapseEvent {
            k: rec.events.len() + 1,
            time: state.time,
            particle: i,
            center,
            offset,
            c,
            mode: cfg.mode,
        });
        Ok(())
    }

    fn shared_path(&self) -> std::result::Result<Arc<SharedPath>, String> {
        self.shared
            .get_or_init(|| self.build_shared().map(Arc::new).map_err(|e| e.to_string()))
            .clone()
    }

    fn build_shared(&self) -> Result<SharedPath> {
        let cfg = &self.config;
        let grid = &cfg.grid;
        let snaps = &cfg.run.snapshot_times;
        let mut scratch = StepScratch::default();
        let mut state = GuidedState {
            amps: self.psi0.amplitudes().to_vec(),
            field: self.field0.clone(),
            time: 0.0,
        };
        let mut clock = Clock::new(cfg.run.dt);
        let mut path = SharedPath {
            steps: Vec::new(),
            snapshot_cdfs: Vec::new(),
            abort: None,
            max_drift: 0.0,
        };
        let cdf = |state: &GuidedState| {
            MarginalCdf::new(
                &WaveFunction::from_parts_unchecked(grid.clone(), state.amps.clone()),
                0,
            )
        };
        let mut s = 0;
        while s < snaps.len() && snaps[s] <= 0.0 {
            path.snapshot_cdfs.push(cdf(&state));
            s += 1;
        }
        while clock.t < cfg.run.t_final {
            let t_snap = snaps.get(s).copied().unwrap_or(f64::INFINITY);
            let plan = clock.plan(t_snap.min(cfg.run.t_final));
            let mid = self.guide.step_psi(&mut state, plan.h, &mut scratch)?;
            clock.advance(&plan);
            state.time = plan.target;
            path.max_drift = path
                .max_drift
                .max((norm_sq(&state.amps, grid.cell_volume()) - 1.0).abs());
            let edge = boundary_mass_raw(grid, &state.amps, self.margin);
            let mut taken = 0;
            while s < snaps.len() && snaps[s] <= plan.target && plan.on_stop {
                path.snapshot_cdfs.push(cdf(&state));
                s += 1;
                taken += 1;
            }
            path.steps.push(SharedStep {
                h: plan.h,
                target: plan.target,
                mid,
                end: state.field.clone(),
                snapshots: taken,
                boundary_mass: edge,
            });
            if edge > BOUNDARY_MASS_LIMIT {
                path.abort = Some((
                    path.steps.len() - 1,
                    Error::BoundaryMass {
                        mass: edge,
                        time: plan.target,
                    }
                    .to_string(),
                ));
                break;
            }
        }
        Ok(path)
    }

    fn run_shared(&self, index: usize, seed: u64) -> TrajectoryRecord {
        let mut rng = trajectory_rng(seed);
        let mut q = self.initial_configuration(&mut rng);
        let mut rec = self.empty_record(index, seed, &q);
        let path = match self.shared_path() {
            Ok(p) => p,
            Err(e) => {
                rec.abort = Some(e);
                return rec;
            }
        };
        let mut counters = GuidanceCounters::default();
        let mut snap = 0;
        let snapshot = |q: &Configuration, snap: usize, time: f64| Snapshot {
            time,
            positions: q.positions.clone(),
            pit: path.snapshot_cdfs[snap].eval(q.positions[0]),
        };
        let snaps = &self.config.run.snapshot_times;
        while snap < snaps.len() && snaps[snap] <= 0.0 {
            rec.snapshots.push(snapshot(&q, snap, 0.0));
            snap += 1;
        }
        let mut now = &self.field0;
        let result: Result<()> = (|| {
            for (k, step) in path.steps.iter().enumerate() {
                q = advance_with_fields(&q, now, &step.mid, step.h, &self.guide.limits, &mut counters)?;
                q.time = step.target;
                now = &step.end;
                rec.diagnostics.steps += 1;
                rec.diagnostics.max_boundary_mass = rec.diagnostics.max_boundary_mass.max(step.boundary_mass);
                if let Some((at, reason)) = &path.abort {
                    if *at == k {
                        return Err(Error::Usage(reason.clone()));
                    }
                }
                for _ in 0..step.snapshots {
                    rec.snapshots.push(snapshot(&q, snap, step.target));
                    snap += 1;
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            rec.abort = Some(e.to_string());
        }
        rec.diagnostics.max_norm_drift = path.max_drift;
        rec.diagnostics.velocity_evaluations = counters.evaluations;
        rec.diagnostics.clamp_events = counters.clamps;
        rec.diagnostics.wrap_events = counters.wraps;
        rec.final_configuration = q;
        rec
    }
}

/// Runs a single trajectory of `config` with the given seed.
pub fn run_trajectory(config: &SimConfig, seed: u64) -> Result<TrajectoryRecord> {
    Ok(RunContext::new(config)?.run(0, seed))
}

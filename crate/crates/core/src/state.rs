use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::params::Mode;

/// Actual particle positions `Q_1(t) … Q_N(t)`, flattened over the `D` axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub positions: Vec<f64>,
    pub dim: usize,
    pub time: f64,
}

impl Configuration {
    pub fn new(positions: Vec<f64>, dim: usize, time: f64) -> Self {
        debug_assert!(dim > 0 && positions.len() % dim == 0);
        Configuration {
            positions,
            dim,
            time,
        }
    }

    pub fn particles(&self) -> usize {
        self.positions.len() / self.dim
    }

    /// Position of particle `i` (0-based).
    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inside(&self, grid: &Grid) -> bool {
        self.positions
            .iter()
            .zip(grid.axes())
            .all(|(&x, ax)| ax.contains(x))
    }
}

/// One collapse ("flash").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    /// 1-based index within the trajectory.
    pub k: usize,
    pub time: f64,
    /// 0-based particle label.
    pub particle: usize,
    pub center: Vec<f64>,
    /// Noise offset used: `X − Q_i` in grwp mode, the mixture offset in grw
    /// mode, exactly zero in pinned mode.
    pub offset: Vec<f64>,
    /// Norm of the state after multiplication by the localization factor.
    pub c: f64,
    pub mode: Mode,
}

/// Configuration recorded at a requested time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub positions: Vec<f64>,
    /// Marginal CDF of `|ψ_t|²` along axis 0 evaluated at `Q(t)`.
    pub pit: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: u64,
    pub max_boundary_mass: f64,
    /// Largest `|‖ψ‖² − 1|` seen after any propagation step.
    pub max_norm_drift: f64,
    /// Largest `|‖ψ_{T+}‖² − 1|` after a collapse.
    pub max_collapse_norm_error: f64,
    /// Largest `|C² − ρ(X)|` over this trajectory's collapses.
    pub max_identity_residual: f64,
    pub velocity_evaluations: u64,
    pub clamp_events: u64,
    pub wrap_events: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.steps += other.steps;
        self.max_boundary_mass = self.max_boundary_mass.max(other.max_boundary_mass);
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
        self.max_collapse_norm_error = self
            .max_collapse_norm_error
            .max(other.max_collapse_norm_error);
        self.max_identity_residual = self.max_identity_residual.max(other.max_identity_residual);
        self.velocity_evaluations += other.velocity_evaluations;
        self.clamp_events += other.clamp_events;
        self.wrap_events += other.wrap_events;
    }

    pub fn clamp_rate(&self) -> f64 {
        if self.velocity_evaluations == 0 {
            0.0
        } else {
            self.clamp_events as f64 / self.velocity_evaluations as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub seed: u64,
    pub events: Vec<CollapseEvent>,
    /// Full configuration `Q(T_k)` at each collapse (unchanged by it).
    pub collapse_positions: Vec<Vec<f64>>,
    /// Marginal CDF of `|ψ_{T_k+}|²` along the collapsed particle's first axis,
    /// evaluated at its position.
    pub collapse_pit: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Scheduled time of the collapse that would follow `t_final`.
    pub pending_collapse: Option<f64>,
    pub final_configuration: Configuration,
    pub diagnostics: Diagnostics,
    pub abort: Option<String>,
}

impl TrajectoryRecord {
    pub fn aborted(&self) -> bool {
        self.abort.is_some()
    }

    /// Every exponential waiting time drawn by the scheduler, including the
    /// one that overshoots `t_final`.
    pub fn waiting_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut last = 0.0;
        for e in &self.events {
            out.push(e.time - last);
            last = e.time;
        }
        if let Some(t) = self.pending_collapse {
            out.push(t - last);
        }
        out
    }
}

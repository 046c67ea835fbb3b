//! Run configuration: the JSON schema, defaults and validation.
//!
//! ```json
//! {
//!   "particles": { "N": 1, "d": 1 },
//!   "physics":   { "hbar": 1.0, "masses": [1.0], "lambda": 1.0, "sigma": 0.5 },
//!   "potential": { "kind": "zero" },
//!   "grid":      { "domain": [[-20.0, 20.0]], "points": [512] },
//!   "initial":   { "mean": [0.0], "width": [1.0], "momentum": [0.0] },
//!   "run": { "mode": "grwp", "t_final": 2.0, "dt": 0.005, "ensemble_n": 10000,
//!            "master_seed": 1, "snapshot_times": [1.0] }
//! }
//! ```
//!
//! `potential.kind` is one of `zero`, `harmonic` (with `omega`, one value per
//! spatial dimension) or `tabulated` (with inline `values` or a `file` holding
//! whitespace/comma separated numbers, resolved relative to the config file).
//! Single-entry `domain`, `points`, `mean`, `width` and `momentum` lists are
//! broadcast to every axis.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::params::{Mode, PhysicalParams, Potential};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub particles: RawParticles,
    #[serde(default)]
    pub physics: RawPhysics,
    #[serde(default)]
    pub potential: RawPotential,
    #[serde(default)]
    pub grid: RawGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<RawInitial>,
    #[serde(default)]
    pub run: RawRun,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParticles {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub d: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPhysics {
    pub hbar: Option<f64>,
    pub masses: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPotential {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

impl Default for RawPotential {
    fn default() -> Self {
        RawPotential {
            kind: "zero".into(),
            omega: None,
            values: None,
            file: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub domain: Option<Vec<[f64; 2]>>,
    pub points: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub mean: Option<Vec<f64>>,
    pub width: Option<Vec<f64>>,
    pub momentum: Option<Vec<f64>>,
    /// `born` (default) or `uniform`; the latter is a control that ignores ψ0.
    pub sampling: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub mode: Option<String>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub ensemble_n: Option<usize>,
    pub master_seed: Option<u64>,
    pub snapshot_times: Option<Vec<f64>>,
    /// Stop a trajectory after this many collapses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config file, inlining a tabulated potential's `file`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut raw = RawConfig::from_json(&text)?;
        if let Some(file) = raw.potential.file.take() {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let body = std::fs::read_to_string(base.join(&file))?;
            let values = body
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .enumerate()
                .map(|(k, s)| {
                    s.parse::<f64>().map_err(|e| Error::Parse {
                        line: k + 1,
                        msg: format!("potential file {file}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            raw.potential.values = Some(values);
        }
        Ok(raw)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSampling {
    Born,
    Uniform,
}

/// Gaussian initial packet `ψ0 ∝ exp(−(x−mean)²/4 width² + i momentum·x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub mean: Vec<f64>,
    pub width: Vec<f64>,
    pub momentum: Vec<f64>,
    pub sampling: InitialSampling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunControls {
    pub t_final: f64,
    pub dt: f64,
    pub ensemble_n: usize,
    pub master_seed: u64,
    pub snapshot_times: Vec<f64>,
    pub max_events: Option<usize>,
    pub workers: Option<usize>,
}

/// A validated configuration with defaults applied.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub params: PhysicalParams,
    pub grid: Arc<Grid>,
    pub mode: Mode,
    pub initial: InitialState,
    pub run: RunControls,
}

fn broadcast(name: &str, v: Option<Vec<f64>>, default: Vec<f64>, n: usize, errs: &mut Vec<String>) -> Vec<f64> {
    match v {
        None => default,
        Some(v) if v.len() == n => v,
        Some(v) if v.len() == 1 => vec![v[0]; n],
        Some(v) => {
            errs.push(format!("{name} has {} entries, expected 1 or {n}", v.len()));
            default
        }
    }
}

/// Validates a raw configuration, collecting every violation.
pub fn validate_config(raw: &RawConfig) -> Result<SimConfig> {
    let mut errs = Vec::new();

    let n = raw.particles.n.unwrap_or_else(|| {
        errs.push("missing particles.N".into());
        1
    });
    let d = raw.particles.d.unwrap_or_else(|| {
        errs.push("missing particles.d".into());
        1
    });
    if n == 0 {
        errs.push("particles.N must be at least 1".into());
    }
    if !(1..=3).contains(&d) {
        errs.push(format!("particles.d={d} must be 1, 2 or 3"));
    }
    let axes_n = n.max(1) * d.clamp(1, 3);
    if n * d > crate::grid::MAX_AXES {
        errs.push(format!(
            "D={} exceeds desk-scale cap of {}",
            n * d,
            crate::grid::MAX_AXES
        ));
    }

    let masses = match raw.physics.masses.clone() {
        None => vec![1.0; n.max(1)],
        Some(m) => {
            if m.len() != n {
                errs.push(format!("masses has {} entries but N = {n}", m.len()));
            }
            m
        }
    };
    let potential = match raw.potential.kind.as_str() {
        "zero" => Potential::Zero,
        "harmonic" => match &raw.potential.omega {
            Some(w) => Potential::Harmonic { omega: w.clone() },
            None => {
                errs.push("harmonic potential requires omega".into());
                Potential::Zero
            }
        },
        "tabulated" => match (&raw.potential.values, &raw.potential.file) {
            (Some(v), _) => Potential::Tabulated { values: v.clone() },
            (None, Some(f)) => {
                errs.push(format!("tabulated potential file {f} was not loaded"));
                Potential::Zero
            }
            (None, None) => {
                errs.push("tabulated potential requires values or file".into());
                Potential::Zero
            }
        },
        other => {
            errs.push(format!("unknown potential kind '{other}'"));
            Potential::Zero
        }
    };
    let params = PhysicalParams {
        hbar: raw.physics.hbar.unwrap_or(1.0),
        masses,
        lambda: raw.physics.lambda.unwrap_or(1.0),
        sigma: raw.physics.sigma.unwrap_or(0.5),
        potential,
    };

    let domain = raw.grid.domain.clone().unwrap_or_else(|| {
        errs.push("missing grid.domain".into());
        vec![[-1.0, 1.0]]
    });
    let points = raw.grid.points.clone().unwrap_or_else(|| {
        errs.push("missing grid.points".into());
        vec![crate::grid::MIN_POINTS]
    });
    let pick = |len: usize, k: usize| if len == 1 { 0 } else { k };
    if domain.len() != 1 && domain.len() != axes_n {
        errs.push(format!("grid.domain has {} entries, expected 1 or D={axes_n}", domain.len()));
    }
    if points.len() != 1 && points.len() != axes_n {
        errs.push(format!("grid.points has {} entries, expected 1 or D={axes_n}", points.len()));
    }
    let axes: Vec<Axis> = (0..axes_n)
        .map(|k| {
            let [lo, hi] = domain[pick(domain.len(), k).min(domain.len() - 1)];
            Axis::new(lo, hi, points[pick(points.len(), k).min(points.len() - 1)])
        })
        .collect();
    let grid = if n * d <= crate::grid::MAX_AXES && n > 0 && (1..=3).contains(&d) {
        match Grid::new(n, d, axes.clone()) {
            Ok(g) => Some(g),
            Err(Error::InvalidConfig(e)) => {
                errs.extend(e);
                None
            }
            Err(e) => {
                errs.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    errs.extend(params.violations(grid.as_ref()));

    let init = raw.initial.clone().unwrap_or_default();
    let centers: Vec<f64> = axes.iter().map(Axis::center).collect();
    let initial = InitialState {
        mean: broadcast("initial.mean", init.mean, centers, axes_n, &mut errs),
        width: broadcast("initial.width", init.width, vec![1.0; axes_n], axes_n, &mut errs),
        momentum: broadcast("initial.momentum", init.momentum, vec![0.0; axes_n], axes_n, &mut errs),
        sampling: match init.sampling.as_deref() {
            None | Some("born") => InitialSampling::Born,
            Some("uniform") => InitialSampling::Uniform,
            Some(other) => {
                errs.push(format!("unknown initial.sampling '{other}'"));
                InitialSampling::Born
            }
        },
    };
    for (k, (&m, &w)) in initial.mean.iter().zip(&initial.width).enumerate() {
        if !(w > 0.0 && w.is_finite()) {
            errs.push(format!("initial.width on axis {k} must be positive"));
        }
        if let Some(ax) = axes.get(k) {
            if !ax.contains(m) {
                errs.push(format!("initial.mean on axis {k} lies outside the domain"));
            }
        }
    }

    let mode = match raw.run.mode.as_deref() {
        None => Mode::Grwp,
        Some(s) => s.parse().unwrap_or_else(|e: String| {
            errs.push(e);
            Mode::Grwp
        }),
    };
    let t_final = raw.run.t_final.unwrap_or_else(|| {
        errs.push("missing run.t_final".into());
        1.0
    });
    let dt = raw.run.dt.unwrap_or_else(|| {
        errs.push("missing run.dt".into());
        1.0
    });
    if !(t_final > 0.0 && t_final.is_finite()) {
        errs.push("t_final must be positive".into());
    }
    if !(dt > 0.0 && dt.is_finite()) {
        errs.push("dt must be positive".into());
    }
    let ensemble_n = raw.run.ensemble_n.unwrap_or(1);
    if ensemble_n == 0 {
        errs.push("ensemble_n must be at least 1".into());
    }
    let mut snapshot_times = raw.run.snapshot_times.clone().unwrap_or_default();
    if snapshot_times
        .iter()
        .any(|&t| !(t >= 0.0 && t <= t_final))
    {
        errs.push("snapshot_times must lie in [0, t_final]".into());
    }
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    if raw.run.workers == Some(0) {
        errs.push("workers must be at least 1".into());
    }

    if !errs.is_empty() {
        return Err(Error::InvalidConfig(errs));
    }
    Ok(SimConfig {
        params,
        grid: Arc::new(grid.expect("grid validated")),
        mode,
        initial,
        run: RunControls {
            t_final,
            dt,
            ensemble_n,
            master_seed: raw.run.master_seed.unwrap_or(0),
            snapshot_times,
            max_events: raw.run.max_events,
            workers: raw.run.workers,
        },
    })
}

impl SimConfig {
    /// Whether collapses are scheduled at all.
    pub fn collapses_enabled(&self) -> bool {
        self.mode.collapses() && self.params.lambda > 0.0
    }

    /// Same configuration with a different center rule.
    pub fn with_mode(&self, mode: Mode) -> SimConfig {
        SimConfig {
            mode,
            ..self.clone()
        }
    }

    /// The fully explicit raw form; validating it reproduces `self`.
    pub fn to_raw(&self) -> RawConfig {
        let potential = match &self.params.potential {
            Potential::Zero => RawPotential::default(),
            Potential::Harmonic { omega } => RawPotential {
                kind: "harmonic".into(),
                omega: Some(omega.clone()),
                ..RawPotential::default()
            },
            Potential::Tabulated { values } => RawPotential {
                kind: "tabulated".into(),
                values: Some(values.clone()),
                ..RawPotential::default()
            },
        };
        RawConfig {
            particles: RawParticles {
                n: Some(self.grid.particles()),
                d: Some(self.grid.dim()),
            },
            physics: RawPhysics {
                hbar: Some(self.params.hbar),
                masses: Some(self.params.masses.clone()),
                lambda: Some(self.params.lambda),
                sigma: Some(self.params.sigma),
            },
            potential,
            grid: RawGrid {
                domain: Some(self.grid.axes().iter().map(|a| [a.lo, a.hi]).collect()),
                points: Some(self.grid.axes().iter().map(|a| a.points).collect()),
            },
            initial: Some(RawInitial {
                mean: Some(self.initial.mean.clone()),
                width: Some(self.initial.width.clone()),
                momentum: Some(self.initial.momentum.clone()),
                sampling: Some(
                    match self.initial.sampling {
                        InitialSampling::Born => "born",
                        InitialSampling::Uniform => "uniform",
                    }
                    .into(),
                ),
            }),
            run: RawRun {
                mode: Some(self.mode.as_str().into()),
                t_final: Some(self.run.t_final),
                dt: Some(self.run.dt),
                ensemble_n: Some(self.run.ensemble_n),
                master_seed: Some(self.run.master_seed),
                snapshot_times: Some(self.run.snapshot_times.clone()),
                max_events: self.run.max_events,
                workers: self.run.workers,
            },
        }
    }
}

/// The reference single-particle setup: 1D, `[−20, 20)` with 512 points,
/// Gaussian `ψ0` of width 1 at rest at the origin, `ħ = m = 1`, `λ = 1`,
/// `σ = 0.5`, `dt = 0.005`, `t_final = 2`, `10^4` trajectories.
pub fn canonical_raw() -> RawConfig {
    RawConfig {
        particles: RawParticles {
            n: Some(1),
            d: Some(1),
        },
        physics: RawPhysics {
            hbar: Some(1.0),
            masses: Some(vec![1.0]),
            lambda: Some(1.0),
            sigma: Some(0.5),
        },
        potential: RawPotential::default(),
        grid: RawGrid {
            domain: Some(vec![[-20.0, 20.0]]),
            points: Some(vec![512]),
        },
        initial: Some(RawInitial {
            mean: Some(vec![0.0]),
            width: Some(vec![1.0]),
            momentum: Some(vec![0.0]),
            sampling: None,
        }),
        run: RawRun {
            mode: Some("grwp".into()),
            t_final: Some(2.0),
            dt: Some(0.005),
            ensemble_n: Some(10_000),
            master_seed: Some(20_240_917),
            snapshot_times: Some(vec![1.0]),
            max_events: None,
            workers: None,
        },
    }
}

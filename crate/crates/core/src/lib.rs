//! Simulation of N-particle quantum mechanics in which Bohmian trajectories
//! are guided by a wave function that undergoes GRW-type Gaussian collapses,
//! with collapse centers taken at the actual particle positions (up to
//! Gaussian noise), plus the statistical machinery that checks the resulting
//! distributional claims by Monte Carlo.

pub mod bohm;
pub mod collapse;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod fft;
pub mod grid;
pub mod params;
pub mod records;
pub mod sampling;
pub mod schrodinger;
pub mod seed;
pub mod state;
pub mod stats;
pub mod trajectory;
pub mod verify;
pub mod wave;

pub use config::{canonical_raw, validate_config, RawConfig, SimConfig};
pub use ensemble::{run_ensemble, EnsembleResult, Manifest};
pub use error::{Error, Result};
pub use grid::{Axis, Grid};
pub use params::{Mode, PhysicalParams, Potential};
pub use state::{CollapseEvent, Configuration, Diagnostics, Snapshot, TrajectoryRecord};
pub use stats::{Direction, StatTestResult};
pub use trajectory::run_trajectory;
pub use wave::WaveFunction;

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Fixtures shared by the benchmarks.

use grwp_core::{canonical_raw, validate_config, Mode, SimConfig};

/// The canonical configuration in `mode`, shortened to `t_final`.
pub fn canonical(mode: Mode, t_final: f64) -> SimConfig {
    let mut raw = canonical_raw();
    raw.run.t_final = Some(t_final);
    raw.run.snapshot_times = Some(vec![]);
    validate_config(&raw).expect("canonical config").with_mode(mode)
}

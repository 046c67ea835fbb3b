//! Per-trajectory RNG streams.
//!
//! Trajectory `k` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(mix(mix(s) ^ k))`, where `mix` is the SplitMix64
//! finalizer. `mix` is a bijection on `u64`, so distinct indices under one
//! master seed, and distinct master seeds at one index, always give distinct
//! trajectory seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajectoryRng = ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_trajectory_seed(master_seed: u64, trajectory_index: u64) -> u64 {
    mix64(mix64(master_seed) ^ trajectory_index)
}

pub fn trajectory_rng(seed: u64) -> TrajectoryRng {
    ChaCha8Rng::seed_from_u64(seed)
}

//! Sample-level Monte Carlo of the lattice schemes.
//!
//! A run is cut into blocks of [`BLOCK_LEN`] dimensions. Every random signal
//! of block `b` is drawn from its own ChaCha stream selected by
//! `(seed, role, b)`, so any array can be regenerated alone and results do not
//! depend on how blocks are scheduled.

mod batch;
mod experiment;
mod nested;
mod preset;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use batch::{
    apply_channel, decode_frontend, effective_noise, encode, equivalent_channel, generate_batch,
    generate_block, MessageSource, SignalBatch,
};
pub use experiment::{
    dither_uniformity, interference_sweep, measure_sinr, run_experiment, run_experiment_with,
    Check, ExperimentOptions, SimReport, SweepEntry, UNIFORMITY_BINS,
};
pub use nested::{nested_code_experiment, NestedCodeResult};
pub use preset::{
    build_preset, build_preset_with_alpha, mmse_alpha_r, EquivalentForm, Preset, SchemeConfig,
};

/// Dimensions per block.
pub const BLOCK_LEN: usize = 16_384;

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    Message1 = 1,
    Message2 = 2,
    Dither1 = 3,
    Dither2 = 4,
    Interference1 = 5,
    Interference2 = 6,
    Estimation1 = 7,
    Estimation2 = 8,
    Noise = 9,
}

/// The stream for one role in one block.
pub fn role_rng(seed: u64, role: Role, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(role as u64);
    rng.set_word_pos((block as u128) << 32);
    rng
}

//! A scalar nested-lattice code run through the scheme.
//!
//! The single message-carrying user picks one of `M` equally spaced points
//! of its cell, so the coarse lattice is `Λᵢ` and the fine one `(Δᵢ/M)·Z`.
//! The receiver maps `Y′` to the nearest codeword modulo the decoding lattice.

use serde::{Deserialize, Serialize};

use super::batch::MessageSource;
use super::experiment::simulate;
use super::preset::{build_preset, Preset};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::rates::ChannelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedCodeResult {
    pub codebook_size: usize,
    /// `log₂ M` bits per dimension.
    pub rate: f64,
    pub scalar_rate_bound: f64,
    pub n: usize,
    pub symbol_errors: u64,
    pub symbol_error_rate: f64,
}

pub fn nested_code_experiment(
    preset: Preset,
    params: &ChannelParams,
    codebook_size: usize,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<NestedCodeResult> {
    if codebook_size < 2 {
        return Err(invalid(format!(
            "codebook size must be at least 2, got {codebook_size}"
        )));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let config = build_preset(preset, params)?;
    if config.single_active_user().is_none() {
        return Err(Error::Precondition(format!(
            "{preset} has two message-carrying users; the codebook experiment needs one"
        )));
    }
    let st = simulate(
        &config,
        params,
        MessageSource::Codebook {
            size: codebook_size,
        },
        n,
        seed,
        exec,
    );
    let bound = 0.5 * config.analytic_sinr(params).log2() - config.lattice_r.shaping_penalty_bits();
    Ok(NestedCodeResult {
        codebook_size,
        rate: (codebook_size as f64).log2(),
        scalar_rate_bound: bound,
        n,
        symbol_errors: st.symbol_errors,
        symbol_error_rate: st.symbol_errors as f64 / n as f64,
    })
}

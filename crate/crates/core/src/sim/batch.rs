//! Signal arrays and the per-sample pipeline stages.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::preset::SchemeConfig;
use super::{role_rng, Role, BLOCK_LEN};
use crate::lattice::{unit_cell_sample, ScalarLattice};
use crate::rates::ChannelParams;

/// How message signals are drawn for the active users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MessageSource {
    /// Uniform on the fundamental cell of the user's lattice.
    Continuous,
    /// The same value in every dimension (reduced into the cell).
    Fixed { v1: f64, v2: f64 },
    /// Uniform over `size` equally spaced points of the cell.
    Codebook { size: usize },
}

/// All signals of one run, one entry per dimension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalBatch {
    pub n: usize,
    pub seed: u64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub s1_hat: Vec<f64>,
    pub s2_hat: Vec<f64>,
    pub z: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub y_prime: Vec<f64>,
    /// Codeword indices when the messages come from a codebook.
    pub symbols1: Vec<u32>,
    pub symbols2: Vec<u32>,
}

impl SignalBatch {
    fn append(&mut self, mut other: SignalBatch) {
        self.n += other.n;
        self.v1.append(&mut other.v1);
        self.v2.append(&mut other.v2);
        self.d1.append(&mut other.d1);
        self.d2.append(&mut other.d2);
        self.s1.append(&mut other.s1);
        self.s2.append(&mut other.s2);
        self.s1_hat.append(&mut other.s1_hat);
        self.s2_hat.append(&mut other.s2_hat);
        self.z.append(&mut other.z);
        self.symbols1.append(&mut other.symbols1);
        self.symbols2.append(&mut other.symbols2);
    }
}

/// Generates the sources (`V`, `D`, `S`, `S̃`, `Z`) of `n` dimensions with
/// continuous messages.
pub fn generate_batch(
    config: &SchemeConfig,
    params: &ChannelParams,
    n: usize,
    seed: u64,
) -> SignalBatch {
    let mut batch = SignalBatch {
        seed,
        ..Default::default()
    };
    let blocks = n.div_ceil(BLOCK_LEN);
    for b in 0..blocks {
        let len = BLOCK_LEN.min(n - b * BLOCK_LEN);
        batch.append(generate_block(
            config,
            params,
            MessageSource::Continuous,
            seed,
            b,
            len,
        ));
    }
    batch
}

/// Sources of block `block`, which covers `len ≤ BLOCK_LEN` dimensions.
pub fn generate_block(
    config: &SchemeConfig,
    params: &ChannelParams,
    source: MessageSource,
    seed: u64,
    block: usize,
    len: usize,
) -> SignalBatch {
    let b = block as u64;
    let (v1, symbols1) = messages(
        config.v1_active,
        &config.lattice1,
        source,
        Role::Message1,
        seed,
        b,
        len,
    );
    let (v2, symbols2) = messages(
        config.v2_active,
        &config.lattice2,
        source,
        Role::Message2,
        seed,
        b,
        len,
    );
    let d1 = dithers(
        config.d1_zero,
        &config.lattice1,
        Role::Dither1,
        seed,
        b,
        len,
    );
    let d2 = dithers(
        config.d2_zero,
        &config.lattice2,
        Role::Dither2,
        seed,
        b,
        len,
    );
    let q = params.interference_power;
    let s1 = gaussian(q, Role::Interference1, seed, b, len);
    let s2 = gaussian(q, Role::Interference2, seed, b, len);
    let s1_hat = estimate(&s1, params.e1, Role::Estimation1, seed, b);
    let s2_hat = estimate(&s2, params.e2, Role::Estimation2, seed, b);
    let z = gaussian(params.noise, Role::Noise, seed, b, len);
    SignalBatch {
        n: len,
        seed,
        v1,
        v2,
        d1,
        d2,
        s1,
        s2,
        s1_hat,
        s2_hat,
        z,
        symbols1,
        symbols2,
        ..Default::default()
    }
}

fn messages(
    active: bool,
    lattice: &ScalarLattice,
    source: MessageSource,
    role: Role,
    seed: u64,
    block: u64,
    len: usize,
) -> (Vec<f64>, Vec<u32>) {
    if !active {
        return (vec![0.0; len], Vec::new());
    }
    let mut rng = role_rng(seed, role, block);
    match source {
        MessageSource::Continuous => {
            let v = (0..len)
                .map(|_| lattice.step() * unit_cell_sample(&mut rng))
                .collect();
            (v, Vec::new())
        }
        MessageSource::Fixed { v1, v2 } => {
            let v = if role == Role::Message1 { v1 } else { v2 };
            (vec![lattice.fold(v); len], Vec::new())
        }
        MessageSource::Codebook { size } => {
            let spacing = lattice.step() / size as f64;
            let centre = (size as f64 - 1.0) / 2.0;
            // one uniform per dimension so codebooks of different sizes share
            // their random numbers
            let symbols: Vec<u32> = (0..len)
                .map(|_| ((rng.random::<f64>() * size as f64) as u32).min(size as u32 - 1))
                .collect();
            let v = symbols
                .iter()
                .map(|&j| (j as f64 - centre) * spacing)
                .collect();
            (v, symbols)
        }
    }
}

fn dithers(
    zero: bool,
    lattice: &ScalarLattice,
    role: Role,
    seed: u64,
    block: u64,
    len: usize,
) -> Vec<f64> {
    if zero {
        return vec![0.0; len];
    }
    let mut rng = role_rng(seed, role, block);
    (0..len).map(|_| lattice.sample_dither(&mut rng)).collect()
}

fn gaussian(variance: f64, role: Role, seed: u64, block: u64, len: usize) -> Vec<f64> {
    let mut rng = role_rng(seed, role, block);
    let sd = variance.sqrt();
    (0..len)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

// S̃ = S + W with W Gaussian of variance E, independent of everything else.
fn estimate(s: &[f64], distortion: f64, role: Role, seed: u64, block: u64) -> Vec<f64> {
    if distortion == 0.0 {
        return s.to_vec();
    }
    let w = gaussian(distortion, role, seed, block, s.len());
    s.iter().zip(&w).map(|(s, w)| s + w).collect()
}

/// `Xᵢ = [Vᵢ - αᵢ·S̃ᵢ + Dᵢ] mod Λᵢ`.
pub fn encode(config: &SchemeConfig, batch: &mut SignalBatch) {
    batch.x1 = encode_user(
        &config.lattice1,
        config.alpha1,
        &batch.v1,
        &batch.s1_hat,
        &batch.d1,
    );
    batch.x2 = encode_user(
        &config.lattice2,
        config.alpha2,
        &batch.v2,
        &batch.s2_hat,
        &batch.d2,
    );
}

fn encode_user(
    lattice: &ScalarLattice,
    alpha: f64,
    v: &[f64],
    s_hat: &[f64],
    d: &[f64],
) -> Vec<f64> {
    v.iter()
        .zip(s_hat)
        .zip(d)
        .map(|((v, s), d)| lattice.fold(v - alpha * s + d))
        .collect()
}

/// `Y = X₁ + X₂ + S₁ + S₂ + Z`.
pub fn apply_channel(batch: &mut SignalBatch) {
    batch.y = (0..batch.n)
        .map(|i| batch.x1[i] + batch.x2[i] + batch.s1[i] + batch.s2[i] + batch.z[i])
        .collect();
}

/// `Y′ = [α_r·Y - γ·D₁ - β·D₂] mod Λ_r`.
pub fn decode_frontend(config: &SchemeConfig, batch: &mut SignalBatch) {
    let lr = &config.lattice_r;
    batch.y_prime = (0..batch.n)
        .map(|i| {
            lr.fold(
                config.alpha_r * batch.y[i]
                    - config.gamma * batch.d1[i]
                    - config.beta * batch.d2[i],
            )
        })
        .collect();
}

/// Effective noise before the final reduction:
/// `-c_x1·X₁ - c_x2·X₂ + c_n·(S₁-S̃₁ + S₂-S̃₂ + Z)`.
pub fn effective_noise(config: &SchemeConfig, batch: &SignalBatch) -> Vec<f64> {
    let f = config.equivalent_form();
    (0..batch.n).map(|i| noise_at(&f, batch, i)).collect()
}

/// The decoder output predicted by the simplified equivalent channel.
pub fn equivalent_channel(config: &SchemeConfig, batch: &SignalBatch) -> Vec<f64> {
    let f = config.equivalent_form();
    (0..batch.n)
        .map(|i| {
            config
                .lattice_r
                .fold(f.v1 * batch.v1[i] + f.v2 * batch.v2[i] + noise_at(&f, batch, i))
        })
        .collect()
}

#[inline]
fn noise_at(f: &super::EquivalentForm, b: &SignalBatch, i: usize) -> f64 {
    let residual = (b.s1[i] - b.s1_hat[i]) + (b.s2[i] - b.s2_hat[i]) + b.z[i];
    -f.x1 * b.x1[i] - f.x2 * b.x2[i] + f.noise * residual
}

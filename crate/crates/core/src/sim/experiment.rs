//! End-to-end runs, their sufficient statistics and the resulting checks.

use serde::{Deserialize, Serialize};

use super::batch::{
    apply_channel, decode_frontend, effective_noise, encode, equivalent_channel, generate_block,
    MessageSource, SignalBatch,
};
use super::preset::{build_preset, build_preset_with_alpha, Preset, SchemeConfig};
use super::BLOCK_LEN;
use crate::error::{invalid, Result};
use crate::exec::{map_blocks, Execution};
use crate::rates::ChannelParams;
use crate::stats::{chi_square_uniform_pvalue, CrossMoments};

/// Histogram resolution of the uniformity tests.
pub const UNIFORMITY_BINS: usize = 32;

const EQUIVALENCE_TOL: f64 = 1e-9;
const NOISE_RTOL: f64 = 0.01;
const POWER_SLACK: f64 = 0.02;
const SIGNIFICANCE: f64 = 0.01;
const CORRELATION_TOL: f64 = 0.01;
const STANDARD_ERRORS: f64 = 3.0;
const RATE_SPREAD_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Forces the decoder scaling instead of the MMSE value.
    pub alpha_r: Option<f64>,
    /// Relative perturbation of user 2's lattice step; nonzero values break
    /// the nesting on purpose.
    pub nesting_perturbation: f64,
    /// Interference powers of the invariance sweep; empty to skip it.
    pub q_sweep: Vec<f64>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            alpha_r: None,
            nesting_perturbation: 0.0,
            q_sweep: Vec::new(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub q: f64,
    pub measured_effective_noise_power: f64,
    pub noise_standard_error: f64,
    pub empirical_sinr: f64,
    pub scalar_rate_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub preset: Preset,
    pub n: usize,
    pub seed: u64,
    pub params: ChannelParams,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_r: f64,
    pub lattice_r_step: f64,
    pub measured_effective_noise_power: f64,
    pub analytic_effective_noise_power: f64,
    pub noise_standard_error: f64,
    /// Largest distance, modulo `Λ_r`, between the decoder output and the
    /// equivalent channel's prediction.
    pub equivalence_max_residual: f64,
    pub empirical_sinr: f64,
    pub analytic_sinr: f64,
    /// `½·log₂(analytic SINR)` minus the scalar shaping penalty.
    pub scalar_rate_bound: f64,
    pub empirical_rate_bound: f64,
    pub transmit_power: [f64; 2],
    pub estimation_distortion: [f64; 2],
    /// Chi-square p-value of each `Xᵢ` on the cell of `Λᵢ`.
    pub uniformity_pvalues: [f64; 2],
    pub uniformity_pvalue: f64,
    /// Largest `|corr(Xᵢ, Vᵢ)|` over message-carrying users.
    pub independence_stat: f64,
    pub interference_sweep: Vec<SweepEntry>,
    pub checks: Vec<Check>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BlockStats {
    pub n: u64,
    pub e2_sum: f64,
    pub e4_sum: f64,
    pub yp2_sum: f64,
    pub max_residual: f64,
    pub x2_sum: [f64; 2],
    pub bins: [[u64; UNIFORMITY_BINS]; 2],
    pub cross: [CrossMoments; 2],
    pub w2_sum: [f64; 2],
    pub symbol_errors: u64,
}

impl BlockStats {
    fn merge(&mut self, o: &BlockStats) {
        self.n += o.n;
        self.e2_sum += o.e2_sum;
        self.e4_sum += o.e4_sum;
        self.yp2_sum += o.yp2_sum;
        self.max_residual = self.max_residual.max(o.max_residual);
        self.symbol_errors += o.symbol_errors;
        for u in 0..2 {
            self.x2_sum[u] += o.x2_sum[u];
            self.w2_sum[u] += o.w2_sum[u];
            self.cross[u].merge(&o.cross[u]);
            for (a, b) in self.bins[u].iter_mut().zip(&o.bins[u]) {
                *a += b;
            }
        }
    }

    fn mean_noise(&self) -> f64 {
        self.e2_sum / self.n as f64
    }

    fn noise_standard_error(&self) -> f64 {
        let n = self.n as f64;
        let m2 = self.e2_sum / n;
        let var = (self.e4_sum / n - m2 * m2).max(0.0);
        (var / n).sqrt()
    }

    fn empirical_sinr(&self) -> f64 {
        self.yp2_sum / self.e2_sum
    }
}

fn process_block(
    config: &SchemeConfig,
    params: &ChannelParams,
    source: MessageSource,
    seed: u64,
    block: usize,
    len: usize,
) -> BlockStats {
    let mut batch = generate_block(config, params, source, seed, block, len);
    encode(config, &mut batch);
    apply_channel(&mut batch);
    decode_frontend(config, &mut batch);
    let noise = effective_noise(config, &batch);
    let predicted = equivalent_channel(config, &batch);
    let lr = &config.lattice_r;

    let mut st = BlockStats {
        n: len as u64,
        ..Default::default()
    };
    for (i, &e) in noise.iter().enumerate() {
        let e2 = e * e;
        st.e2_sum += e2;
        st.e4_sum += e2 * e2;
        st.yp2_sum += batch.y_prime[i] * batch.y_prime[i];
        st.max_residual = st
            .max_residual
            .max(lr.fold(batch.y_prime[i] - predicted[i]).abs());
    }
    let users = [
        (
            &batch.x1,
            &batch.v1,
            &batch.s1,
            &batch.s1_hat,
            &config.lattice1,
            config.v1_active,
        ),
        (
            &batch.x2,
            &batch.v2,
            &batch.s2,
            &batch.s2_hat,
            &config.lattice2,
            config.v2_active,
        ),
    ];
    for (u, (x, v, s, s_hat, lattice, active)) in users.into_iter().enumerate() {
        for i in 0..len {
            st.x2_sum[u] += x[i] * x[i];
            st.bins[u][lattice.cell_bin(x[i], UNIFORMITY_BINS)] += 1;
            let w = s[i] - s_hat[i];
            st.w2_sum[u] += w * w;
            if active {
                st.cross[u].push(x[i], v[i]);
            }
        }
    }
    if let MessageSource::Codebook { size } = source {
        st.symbol_errors = count_symbol_errors(config, &batch, size);
    }
    st
}

fn count_symbol_errors(config: &SchemeConfig, batch: &SignalBatch, size: usize) -> u64 {
    let symbols = if config.v1_active {
        &batch.symbols1
    } else {
        &batch.symbols2
    };
    let spacing = config.lattice_r.step() / size as f64;
    let centre = (size as f64 - 1.0) / 2.0;
    let m = size as i64;
    batch
        .y_prime
        .iter()
        .zip(symbols)
        .filter(|(&y, &j)| {
            let guess = ((y / spacing + centre).round() as i64).rem_euclid(m);
            guess != j as i64
        })
        .count() as u64
}

/// Runs the pipeline over `n` dimensions and merges block statistics in
/// block order.
pub(crate) fn simulate(
    config: &SchemeConfig,
    params: &ChannelParams,
    source: MessageSource,
    n: usize,
    seed: u64,
    exec: Execution,
) -> BlockStats {
    let blocks = n.div_ceil(BLOCK_LEN);
    let parts = map_blocks(exec, blocks, |b| {
        let len = BLOCK_LEN.min(n - b * BLOCK_LEN);
        process_block(config, params, source, seed, b, len)
    });
    let mut total = BlockStats::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

fn configure(
    preset: Preset,
    params: &ChannelParams,
    options: &ExperimentOptions,
) -> Result<SchemeConfig> {
    let config = match options.alpha_r {
        Some(a) => build_preset_with_alpha(preset, params, a)?,
        None => build_preset(preset, params)?,
    };
    if options.nesting_perturbation != 0.0 {
        config.with_perturbed_lattice2(options.nesting_perturbation)
    } else {
        Ok(config)
    }
}

/// Full pipeline with the preset's MMSE scaling and no interference sweep.
pub fn run_experiment(
    preset: Preset,
    params: &ChannelParams,
    n: usize,
    seed: u64,
) -> Result<SimReport> {
    run_experiment_with(preset, params, n, seed, &ExperimentOptions::default())
}

pub fn run_experiment_with(
    preset: Preset,
    params: &ChannelParams,
    n: usize,
    seed: u64,
    options: &ExperimentOptions,
) -> Result<SimReport> {
    params.validate()?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let config = configure(preset, params, options)?;
    let st = simulate(
        &config,
        params,
        MessageSource::Continuous,
        n,
        seed,
        options.execution,
    );
    let nf = n as f64;
    let penalty = config.lattice_r.shaping_penalty_bits();

    let measured = st.mean_noise();
    let analytic = config.analytic_noise_power(params);
    let analytic_sinr = config.analytic_sinr(params);
    let empirical_sinr = st.empirical_sinr();
    let transmit_power = [st.x2_sum[0] / nf, st.x2_sum[1] / nf];
    let estimation_distortion = [st.w2_sum[0] / nf, st.w2_sum[1] / nf];
    let uniformity_pvalues = [
        chi_square_uniform_pvalue(&st.bins[0]),
        chi_square_uniform_pvalue(&st.bins[1]),
    ];
    let active = [config.v1_active, config.v2_active];
    let independence_stat = (0..2)
        .filter(|&u| active[u])
        .map(|u| st.cross[u].correlation().abs())
        .fold(0.0, f64::max);

    let interference_sweep = if options.q_sweep.is_empty() {
        Vec::new()
    } else {
        sweep_entries(preset, params, &options.q_sweep, n, seed, options)?
    };

    let mut checks = Vec::new();
    let nesting = config.check_nesting();
    checks.push(Check::new(
        "nesting",
        nesting.is_ok(),
        nesting
            .err()
            .map_or_else(|| "lattices nested".into(), |e| e.to_string()),
    ));
    let residual_rel = st.max_residual / config.lattice_r.step();
    checks.push(Check::new(
        "equivalence",
        residual_rel < EQUIVALENCE_TOL,
        format!("max residual {residual_rel:.3e} of the decoding step"),
    ));
    let noise_err = (measured - analytic).abs() / analytic;
    checks.push(Check::new(
        "effective_noise",
        noise_err < NOISE_RTOL,
        format!("measured {measured:.6} vs analytic {analytic:.6}"),
    ));
    for (u, p) in [params.p1, params.p2].into_iter().enumerate() {
        checks.push(Check::new(
            &format!("power_user{}", u + 1),
            transmit_power[u] <= p * (1.0 + POWER_SLACK),
            format!("empirical power {:.6} vs constraint {p}", transmit_power[u]),
        ));
    }
    let min_p = uniformity_pvalues[0].min(uniformity_pvalues[1]);
    checks.push(Check::new(
        "uniformity",
        min_p >= SIGNIFICANCE,
        format!(
            "chi-square p-values {:.4}, {:.4}",
            uniformity_pvalues[0], uniformity_pvalues[1]
        ),
    ));
    checks.push(Check::new(
        "independence",
        independence_stat < CORRELATION_TOL,
        format!("max |corr(X, V)| {independence_stat:.3e}"),
    ));
    for (u, e) in [params.e1, params.e2].into_iter().enumerate() {
        let got = estimation_distortion[u];
        let tol = STANDARD_ERRORS * e * (2.0 / nf).sqrt();
        checks.push(Check::new(
            &format!("estimation_user{}", u + 1),
            (got - e).abs() <= tol,
            format!("empirical distortion {got:.6} vs {e}"),
        ));
    }
    if interference_sweep.len() >= 2 {
        checks.push(interference_check(&interference_sweep));
        let (lo, hi) = interference_sweep
            .iter()
            .map(|s| s.scalar_rate_bound)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            });
        checks.push(Check::new(
            "interference_rate_bound",
            hi - lo < RATE_SPREAD_TOL,
            format!("rate bound spread {:.3e} bits", hi - lo),
        ));
    }

    Ok(SimReport {
        preset,
        n,
        seed,
        params: *params,
        alpha1: config.alpha1,
        alpha2: config.alpha2,
        alpha_r: config.alpha_r,
        lattice_r_step: config.lattice_r.step(),
        measured_effective_noise_power: measured,
        analytic_effective_noise_power: analytic,
        noise_standard_error: st.noise_standard_error(),
        equivalence_max_residual: st.max_residual,
        empirical_sinr,
        analytic_sinr,
        scalar_rate_bound: 0.5 * analytic_sinr.log2() - penalty,
        empirical_rate_bound: 0.5 * empirical_sinr.log2() - penalty,
        transmit_power,
        estimation_distortion,
        uniformity_pvalues,
        uniformity_pvalue: min_p,
        independence_stat,
        interference_sweep,
        checks,
    })
}

fn interference_check(entries: &[SweepEntry]) -> Check {
    let mut worst: f64 = 0.0;
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            let se = (a.noise_standard_error.powi(2) + b.noise_standard_error.powi(2)).sqrt();
            let diff = (a.measured_effective_noise_power - b.measured_effective_noise_power).abs();
            worst = worst.max(diff / se);
        }
    }
    Check::new(
        "interference_independence",
        worst < STANDARD_ERRORS,
        format!("largest pairwise difference {worst:.3} combined standard errors"),
    )
}

fn sweep_entries(
    preset: Preset,
    params: &ChannelParams,
    q_values: &[f64],
    n: usize,
    seed: u64,
    options: &ExperimentOptions,
) -> Result<Vec<SweepEntry>> {
    q_values
        .iter()
        .map(|&q| {
            let p = params.with_interference_power(q)?;
            let config = configure(preset, &p, options)?;
            let st = simulate(
                &config,
                &p,
                MessageSource::Continuous,
                n,
                seed,
                options.execution,
            );
            let sinr = st.empirical_sinr();
            Ok(SweepEntry {
                q,
                measured_effective_noise_power: st.mean_noise(),
                noise_standard_error: st.noise_standard_error(),
                empirical_sinr: sinr,
                scalar_rate_bound: 0.5 * sinr.log2() - config.lattice_r.shaping_penalty_bits(),
            })
        })
        .collect()
}

/// Effective-noise statistics of the pipeline for each interference power.
pub fn interference_sweep(
    preset: Preset,
    params: &ChannelParams,
    q_values: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<SweepEntry>> {
    if q_values.is_empty() {
        return Err(invalid("interference sweep needs at least one power"));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    sweep_entries(
        preset,
        params,
        q_values,
        n,
        seed,
        &ExperimentOptions::default(),
    )
}

/// Empirical SINR `E[Y′²]/E[e²]` of an already built scheme.
pub fn measure_sinr(
    config: &SchemeConfig,
    params: &ChannelParams,
    n: usize,
    seed: u64,
    exec: Execution,
) -> f64 {
    simulate(config, params, MessageSource::Continuous, n, seed, exec).empirical_sinr()
}

/// Chi-square p-value of user `user`'s transmitted signal when its message
/// is held at `v` in every dimension.
pub fn dither_uniformity(
    config: &SchemeConfig,
    params: &ChannelParams,
    user: usize,
    v: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if !(user == 1 || user == 2) {
        return Err(invalid(format!("user must be 1 or 2, got {user}")));
    }
    let source = MessageSource::Fixed { v1: v, v2: v };
    let st = simulate(config, params, source, n, seed, Execution::default());
    Ok(chi_square_uniform_pvalue(&st.bins[user - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corner() -> ChannelParams {
        ChannelParams::new(9.0, 4.0, 1.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn corner_run_passes_every_check() {
        let r = run_experiment(Preset::T1Case1, &corner(), 200_000, 1).unwrap();
        assert!(r.passed(), "{:?}", r.failed_checks());
        assert!((r.analytic_effective_noise_power - 4.0 / 3.0).abs() < 1e-12);
        assert!((r.analytic_sinr - 3.0).abs() < 1e-12);
    }

    #[test]
    fn execution_modes_agree_bit_for_bit() {
        let p = corner();
        let seq = ExperimentOptions {
            execution: Execution::Sequential,
            ..Default::default()
        };
        let par = ExperimentOptions {
            execution: Execution::Parallel,
            ..Default::default()
        };
        let a = run_experiment_with(Preset::T1Case1, &p, 100_000, 3, &seq).unwrap();
        let b = run_experiment_with(Preset::T1Case1, &p, 100_000, 3, &par).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn broken_nesting_is_reported() {
        let opts = ExperimentOptions {
            nesting_perturbation: 0.01,
            ..Default::default()
        };
        let r = run_experiment_with(Preset::T1Case1, &corner(), 50_000, 1, &opts).unwrap();
        assert!(!r.passed());
        assert!(r.equivalence_max_residual > 0.1 * r.lattice_r_step);
    }

    #[test]
    fn interference_sweep_is_flat() {
        let p = corner();
        let q: Vec<f64> = [1e2, 1e4, 1e6].iter().map(|f| f * 9.0).collect();
        let s = interference_sweep(Preset::T1Case1, &p, &q, 100_000, 2).unwrap();
        assert_eq!(s.len(), 3);
        let c = interference_check(&s);
        assert!(c.passed, "{}", c.detail);
        assert!(interference_sweep(Preset::T1Case1, &p, &[], 10, 2).is_err());
    }

    #[test]
    fn fixed_message_still_gives_uniform_transmission() {
        let p = ChannelParams::new(10.0, 10.0, 1.0, 2.0, 2.0).unwrap();
        let c = build_preset(Preset::T2Balanced, &p).unwrap();
        let pv = dither_uniformity(&c, &p, 1, 0.3, 100_000, 4).unwrap();
        assert!(pv >= 0.01, "{pv}");
        assert!(dither_uniformity(&c, &p, 3, 0.3, 10, 4).is_err());
    }

    #[test]
    fn zero_length_is_rejected() {
        assert!(run_experiment(Preset::T1Case1, &corner(), 0, 1).is_err());
    }
}

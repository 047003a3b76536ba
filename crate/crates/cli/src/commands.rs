//! The three subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dirtymac::envelope::EnvelopePoint;
use dirtymac::rates::{
    baseline_full_si, classify_regime, compare_regions, full_si_region, imbalanced_formula,
    mmse_alpha, nearly_formula, partial_si_sum_rate, region_boundary, residual, Containment,
    RateRegion, SumRate,
};
use dirtymac::sim::{run_experiment_with, ExperimentOptions, SimReport};
use dirtymac::{ChannelParams, Error, GridSpec, Regime, SchemeKind};
use serde::Serialize;

use crate::config::{Axis, Format, RunConfig};
use crate::error::CliError;
use crate::output::{emit, num, opt_num, write_atomic};

/// Interference powers of the invariance sweep, relative to `max(P₁, P₂)`.
const Q_SWEEP_FACTORS: [f64; 3] = [1e2, 1e4, 1e6];
const BROKEN_NESTING: f64 = 0.01;

pub const REGION_HEADER: &str = "series,label,x,y";
pub const SWEEP_HEADER: &str = "x,rate_partial,rate_full_si,regime,formula_imbalanced,formula_nearly,measured_noise,analytic_noise,empirical_sinr";
pub const SIMULATE_HEADER: &str = "preset,n,seed,measured_noise,analytic_noise,noise_standard_error,equivalence_max_residual,empirical_sinr,analytic_sinr,scalar_rate_bound,uniformity_pvalue,independence_stat,passed";

#[derive(Debug, Serialize)]
struct RegionSide {
    regime: Regime,
    raw_sum_rate: f64,
    sum_rate: f64,
    vertices: Vec<(f64, f64)>,
    envelope: Option<Vec<EnvelopePoint>>,
}

impl RegionSide {
    fn new(rate: SumRate, region: RateRegion) -> Self {
        Self {
            regime: rate.regime,
            raw_sum_rate: rate.raw,
            sum_rate: rate.value,
            vertices: region.vertices,
            envelope: rate.envelope.map(|e| e.points),
        }
    }
}

#[derive(Debug, Serialize)]
struct RegionOutput<'a> {
    config: &'a RunConfig,
    partial: RegionSide,
    full_si: RegionSide,
    relation: Containment,
    sum_rate_gap: f64,
    mmse_alpha: BTreeMap<String, f64>,
}

pub fn cmd_region(config: &RunConfig) -> Result<(), CliError> {
    let grid = GridSpec::linear(config.grid_points);
    let p = &config.params;
    let partial_region = region_boundary(p, &grid)?;
    let full_region = full_si_region(p, &grid)?;
    let cmp = compare_regions(&partial_region, &full_region);
    let alphas: BTreeMap<String, f64> = SchemeKind::ALL
        .iter()
        .map(|&k| (format!("{k:?}"), mmse_alpha(k, p)))
        .collect();
    let out = RegionOutput {
        config,
        partial: RegionSide::new(partial_si_sum_rate(p, &grid)?, partial_region),
        full_si: RegionSide::new(baseline_full_si(p, &grid)?, full_region),
        relation: cmp.relation,
        sum_rate_gap: cmp.sum_rate_gap,
        mmse_alpha: alphas,
    };
    let text = match config.format {
        Format::Json => to_json(&out)?,
        Format::Csv => region_csv(&out),
    };
    emit(config.output_path.as_deref(), &text)
}

fn region_csv(out: &RegionOutput) -> String {
    let mut s = format!("{REGION_HEADER}\n");
    let mut row = |series: &str, label: &str, x: String, y: String| {
        let _ = writeln!(s, "{series},{label},{x},{y}");
    };
    let sides = [("partial", &out.partial), ("full_si", &out.full_si)];
    for (name, side) in sides {
        for &(x, y) in &side.vertices {
            row(&format!("{name}_region"), "vertex", num(x), num(y));
        }
    }
    for (name, side) in sides {
        row("sum_rate", name, String::new(), num(side.sum_rate));
        row("raw_sum_rate", name, String::new(), num(side.raw_sum_rate));
        row(
            "regime",
            &format!("{name}:{}", side.regime),
            String::new(),
            String::new(),
        );
    }
    row(
        "sum_rate_gap",
        "full_si-partial",
        String::new(),
        num(out.sum_rate_gap),
    );
    row(
        "relation",
        &format!("{:?}", out.relation),
        String::new(),
        String::new(),
    );
    for (k, v) in &out.mmse_alpha {
        row("mmse_alpha", k, String::new(), num(*v));
    }
    for (name, side) in sides {
        if let Some(env) = &side.envelope {
            for pt in env {
                row(&format!("envelope_{name}"), "raw", num(pt.x), num(pt.raw));
            }
            for pt in env {
                row(
                    &format!("envelope_{name}"),
                    "enveloped",
                    num(pt.x),
                    num(pt.enveloped),
                );
            }
        }
    }
    s
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub rate_partial: f64,
    pub rate_full_si: f64,
    pub regime: Regime,
    pub formula_imbalanced: f64,
    pub formula_nearly: f64,
    pub measured_noise: Option<f64>,
    pub analytic_noise: Option<f64>,
    pub empirical_sinr: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SweepOutput<'a> {
    config: &'a RunConfig,
    rows: Vec<SweepRow>,
}

fn params_at(base: &ChannelParams, axis: Axis, x: f64) -> Result<ChannelParams, Error> {
    match axis {
        Axis::E1e2 => base.with_distortion(x / 2.0, x / 2.0),
        Axis::P1 => base.with_powers(x, base.p2),
        Axis::P2 => base.with_powers(base.p1, x),
        Axis::Q => base.with_interference_power(x),
    }
}

pub fn cmd_sweep(config: &RunConfig) -> Result<(), CliError> {
    let spec = config
        .sweep
        .ok_or_else(|| CliError::Usage("sweep needs --axis, --from, --to and --step".into()))?;
    let grid = GridSpec::linear(config.grid_points);
    let mut rows = Vec::new();
    for x in spec.points() {
        let p = params_at(&config.params, spec.axis, x)?;
        let mut row = SweepRow {
            x,
            rate_partial: partial_si_sum_rate(&p, &grid)?.value,
            rate_full_si: baseline_full_si(&p, &grid)?.value,
            regime: classify_regime(&p),
            formula_imbalanced: imbalanced_formula(&p),
            formula_nearly: nearly_formula(p.p1, p.p2, residual(&p)),
            measured_noise: None,
            analytic_noise: None,
            empirical_sinr: None,
        };
        if let (true, Some(preset)) = (config.with_sim, config.preset) {
            let opts = ExperimentOptions::default();
            match run_experiment_with(preset, &p, config.n, config.seed, &opts) {
                Ok(r) => {
                    row.measured_noise = Some(r.measured_effective_noise_power);
                    row.analytic_noise = Some(r.analytic_effective_noise_power);
                    row.empirical_sinr = Some(r.empirical_sinr);
                }
                // the preset does not apply at this point; leave the columns empty
                Err(Error::Precondition(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        rows.push(row);
    }
    let text = match config.format {
        Format::Json => to_json(&SweepOutput { config, rows })?,
        Format::Csv => {
            let mut s = format!("{SWEEP_HEADER}\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    num(r.x),
                    num(r.rate_partial),
                    num(r.rate_full_si),
                    r.regime,
                    num(r.formula_imbalanced),
                    num(r.formula_nearly),
                    opt_num(r.measured_noise),
                    opt_num(r.analytic_noise),
                    opt_num(r.empirical_sinr)
                );
            }
            s
        }
    };
    emit(config.output_path.as_deref(), &text)
}

#[derive(Debug, Serialize)]
struct SimulateOutput<'a> {
    config: &'a RunConfig,
    report: &'a SimReport,
}

pub fn cmd_simulate(config: &RunConfig) -> Result<(), CliError> {
    let preset = config
        .preset
        .ok_or_else(|| CliError::Usage("missing required parameter --preset".into()))?;
    let p = &config.params;
    let qmax = p.p1.max(p.p2);
    let opts = ExperimentOptions {
        q_sweep: Q_SWEEP_FACTORS.iter().map(|f| f * qmax).collect(),
        nesting_perturbation: if config.break_nesting {
            BROKEN_NESTING
        } else {
            0.0
        },
        ..Default::default()
    };
    let report = run_experiment_with(preset, p, config.n, config.seed, &opts)?;
    let json = to_json(&SimulateOutput {
        config,
        report: &report,
    })?;
    let csv = simulate_csv(&report);

    let (primary, secondary) = match config.format {
        Format::Json => (&json, &csv),
        Format::Csv => (&csv, &json),
    };
    match &config.output_path {
        Some(path) => {
            write_atomic(path, primary)?;
            write_atomic(&companion_path(path, config.format), secondary)?;
        }
        None => emit(None, primary)?,
    }

    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .failed_checks()
            .iter()
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        Err(CliError::ChecksFailed(format!(
            "checks failed: {}",
            failed.join("; ")
        )))
    }
}

fn simulate_csv(r: &SimReport) -> String {
    format!(
        "{SIMULATE_HEADER}\n{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.preset,
        r.n,
        r.seed,
        num(r.measured_effective_noise_power),
        num(r.analytic_effective_noise_power),
        num(r.noise_standard_error),
        num(r.equivalence_max_residual),
        num(r.empirical_sinr),
        num(r.analytic_sinr),
        num(r.scalar_rate_bound),
        num(r.uniformity_pvalue),
        num(r.independence_stat),
        r.passed()
    )
}

/// Where the second artifact of `simulate` goes: the output path with the
/// other format's extension.
pub fn companion_path(path: &Path, primary: Format) -> PathBuf {
    let ext = match primary {
        Format::Json => "csv",
        Format::Csv => "json",
    };
    let candidate = path.with_extension(ext);
    if candidate == path {
        path.with_extension(format!("summary.{ext}"))
    } else {
        candidate
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

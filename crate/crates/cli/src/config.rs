//! Command-line flags, config files and the resolved run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirtymac::envelope::MIN_GRID_POINTS;
use dirtymac::rates::DEFAULT_INTERFERENCE_FACTOR;
use dirtymac::sim::Preset;
use dirtymac::ChannelParams;
use serde::Serialize;

use crate::error::CliError;

pub const DEFAULT_N: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 0xD1A7;
pub const DEFAULT_GRID_POINTS: usize = 1025;
pub const MIN_SIM_N: usize = 1000;

#[derive(Debug, Parser)]
#[command(
    name = "dirtymac",
    version,
    about = "Rate regions and lattice-scheme simulation for the doubly dirty MAC"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Partial and perfect side-information regions at one operating point.
    Region(Flags),
    /// Monte Carlo run of one scheme preset.
    Simulate(Flags),
    /// Sum rates along one parameter axis.
    Sweep(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Region,
    Simulate,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    E1e2,
    P1,
    P2,
    Q,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::E1e2 => "e1e2",
            Axis::P1 => "p1",
            Axis::P2 => "p2",
            Axis::Q => "q",
        })
    }
}

/// Flags shared by every command. All optional so a config file can fill
/// them in.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub e1: Option<f64>,
    #[arg(long)]
    pub e2: Option<f64>,
    /// Interference power (simulation only).
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Key-value file of defaults; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Perturb user 2's lattice by 1% to break the nesting (negative control).
    #[arg(long = "break-nesting")]
    pub break_nesting: bool,
    /// Add measured simulation columns to a sweep (needs --preset).
    #[arg(long = "with-sim")]
    pub with_sim: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.to - self.from) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.from + i as f64 * self.step)
            .collect()
    }
}

/// A validated, fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: ChannelParams,
    pub preset: Option<Preset>,
    pub n: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub sweep: Option<SweepSpec>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub break_nesting: bool,
    pub with_sim: bool,
}

const KEYS: [&str; 18] = [
    "p1",
    "p2",
    "noise",
    "e1",
    "e2",
    "q",
    "preset",
    "n",
    "seed",
    "grid-points",
    "axis",
    "from",
    "to",
    "step",
    "format",
    "out",
    "break-nesting",
    "with-sim",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config line {}: expected 'key = value'",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key '{key}'",
                lineno + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "config key '{key}': expected true or false"
        ))),
    }
}

/// Fills every flag left unset from the config file entries.
pub fn merge_file(flags: &mut Flags, file: &BTreeMap<String, String>) -> Result<(), CliError> {
    for (key, value) in file {
        let v = value.as_str();
        match key.as_str() {
            "p1" => fill(&mut flags.p1, parse_value(key, v)?),
            "p2" => fill(&mut flags.p2, parse_value(key, v)?),
            "noise" => fill(&mut flags.noise, parse_value(key, v)?),
            "e1" => fill(&mut flags.e1, parse_value(key, v)?),
            "e2" => fill(&mut flags.e2, parse_value(key, v)?),
            "q" => fill(&mut flags.q, parse_value(key, v)?),
            "preset" => fill(&mut flags.preset, v.to_string()),
            "n" => fill(&mut flags.n, parse_value(key, v)?),
            "seed" => fill(&mut flags.seed, parse_seed(key, v)?),
            "grid-points" => fill(&mut flags.grid_points, parse_value(key, v)?),
            "axis" => fill(
                &mut flags.axis,
                Axis::from_str(v, true)
                    .map_err(|e| CliError::Usage(format!("config key 'axis': {e}")))?,
            ),
            "from" => fill(&mut flags.from, parse_value(key, v)?),
            "to" => fill(&mut flags.to, parse_value(key, v)?),
            "step" => fill(&mut flags.step, parse_value(key, v)?),
            "format" => fill(
                &mut flags.format,
                Format::from_str(v, true)
                    .map_err(|e| CliError::Usage(format!("config key 'format': {e}")))?,
            ),
            "out" => fill(&mut flags.out, PathBuf::from(v)),
            "break-nesting" => flags.break_nesting |= parse_bool(key, v)?,
            "with-sim" => flags.with_sim |= parse_bool(key, v)?,
            other => return Err(CliError::Usage(format!("unknown key '{other}'"))),
        }
    }
    Ok(())
}

fn parse_seed(key: &str, v: &str) -> Result<u64, CliError> {
    match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16)
            .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{v}'"))),
        None => parse_value(key, v),
    }
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

fn require(value: Option<f64>, name: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required parameter --{name}")))
}

/// Validates flags (after merging any config file) into a [`RunConfig`].
pub fn resolve(command: Command, mut flags: Flags) -> Result<RunConfig, CliError> {
    if let Some(path) = flags.config.clone() {
        let text = read_config(&path)?;
        merge_file(&mut flags, &parse_config_text(&text)?)?;
    }

    let sweep = if command == Command::Sweep {
        let axis = flags
            .axis
            .ok_or_else(|| CliError::Usage("missing required parameter --axis".into()))?;
        let spec = SweepSpec {
            axis,
            from: require(flags.from, "from")?,
            to: require(flags.to, "to")?,
            step: require(flags.step, "step")?,
        };
        if !(spec.step > 0.0 && spec.step.is_finite()) {
            return Err(CliError::Validation(format!(
                "--step must be positive, got {}",
                spec.step
            )));
        }
        if !(spec.from.is_finite() && spec.to.is_finite() && spec.to >= spec.from) {
            return Err(CliError::Validation(format!(
                "sweep range must be increasing, got {} to {}",
                spec.from, spec.to
            )));
        }
        Some(spec)
    } else {
        None
    };
    let swept = sweep.map(|s| s.axis);

    // the swept power needs no base value; its first sweep point stands in
    let p1 = match swept {
        Some(Axis::P1) => flags.p1.unwrap_or(sweep.unwrap().from),
        _ => require(flags.p1, "p1")?,
    };
    let p2 = match swept {
        Some(Axis::P2) => flags.p2.unwrap_or(sweep.unwrap().from),
        _ => require(flags.p2, "p2")?,
    };
    let noise = require(flags.noise, "noise")?;
    let (e1, e2) = (flags.e1.unwrap_or(0.0), flags.e2.unwrap_or(0.0));
    let q = match (swept, flags.q) {
        (Some(Axis::Q), None) => sweep.unwrap().from,
        (_, Some(q)) => q,
        (_, None) => DEFAULT_INTERFERENCE_FACTOR * p1.max(p2),
    };
    let params = ChannelParams::with_interference(p1, p2, noise, e1, e2, q)?;

    let preset = flags
        .preset
        .as_deref()
        .map(|s| s.parse::<Preset>())
        .transpose()?;
    let needs_preset =
        command == Command::Simulate || (command == Command::Sweep && flags.with_sim);
    if needs_preset && preset.is_none() {
        return Err(CliError::Usage(
            "missing required parameter --preset".into(),
        ));
    }

    let n = flags.n.unwrap_or(DEFAULT_N);
    if needs_preset && n < MIN_SIM_N {
        return Err(CliError::Validation(format!(
            "--n must be at least {MIN_SIM_N}, got {n}"
        )));
    }
    let grid_points = flags.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    if grid_points < MIN_GRID_POINTS {
        return Err(CliError::Validation(format!(
            "--grid-points must be at least {MIN_GRID_POINTS}, got {grid_points}"
        )));
    }
    let default_format = if command == Command::Simulate {
        Format::Json
    } else {
        Format::Csv
    };

    Ok(RunConfig {
        command,
        params,
        preset,
        n,
        seed: flags.seed.unwrap_or(DEFAULT_SEED),
        grid_points,
        sweep,
        output_path: flags.out,
        format: flags.format.unwrap_or(default_format),
        break_nesting: flags.break_nesting,
        with_sim: flags.with_sim,
    })
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(p1: Option<f64>, p2: Option<f64>) -> Flags {
        Flags {
            p1,
            p2,
            noise: Some(1.0),
            e1: Some(0.5),
            e2: Some(0.5),
            ..Default::default()
        }
    }

    #[test]
    fn region_flags_resolve_with_defaults() {
        let c = resolve(Command::Region, flags(Some(100.0), Some(4.0))).unwrap();
        assert_eq!(c.n, DEFAULT_N);
        assert_eq!(c.seed, 0xD1A7);
        assert_eq!(c.grid_points, 1025);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.params.interference_power, 1e6);
    }

    #[test]
    fn missing_power_is_named() {
        let mut f = flags(Some(9.0), None);
        f.preset = Some("T1-Case1".into());
        match resolve(Command::Simulate, f) {
            Err(CliError::Usage(msg)) => assert!(msg.contains("p2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simulate_requires_a_preset_and_enough_samples() {
        let f = flags(Some(9.0), Some(4.0));
        assert!(matches!(
            resolve(Command::Simulate, f.clone()),
            Err(CliError::Usage(_))
        ));
        let mut g = f;
        g.preset = Some("T1-Case1".into());
        g.n = Some(10);
        assert!(matches!(
            resolve(Command::Simulate, g),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn sweep_point_count() {
        let s = SweepSpec {
            axis: Axis::E1e2,
            from: 0.0,
            to: 4.0,
            step: 0.25,
        };
        let pts = s.points();
        assert_eq!(pts.len(), 17);
        assert_eq!(pts[16], 4.0);
        let s = SweepSpec {
            to: 1.0,
            step: 0.1,
            ..s
        };
        assert_eq!(s.points().len(), 11);
    }

    #[test]
    fn sweep_range_must_increase() {
        let mut f = flags(Some(100.0), Some(4.0));
        f.axis = Some(Axis::E1e2);
        f.from = Some(4.0);
        f.to = Some(0.0);
        f.step = Some(0.25);
        assert!(matches!(
            resolve(Command::Sweep, f),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn config_text_parsing() {
        let m = parse_config_text("# comment\np1 = 9\n\np2=4 # trailing\nseed = 0x10\n").unwrap();
        assert_eq!(m["p1"], "9");
        assert_eq!(m["p2"], "4");
        let mut f = Flags {
            p1: Some(100.0),
            ..Default::default()
        };
        merge_file(&mut f, &m).unwrap();
        assert_eq!(f.p1, Some(100.0));
        assert_eq!(f.p2, Some(4.0));
        assert_eq!(f.seed, Some(16));
        assert!(parse_config_text("bogus = 1").is_err());
        assert!(parse_config_text("p1 9").is_err());
    }

    #[test]
    fn small_grids_are_rejected() {
        let mut f = flags(Some(100.0), Some(4.0));
        f.grid_points = Some(8);
        assert!(matches!(
            resolve(Command::Region, f),
            Err(CliError::Validation(_))
        ));
    }
}

//! Run configuration: optional JSON file, overridden flag by flag.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use rf_franson::{p1_of_nbar, CalibrationParams, HistogramParams, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Keys accepted in the config file. Phases come either in radians
/// (`phi_a`) or in units of π (`phi_a_pi`), never both.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub p1: Option<f64>,
    pub nbar: Option<f64>,
    pub cal_a: Option<f64>,
    pub cal_b: Option<f64>,
    pub phi_p: Option<f64>,
    pub phi_p_pi: Option<f64>,
    pub phi_a: Option<f64>,
    pub phi_a_pi: Option<f64>,
    pub phi_b: Option<f64>,
    pub phi_b_pi: Option<f64>,
    pub tau_m: Option<f64>,
    pub tau_p: Option<f64>,
    pub tau_g: Option<f64>,
    pub t2: Option<f64>,
    pub bin_width: Option<f64>,
    pub range: Option<f64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    // accepted for compatibility, never read
    #[allow(dead_code)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// JSON config file; flags override its keys
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single-photon probability per temporal mode
    #[arg(long, global = true)]
    pub p1: Option<f64>,
    /// Mean photon number, mapped to p1 through the calibration
    #[arg(long, global = true)]
    pub nbar: Option<f64>,
    /// Calibration constant A of p1 = 1 - A/(1 + B nbar)
    #[arg(long, global = true)]
    pub cal_a: Option<f64>,
    /// Calibration constant B of p1 = 1 - A/(1 + B nbar)
    #[arg(long, global = true)]
    pub cal_b: Option<f64>,
    /// Preparation AMZI phase in units of pi
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub phi_p_pi: Option<f64>,
    /// Alice analyzer phase in units of pi
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub phi_a_pi: Option<f64>,
    /// Bob analyzer phase in units of pi
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub phi_b_pi: Option<f64>,
    /// Analyzer delay in seconds
    #[arg(long, global = true)]
    pub tau_m: Option<f64>,
    /// Preparation delay in seconds
    #[arg(long, global = true)]
    pub tau_p: Option<f64>,
    /// Time-bin grid step in seconds
    #[arg(long, global = true)]
    pub tau_g: Option<f64>,
    /// Histogram peak width in seconds
    #[arg(long, global = true)]
    pub t2: Option<f64>,
    /// Histogram bin width in seconds
    #[arg(long, global = true)]
    pub bin_width: Option<f64>,
    /// Histogram half range in seconds
    #[arg(long, global = true)]
    pub range: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reserved; every computation is deterministic
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub p1: f64,
    pub nbar: Option<f64>,
    pub calibration: CalibrationParams,
    pub phi_p: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub tau_m: f64,
    pub tau_p: f64,
    pub tau_g: f64,
    pub histogram: HistogramParams,
    pub format: Format,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_NBAR: f64 = 0.01;

fn load_file(path: &Path) -> Result<FileConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn phase(
    name: &str,
    flag_pi: Option<f64>,
    rad: Option<f64>,
    pi: Option<f64>,
    default: f64,
) -> Result<f64> {
    if let Some(x) = flag_pi {
        return Ok(x * PI);
    }
    match (rad, pi) {
        (Some(_), Some(_)) => bail!("config sets both {name} and {name}_pi"),
        (Some(r), None) => Ok(r),
        (None, Some(p)) => Ok(p * PI),
        (None, None) => Ok(default),
    }
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };

        let calibration = CalibrationParams::new(
            args.cal_a
                .or(file.cal_a)
                .unwrap_or(CalibrationParams::default().a),
            args.cal_b
                .or(file.cal_b)
                .unwrap_or(CalibrationParams::default().b),
        )?;

        // a flag for either quantity replaces the file's choice
        let (p1, nbar) = if args.p1.is_some() || args.nbar.is_some() {
            (args.p1, args.nbar)
        } else {
            (file.p1, file.nbar)
        };
        let (p1, nbar) = match (p1, nbar) {
            (Some(_), Some(_)) => bail!("p1 and nbar are mutually exclusive"),
            (Some(p1), None) => {
                if !(0.0..=1.0).contains(&p1) {
                    bail!("p1 must lie in [0, 1], got {p1}");
                }
                (p1, None)
            }
            (None, n) => {
                let n = n.unwrap_or(DEFAULT_NBAR);
                (p1_of_nbar(n, &calibration)?, Some(n))
            }
        };

        let defaults = HistogramParams::default();
        let histogram = HistogramParams {
            t2: args.t2.or(file.t2).unwrap_or(defaults.t2),
            bin_width: args
                .bin_width
                .or(file.bin_width)
                .unwrap_or(defaults.bin_width),
            range: args.range.or(file.range).unwrap_or(defaults.range),
            baseline: None,
        };

        let cfg = Self {
            p1,
            nbar,
            calibration,
            phi_p: phase("phi_p", args.phi_p_pi, file.phi_p, file.phi_p_pi, PI)?,
            phi_a: phase("phi_a", args.phi_a_pi, file.phi_a, file.phi_a_pi, 0.0)?,
            phi_b: phase("phi_b", args.phi_b_pi, file.phi_b, file.phi_b_pi, 0.0)?,
            tau_m: args.tau_m.or(file.tau_m).unwrap_or(1.07e-9),
            tau_p: args.tau_p.or(file.tau_p).unwrap_or(2.14e-9),
            tau_g: args.tau_g.or(file.tau_g).unwrap_or(1.07e-9),
            histogram,
            format: args.format.or(file.format).unwrap_or_default(),
            out: args.out.clone().or(file.out),
        };
        cfg.network()?;
        Ok(cfg)
    }

    /// Network with the configured delays and phases.
    pub fn network(&self) -> Result<NetworkSpec> {
        Ok(NetworkSpec::from_delays(
            self.tau_p, self.tau_m, self.tau_g, self.phi_p, self.phi_a, self.phi_b,
        )?)
    }
}

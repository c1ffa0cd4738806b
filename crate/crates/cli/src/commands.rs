use std::f64::consts::PI;

use anyhow::{bail, Result};
use clap::{Args, Subcommand};

use rf_franson::coincidence::{
    closed_form_g2_side, closed_form_g2_zero, coincidence_at_seconds, phase_delay_map,
};
use rf_franson::validate::run_validation;
use rf_franson::{
    chsh_on, closed_form_c, closed_form_s, find_crossing, forward_coincidence, hbt_g2, peak_table,
    power_scan, synthesize_histogram, ChshSettings, Detector, NetworkSpec, PeakId,
};

use crate::config::RunConfig;
use crate::output::{Cell, Report};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One coincidence probability by both computation routes
    Coincidence(CoincidenceArgs),
    /// Phase x delay map: one row per phi_A, one column per delay in units of tau_m
    Scan(ScanArgs),
    /// CHSH parameter at the CENTER and TAU_P peaks with its 16 coincidences
    Chsh(ChshArgs),
    /// Closed-form S and g2 along a logarithmic mean-photon-number grid
    PowerScan(PowerScanArgs),
    /// Continuous-delay A1/B1 coincidence histogram
    Histogram,
    /// g2(0) and g2(+-tau_p) of the prepared field
    Hbt,
    /// Histogram peak positions and phase classes
    Peaks,
    /// Engine self-checks; exits with status 2 on any failure
    Validate,
}

#[derive(Debug, Args)]
pub struct CoincidenceArgs {
    /// Bob's click time minus Alice's, in seconds
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub dt: f64,
    #[arg(long, default_value = "A1")]
    pub det_a: Detector,
    #[arg(long, default_value = "B1")]
    pub det_b: Detector,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Number of phi_A points on [0, 2pi)
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Delays run from -max_delay to +max_delay in units of tau_m
    #[arg(long, default_value_t = 3)]
    pub max_delay: i64,
    #[arg(long, default_value = "A1")]
    pub det_a: Detector,
    #[arg(long, default_value = "B1")]
    pub det_b: Detector,
}

#[derive(Debug, Args)]
pub struct ChshArgs {
    /// Analyzer settings a, a', b, b' in units of pi
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.0, 0.5, 0.25, 0.75], allow_hyphen_values = true)]
    pub settings_pi: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PowerScanArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub nbar_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nbar_max: f64,
    #[arg(long, default_value_t = 61)]
    pub points: usize,
}

/// Closed forms only describe the experimental geometry at `φ_p = π`.
fn closed_forms_apply(net: &NetworkSpec) -> bool {
    let exp = NetworkSpec::experimental();
    net.prep.delay_bins == exp.prep.delay_bins
        && net.analyzer_a.delay_bins == exp.analyzer_a.delay_bins
        && net.prep.phase.rem_euclid(2.0 * PI) == PI
}

fn peak_at(net: &NetworkSpec, bins: i64) -> Result<Option<PeakId>> {
    Ok(peak_table(net.analyzer_a.delay_bins, net.prep.delay_bins)?
        .into_iter()
        .find(|e| e.delay_bins == bins)
        .map(|e| e.peak))
}

fn coincidence(cfg: &RunConfig, args: &CoincidenceArgs) -> Result<Report> {
    let net = cfg.network()?;
    let brute = coincidence_at_seconds(&net, cfg.p1, args.det_a, args.det_b, args.dt)?;
    let forward = forward_coincidence(cfg.p1, args.det_a, 0, args.det_b, brute.delta_t_bins, &net)?;
    let detectors_match = args.det_a == Detector::A1 && args.det_b == Detector::B1;
    let closed = match peak_at(&net, brute.delta_t_bins)? {
        Some(peak) if detectors_match && closed_forms_apply(&net) && peak != PeakId::TauPm => {
            Some(closed_form_c(peak, cfg.phi_a, cfg.phi_b, cfg.p1)?)
        }
        _ => None,
    };

    let mut r = Report::new(
        "coincidence",
        &[
            "delta_t_s",
            "delta_t_bins",
            "det_a",
            "det_b",
            "p1",
            "phi_p",
            "phi_a",
            "phi_b",
            "operator",
            "forward",
            "difference",
            "closed_form",
        ],
    );
    r.push(vec![
        net.seconds_of(brute.delta_t_bins).into(),
        brute.delta_t_bins.into(),
        args.det_a.to_string().into(),
        args.det_b.to_string().into(),
        cfg.p1.into(),
        cfg.phi_p.into(),
        cfg.phi_a.into(),
        cfg.phi_b.into(),
        brute.value.into(),
        forward.into(),
        (brute.value - forward).into(),
        closed.into(),
    ]);
    Ok(r)
}

fn scan(cfg: &RunConfig, args: &ScanArgs) -> Result<Report> {
    if args.points == 0 || args.max_delay < 0 {
        bail!("scan needs at least one phase point and a non-negative delay span");
    }
    let net = cfg.network()?;
    let step = net.analyzer_a.delay_bins;
    let shifts: Vec<i64> = (-args.max_delay..=args.max_delay).collect();
    let delays: Vec<i64> = shifts.iter().map(|k| k * step).collect();
    let phis: Vec<f64> = (0..args.points)
        .map(|k| 2.0 * PI * k as f64 / args.points as f64)
        .collect();
    let map = phase_delay_map(
        &net, cfg.p1, cfg.phi_b, &phis, &delays, args.det_a, args.det_b,
    )?;

    let names: Vec<String> = std::iter::once("phi_a".to_string())
        .chain(shifts.iter().map(|k| format!("dt_{k}")))
        .collect();
    let columns: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut r = Report::new("scan", &columns);
    for (phi, row) in phis.iter().zip(map) {
        r.push(
            std::iter::once(Cell::from(*phi))
                .chain(row.into_iter().map(Cell::from))
                .collect(),
        );
    }
    r.extra("phi_b", cfg.phi_b);
    r.extra("p1", cfg.p1);
    r.extra("delay_unit_s", net.seconds_of(step));
    Ok(r)
}

fn chsh(cfg: &RunConfig, args: &ChshArgs) -> Result<Report> {
    let &[a, a_prime, b, b_prime] = args.settings_pi.as_slice() else {
        bail!("--settings-pi takes exactly four values");
    };
    let settings = ChshSettings {
        phi_a: a * PI,
        phi_a_prime: a_prime * PI,
        phi_b: b * PI,
        phi_b_prime: b_prime * PI,
    };
    let net = cfg.network()?;
    let mut r = Report::new(
        "chsh",
        &[
            "peak",
            "phi_a",
            "phi_b",
            "n_a1b1",
            "n_a1b2",
            "n_a2b1",
            "n_a2b2",
            "e",
            "s",
            "s_closed_form",
        ],
    );
    for peak in [PeakId::Center, PeakId::TauP] {
        let result = chsh_on(&net, peak, cfg.p1, &settings)?;
        let closed = (closed_forms_apply(&net) && settings == ChshSettings::default())
            .then(|| closed_form_s(peak, cfg.p1))
            .transpose()?;
        for pair in &result.pairs {
            r.push(vec![
                peak.name().into(),
                pair.phi_a.into(),
                pair.phi_b.into(),
                pair.counts.n_pp.into(),
                pair.counts.n_pm.into(),
                pair.counts.n_mp.into(),
                pair.counts.n_mm.into(),
                pair.e.into(),
                result.s.into(),
                closed.into(),
            ]);
        }
    }
    r.extra("p1", cfg.p1);
    Ok(r)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        bail!("power scan needs 0 < nbar_min < nbar_max and at least two points");
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

fn power(cfg: &RunConfig, args: &PowerScanArgs) -> Result<Report> {
    let grid = log_grid(args.nbar_min, args.nbar_max, args.points)?;
    let rows = power_scan(&grid, &cfg.calibration)?;
    let mut r = Report::new(
        "power-scan",
        &["nbar", "p1", "s_center", "s_tau_p", "g2_0", "g2_tau_p"],
    );
    for row in rows {
        r.push(vec![
            row.nbar.into(),
            row.p1.into(),
            row.s_center.into(),
            row.s_tau_p.into(),
            row.g2_0.into(),
            row.g2_tau_p.into(),
        ]);
    }
    for (key, peak) in [
        ("crossing_center_nbar", PeakId::Center),
        ("crossing_tau_p_nbar", PeakId::TauP),
    ] {
        let nbar = find_crossing(2.0, peak, &cfg.calibration)?;
        eprintln!("S = 2 at {} for nbar = {:.4}", peak.name(), nbar);
        r.extra(key, nbar);
    }
    Ok(r)
}

fn histogram(cfg: &RunConfig) -> Result<Report> {
    let net = cfg.network()?;
    let points = synthesize_histogram(cfg.p1, cfg.phi_a, cfg.phi_b, &cfg.histogram, &net)?;
    let mut r = Report::new("histogram", &["delta_t_s", "probability"]);
    for (dt, value) in points {
        r.push(vec![dt.into(), value.into()]);
    }
    r.extra("t2_s", cfg.histogram.t2);
    r.extra("bin_width_s", cfg.histogram.bin_width);
    Ok(r)
}

fn hbt(cfg: &RunConfig) -> Result<Report> {
    let g0 = hbt_g2(cfg.p1, cfg.phi_p, 0)?;
    let minus = hbt_g2(cfg.p1, cfg.phi_p, -1)?;
    let plus = hbt_g2(cfg.p1, cfg.phi_p, 1)?;
    let at_pi = cfg.phi_p.rem_euclid(2.0 * PI) == PI;
    let mut r = Report::new(
        "hbt",
        &[
            "p1",
            "phi_p",
            "g2_0",
            "g2_minus_tau_p",
            "g2_plus_tau_p",
            "ratio",
            "closed_g2_0",
            "closed_g2_tau_p",
        ],
    );
    r.push(vec![
        cfg.p1.into(),
        cfg.phi_p.into(),
        g0.into(),
        minus.into(),
        plus.into(),
        (g0 / plus).into(),
        at_pi.then(|| closed_form_g2_zero(cfg.p1)).into(),
        at_pi.then(|| closed_form_g2_side(cfg.p1)).into(),
    ]);
    Ok(r)
}

fn peaks(cfg: &RunConfig) -> Result<Report> {
    let net = cfg.network()?;
    let mut r = Report::new("peaks", &["delay_bins", "delay_s", "peak", "class"]);
    for e in peak_table(net.analyzer_a.delay_bins, net.prep.delay_bins)? {
        r.push(vec![
            e.delay_bins.into(),
            net.seconds_of(e.delay_bins).into(),
            e.peak.name().into(),
            e.class.name().into(),
        ]);
    }
    Ok(r)
}

fn validate(cfg: &RunConfig) -> Result<(Report, bool)> {
    let report = run_validation(cfg.p1, &cfg.calibration)?;
    let mut r = Report::new(
        "validate",
        &["check", "passed", "max_error", "tolerance", "detail"],
    );
    for c in &report.checks {
        r.push(vec![
            c.name.clone().into(),
            c.passed.into(),
            c.max_error.into(),
            c.tolerance.into(),
            c.detail.clone().into(),
        ]);
    }
    r.extra("passed", report.passed());
    r.extra(
        "side_peak_form",
        report.side_peak_form.map_or("none", |f| f.label()),
    );
    Ok((r, report.passed()))
}

/// Runs `cmd`; the flag is false when a validation check failed.
pub fn run(cfg: &RunConfig, cmd: &Command) -> Result<(Report, bool)> {
    let report = match cmd {
        Command::Coincidence(a) => coincidence(cfg, a)?,
        Command::Scan(a) => scan(cfg, a)?,
        Command::Chsh(a) => chsh(cfg, a)?,
        Command::PowerScan(a) => power(cfg, a)?,
        Command::Histogram => histogram(cfg)?,
        Command::Hbt => hbt(cfg)?,
        Command::Peaks => peaks(cfg)?,
        Command::Validate => return validate(cfg),
    };
    let mut report = report;
    report.extra("nbar", cfg.nbar);
    Ok((report, true))
}

//! Coincidence probabilities between Alice and Bob, their closed forms at
//! `φ_p = π`, the peak structure of the delay histogram, HBT statistics of
//! the prepared field and synthetic histograms.
//!
//! Probabilities are reported in the unnormalized prefactor convention, so a
//! centre-peak value reads `(p1²/128)[…]`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeId, Port};
use crate::network::forward::propagate_prep;
use crate::network::{coincidence_operator, AmziSpec, Detector, NetworkSpec};
use crate::source::rf_input_state;

/// Characteristic delay classes of the Alice-Bob histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PeakId {
    Center,
    TauP,
    TauM,
    Outer,
    /// `±(τ_p − τ_m)`; merges into `TauM` when `τ_p = 2τ_m`.
    TauPm,
}

impl PeakId {
    pub fn name(self) -> &'static str {
        match self {
            PeakId::Center => "CENTER",
            PeakId::TauP => "TAU_P",
            PeakId::TauM => "TAU_M",
            PeakId::Outer => "OUTER",
            PeakId::TauPm => "TAU_PM",
        }
    }

    /// Positive delay of the peak in grid steps.
    pub fn delay_bins(self, tau_m: i64, tau_p: i64) -> i64 {
        match self {
            PeakId::Center => 0,
            PeakId::TauP => tau_p,
            PeakId::TauM => tau_m,
            PeakId::Outer => tau_p + tau_m,
            PeakId::TauPm => tau_p - tau_m,
        }
    }
}

impl fmt::Display for PeakId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PeakId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CENTER" => Ok(PeakId::Center),
            "TAU_P" => Ok(PeakId::TauP),
            "TAU_M" => Ok(PeakId::TauM),
            "OUTER" => Ok(PeakId::Outer),
            "TAU_PM" => Ok(PeakId::TauPm),
            _ => Err(Error::NoClosedForm(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseClass {
    /// Fringes in `φ_A + φ_B`.
    SumPhase,
    /// Reduced-visibility fringes in `φ_A − φ_B`.
    DifferencePhase,
    Insensitive,
}

impl PhaseClass {
    pub fn name(self) -> &'static str {
        match self {
            PhaseClass::SumPhase => "sum-phase",
            PhaseClass::DifferencePhase => "difference-phase",
            PhaseClass::Insensitive => "insensitive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakEntry {
    pub delay_bins: i64,
    pub peak: PeakId,
    pub class: PhaseClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    BruteForce,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceResult {
    pub delta_t_bins: i64,
    pub value: f64,
    pub phi_p: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub p1: f64,
    pub method: Method,
}

impl CoincidenceResult {
    /// Expected number of coincidences after `trials` detection windows.
    pub fn to_counts(&self, trials: f64) -> f64 {
        self.value * trials
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramParams {
    /// Peak width (coherence time), seconds.
    pub t2: f64,
    pub bin_width: f64,
    /// Histogram spans `[-range, range]`, seconds.
    pub range: f64,
    /// Inter-peak level; `None` computes the accidental level.
    pub baseline: Option<f64>,
}

impl Default for HistogramParams {
    fn default() -> Self {
        Self {
            t2: 134.4e-12,
            bin_width: 4e-12,
            range: 4.5e-9,
            baseline: None,
        }
    }
}

/// Brute-force coincidence probability on `net` for a click of `det_a` at
/// bin 0 and `det_b` at `delta_t_bins`.
pub fn coincidence_on(
    net: &NetworkSpec,
    p1: f64,
    det_a: Detector,
    det_b: Detector,
    delta_t_bins: i64,
) -> Result<f64> {
    coincidence_operator(det_a, 0, det_b, delta_t_bins, net)?.expectation(p1)
}

/// Brute-force coincidence probability in the experimental geometry
/// (`τ_p = 2τ_m`, grid step `τ_m`).
pub fn coincidence_probability(
    delta_t_bins: i64,
    phi_a: f64,
    phi_b: f64,
    phi_p: f64,
    p1: f64,
    det_a: Detector,
    det_b: Detector,
) -> Result<f64> {
    let net = NetworkSpec::experimental()
        .with_prep_phase(phi_p)
        .with_phases(phi_a, phi_b);
    coincidence_on(&net, p1, det_a, det_b, delta_t_bins)
}

/// Same as [`coincidence_probability`] for a delay given in seconds, which
/// must fall on the grid of `net`.
pub fn coincidence_at_seconds(
    net: &NetworkSpec,
    p1: f64,
    det_a: Detector,
    det_b: Detector,
    delta_t: f64,
) -> Result<CoincidenceResult> {
    let bins = net.bins_of(delta_t)?;
    Ok(CoincidenceResult {
        delta_t_bins: bins,
        value: coincidence_on(net, p1, det_a, det_b, bins)?,
        phi_p: net.prep.phase,
        phi_a: net.analyzer_a.phase,
        phi_b: net.analyzer_b.phase,
        p1,
        method: Method::BruteForce,
    })
}

/// Closed-form `A1`/`B1` coincidence probabilities at `φ_p = π`.
pub fn closed_form_c(peak: PeakId, phi_a: f64, phi_b: f64, p1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::InvalidProbability(p1));
    }
    let p0 = 1.0 - p1;
    let p1s = p1 * p1;
    let sum = (phi_a + phi_b).cos();
    let diff = (phi_a - phi_b).cos();
    let value = match peak {
        PeakId::Center => p1s / 128.0 * (1.0 + p1s + p1s * diff + p0 * p0 * sum),
        PeakId::TauP => p1s / 512.0 * (1.0 + 2.0 * p1 + 4.0 * p1s + p1s * diff + p0 * p0 * sum),
        PeakId::TauM => {
            p1s / 1024.0
                * (5.0 + 2.0 * p1 + 8.0 * p1s + (-4.0 + 8.0 * p1 - 4.0 * p1s) * diff
                    - 4.0 * p1s * sum)
        }
        PeakId::Outer => p1s / 1024.0 * (12.0 * p1s + 2.0 * p1 + 1.0),
        PeakId::TauPm => return Err(Error::NoClosedForm(peak.to_string())),
    };
    Ok(value)
}

/// Peaks of the Alice-Bob histogram, sorted by delay.
pub fn peak_table(tau_m_bins: i64, tau_p_bins: i64) -> Result<Vec<PeakEntry>> {
    if tau_m_bins < 1 || tau_p_bins <= tau_m_bins {
        return Err(Error::DegenerateGeometry {
            prep: tau_p_bins,
            analyzer: tau_m_bins,
        });
    }
    let merged = tau_p_bins == 2 * tau_m_bins;
    let mut peaks = vec![
        (PeakId::Center, PhaseClass::SumPhase),
        (PeakId::TauP, PhaseClass::SumPhase),
        (
            PeakId::TauM,
            if merged {
                PhaseClass::DifferencePhase
            } else {
                PhaseClass::Insensitive
            },
        ),
        (PeakId::Outer, PhaseClass::Insensitive),
    ];
    if !merged {
        peaks.push((PeakId::TauPm, PhaseClass::Insensitive));
    }

    let mut table = Vec::new();
    for (peak, class) in peaks {
        let delay = peak.delay_bins(tau_m_bins, tau_p_bins);
        table.push(PeakEntry {
            delay_bins: delay,
            peak,
            class,
        });
        if delay != 0 {
            table.push(PeakEntry {
                delay_bins: -delay,
                peak,
                class,
            });
        }
    }
    table.sort_by_key(|e| e.delay_bins);
    Ok(table)
}

/// Normalized second-order correlation of the prepared port-`d` field.
///
/// Delays are counted in units of `τ_p`. The numerator is the two-click
/// probability `⟨d_t† d_{t+Δt}† d_{t+Δt} d_t⟩`, the denominator the product
/// of the two single-click probabilities.
pub fn hbt_g2(p1: f64, phi_p: f64, delta_t_bins: i64) -> Result<f64> {
    if p1 == 0.0 {
        return Err(Error::UndefinedNormalization);
    }
    let prep = AmziSpec {
        delay_bins: 1,
        phase: phi_p,
    };
    let (early, late) = (0.min(delta_t_bins), 0.max(delta_t_bins));
    let bins: Vec<i64> = (early - 1..=late).collect();
    let modes: Vec<ModeId> = bins.iter().map(|&b| ModeId::new(Port::A, b)).collect();
    let state = propagate_prep(&rf_input_state(p1, &modes)?, &bins, &prep)?;

    let (first, second) = (ModeId::new(Port::D, 0), ModeId::new(Port::D, delta_t_bins));
    let singles_first = state.apply_annihilation(first).norm2();
    let singles_second = state.apply_annihilation(second).norm2();
    let pair = state
        .apply_annihilation(first)
        .apply_annihilation(second)
        .norm2();
    let norm = singles_first * singles_second;
    if norm == 0.0 {
        return Err(Error::UndefinedNormalization);
    }
    Ok(pair / norm)
}

/// `g²(0) = 1/p1²` at `φ_p = π`.
pub fn closed_form_g2_zero(p1: f64) -> f64 {
    1.0 / (p1 * p1)
}

/// The two candidate side-peak forms `(1 ± 2p1)/(4p1²)` at `φ_p = π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SidePeakForm {
    Plus,
    Minus,
}

impl SidePeakForm {
    pub fn evaluate(self, p1: f64) -> f64 {
        let sign = match self {
            SidePeakForm::Plus => 1.0,
            SidePeakForm::Minus => -1.0,
        };
        (1.0 + sign * 2.0 * p1) / (4.0 * p1 * p1)
    }

    pub fn label(self) -> &'static str {
        match self {
            SidePeakForm::Plus => "(1+2p1)/(4p1^2)",
            SidePeakForm::Minus => "(1-2p1)/(4p1^2)",
        }
    }
}

/// Side-peak `g²(±τ_p)` at `φ_p = π`; the `+` form is the one reproduced by
/// [`hbt_g2`].
pub fn closed_form_g2_side(p1: f64) -> f64 {
    SidePeakForm::Plus.evaluate(p1)
}

/// Coincidence level far from every peak (two peak-free grid steps past the
/// outermost peak).
pub fn accidental_level(
    net: &NetworkSpec,
    p1: f64,
    det_a: Detector,
    det_b: Detector,
) -> Result<f64> {
    let far = net.prep.delay_bins + net.analyzer_a.delay_bins.max(net.analyzer_b.delay_bins) * 3;
    coincidence_on(net, p1, det_a, det_b, far)
}

/// Continuous-delay `A1`/`B1` histogram: Gaussian peaks of width `T2`
/// anchored at the brute-force peak values, on top of the accidental level.
pub fn synthesize_histogram(
    p1: f64,
    phi_a: f64,
    phi_b: f64,
    hp: &HistogramParams,
    net: &NetworkSpec,
) -> Result<Vec<(f64, f64)>> {
    let tau_m_s = net.seconds_of(net.analyzer_a.delay_bins);
    if !(hp.bin_width > 0.0 && hp.bin_width < hp.t2 && hp.t2 < tau_m_s && hp.range > 0.0) {
        return Err(Error::InvalidHistogram);
    }
    let net = net.with_phases(phi_a, phi_b);
    let peaks = peak_table(net.analyzer_a.delay_bins, net.prep.delay_bins)?;
    let baseline = match hp.baseline {
        Some(b) => b,
        None => accidental_level(&net, p1, Detector::A1, Detector::B1)?,
    };
    let heights = peaks
        .iter()
        .map(|e| {
            let value = coincidence_on(&net, p1, Detector::A1, Detector::B1, e.delay_bins)?;
            Ok((net.seconds_of(e.delay_bins), value - baseline))
        })
        .collect::<Result<Vec<_>>>()?;

    let steps = (hp.range / hp.bin_width).floor() as i64;
    Ok((-steps..=steps)
        .map(|k| {
            let dt = k as f64 * hp.bin_width;
            let value = heights.iter().fold(baseline, |acc, &(center, height)| {
                let x = (dt - center) / hp.t2;
                acc + height * (-x * x).exp()
            });
            (dt, value)
        })
        .collect())
}

/// Brute-force values on a `φ_A × Δt` grid, rows ordered like `phi_a_grid`.
pub fn phase_delay_map(
    net: &NetworkSpec,
    p1: f64,
    phi_b: f64,
    phi_a_grid: &[f64],
    delays: &[i64],
    det_a: Detector,
    det_b: Detector,
) -> Result<Vec<Vec<f64>>> {
    phi_a_grid
        .par_iter()
        .map(|&phi_a| {
            let net = net.with_phases(phi_a, phi_b);
            delays
                .iter()
                .map(|&dt| coincidence_on(&net, p1, det_a, det_b, dt))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::{assert_abs_diff_eq, assert_relative_eq};

    use super::*;

    const A1: Detector = Detector::A1;
    const B1: Detector = Detector::B1;

    #[test]
    fn center_peak_example() {
        let c = coincidence_probability(0, PI, 0.0, PI, 0.1, A1, B1).unwrap();
        let expected = 0.01 / 128.0 * (1.0 + 0.01 - 0.01 - 0.81);
        assert_relative_eq!(c, expected, max_relative = 1e-12);
        assert_relative_eq!(c, 1.484375e-5, max_relative = 1e-12);
        assert_relative_eq!(
            closed_form_c(PeakId::Center, PI, 0.0, 0.1).unwrap(),
            c,
            max_relative = 1e-12
        );
    }

    #[test]
    fn vacuum_input_never_clicks() {
        for dt in -4..=4 {
            assert_eq!(
                coincidence_probability(dt, 0.3, 0.9, PI, 0.0, A1, B1).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn closed_form_examples() {
        let p1: f64 = 1e-4;
        let tau_p = closed_form_c(PeakId::TauP, 0.4, -0.4, p1).unwrap();
        assert_relative_eq!(tau_p, p1 * p1 / 256.0, max_relative = 1e-3);

        let outer = closed_form_c(PeakId::Outer, 0.0, 0.0, 0.1).unwrap();
        assert_relative_eq!(outer, 0.01 / 1024.0 * 1.32, max_relative = 1e-14);
        assert_relative_eq!(outer, 1.2890625e-5, max_relative = 1e-12);
        assert_eq!(closed_form_c(PeakId::Outer, 1.0, 2.5, 0.1).unwrap(), outer);

        let ratio = closed_form_c(PeakId::Center, 0.7, 0.7, 1e-6).unwrap()
            / closed_form_c(PeakId::TauP, 0.7, 0.7, 1e-6).unwrap();
        assert_relative_eq!(ratio, 4.0, max_relative = 1e-5);

        assert!(matches!(
            closed_form_c(PeakId::TauPm, 0.0, 0.0, 0.1),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn antisymmetric_shift_moves_only_the_difference_term() {
        let (a, b, delta) = (0.4, 1.9, 0.8);
        for &p1 in &[0.01, 0.1, 0.3] {
            for (peak, dt, prefactor) in [(PeakId::Center, 0, 128.0), (PeakId::TauP, 2, 512.0)] {
                let base = coincidence_probability(dt, a, b, PI, p1, A1, B1).unwrap();
                let shifted =
                    coincidence_probability(dt, a + delta, b - delta, PI, p1, A1, B1).unwrap();
                let diff_term =
                    p1.powi(4) / prefactor * ((a - b + 2.0 * delta).cos() - (a - b).cos());
                assert_abs_diff_eq!(shifted - base, diff_term, epsilon = 1e-15 * base);
                assert!(
                    ((shifted - base) / base).abs() > 1e-12,
                    "{peak} has a difference-phase term"
                );
            }
        }
    }

    #[test]
    fn tau_m_symmetric_shift_residual_scales_as_p1_squared() {
        let (a, b, delta) = (0.3, 1.2, 0.9);
        let residual = |p1: f64| {
            let base = coincidence_probability(1, a, b, PI, p1, A1, B1).unwrap();
            let shifted = coincidence_probability(1, a + delta, b + delta, PI, p1, A1, B1).unwrap();
            ((shifted - base) / base).abs()
        };
        let (lo, hi) = (1e-3, 1e-2);
        let slope = (residual(hi) / residual(lo)).ln() / (hi / lo).ln();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn delay_reversal_swaps_parties() {
        for dt in -4..=4 {
            let c = coincidence_probability(dt, 0.3, 1.7, PI, 0.2, A1, B1).unwrap();
            let mirrored = coincidence_probability(-dt, 1.7, 0.3, PI, 0.2, A1, B1).unwrap();
            assert_relative_eq!(c, mirrored, max_relative = 1e-12);
        }
    }

    #[test]
    fn peak_tables() {
        let merged = peak_table(1, 2).unwrap();
        assert_eq!(merged.len(), 7);
        let delays: Vec<i64> = merged.iter().map(|e| e.delay_bins).collect();
        assert_eq!(delays, vec![-3, -2, -1, 0, 1, 2, 3]);
        for e in &merged {
            let expected = match e.delay_bins.abs() {
                0 | 2 => PhaseClass::SumPhase,
                1 => PhaseClass::DifferencePhase,
                _ => PhaseClass::Insensitive,
            };
            assert_eq!(e.class, expected);
        }

        let general = peak_table(1, 3).unwrap();
        assert_eq!(general.len(), 9);
        let delays: Vec<i64> = general.iter().map(|e| e.delay_bins).collect();
        assert_eq!(delays, vec![-4, -3, -2, -1, 0, 1, 2, 3, 4]);
        assert!(general
            .iter()
            .all(|e| (e.class == PhaseClass::SumPhase) == matches!(e.delay_bins.abs(), 0 | 3)));

        assert!(peak_table(2, 2).is_err());
        assert!(peak_table(0, 2).is_err());
    }

    #[test]
    fn g2_at_pi() {
        assert_relative_eq!(hbt_g2(0.1, PI, 0).unwrap(), 100.0, max_relative = 1e-9);
        let p1 = 1.0 - 0.973 / 1.01866;
        let g0 = hbt_g2(p1, PI, 0).unwrap();
        assert_relative_eq!(g0, 1.0 / (p1 * p1), max_relative = 1e-9);
        assert_relative_eq!(g0, 497.7, max_relative = 1e-3);
        assert!((g0 - 511.0).abs() / 511.0 < 0.03);
        assert!(hbt_g2(0.0, PI, 0).is_err());
    }

    #[test]
    fn side_peak_g2_is_symmetric_and_matches_plus_form() {
        for &p1 in &[0.01, 0.1, 0.3] {
            let plus = hbt_g2(p1, PI, 1).unwrap();
            let minus = hbt_g2(p1, PI, -1).unwrap();
            assert_relative_eq!(plus, minus, max_relative = 1e-12);
            assert_relative_eq!(plus, closed_form_g2_side(p1), max_relative = 1e-9);
        }
    }

    #[test]
    fn distant_bins_are_uncorrelated() {
        assert_relative_eq!(hbt_g2(0.2, PI, 3).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn side_peak_minimum_near_two_thirds_pi() {
        let p1 = 1e-3;
        let n = 720;
        let (mut best_phi, mut best) = (0.0, f64::INFINITY);
        for k in 1..n / 2 {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let g = hbt_g2(p1, phi, 1).unwrap();
            if g < best {
                best = g;
                best_phi = phi;
            }
        }
        assert_abs_diff_eq!(
            best_phi,
            2.0 * PI / 3.0,
            epsilon = 2.0 * PI / n as f64 + 1e-12
        );
    }

    #[test]
    fn histogram_anchoring() {
        let net = NetworkSpec::experimental();
        let hp = HistogramParams {
            t2: 134.4e-12,
            bin_width: 1.07e-9 / 64.0,
            range: 4.0 * 1.07e-9,
            baseline: None,
        };
        let p1 = 0.1;
        let hist = synthesize_histogram(p1, 0.0, 0.0, &hp, &net).unwrap();
        let at = |dt: f64| {
            hist.iter()
                .min_by(|a, b| (a.0 - dt).abs().total_cmp(&(b.0 - dt).abs()))
                .unwrap()
                .1
        };
        assert_relative_eq!(
            at(0.0),
            closed_form_c(PeakId::Center, 0.0, 0.0, p1).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            at(2.0 * 1.07e-9),
            closed_form_c(PeakId::TauP, 0.0, 0.0, p1).unwrap(),
            max_relative = 1e-12
        );

        let baseline = accidental_level(&net, p1, A1, B1).unwrap();
        let beyond_outer = 3.0 * 1.07e-9 + 5.0 * 134.4e-12;
        assert_relative_eq!(at(beyond_outer), baseline, max_relative = 1e-6);
        assert_relative_eq!(at(-beyond_outer), baseline, max_relative = 1e-6);
        // halfway between peaks the tails are down to ~1e-7 of the peak height
        assert_relative_eq!(at(0.5 * 1.07e-9), baseline, max_relative = 1e-4);
    }

    #[test]
    fn histogram_rejects_bad_params() {
        let net = NetworkSpec::experimental();
        let hp = HistogramParams {
            t2: 2e-9,
            ..Default::default()
        };
        assert_eq!(
            synthesize_histogram(0.1, 0.0, 0.0, &hp, &net),
            Err(Error::InvalidHistogram)
        );
    }

    #[test]
    fn peak_crosstalk_is_negligible() {
        let crosstalk = (-(1.07e-9f64 / 134.4e-12).powi(2)).exp();
        assert!(crosstalk < 1e-10);
    }

    #[test]
    fn scan_rows_follow_grid_order() {
        let net = NetworkSpec::experimental();
        let grid = [0.0, 1.0, 2.0];
        let map = phase_delay_map(&net, 0.05, 0.0, &grid, &[0, 2], A1, B1).unwrap();
        for (row, &phi) in map.iter().zip(&grid) {
            assert_relative_eq!(
                row[0],
                closed_form_c(PeakId::Center, phi, 0.0, 0.05).unwrap(),
                max_relative = 1e-10
            );
            assert_relative_eq!(
                row[1],
                closed_form_c(PeakId::TauP, phi, 0.0, 0.05).unwrap(),
                max_relative = 1e-10
            );
        }
    }
}

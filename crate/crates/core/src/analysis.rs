//! CHSH evaluation, fringe fitting and excitation-power scans.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coincidence::{closed_form_g2_side, closed_form_g2_zero, coincidence_on, PeakId};
use crate::error::{Error, Result};
use crate::network::{Detector, NetworkSpec};
use crate::source::{p1_of_nbar, CalibrationParams};

/// Analyzer phases of the two CHSH settings per party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub phi_a: f64,
    pub phi_a_prime: f64,
    pub phi_b: f64,
    pub phi_b_prime: f64,
}

impl Default for ChshSettings {
    fn default() -> Self {
        Self {
            phi_a: 0.0,
            phi_a_prime: PI / 2.0,
            phi_b: PI / 4.0,
            phi_b_prime: 3.0 * PI / 4.0,
        }
    }
}

impl ChshSettings {
    /// Setting pairs in the order the CHSH sum uses them:
    /// `(a, b′), (a, b), (a′, b′), (a′, b)`.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.phi_a, self.phi_b_prime),
            (self.phi_a, self.phi_b),
            (self.phi_a_prime, self.phi_b_prime),
            (self.phi_a_prime, self.phi_b),
        ]
    }

    /// Shifts Alice's phases by `delta` and Bob's by `-delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            phi_a: self.phi_a + delta,
            phi_a_prime: self.phi_a_prime + delta,
            phi_b: self.phi_b - delta,
            phi_b_prime: self.phi_b_prime - delta,
        }
    }
}

/// Coincidences for `(A1,B1), (A1,B2), (A2,B1), (A2,B2)` at one setting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCounts {
    pub n_pp: f64,
    pub n_pm: f64,
    pub n_mp: f64,
    pub n_mm: f64,
}

impl CorrelationCounts {
    pub fn total(&self) -> f64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    pub fn correlation_e(&self) -> Result<f64> {
        let total = self.total();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::ZeroCounts);
        }
        Ok((self.n_pp + self.n_mm - self.n_mp - self.n_pm) / total)
    }

    /// Poisson (√N) error on `E`: `σ² = (1 − E²)/N`.
    pub fn uncertainty(&self) -> Result<f64> {
        let e = self.correlation_e()?;
        Ok(((1.0 - e * e).max(0.0) / self.total()).sqrt())
    }

    /// Rescales model probabilities to expected counts.
    pub fn scaled(&self, trials: f64) -> Self {
        Self {
            n_pp: self.n_pp * trials,
            n_pm: self.n_pm * trials,
            n_mp: self.n_mp * trials,
            n_mm: self.n_mm * trials,
        }
    }
}

pub fn correlation_e(c: &CorrelationCounts) -> Result<f64> {
    c.correlation_e()
}

/// `|E(a,b′) − E(a,b) + E(a′,b′) + E(a′,b)|`.
pub fn chsh_s(e_ab_prime: f64, e_ab: f64, e_a_prime_b_prime: f64, e_a_prime_b: f64) -> f64 {
    (e_ab_prime - e_ab + e_a_prime_b_prime + e_a_prime_b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingPairResult {
    pub phi_a: f64,
    pub phi_b: f64,
    pub counts: CorrelationCounts,
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub peak: PeakId,
    pub p1: f64,
    pub s: f64,
    /// Ordered like [`ChshSettings::pairs`].
    pub pairs: [SettingPairResult; 4],
}

fn check_chsh_peak(peak: PeakId) -> Result<()> {
    match peak {
        PeakId::Center | PeakId::TauP => Ok(()),
        other => Err(Error::NotChshPeak(other.to_string())),
    }
}

/// Brute-force CHSH parameter on `net` from the 16 coincidences at `peak`.
pub fn chsh_on(
    net: &NetworkSpec,
    peak: PeakId,
    p1: f64,
    settings: &ChshSettings,
) -> Result<ChshResult> {
    check_chsh_peak(peak)?;
    let dt = peak.delay_bins(net.analyzer_a.delay_bins, net.prep.delay_bins);
    let mut pairs = Vec::with_capacity(4);
    for (phi_a, phi_b) in settings.pairs() {
        let net = net.with_phases(phi_a, phi_b);
        let c = |a, b| coincidence_on(&net, p1, a, b, dt);
        let counts = CorrelationCounts {
            n_pp: c(Detector::A1, Detector::B1)?,
            n_pm: c(Detector::A1, Detector::B2)?,
            n_mp: c(Detector::A2, Detector::B1)?,
            n_mm: c(Detector::A2, Detector::B2)?,
        };
        pairs.push(SettingPairResult {
            phi_a,
            phi_b,
            counts,
            e: counts.correlation_e()?,
        });
    }
    let pairs: [SettingPairResult; 4] = pairs.try_into().expect("four setting pairs");
    Ok(ChshResult {
        peak,
        p1,
        s: chsh_s(pairs[0].e, pairs[1].e, pairs[2].e, pairs[3].e),
        pairs,
    })
}

/// [`chsh_on`] in the experimental geometry at `φ_p = π`.
pub fn chsh_from_model(peak: PeakId, p1: f64, settings: &ChshSettings) -> Result<ChshResult> {
    chsh_on(&NetworkSpec::experimental(), peak, p1, settings)
}

/// Closed-form correlation at `φ_p = π`.
pub fn closed_form_e(peak: PeakId, phi_a: f64, phi_b: f64, p1: f64) -> Result<f64> {
    check_chsh_peak(peak)?;
    let p0 = 1.0 - p1;
    let numerator = p1 * p1 * (phi_a - phi_b).cos() + p0 * p0 * (phi_a + phi_b).cos();
    Ok(numerator / chsh_denominator(peak, p1))
}

fn chsh_denominator(peak: PeakId, p1: f64) -> f64 {
    match peak {
        PeakId::TauP => 1.0 + 2.0 * p1 + 4.0 * p1 * p1,
        _ => 1.0 + p1 * p1,
    }
}

/// Closed-form `S` at the default settings.
pub fn closed_form_s(peak: PeakId, p1: f64) -> Result<f64> {
    check_chsh_peak(peak)?;
    let p0 = 1.0 - p1;
    Ok(2.0 * SQRT_2 * p0 * p0 / chsh_denominator(peak, p1))
}

/// Noiseless centre-peak visibility `p0²/(1 + p1²)`.
pub fn center_visibility(p1: f64) -> f64 {
    let p0 = 1.0 - p1;
    p0 * p0 / (1.0 + p1 * p1)
}

/// Largest `p1` for which the centre-peak visibility exceeds `1/√2`.
pub fn visibility_threshold() -> f64 {
    bisect(|p1| center_visibility(p1) - FRAC_1_SQRT_2, 0.0, 1.0, 1e-15)
}

/// Root of a decreasing function bracketed by `[lo, hi]`.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FringeModel {
    /// `N1[1 + cos(φA + φB)] + N2`
    SumPhase,
    /// `N1[5 − 4cos(φA − φB)] + N2`
    DiffPhase,
    /// `N2`
    Constant,
}

impl FringeModel {
    pub fn shape(self, phi_a: f64, phi_b: f64) -> f64 {
        match self {
            FringeModel::SumPhase => 1.0 + (phi_a + phi_b).cos(),
            FringeModel::DiffPhase => 5.0 - 4.0 * (phi_a - phi_b).cos(),
            FringeModel::Constant => 0.0,
        }
    }

    /// Extremes of the shape over one period, `(min, max)`.
    fn shape_range(self) -> (f64, f64) {
        match self {
            FringeModel::SumPhase => (0.0, 2.0),
            FringeModel::DiffPhase => (1.0, 9.0),
            FringeModel::Constant => (0.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FringeModel::SumPhase => "SUM_PHASE",
            FringeModel::DiffPhase => "DIFF_PHASE",
            FringeModel::Constant => "CONSTANT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub n1: f64,
    pub n2: f64,
    pub model: FringeModel,
    pub visibility: f64,
    pub residual_rms: f64,
}

impl FringeFit {
    pub fn predict(&self, phi_a: f64, phi_b: f64) -> f64 {
        self.n1 * self.model.shape(phi_a, phi_b) + self.n2
    }
}

/// Least-squares fit of `(φA, φB, counts)` samples to `model`, with the
/// amplitude clamped at zero.
pub fn fit_fringe(samples: &[(f64, f64, f64)], model: FringeModel) -> Result<FringeFit> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::TooFewSamples(n));
    }
    let nf = n as f64;
    let mean_y = samples.iter().map(|s| s.2).sum::<f64>() / nf;

    let (n1, n2) = if model == FringeModel::Constant {
        (0.0, mean_y)
    } else {
        let xs: Vec<f64> = samples.iter().map(|&(a, b, _)| model.shape(a, b)).collect();
        let mean_x = xs.iter().sum::<f64>() / nf;
        let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
        let scale: f64 = xs.iter().map(|x| x * x).sum();
        if sxx <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient);
        }
        let sxy: f64 = xs
            .iter()
            .zip(samples)
            .map(|(x, s)| (x - mean_x) * (s.2 - mean_y))
            .sum();
        let n1 = sxy / sxx;
        if n1 < 0.0 {
            (0.0, mean_y)
        } else {
            (n1, mean_y - n1 * mean_x)
        }
    };

    let (lo, hi) = model.shape_range();
    let (min, max) = (n1 * lo + n2, n1 * hi + n2);
    let visibility = if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    };
    let mut fit = FringeFit {
        n1,
        n2,
        model,
        visibility,
        residual_rms: 0.0,
    };
    let sse: f64 = samples
        .iter()
        .map(|&(a, b, y)| (y - fit.predict(a, b)).powi(2))
        .sum();
    fit.residual_rms = (sse / nf).sqrt();
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerScanRow {
    pub nbar: f64,
    pub p1: f64,
    pub s_center: f64,
    pub s_tau_p: f64,
    pub g2_0: f64,
    pub g2_tau_p: f64,
}

fn scan_row(nbar: f64, cal: &CalibrationParams) -> Result<PowerScanRow> {
    let p1 = p1_of_nbar(nbar, cal)?;
    Ok(PowerScanRow {
        nbar,
        p1,
        s_center: closed_form_s(PeakId::Center, p1)?,
        s_tau_p: closed_form_s(PeakId::TauP, p1)?,
        g2_0: closed_form_g2_zero(p1),
        g2_tau_p: closed_form_g2_side(p1),
    })
}

/// Closed-form S and g² along a positive, strictly increasing `n̄` grid.
pub fn power_scan(nbar_grid: &[f64], cal: &CalibrationParams) -> Result<Vec<PowerScanRow>> {
    let valid = !nbar_grid.is_empty()
        && nbar_grid.iter().all(|n| *n > 0.0 && n.is_finite())
        && nbar_grid.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(Error::InvalidGrid);
    }
    nbar_grid
        .par_iter()
        .map(|&nbar| scan_row(nbar, cal))
        .collect()
}

/// Mean photon number at which `S(n̄)` falls to `target`, to 1e-9 in `n̄`.
pub fn find_crossing(target: f64, peak: PeakId, cal: &CalibrationParams) -> Result<f64> {
    let s_of = |nbar: f64| -> Result<f64> { closed_form_s(peak, p1_of_nbar(nbar, cal)?) };
    let max = s_of(0.0)?;
    if !(target > 0.0 && target <= max) {
        return Err(Error::TargetOutOfRange { target, max });
    }
    let mut hi = 1.0;
    while s_of(hi)? > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::TargetOutOfRange { target, max });
        }
    }
    let f = |nbar: f64| s_of(nbar).map(|s| s - target).unwrap_or(f64::NAN);
    Ok(bisect(f, 0.0, hi, 1e-9 * hi.min(1.0)))
}

#[cfg(test)]
mod tests {
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    use super::*;
    use crate::coincidence::closed_form_c;

    #[test]
    fn correlation_examples() {
        let eq = CorrelationCounts {
            n_pp: 3.0,
            n_pm: 3.0,
            n_mp: 3.0,
            n_mm: 3.0,
        };
        assert_eq!(eq.correlation_e().unwrap(), 0.0);
        let perfect = CorrelationCounts {
            n_pp: 7.0,
            n_pm: 0.0,
            n_mp: 0.0,
            n_mm: 7.0,
        };
        assert_eq!(perfect.correlation_e().unwrap(), 1.0);
        assert_eq!(perfect.uncertainty().unwrap(), 0.0);
        let zero = CorrelationCounts {
            n_pp: 0.0,
            n_pm: 0.0,
            n_mp: 0.0,
            n_mm: 0.0,
        };
        assert_eq!(zero.correlation_e(), Err(Error::ZeroCounts));
    }

    #[test]
    fn model_correlation_at_center() {
        let p1: f64 = 0.01;
        let (a, b) = (0.0, PI / 4.0);
        let c = |pa: f64, pb: f64| closed_form_c(PeakId::Center, pa, pb, p1).unwrap();
        let counts = CorrelationCounts {
            n_pp: c(a, b),
            n_pm: c(a, b + PI),
            n_mp: c(a + PI, b),
            n_mm: c(a + PI, b + PI),
        };
        let e = counts.correlation_e().unwrap();
        assert_relative_eq!(
            e,
            closed_form_e(PeakId::Center, a, b, p1).unwrap(),
            max_relative = 1e-12
        );
        assert_abs_diff_eq!(e, 0.6930, epsilon = 1e-4);
    }

    #[test]
    fn chsh_examples() {
        let h = FRAC_1_SQRT_2;
        assert_relative_eq!(chsh_s(h, -h, h, h), 2.0 * SQRT_2, max_relative = 1e-15);
        assert_eq!(chsh_s(0.0, 0.0, 0.0, 0.0), 0.0);
        for bits in 0..16u32 {
            let e: Vec<f64> = (0..4)
                .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            let (a, ap, b, bp) = (e[0], e[1], e[2], e[3]);
            assert!(chsh_s(a * bp, a * b, ap * bp, ap * b) <= 2.0);
        }
    }

    #[test]
    fn model_s_values() {
        let s = ChshSettings::default();
        assert_relative_eq!(
            chsh_from_model(PeakId::Center, 1e-9, &s).unwrap().s,
            2.0 * SQRT_2,
            max_relative = 1e-6
        );
        assert_abs_diff_eq!(
            chsh_from_model(PeakId::Center, 1.0, &s).unwrap().s,
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            chsh_from_model(PeakId::TauP, 0.08218, &s).unwrap().s,
            2.0,
            epsilon = 1e-4
        );
        assert!(matches!(
            chsh_from_model(PeakId::TauM, 0.1, &s),
            Err(Error::NotChshPeak(_))
        ));
        assert!(closed_form_s(PeakId::Outer, 0.1).is_err());
    }

    #[test]
    fn closed_form_s_examples() {
        assert_relative_eq!(closed_form_s(PeakId::Center, 0.0).unwrap(), 2.0 * SQRT_2);
        assert_relative_eq!(closed_form_s(PeakId::TauP, 0.0).unwrap(), 2.0 * SQRT_2);
        assert_abs_diff_eq!(
            closed_form_s(PeakId::Center, 0.14973).unwrap(),
            2.0,
            epsilon = 1e-4
        );
        for k in 1..100 {
            let p1 = k as f64 / 100.0;
            assert!(
                closed_form_s(PeakId::TauP, p1).unwrap()
                    < closed_form_s(PeakId::Center, p1).unwrap()
            );
        }
    }

    #[test]
    fn s_survives_antisymmetric_shift() {
        let s = ChshSettings::default();
        for &p1 in &[0.01, 0.2] {
            for peak in [PeakId::Center, PeakId::TauP] {
                let base = chsh_from_model(peak, p1, &s).unwrap().s;
                for &delta in &[0.3, -1.1, 2.0] {
                    let shifted = chsh_from_model(peak, p1, &s.shifted(delta)).unwrap().s;
                    assert_abs_diff_eq!(base, shifted, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn fringe_recovery() {
        let grid: Vec<(f64, f64)> = (0..12).map(|k| (k as f64 * PI / 6.0, 0.2)).collect();
        let sum: Vec<_> = grid
            .iter()
            .map(|&(a, b)| (a, b, 100.0 * (1.0 + (a + b).cos()) + 5.0))
            .collect();
        let fit = fit_fringe(&sum, FringeModel::SumPhase).unwrap();
        assert_abs_diff_eq!(fit.n1, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.n2, 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.visibility, 200.0 / 210.0, epsilon = 1e-12);
        assert!(fit.residual_rms < 1e-9);

        let diff: Vec<_> = grid
            .iter()
            .map(|&(a, b)| (a, b, 3.0 * (5.0 - 4.0 * (a - b).cos())))
            .collect();
        let fit = fit_fringe(&diff, FringeModel::DiffPhase).unwrap();
        assert_abs_diff_eq!(fit.n1, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.n2, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.visibility, 0.8, epsilon = 1e-9);
    }

    #[test]
    fn fringe_errors_and_clamp() {
        assert_eq!(
            fit_fringe(&[(0.0, 0.0, 1.0)], FringeModel::SumPhase),
            Err(Error::TooFewSamples(1))
        );
        let flat = vec![(0.5, 0.5, 1.0); 5];
        assert_eq!(
            fit_fringe(&flat, FringeModel::SumPhase),
            Err(Error::RankDeficient)
        );

        // anti-correlated data would need a negative amplitude
        let inverted: Vec<_> = (0..8)
            .map(|k| {
                let a = k as f64 * PI / 4.0;
                (a, 0.0, 10.0 - a.cos())
            })
            .collect();
        let fit = fit_fringe(&inverted, FringeModel::SumPhase).unwrap();
        assert_eq!(fit.n1, 0.0);
        assert_abs_diff_eq!(fit.n2, 10.0, epsilon = 1e-12);
        assert_eq!(fit.visibility, 0.0);
    }

    #[test]
    fn center_fit_gives_model_visibility() {
        for &p1 in &[0.01, 0.1, 0.3] {
            let mut samples = Vec::new();
            for i in 0..8 {
                for j in 0..8 {
                    let (a, b) = (i as f64 * PI / 4.0, j as f64 * PI / 4.0);
                    samples.push((a, b, closed_form_c(PeakId::Center, a, b, p1).unwrap()));
                }
            }
            let fit = fit_fringe(&samples, FringeModel::SumPhase).unwrap();
            assert_abs_diff_eq!(fit.visibility, center_visibility(p1), epsilon = 1e-9);
        }
    }

    #[test]
    fn visibilities_order_center_tau_p_tau_m() {
        use crate::coincidence::coincidence_probability;
        use crate::network::Detector;

        let p1 = p1_of_nbar(0.01, &CalibrationParams::default()).unwrap();
        let fit_at = |dt: i64, model: FringeModel| {
            let mut samples = Vec::new();
            for i in 0..8 {
                for j in 0..8 {
                    let (a, b) = (i as f64 * PI / 4.0, j as f64 * PI / 4.0);
                    let c = coincidence_probability(dt, a, b, PI, p1, Detector::A1, Detector::B1);
                    samples.push((a, b, c.unwrap()));
                }
            }
            fit_fringe(&samples, model).unwrap().visibility
        };
        let v0 = fit_at(0, FringeModel::SumPhase);
        let v_tau_p = fit_at(2, FringeModel::SumPhase);
        let v_tau_m = fit_at(1, FringeModel::DiffPhase);
        assert!(
            v0 > v_tau_p && v_tau_p > v_tau_m,
            "{v0} {v_tau_p} {v_tau_m}"
        );
        assert!(v_tau_m <= 0.8 + 1e-12);
    }

    #[test]
    fn visibility_and_s_share_threshold() {
        let threshold = visibility_threshold();
        assert_abs_diff_eq!(threshold, 0.14973, epsilon = 1e-5);
        assert_abs_diff_eq!(
            closed_form_s(PeakId::Center, threshold).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert!(center_visibility(threshold - 1e-6) > FRAC_1_SQRT_2);
        assert!(center_visibility(threshold + 1e-6) < FRAC_1_SQRT_2);
    }

    #[test]
    fn crossings() {
        let cal = CalibrationParams::default();
        let center = find_crossing(2.0, PeakId::Center, &cal).unwrap();
        assert_abs_diff_eq!(center, 0.0773, epsilon = 5e-4);
        let tau_p = find_crossing(2.0, PeakId::TauP, &cal).unwrap();
        assert_abs_diff_eq!(tau_p, 0.0322, epsilon = 5e-4);
        assert!(find_crossing(3.0, PeakId::Center, &cal).is_err());
        assert!(find_crossing(0.0, PeakId::Center, &cal).is_err());
    }

    #[test]
    fn scan_rows() {
        let cal = CalibrationParams::default();
        let rows = power_scan(&[0.005, 0.01, 0.1], &cal).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].nbar, 0.01);
        assert_abs_diff_eq!(rows[1].g2_0, 497.7, epsilon = 0.5);
        assert!(rows.windows(2).all(|w| w[0].s_center > w[1].s_center));
        assert_eq!(power_scan(&[0.1, 0.01], &cal), Err(Error::InvalidGrid));
        assert_eq!(power_scan(&[0.0, 0.01], &cal), Err(Error::InvalidGrid));
        assert_eq!(power_scan(&[], &cal), Err(Error::InvalidGrid));
    }
}

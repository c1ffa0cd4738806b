//! Resonance-fluorescence input state and the power-to-probability map.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeId};

/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Vacuum / one-photon weights of a single temporal mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    p1: f64,
}

impl RfParams {
    pub fn new(p1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) {
            return Err(Error::InvalidProbability(p1));
        }
        Ok(Self { p1 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p0(&self) -> f64 {
        1.0 - self.p1
    }
}

/// Empirical map `p1(n̄) = 1 − A/(1 + B n̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub a: f64,
    pub b: f64,
}

impl CalibrationParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "A",
                requirement: "in (0, 1]",
                value: a,
            });
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "B",
                requirement: "positive",
                value: b,
            });
        }
        Ok(Self { a, b })
    }
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self { a: 0.973, b: 1.866 }
    }
}

/// Emitter constants of the measured transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterConstants {
    /// Exciton lifetime, seconds.
    pub t1: f64,
    /// Transition frequency, Hz.
    pub nu: f64,
    /// Coherence time, seconds.
    pub t2: f64,
}

impl EmitterConstants {
    pub fn new(t1: f64, nu: f64, t2: f64) -> Result<Self> {
        for (name, value) in [("T1", t1), ("nu", nu), ("T2", t2)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    requirement: "strictly positive",
                    value,
                });
            }
        }
        Ok(Self { t1, nu, t2 })
    }
}

impl Default for EmitterConstants {
    fn default() -> Self {
        Self {
            t1: 67.2e-12,
            nu: 328.91e12,
            t2: 134.4e-12,
        }
    }
}

/// Product state `⊗_bins (√p0|0⟩ + √p1|1⟩)`.
pub fn rf_input_state(p1: f64, bins: &[ModeId]) -> Result<FockState> {
    let rf = RfParams::new(p1)?;
    if bins.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let amps = [
        Complex64::new(rf.p0().sqrt(), 0.0),
        Complex64::new(rf.p1().sqrt(), 0.0),
    ];
    let mut state = FockState::vacuum([]);
    for &m in bins {
        state = state.tensor(&FockState::single_mode(m, &amps))?;
    }
    Ok(state)
}

pub fn p1_of_nbar(nbar: f64, cal: &CalibrationParams) -> Result<f64> {
    if nbar.is_nan() || nbar < 0.0 {
        return Err(Error::InvalidParameter {
            name: "nbar",
            requirement: "non-negative",
            value: nbar,
        });
    }
    Ok(1.0 - cal.a / (1.0 + cal.b * nbar))
}

/// `n̄ = P_in T1 / (h ν)`.
pub fn mean_photon_number(power_w: f64, t1_s: f64, nu_hz: f64) -> Result<f64> {
    for (name, value) in [("P_in", power_w), ("T1", t1_s), ("nu", nu_hz)] {
        if value.is_nan() || value <= 0.0 {
            return Err(Error::InvalidParameter {
                name,
                requirement: "strictly positive",
                value,
            });
        }
    }
    Ok(power_w * t1_s / (PLANCK * nu_hz))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use approx::{assert_abs_diff_eq, assert_relative_eq};

    use super::*;
    use crate::fock::{OccupationVector, Port};

    fn bins(n: i64) -> Vec<ModeId> {
        (0..n).map(|b| ModeId::new(Port::A, b)).collect()
    }

    #[test]
    fn three_bin_amplitudes() {
        let s = rf_input_state(0.25, &bins(3)).unwrap();
        assert_eq!(s.len(), 8);
        let all = OccupationVector::from_pairs(bins(3).into_iter().map(|m| (m, 1)));
        assert_abs_diff_eq!(s.amplitude(&all).re, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(
            s.amplitude(&OccupationVector::vacuum()).re,
            0.75f64.powf(1.5),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            s.amplitude(&OccupationVector::vacuum()).re,
            0.649519052838329,
            epsilon = 1e-12
        );
    }

    #[test]
    fn limits_of_p1() {
        let vac = rf_input_state(0.0, &bins(4)).unwrap();
        assert_eq!(vac.len(), 1);
        assert_eq!(vac.amplitude(&OccupationVector::vacuum()).re, 1.0);
        let full = rf_input_state(1.0, &bins(4)).unwrap();
        assert_eq!(full.len(), 1);
        assert_eq!(full.iter().next().unwrap().0.total(), 4);
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            rf_input_state(1.5, &bins(2)),
            Err(Error::InvalidProbability(1.5))
        );
        assert_eq!(
            rf_input_state(-0.1, &bins(2)),
            Err(Error::InvalidProbability(-0.1))
        );
        assert!(rf_input_state(0.5, &[]).is_err());
    }

    #[test]
    fn single_bin_marginal() {
        let p1 = 0.3;
        let s = rf_input_state(p1, &bins(5)).unwrap();
        for m in bins(5) {
            let keep: BTreeSet<_> = [m].into();
            let rho = s.reduced_density(&keep).unwrap();
            assert_abs_diff_eq!(
                rho.population(&OccupationVector::vacuum()),
                0.7,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                rho.population(&OccupationVector::from_pairs([(m, 1)])),
                0.3,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn calibration_examples() {
        let cal = CalibrationParams::default();
        assert_abs_diff_eq!(p1_of_nbar(0.0, &cal).unwrap(), 0.027, epsilon = 1e-15);
        assert_abs_diff_eq!(
            p1_of_nbar(0.01, &cal).unwrap(),
            1.0 - 0.973 / 1.01866,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(p1_of_nbar(0.01, &cal).unwrap(), 0.04483, epsilon = 1e-5);
        assert!(p1_of_nbar(1e12, &cal).unwrap() > 1.0 - 1e-11);
        assert!(p1_of_nbar(-1.0, &cal).is_err());
    }

    #[test]
    fn calibration_validation() {
        assert!(CalibrationParams::new(0.0, 1.0).is_err());
        assert!(CalibrationParams::new(1.2, 1.0).is_err());
        assert!(CalibrationParams::new(0.5, 0.0).is_err());
        assert!(CalibrationParams::new(1.0, 2.0).is_ok());
        assert!(EmitterConstants::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn photon_number_from_power() {
        let e = EmitterConstants::default();
        let p_unit = PLANCK * e.nu / e.t1;
        assert_relative_eq!(
            mean_photon_number(p_unit, e.t1, e.nu).unwrap(),
            1.0,
            max_relative = 1e-14
        );

        let nbar = mean_photon_number(31.9e-12, e.t1, e.nu).unwrap();
        // 31.9e-12 * 67.2e-12 / (6.62607015e-34 * 328.91e12)
        assert_relative_eq!(nbar, 0.009836, max_relative = 1e-3);

        let doubled = mean_photon_number(63.8e-12, e.t1, e.nu).unwrap();
        assert_relative_eq!(doubled, 2.0 * nbar, max_relative = 1e-14);

        assert!(mean_photon_number(0.0, e.t1, e.nu).is_err());
        assert!(mean_photon_number(1.0, -1.0, e.nu).is_err());
    }
}

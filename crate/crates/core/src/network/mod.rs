//! Three-interferometer topology: a preparation AMZI feeding a Franson
//! analyzer (fiber splitter plus one AMZI per party).
//!
//! Detector modes are available two ways. [`detector_operator`] and
//! [`coincidence_operator`] express them directly in terms of the input
//! port `a` (Heisenberg picture); [`forward`] pushes the input state through
//! every splitter, delay and phase shifter instead. Both routes must agree.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeId, Port};
use crate::source::rf_input_state;

pub mod forward;
mod mixture;

pub use forward::{
    forward_coincidence, port_d_density, prepare_output_state, PORT_D_EARLY, PORT_D_LATE,
};

/// Relative slack when checking that a delay sits on the grid.
const GRID_TOLERANCE: f64 = 1e-9;

/// One asymmetric Mach-Zehnder: delay of the long arm in grid steps, and the
/// phase applied on that arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmziSpec {
    pub delay_bins: i64,
    pub phase: f64,
}

impl AmziSpec {
    pub fn new(delay_bins: i64, phase: f64) -> Result<Self> {
        if delay_bins < 1 {
            return Err(Error::InvalidParameter {
                name: "delay_bins",
                requirement: "at least 1",
                value: delay_bins as f64,
            });
        }
        Ok(Self { delay_bins, phase })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub prep: AmziSpec,
    pub analyzer_a: AmziSpec,
    pub analyzer_b: AmziSpec,
    /// Grid step in seconds.
    pub grid_step: f64,
}

impl NetworkSpec {
    /// τ_p = 2.14 ns, τ_m = τ_g = 1.07 ns, φ_p = π, analyzers at zero phase.
    pub fn experimental() -> Self {
        Self {
            prep: AmziSpec {
                delay_bins: 2,
                phase: PI,
            },
            analyzer_a: AmziSpec {
                delay_bins: 1,
                phase: 0.0,
            },
            analyzer_b: AmziSpec {
                delay_bins: 1,
                phase: 0.0,
            },
            grid_step: 1.07e-9,
        }
    }

    /// Builds the network from delays in seconds, rejecting delays that are
    /// not integer multiples of `tau_g`.
    pub fn from_delays(
        tau_p: f64,
        tau_m: f64,
        tau_g: f64,
        phi_p: f64,
        phi_a: f64,
        phi_b: f64,
    ) -> Result<Self> {
        if !(tau_g > 0.0 && tau_g.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau_g",
                requirement: "strictly positive",
                value: tau_g,
            });
        }
        let prep_bins = bins_on_grid(tau_p, tau_g)?;
        let analyzer_bins = bins_on_grid(tau_m, tau_g)?;
        Ok(Self {
            prep: AmziSpec::new(prep_bins, phi_p)?,
            analyzer_a: AmziSpec::new(analyzer_bins, phi_a)?,
            analyzer_b: AmziSpec::new(analyzer_bins, phi_b)?,
            grid_step: tau_g,
        })
    }

    pub fn with_phases(mut self, phi_a: f64, phi_b: f64) -> Self {
        self.analyzer_a.phase = phi_a;
        self.analyzer_b.phase = phi_b;
        self
    }

    pub fn with_prep_phase(mut self, phi_p: f64) -> Self {
        self.prep.phase = phi_p;
        self
    }

    /// Converts a delay in seconds to grid steps.
    pub fn bins_of(&self, seconds: f64) -> Result<i64> {
        let steps = seconds / self.grid_step;
        let rounded = steps.round();
        if (steps - rounded).abs() > GRID_TOLERANCE * steps.abs().max(1.0) {
            return Err(Error::NonCommensurate {
                seconds,
                grid: self.grid_step,
            });
        }
        Ok(rounded as i64)
    }

    pub fn seconds_of(&self, bins: i64) -> f64 {
        bins as f64 * self.grid_step
    }

    fn analyzer(&self, side: Side) -> &AmziSpec {
        match side {
            Side::Alice => &self.analyzer_a,
            Side::Bob => &self.analyzer_b,
        }
    }
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self::experimental()
    }
}

fn bins_on_grid(seconds: f64, grid: f64) -> Result<i64> {
    let steps = seconds / grid;
    let rounded = steps.round();
    if !steps.is_finite() || (steps - rounded).abs() > GRID_TOLERANCE * steps.abs().max(1.0) {
        return Err(Error::NonCommensurate { seconds, grid });
    }
    Ok(rounded as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Alice,
    Bob,
}

/// Output detectors; `*1` sits on the `+` port of the recombining splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Detector {
    A1,
    A2,
    B1,
    B2,
}

impl Detector {
    pub fn side(self) -> Side {
        match self {
            Detector::A1 | Detector::A2 => Side::Alice,
            Detector::B1 | Detector::B2 => Side::Bob,
        }
    }

    /// True for the complementary (second) output port.
    pub fn is_complementary(self) -> bool {
        matches!(self, Detector::A2 | Detector::B2)
    }

    /// Output port label of the detector in the forward network.
    pub fn port(self) -> Port {
        match self {
            Detector::A1 => Port::HPrime,
            Detector::A2 => Port::JPrime,
            Detector::B1 => Port::HDoublePrime,
            Detector::B2 => Port::JDoublePrime,
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Detector::A1 => "A1",
            Detector::A2 => "A2",
            Detector::B1 => "B1",
            Detector::B2 => "B2",
        };
        f.write_str(s)
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Detector::A1),
            "A2" => Ok(Detector::A2),
            "B1" => Ok(Detector::B1),
            "B2" => Ok(Detector::B2),
            _ => Err(Error::UnknownDetector(s.to_string())),
        }
    }
}

/// `coefficient · Π a_mode` over input-port modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMonomial {
    pub coefficient: Complex64,
    pub modes: Vec<ModeId>,
}

/// Linear combination of annihilation monomials for one detector click or
/// a two-detector coincidence.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOperator {
    pub terms: Vec<DetectionMonomial>,
    /// `(detector, click bin)` of each factor, Alice first.
    pub clicks: Vec<(Detector, i64)>,
}

impl DetectionOperator {
    /// Input bins touched by any monomial.
    pub fn input_bins(&self) -> BTreeSet<i64> {
        self.terms
            .iter()
            .flat_map(|t| t.modes.iter().map(|m| m.bin))
            .collect()
    }

    /// Applies the operator to `state`. Monomials stay distinct even when two
    /// of them annihilate the same modes.
    pub fn apply(&self, state: &FockState) -> FockState {
        let mut acc = FockState::zero(state.modes().iter().copied())
            .with_prune_threshold(state.prune_threshold());
        for term in &self.terms {
            let mut lowered = state.clone();
            for &m in term.modes.iter().rev() {
                lowered = lowered.apply_annihilation(m);
            }
            acc = acc.add_scaled(&lowered, term.coefficient);
        }
        acc
    }

    /// `‖O |ψ_in⟩‖²` with `ψ_in` the RF product state on the operator's
    /// input window.
    pub fn expectation(&self, p1: f64) -> Result<f64> {
        let bins: Vec<ModeId> = self
            .input_bins()
            .into_iter()
            .map(|b| ModeId::new(Port::A, b))
            .collect();
        let input = rf_input_state(p1, &bins)?;
        Ok(self.apply(&input).norm2())
    }
}

/// Heisenberg-picture mode of `det` at `click_bin`, expressed on port `a`:
///
/// `(1/4√2)[e^{i(φ+φ_p)} a_{t−τ_p−τ_m} + e^{iφ} a_{t−τ_m} + e^{iφ_p} a_{t−τ_p} + a_t]`
///
/// with `φ` the party's analyzer phase, shifted by π for the complementary port.
pub fn detector_operator(det: Detector, click_bin: i64, net: &NetworkSpec) -> DetectionOperator {
    let analyzer = net.analyzer(det.side());
    let phi = analyzer.phase + if det.is_complementary() { PI } else { 0.0 };
    let phi_p = net.prep.phase;
    let (tau_p, tau_m) = (net.prep.delay_bins, analyzer.delay_bins);
    let scale = 1.0 / (4.0 * 2f64.sqrt());

    let terms = [
        (phi + phi_p, click_bin - tau_p - tau_m),
        (phi, click_bin - tau_m),
        (phi_p, click_bin - tau_p),
        (0.0, click_bin),
    ]
    .into_iter()
    .map(|(phase, bin)| DetectionMonomial {
        coefficient: Complex64::from_polar(scale, phase),
        modes: vec![ModeId::new(Port::A, bin)],
    })
    .collect();

    DetectionOperator {
        terms,
        clicks: vec![(det, click_bin)],
    }
}

/// Termwise product of an Alice and a Bob detector operator (16 monomials).
pub fn coincidence_operator(
    det_a: Detector,
    t_a: i64,
    det_b: Detector,
    t_b: i64,
    net: &NetworkSpec,
) -> Result<DetectionOperator> {
    check_sides(det_a, det_b)?;
    let alice = detector_operator(det_a, t_a, net);
    let bob = detector_operator(det_b, t_b, net);
    let mut terms = Vec::with_capacity(16);
    for ta in &alice.terms {
        for tb in &bob.terms {
            terms.push(DetectionMonomial {
                coefficient: ta.coefficient * tb.coefficient,
                modes: ta.modes.iter().chain(&tb.modes).copied().collect(),
            });
        }
    }
    Ok(DetectionOperator {
        terms,
        clicks: vec![(det_a, t_a), (det_b, t_b)],
    })
}

pub(crate) fn check_sides(det_a: Detector, det_b: Detector) -> Result<()> {
    if det_a.side() != Side::Alice || det_b.side() != Side::Bob {
        return Err(Error::SameSideDetectors(
            det_a.to_string(),
            det_b.to_string(),
        ));
    }
    Ok(())
}

//! Schrödinger-picture propagation through the network.
//!
//! The preparation AMZI is applied to the pure input state. Past port `d`,
//! only the modes that can still reach the two detectors are propagated;
//! everything else is traced out as soon as it leaves that set, and the
//! remaining state is carried as a density operator.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::fock::{DensityMatrix, FockState, ModeId, Port};
use crate::source::rf_input_state;

use super::mixture::Mixture;
use super::{check_sides, AmziSpec, Detector, NetworkSpec, Side};

/// Early port-`d` bin (`t − τ_p`) of [`port_d_density`].
pub const PORT_D_EARLY: ModeId = ModeId::new(Port::D, 2);
/// Late port-`d` bin (`t`) of [`port_d_density`].
pub const PORT_D_LATE: ModeId = ModeId::new(Port::D, 3);

/// Sends port-`a` modes at `bins` through the preparation AMZI, returning the
/// joint state on ports `d` and `e`.
pub(crate) fn propagate_prep(
    input: &FockState,
    bins: &[i64],
    prep: &AmziSpec,
) -> Result<FockState> {
    let mut state = input.clone();
    for &k in bins {
        let vac = ModeId::new(Port::PrepVacuum, k);
        state = state.with_vacuum_mode(vac).apply_beamsplitter(
            ModeId::new(Port::A, k),
            vac,
            ModeId::new(Port::B, k),
            ModeId::new(Port::C, k),
        )?;
    }
    for &k in bins {
        state = state.apply_phase(ModeId::new(Port::B, k), prep.phase);
    }
    let delay = prep.delay_bins;
    state = state.relabel(|m| match m.port {
        Port::B => ModeId::new(Port::B, m.bin + delay),
        _ => m,
    })?;

    let out_bins: BTreeSet<i64> = bins.iter().flat_map(|&k| [k, k + delay]).collect();
    for &j in &out_bins {
        let (b, c) = (ModeId::new(Port::B, j), ModeId::new(Port::C, j));
        state = state
            .with_vacuum_mode(b)
            .with_vacuum_mode(c)
            .apply_beamsplitter(b, c, ModeId::new(Port::D, j), ModeId::new(Port::E, j))?;
    }
    Ok(state)
}

/// RF input on `window_bins` consecutive bins, sent through a preparation
/// AMZI whose delay is one bin. Input bins are `0..window_bins`; the output
/// spans ports `d` and `e` over bins `0..=window_bins`.
pub fn prepare_output_state(p1: f64, phi_p: f64, window_bins: usize) -> Result<FockState> {
    let bins: Vec<i64> = (0..window_bins.max(1) as i64).collect();
    let modes: Vec<ModeId> = bins.iter().map(|&b| ModeId::new(Port::A, b)).collect();
    let input = rf_input_state(p1, &modes)?;
    propagate_prep(
        &input,
        &bins,
        &AmziSpec {
            delay_bins: 1,
            phase: phi_p,
        },
    )
}

/// Reduced state of port `d` over the bins `(t − τ_p, t)`, i.e.
/// [`PORT_D_EARLY`] and [`PORT_D_LATE`], from four input bins.
pub fn port_d_density(p1: f64, phi_p: f64) -> Result<DensityMatrix> {
    let state = prepare_output_state(p1, phi_p, 4)?;
    state.reduced_density(&[PORT_D_EARLY, PORT_D_LATE].into())
}

struct Party {
    side: Side,
    analyzer: AmziSpec,
    detector: Detector,
    click: i64,
}

impl Party {
    fn ports(&self) -> (Port, Port, Port, Port, Port, Port) {
        match self.side {
            Side::Alice => (
                Port::DPrime,
                Port::AliceVacuum,
                Port::FPrime,
                Port::GPrime,
                Port::HPrime,
                Port::JPrime,
            ),
            Side::Bob => (
                Port::DDoublePrime,
                Port::BobVacuum,
                Port::FDoublePrime,
                Port::GDoublePrime,
                Port::HDoublePrime,
                Port::JDoublePrime,
            ),
        }
    }

    /// Port-`d` bins that feed this party's click.
    fn d_bins(&self) -> [i64; 2] {
        [self.click, self.click - self.analyzer.delay_bins]
    }

    fn propagate(&self, mut rho: Mixture) -> Result<Mixture> {
        let (input, vacuum, long, short, first, second) = self.ports();
        let tau = self.analyzer.delay_bins;
        let t = self.click;

        for k in self.d_bins() {
            let vac = ModeId::new(vacuum, k);
            rho = rho.with_vacuum_mode(vac).beamsplitter(
                ModeId::new(input, k),
                vac,
                ModeId::new(long, k),
                ModeId::new(short, k),
            )?;
            // long arm at t − τ and short arm at t meet at the click
            if k != t - tau {
                rho = rho.trace_out(ModeId::new(long, k));
            }
            if k != t {
                rho = rho.trace_out(ModeId::new(short, k));
            }
        }
        let (f_in, f_out) = (ModeId::new(long, t - tau), ModeId::new(long, t));
        rho = rho.phase(f_in, self.analyzer.phase).relabel(f_in, f_out)?;

        let (g, h, j) = (
            ModeId::new(short, t),
            ModeId::new(first, t),
            ModeId::new(second, t),
        );
        rho = rho.beamsplitter(f_out, g, h, j)?;
        let discarded = if self.detector.is_complementary() {
            h
        } else {
            j
        };
        Ok(rho.trace_out(discarded))
    }

    fn detected_mode(&self) -> ModeId {
        ModeId::new(self.detector.port(), self.click)
    }
}

/// Port-`d` state on `kept` bins.
///
/// The preparation AMZI only couples bins `τ_p` apart, so each residue class
/// of bins modulo `τ_p` evolves independently. Each class is built bin by
/// bin: an input bin is added when it enters the interferometer, and every
/// output mode is traced out as soon as it is complete and not kept.
fn prepare_mixture(p1: f64, prep: &AmziSpec, kept: &BTreeSet<i64>) -> Result<Mixture> {
    let (Some(&first), Some(&last)) = (kept.first(), kept.last()) else {
        return Ok(Mixture::unit());
    };
    let delay = prep.delay_bins;
    let window = first - delay..=last;

    let mut classes = Vec::new();
    for class in 0..delay {
        let bins: Vec<i64> = window
            .clone()
            .filter(|k| k.rem_euclid(delay) == class)
            .collect();
        let mut rho = Mixture::unit();
        for &k in &bins {
            let (a, vac) = (ModeId::new(Port::A, k), ModeId::new(Port::PrepVacuum, k));
            let (b, c) = (ModeId::new(Port::B, k), ModeId::new(Port::C, k));
            // the long arm is written straight into its delayed bin
            let b_late = ModeId::new(Port::B, k + delay);
            rho = rho
                .tensor_pure(&rf_input_state(p1, &[a])?)?
                .with_vacuum_mode(vac)
                .beamsplitter(a, vac, b_late, c)?
                .phase(b_late, prep.phase);

            // b at this bin left its input `delay` bins ago, or is vacuum
            let (d, e) = (ModeId::new(Port::D, k), ModeId::new(Port::E, k));
            rho = rho
                .with_vacuum_mode(b)
                .beamsplitter(b, c, d, e)?
                .trace_out(e);
            if !kept.contains(&k) {
                rho = rho.trace_out(d);
            }
        }
        // photons still in the long arm only reach bins past the last kept one
        let in_flight: Vec<ModeId> = rho
            .modes()
            .iter()
            .copied()
            .filter(|m| m.port == Port::B)
            .collect();
        for m in in_flight {
            rho = rho.trace_out(m);
        }
        classes.push((rho, bins.len() as u32));
    }

    let mut remaining: u32 = classes.iter().map(|(_, n)| n).sum();
    let mut rho = Mixture::unit();
    for (class, n) in &classes {
        remaining -= n;
        rho = rho.tensor(class, remaining)?;
    }
    Ok(rho)
}

/// Coincidence probability `⟨h_B† h_A† h_A h_B⟩` obtained by forward
/// propagation through all three interferometers.
pub fn forward_coincidence(
    p1: f64,
    det_a: Detector,
    t_a: i64,
    det_b: Detector,
    t_b: i64,
    net: &NetworkSpec,
) -> Result<f64> {
    check_sides(det_a, det_b)?;
    let alice = Party {
        side: Side::Alice,
        analyzer: net.analyzer_a,
        detector: det_a,
        click: t_a,
    };
    let bob = Party {
        side: Side::Bob,
        analyzer: net.analyzer_b,
        detector: det_b,
        click: t_b,
    };

    let alice_d: BTreeSet<i64> = alice.d_bins().into();
    let bob_d: BTreeSet<i64> = bob.d_bins().into();
    let kept_d: BTreeSet<i64> = alice_d.union(&bob_d).copied().collect();

    let mut rho = prepare_mixture(p1, &net.prep, &kept_d)?;
    for &k in &kept_d {
        let vac = ModeId::new(Port::SplitterVacuum, k);
        let (d, dp, dpp) = (
            ModeId::new(Port::D, k),
            ModeId::new(Port::DPrime, k),
            ModeId::new(Port::DDoublePrime, k),
        );
        rho = rho.with_vacuum_mode(vac).beamsplitter(d, vac, dp, dpp)?;
        if !alice_d.contains(&k) {
            rho = rho.trace_out(dp);
        }
        if !bob_d.contains(&k) {
            rho = rho.trace_out(dpp);
        }
    }

    rho = alice.propagate(rho)?;
    rho = bob.propagate(rho)?;
    Ok(rho
        .annihilate(alice.detected_mode())
        .annihilate(bob.detected_mode())
        .trace())
}

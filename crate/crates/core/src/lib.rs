//! Two-photon interference of resonance fluorescence reshaped by an
//! asymmetric Mach-Zehnder interferometer and analyzed in a Franson
//! geometry.
//!
//! The engine works on sparse bosonic Fock states over discrete time bins.
//! Coincidence probabilities are computed exactly, either from detector
//! operators written on the input port or by pushing the state forward
//! through the network, and are compared with the known closed forms.

pub mod analysis;
pub mod coincidence;
pub mod error;
pub mod fock;
pub mod network;
pub mod source;
pub mod validate;

pub use analysis::{
    chsh_from_model, chsh_on, chsh_s, closed_form_e, closed_form_s, correlation_e, find_crossing,
    fit_fringe, power_scan, ChshResult, ChshSettings, CorrelationCounts, FringeFit, FringeModel,
    PowerScanRow,
};
pub use coincidence::{
    closed_form_c, coincidence_on, coincidence_probability, hbt_g2, peak_table,
    synthesize_histogram, CoincidenceResult, HistogramParams, Method, PeakEntry, PeakId,
    PhaseClass, SidePeakForm,
};
pub use error::{Error, Result};
pub use fock::{DensityMatrix, FockState, ModeId, OccupationVector, Port};
pub use network::{
    coincidence_operator, detector_operator, forward_coincidence, port_d_density,
    prepare_output_state, AmziSpec, Detector, NetworkSpec, Side,
};
pub use source::{
    mean_photon_number, p1_of_nbar, rf_input_state, CalibrationParams, EmitterConstants, RfParams,
};

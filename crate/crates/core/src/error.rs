use thiserror::Error;

use crate::fock::ModeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("states share mode {0}")]
    OverlappingModes(ModeId),

    #[error("mode {0} is not part of the state")]
    MissingMode(ModeId),

    #[error("output mode {0} is already occupied by the state")]
    OccupiedOutput(ModeId),

    #[error("relabeling maps two modes onto {0}")]
    RelabelCollision(ModeId),

    #[error("keep set for the partial trace is empty")]
    EmptyKeep,

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("{name} must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("unknown detector `{0}` (expected A1, A2, B1 or B2)")]
    UnknownDetector(String),

    #[error("detectors {0} and {1} sit on the same analyzer")]
    SameSideDetectors(String, String),

    #[error("delay of {seconds:e} s is not a multiple of the {grid:e} s grid")]
    NonCommensurate { seconds: f64, grid: f64 },

    #[error("no closed form for peak {0}")]
    NoClosedForm(String),

    #[error("peak {0} is not used for CHSH evaluation")]
    NotChshPeak(String),

    #[error("preparation delay ({prep} bins) must exceed analyzer delay ({analyzer} bins)")]
    DegenerateGeometry { prep: i64, analyzer: i64 },

    #[error("g2 normalization undefined: no photons at the detector")]
    UndefinedNormalization,

    #[error("correlation counts sum to zero")]
    ZeroCounts,

    #[error("fringe fit needs at least 3 samples, got {0}")]
    TooFewSamples(usize),

    #[error("fringe design matrix is rank deficient")]
    RankDeficient,

    #[error("target S = {target} outside the reachable range (0, {max}]")]
    TargetOutOfRange { target: f64, max: f64 },

    #[error("grid must be positive and strictly increasing")]
    InvalidGrid,

    #[error("histogram parameters violate bin_width < T2 < tau_m")]
    InvalidHistogram,
}

pub type Result<T> = std::result::Result<T, Error>;

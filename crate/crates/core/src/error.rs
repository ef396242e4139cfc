use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("dispersion under-resolved: max spectral phase step {phase_step:.3} rad exceeds pi")]
    DispersionUnderResolved { phase_step: f64 },

    #[error("support overflow: tail mass {tail_mass:.3e} outside the central half of the window")]
    SupportOverflow { tail_mass: f64 },

    #[error("envelopes are defined on different grids")]
    GridMismatch,

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("not a slow wave: phase velocity {v_p:.6e} must be below c = {c:.6e}")]
    NotSlowWave { v_p: f64, c: f64 },

    #[error("image at infinity: object distance equals the focal length")]
    ImageAtInfinity,

    #[error("lens has no focusing power (infinite focal length)")]
    NoFocusingPower,

    #[error("focal length mismatch: lens gives {lens:.9e}, design expects {design:.9e}")]
    FocalLengthMismatch { lens: f64, design: f64 },

    #[error(
        "modulation under-resolved: {samples_per_period:.2} samples per period, need at least 16"
    )]
    ModulationUnderResolved { samples_per_period: f64 },

    #[error("zero variance: magnification is undefined")]
    ZeroVariance,

    #[error("probe too wide: {probe:.3e} must be below {limit:.3e}")]
    ProbeTooWide { probe: f64, limit: f64 },

    #[error("humps overlap: separation {sep:.3e} must exceed 3 sigma = {limit:.3e}")]
    HumpsOverlap { sep: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical guard (sampling, support, resolution)
    /// as opposed to plainly invalid inputs.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Sampling(_)
                | Error::DispersionUnderResolved { .. }
                | Error::SupportOverflow { .. }
                | Error::NonFinite { .. }
                | Error::ModulationUnderResolved { .. }
                | Error::ProbeTooWide { .. }
        )
    }
}

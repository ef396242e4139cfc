//! One-dimensional matter-wave envelopes in a co-moving frame: free-space
//! dispersion, a traveling-wave phase-modulation lens, and the
//! dispersion-lens-dispersion imaging chain built from them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carrier;
pub mod config;
pub mod dispersion;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod imaging;
pub mod lens;
pub mod runner;
pub mod units;

pub use carrier::CarrierState;
pub use dispersion::{propagate, DispersionSegment};
pub use envelope::SampledEnvelope;
pub use error::{Error, Result};
pub use grid::Grid;
pub use imaging::{run_pipeline, solve_imaging, ImagingDesign};
pub use lens::{apply_lens, build_lens, LensMode, LensParams, LensSpec};
pub use units::PhysicalContext;

//! Wave-optics simulator for high-dimensional OAM quantum key distribution
//! through atmospheric turbulence with closed-loop adaptive-optics correction.
//!
//! The pipeline runs turbulence synthesis, beam propagation, AO correction and
//! projective measurement, then reduces the detections to crosstalk, QDER, key
//! rate and MUB process tomography.

pub mod ao;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod harness;
pub mod link;
pub mod modes;
pub mod propagation;
pub mod qkd;
pub mod quantum;
pub mod turbulence;

pub use error::{Error, Result};
pub use field::{overlap, ComplexField};
pub use grid::GridSpec;
pub use modes::{
    fiber_coupling, make_ang_basis, make_logical_basis, make_oam_mode, projective_probability,
    BasisKind, ModeBasis,
};

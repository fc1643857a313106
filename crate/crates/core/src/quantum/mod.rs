//! Quantum analysis: operator bases, mutually unbiased bases and process tomography.

pub mod gellmann;
pub mod mub;
pub mod tomography;

pub use gellmann::{CMatrix, GellMannBasis};
pub use mub::{build_mubs, build_mubs_dim4, MubSet};
pub use tomography::{
    channel_from_simulation, probabilities_from_chi, process_fidelity, reconstruct_chi, DetectionAccumulator,
    ProbEntry, ProbabilityTable, ProcessMatrix,
};

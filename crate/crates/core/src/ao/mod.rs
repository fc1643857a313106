//! Adaptive optics: Shack-Hartmann sensing, deformable mirror, calibration and
//! the closed control loop.

pub mod control;
pub mod dm;
pub mod wfs;

pub use control::{calibrate, Calibration, ControlParams, LoopState, StepReport};
pub use dm::{actuator_lattice, dm_apply, DmModel};
pub use wfs::{wfs_measure, SlopeMethod, WfsGeometry};

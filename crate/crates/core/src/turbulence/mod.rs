//! Turbulence: phase-screen synthesis, Zernike analysis, Fried estimation and
//! frozen-flow evolution.

pub mod fried;
pub mod screen;
pub mod series;
pub mod zernike;

pub use fried::{estimate_fried, probe_centroid};
pub use screen::{gen_screen_fft, gen_screen_zernike, gen_screen_zernike_with, structure_function, PhaseScreen, ScreenMethod};
pub use series::{TurbulenceSeries, GREENWOOD_CONSTANT};
pub use zernike::{decompose, ZernikeFitter, ZernikeSpectrum};

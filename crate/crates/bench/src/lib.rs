//! Shared fixtures for the criterion benches: the default 256-point grid,
//! channel and AO hardware, plus a D/r0 = 1.7 screen.

use turbqkd_core::link::{AoSettings, Link};
use turbqkd_core::propagation::ChannelSpec;
use turbqkd_core::turbulence::{gen_screen_fft, PhaseScreen};
use turbqkd_core::GridSpec;

pub const W0: f64 = 1e-3;

pub fn grid() -> GridSpec {
    GridSpec::new(256, W0 / 24.0, 633e-9).expect("default grid is valid")
}

pub fn channel() -> ChannelSpec {
    ChannelSpec::single_cell(0.5, 0.3, 0.5, Some(8e-3))
}

pub fn screen(seed: u64) -> PhaseScreen {
    gen_screen_fft(2.0 * W0 / 1.7, &grid(), 3.5e-3, seed).expect("resolvable r0")
}

/// Link carrying charges up to `max_ell`, with AO hardware.
pub fn link(max_ell: i32) -> Link {
    Link::new(&grid(), W0, &channel(), max_ell, Some(&AoSettings::default())).expect("default link builds")
}

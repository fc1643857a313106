//! Frozen-flow time evolution of a phase screen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::turbulence::screen::{synthesize_kolmogorov, PhaseScreen, ScreenMethod};

/// Standard Greenwood constant for a single frozen-flow layer: `f_G = 0.43 v / r0`.
pub const GREENWOOD_CONSTANT: f64 = 0.43;

/// How many grid widths the master screen spans along the wind direction.
const MASTER_SPAN: usize = 8;

/// Taylor frozen-flow series: a long master screen translating along +x at `wind`.
///
/// Frames are windows of the master taken at sub-pixel offsets (linear
/// interpolation along x). When the window runs off the end of the master a new,
/// independent master is drawn from the same generator state.
#[derive(Debug, Clone)]
pub struct TurbulenceSeries {
    grid: GridSpec,
    r0: f64,
    wind: f64,
    dt: f64,
    greenwood_constant: f64,
    aperture_radius: f64,
    rng: ChaCha8Rng,
    master: Vec<f64>,
    master_cols: usize,
    offset: f64,
    resyntheses: usize,
}

impl TurbulenceSeries {
    pub fn new(grid: GridSpec, r0: f64, wind: f64, dt: f64, aperture_radius: f64, seed: u64) -> Result<Self> {
        Self::with_constant(grid, r0, wind, dt, aperture_radius, seed, GREENWOOD_CONSTANT)
    }

    pub fn with_constant(
        grid: GridSpec,
        r0: f64,
        wind: f64,
        dt: f64,
        aperture_radius: f64,
        seed: u64,
        greenwood_constant: f64,
    ) -> Result<Self> {
        if r0 < 2.0 * grid.pitch {
            return Err(Error::UnresolvableR0 { r0, pitch: grid.pitch });
        }
        if !(wind.is_finite() && wind >= 0.0 && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("need wind >= 0 and dt > 0, got {wind}, {dt}")));
        }
        let shift = wind * dt / grid.pitch;
        if shift >= (MASTER_SPAN - 1) as f64 * grid.n as f64 {
            return Err(Error::InvalidArgument(format!(
                "wind moves the screen {shift:.1} px per frame, more than the master screen holds"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let master_cols = MASTER_SPAN * grid.n;
        let master = synthesize_kolmogorov(grid.n, master_cols, grid.pitch, r0, &mut rng);
        Ok(Self {
            grid,
            r0,
            wind,
            dt,
            greenwood_constant,
            aperture_radius,
            rng,
            master,
            master_cols,
            offset: 0.0,
            resyntheses: 0,
        })
    }

    pub fn greenwood_frequency(&self) -> f64 {
        self.greenwood_constant * self.wind / self.r0
    }

    /// True when the frame rate cannot follow the turbulence (`f_G > f_frame / 2`).
    pub fn under_sampled(&self) -> bool {
        self.greenwood_frequency() > 0.5 / self.dt
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn frame_interval(&self) -> f64 {
        self.dt
    }

    /// Number of times the master screen has been replaced.
    pub fn resyntheses(&self) -> usize {
        self.resyntheses
    }

    /// Returns the current frame and moves the flow on by `wind * dt`.
    pub fn advance(&mut self) -> PhaseScreen {
        let n = self.grid.n;
        if self.offset + n as f64 + 1.0 > self.master_cols as f64 {
            self.master = synthesize_kolmogorov(n, self.master_cols, self.grid.pitch, self.r0, &mut self.rng);
            self.offset = 0.0;
            self.resyntheses += 1;
        }
        let base = self.offset.floor() as usize;
        let frac = self.offset - base as f64;
        let mut phase = Vec::with_capacity(n * n);
        for row in self.master.chunks_exact(self.master_cols) {
            let src = &row[base..=base + n];
            if frac == 0.0 {
                phase.extend_from_slice(&src[..n]);
            } else {
                phase.extend(src.windows(2).map(|w| w[0] * (1.0 - frac) + w[1] * frac));
            }
        }
        self.offset += self.wind * self.dt / self.grid.pitch;
        PhaseScreen::new(self.grid, phase, Some(self.r0), ScreenMethod::FftKolmogorov, self.aperture_radius)
    }
}

impl Iterator for TurbulenceSeries {
    type Item = PhaseScreen;

    fn next(&mut self) -> Option<PhaseScreen> {
        Some(self.advance())
    }
}

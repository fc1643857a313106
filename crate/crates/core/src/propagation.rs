//! Angular-spectrum free-space propagation and channel assembly.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::ComplexField;
use crate::grid::GridSpec;
use crate::turbulence::PhaseScreen;

/// Largest |z| for which the sampled transfer function stays unaliased.
///
/// The chirp `exp(i 2 pi z sqrt(1/lambda^2 - f^2))` must not change phase by more
/// than pi between neighbouring frequency bins, which gives
/// `z <= N p^2 / lambda * sqrt(1 - (lambda / 2p)^2)`.
pub fn max_safe_distance(grid: &GridSpec) -> f64 {
    let p = grid.pitch;
    let s = (grid.wavelength / (2.0 * p)).powi(2);
    grid.n as f64 * p * p / grid.wavelength * (1.0 - s).max(0.0).sqrt()
}

/// A precomputed transfer function for one propagation distance.
///
/// Evanescent frequencies (beyond `1/lambda`) are discarded.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: GridSpec,
    z: f64,
    transfer: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: &GridSpec, z: f64) -> Result<Self> {
        let max_z = max_safe_distance(grid);
        if !z.is_finite() || z.abs() > max_z {
            return Err(Error::Aliasing { z, max_z });
        }
        let n = grid.n;
        let inv_l2 = 1.0 / (grid.wavelength * grid.wavelength);
        let mut transfer = Vec::with_capacity(n * n);
        for ky in 0..n {
            let fy = grid.freq(ky);
            for kx in 0..n {
                let fx = grid.freq(kx);
                let arg = inv_l2 - fx * fx - fy * fy;
                transfer.push(if arg > 0.0 {
                    Complex64::from_polar(1.0, 2.0 * PI * z * arg.sqrt())
                } else {
                    Complex64::new(0.0, 0.0)
                });
            }
        }
        Ok(Self { grid: *grid, z, transfer })
    }

    pub fn distance(&self) -> f64 {
        self.z
    }

    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        let mut out = field.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, field: &mut ComplexField) -> Result<()> {
        self.grid.ensure_same(field.grid())?;
        if self.z == 0.0 {
            return Ok(());
        }
        let plan = fft::plan(self.grid.n, self.grid.n);
        let data = field.samples_mut();
        plan.forward(data);
        data.iter_mut().zip(&self.transfer).for_each(|(v, h)| *v *= h);
        plan.inverse(data);
        Ok(())
    }
}

/// Propagates `field` over `z` meters of free space (negative `z` back-propagates).
pub fn propagate_free(field: &ComplexField, z: f64) -> Result<ComplexField> {
    Propagator::new(field.grid(), z)?.apply(field)
}

/// Multiplies the field by `exp(i * phase)`.
pub fn apply_screen(field: &ComplexField, screen: &PhaseScreen) -> Result<ComplexField> {
    field.grid().ensure_same(&screen.grid)?;
    let mut out = field.clone();
    out.apply_phase(&screen.phase, 1.0);
    Ok(out)
}

/// One element of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Segment {
    /// Free-space propagation over `z` meters.
    Free { z: f64 },
    /// A thin phase screen; screens are supplied in order when the channel runs.
    Screen,
}

/// Ordered list of free-space steps and screen slots, plus an optional hard
/// receiver aperture applied after the last segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub aperture_diameter: Option<f64>,
}

impl ChannelSpec {
    pub fn empty() -> Self {
        Self { segments: Vec::new(), aperture_diameter: None }
    }

    /// Source, one thin screen in the middle of a cell, receiver.
    pub fn single_cell(to_cell: f64, cell: f64, from_cell: f64, aperture_diameter: Option<f64>) -> Self {
        Self {
            segments: vec![
                Segment::Free { z: to_cell + cell / 2.0 },
                Segment::Screen,
                Segment::Free { z: from_cell + cell / 2.0 },
            ],
            aperture_diameter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            if let Segment::Free { z } = s {
                if !(z.is_finite() && *z >= 0.0) {
                    return Err(Error::Config(format!("free-space distance must be >= 0, got {z}")));
                }
            }
        }
        if let Some(d) = self.aperture_diameter {
            if !(d > 0.0) {
                return Err(Error::Config(format!("aperture diameter must be > 0, got {d}")));
            }
        }
        Ok(())
    }

    pub fn screen_count(&self) -> usize {
        self.segments.iter().filter(|s| matches!(s, Segment::Screen)).count()
    }

    /// Total free-space length in meters.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| if let Segment::Free { z } = s { *z } else { 0.0 }).sum()
    }

    /// Concatenation: `self` then `other`. `other`'s aperture wins if both set one.
    pub fn then(&self, other: &ChannelSpec) -> ChannelSpec {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        ChannelSpec { segments, aperture_diameter: other.aperture_diameter.or(self.aperture_diameter) }
    }

    /// The same channel without its receiver aperture.
    pub fn without_aperture(&self) -> ChannelSpec {
        ChannelSpec { segments: self.segments.clone(), aperture_diameter: None }
    }
}

/// Runs `field` through the channel, consuming one entry of `screens` per screen slot.
pub fn run_channel(field: &ComplexField, spec: &ChannelSpec, screens: &[&PhaseScreen]) -> Result<ComplexField> {
    spec.validate()?;
    if screens.len() != spec.screen_count() {
        return Err(Error::InvalidArgument(format!(
            "channel has {} screen slots but {} screens were supplied",
            spec.screen_count(),
            screens.len()
        )));
    }
    let mut out = field.clone();
    let mut next = screens.iter();
    for s in &spec.segments {
        match s {
            Segment::Free { z } => {
                if *z != 0.0 {
                    Propagator::new(out.grid(), *z)?.apply_in_place(&mut out)?;
                }
            }
            Segment::Screen => {
                let screen = next.next().expect("screen count checked above");
                out.grid().ensure_same(&screen.grid)?;
                out.apply_phase(&screen.phase, 1.0);
            }
        }
    }
    if let Some(d) = spec.aperture_diameter {
        out.apply_aperture(d);
    }
    Ok(out)
}

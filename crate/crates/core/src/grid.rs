use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square sampling grid shared by fields and phase screens.
///
/// Pixel `(ix, iy)` sits at `((ix - n/2) * pitch, (iy - n/2) * pitch)`, so the
/// optical axis falls on pixel `n/2` and the FFT frequency origin lines up with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Pixel spacing in meters.
    pub pitch: f64,
    /// Wavelength in meters.
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        let grid = Self { n, pitch, wavelength };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 32 || !self.n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {} must be a power of two >= 32",
                self.n
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::InvalidGrid(format!("pitch {} must be > 0", self.pitch)));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "wavelength {} must be > 0",
                self.wavelength
            )));
        }
        Ok(())
    }

    /// Side length of the sampled window in meters.
    pub fn width(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Physical coordinate of pixel index `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch
    }

    /// Iterator over `(index, x, y)` for every pixel in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.n).flat_map(move |iy| {
            let y = self.coord(iy);
            (0..self.n).map(move |ix| (iy * self.n + ix, self.coord(ix), y))
        })
    }

    /// Polar coordinates `(rho, phi)` of every pixel in row-major order.
    pub fn polar(&self) -> Vec<(f64, f64)> {
        self.points().map(|(_, x, y)| (x.hypot(y), y.atan2(x))).collect()
    }

    /// Boolean disk mask of the given radius centered on the optical axis.
    pub fn disk(&self, radius: f64) -> Vec<bool> {
        self.points().map(|(_, x, y)| x.hypot(y) <= radius).collect()
    }

    /// Spatial frequency (cycles per meter) of FFT bin `k`.
    #[inline]
    pub fn freq(&self, k: usize) -> f64 {
        let n = self.n as isize;
        let k = k as isize;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 / self.width()
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if self.n != other.n || !close(self.pitch, other.pitch) || !close(self.wavelength, other.wavelength) {
            return Err(Error::GridMismatch(format!(
                "n={} pitch={:.6e} lambda={:.6e} vs n={} pitch={:.6e} lambda={:.6e}",
                self.n, self.pitch, self.wavelength, other.n, other.pitch, other.wavelength
            )));
        }
        Ok(())
    }

    /// Doubles the sampling density over the same physical window.
    pub fn refined(&self) -> GridSpec {
        GridSpec { n: self.n * 2, pitch: self.pitch / 2.0, wavelength: self.wavelength }
    }
}

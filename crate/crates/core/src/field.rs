//! Sampled complex optical fields and the flat binary container shared with
//! phase screens.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Sampled 2-D complex amplitude on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    samples: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_samples(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for an {}x{} grid",
                samples.len(),
                grid.n,
                grid.n
            )));
        }
        Ok(Self { grid, samples })
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let samples = grid.points().map(|(_, x, y)| f(x, y)).collect();
        Self { grid, samples }
    }

    /// Uniform unit-amplitude field (a plane wave at normal incidence).
    pub fn plane_wave(grid: GridSpec) -> Self {
        Self { grid, samples: vec![Complex64::new(1.0, 0.0); grid.len()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Total power `sum |u|^2 * pitch^2`.
    pub fn power(&self) -> f64 {
        let da = self.grid.pitch * self.grid.pitch;
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * da
    }

    /// Scales to unit power. Fails on an all-zero field.
    pub fn normalized(mut self) -> Result<Self> {
        let p = self.power();
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::ZeroPower("cannot normalize a field with zero power".into()));
        }
        let s = 1.0 / p.sqrt();
        self.samples.iter_mut().for_each(|v| *v *= s);
        Ok(self)
    }

    /// Removes the global phase so the largest-magnitude sample is real and positive.
    pub fn phase_fixed(mut self) -> Self {
        let peak = self
            .samples
            .iter()
            .copied()
            .fold(Complex64::new(0.0, 0.0), |best, v| if v.norm_sqr() > best.norm_sqr() { v } else { best });
        if peak.norm() > 0.0 {
            let rot = peak.conj() / peak.norm();
            self.samples.iter_mut().for_each(|v| *v *= rot);
        }
        self
    }

    pub fn scale(&mut self, c: Complex64) {
        self.samples.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &ComplexField) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        self.samples.iter_mut().zip(&other.samples).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    /// Multiplies every sample by `exp(i * sign * phase)`.
    pub fn apply_phase(&mut self, phase: &[f64], sign: f64) {
        assert_eq!(phase.len(), self.samples.len());
        self.samples
            .iter_mut()
            .zip(phase)
            .for_each(|(v, &p)| *v *= Complex64::from_polar(1.0, sign * p));
    }

    /// Zeroes every sample outside a centered disk of the given diameter.
    pub fn apply_aperture(&mut self, diameter: f64) {
        let r = diameter / 2.0;
        let grid = self.grid;
        for (i, x, y) in grid.points() {
            if x.hypot(y) > r {
                self.samples[i] = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.samples.iter().map(|v| v.arg()).collect()
    }

    /// Intensity-weighted centroid `(x, y)` in meters.
    pub fn centroid(&self) -> (f64, f64) {
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for (i, x, y) in self.grid.points() {
            let w = self.samples[i].norm_sqr();
            sx += w * x;
            sy += w * y;
            s += w;
        }
        (sx / s, sy / s)
    }

    pub fn write_container<W: Write>(&self, w: W) -> Result<()> {
        let payload: Vec<f64> = self.samples.iter().flat_map(|v| [v.re, v.im]).collect();
        write_container(w, &self.grid, &payload)
    }

    pub fn read_container<R: Read>(r: R) -> Result<Self> {
        let (grid, payload) = read_container(r)?;
        if payload.len() != 2 * grid.len() {
            return Err(Error::Serde(format!(
                "complex container holds {} values, expected {}",
                payload.len(),
                2 * grid.len()
            )));
        }
        let samples = payload.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(Self { grid, samples })
    }

    /// Writes an 8-bit grayscale intensity map scaled to the field maximum.
    pub fn save_intensity_png(&self, path: &Path) -> Result<()> {
        let inten = self.intensity();
        let max = inten.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        save_gray(path, self.grid.n, inten.iter().map(|v| (v / max * 255.0).round() as u8))
    }

    /// Writes an 8-bit grayscale phase map, `[-pi, pi]` onto `[0, 255]`.
    pub fn save_phase_png(&self, path: &Path) -> Result<()> {
        let pi = std::f64::consts::PI;
        save_gray(
            path,
            self.grid.n,
            self.phase().iter().map(|p| ((p + pi) / (2.0 * pi) * 255.0).round() as u8),
        )
    }
}

/// `<a|b> = sum conj(a) * b * pitch^2`.
pub fn overlap(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    a.grid.ensure_same(&b.grid)?;
    Ok(overlap_unchecked(&a.samples, &b.samples) * (a.grid.pitch * a.grid.pitch))
}

#[inline]
pub(crate) fn overlap_unchecked(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

/// Header `n: u64, pitch: f64, wavelength: f64`, then the f64 payload, all little-endian.
pub(crate) fn write_container<W: Write>(mut w: W, grid: &GridSpec, payload: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * payload.len());
    buf.extend_from_slice(&(grid.n as u64).to_le_bytes());
    buf.extend_from_slice(&grid.pitch.to_le_bytes());
    buf.extend_from_slice(&grid.wavelength.to_le_bytes());
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_container<R: Read>(mut r: R) -> Result<(GridSpec, Vec<f64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 24 || (bytes.len() - 24) % 8 != 0 {
        return Err(Error::Serde(format!("container length {} is malformed", bytes.len())));
    }
    let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("8-byte slice") };
    let n = u64::from_le_bytes(word(0)) as usize;
    let grid = GridSpec::new(n, f64::from_le_bytes(word(8)), f64::from_le_bytes(word(16)))?;
    let payload = (24..bytes.len()).step_by(8).map(|i| f64::from_le_bytes(word(i))).collect();
    Ok((grid, payload))
}

fn save_gray(path: &Path, n: usize, pixels: impl Iterator<Item = u8>) -> Result<()> {
    let buf: Vec<u8> = pixels.collect();
    let img = image::GrayImage::from_raw(n as u32, n as u32, buf)
        .ok_or_else(|| Error::Serde("image buffer size mismatch".into()))?;
    img.save(path).map_err(|e| Error::Serde(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(64, 1e-4, 633e-9).unwrap()
    }

    fn blob(g: GridSpec) -> ComplexField {
        ComplexField::from_fn(g, |x, y| {
            let r2 = (x * x + y * y) / (1e-3f64).powi(2);
            Complex64::from_polar((-r2).exp(), 3.0 * x / 1e-3)
        })
        .normalized()
        .unwrap()
    }

    #[test]
    fn self_overlap_is_unit() {
        let f = blob(grid());
        let o = overlap(&f, &f).unwrap();
        assert!((o - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn global_phase_is_recovered() {
        let a = blob(grid());
        let theta = 0.7;
        let mut b = a.clone();
        b.scale(Complex64::from_polar(1.0, theta));
        let o = overlap(&a, &b).unwrap();
        assert!((o - Complex64::from_polar(1.0, theta)).norm() < 1e-9);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = blob(grid());
        let b = blob(GridSpec::new(64, 2e-4, 633e-9).unwrap());
        assert!(matches!(overlap(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn container_roundtrip_is_bit_exact() {
        let f = blob(grid());
        let mut bytes = Vec::new();
        f.write_container(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 24 + 16 * 64 * 64);
        assert_eq!(&bytes[0..8], &64u64.to_le_bytes());
        let back = ComplexField::read_container(bytes.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn phase_fix_makes_peak_real() {
        let mut f = blob(grid());
        f.scale(Complex64::from_polar(1.0, 2.0));
        let f = f.phase_fixed();
        let peak = f.samples().iter().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr())).unwrap();
        assert!(peak.im.abs() < 1e-12 && peak.re > 0.0);
    }
}

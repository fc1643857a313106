//! Shack-Hartmann wavefront sensor.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::ComplexField;
use crate::grid::GridSpec;

/// Lenslets across the pupil diameter.
pub const LENSLETS: usize = 16;

/// How a subaperture's focal-spot centroid is turned into a slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeMethod {
    /// Ideal centroid via the centroid theorem: the focal-spot first moment equals
    /// the intensity-weighted mean phase gradient across the lenslet, evaluated here
    /// from nearest-neighbour field correlations.
    #[default]
    Gradient,
    /// Centroid of the zero-padded FFT focal spot of each lenslet.
    FocalSpot,
}

#[derive(Debug, Clone)]
struct Subaperture {
    /// (row, first column, one past last column) runs of pupil pixels.
    runs: Vec<(usize, usize, usize)>,
    center: (f64, f64),
}

/// Lenslet layout over a circular pupil and the validity mask for a centered beam.
#[derive(Debug, Clone)]
pub struct WfsGeometry {
    grid: GridSpec,
    pupil_diameter: f64,
    lenslets: usize,
    valid: Vec<bool>,
    subapertures: Vec<Subaperture>,
    pub method: SlopeMethod,
    /// Standard deviation of additive slope noise in rad/m (0 disables noise).
    pub noise: f64,
}

impl WfsGeometry {
    /// `threshold` is the minimum fraction of a lenslet's area that must fall inside
    /// the pupil for the lenslet to be used.
    pub fn new(grid: &GridSpec, pupil_diameter: f64, lenslets: usize, threshold: f64) -> Result<Self> {
        if !(pupil_diameter > 0.0 && pupil_diameter <= grid.width()) {
            return Err(Error::InvalidArgument(format!(
                "pupil diameter {pupil_diameter} must be positive and fit in the {} m grid",
                grid.width()
            )));
        }
        if lenslets == 0 {
            return Err(Error::InvalidArgument("need at least one lenslet".into()));
        }
        let side = pupil_diameter / lenslets as f64;
        let r = pupil_diameter / 2.0;
        let mut valid = Vec::with_capacity(lenslets * lenslets);
        let mut subapertures = Vec::new();
        for sy in 0..lenslets {
            let y0 = -r + sy as f64 * side;
            for sx in 0..lenslets {
                let x0 = -r + sx as f64 * side;
                let mut runs = Vec::new();
                let (mut inside, mut total) = (0usize, 0usize);
                for row in 0..grid.n {
                    let y = grid.coord(row);
                    if y < y0 || y >= y0 + side {
                        continue;
                    }
                    let mut run: Option<(usize, usize)> = None;
                    for col in 0..grid.n {
                        let x = grid.coord(col);
                        if x < x0 || x >= x0 + side {
                            continue;
                        }
                        total += 1;
                        if x.hypot(y) <= r {
                            inside += 1;
                            run = Some(match run {
                                Some((a, _)) => (a, col + 1),
                                None => (col, col + 1),
                            });
                        }
                    }
                    if let Some((a, b)) = run {
                        runs.push((row, a, b));
                    }
                }
                let ok = total > 0 && inside as f64 >= threshold * total as f64;
                valid.push(ok);
                if ok {
                    subapertures.push(Subaperture { runs, center: (x0 + side / 2.0, y0 + side / 2.0) });
                }
            }
        }
        if subapertures.is_empty() {
            return Err(Error::InvalidArgument("no valid subapertures; pupil too small for the grid".into()));
        }
        Ok(Self {
            grid: *grid,
            pupil_diameter,
            lenslets,
            valid,
            subapertures,
            method: SlopeMethod::default(),
            noise: 0.0,
        })
    }

    pub fn standard(grid: &GridSpec, pupil_diameter: f64) -> Result<Self> {
        Self::new(grid, pupil_diameter, LENSLETS, 0.5)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn pupil_diameter(&self) -> f64 {
        self.pupil_diameter
    }

    pub fn lenslets(&self) -> usize {
        self.lenslets
    }

    /// Row-major validity mask over the full lenslet array.
    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.subapertures.len()
    }

    /// Lenslet centers of the valid subapertures, in slope-vector order.
    pub fn centers(&self) -> Vec<(f64, f64)> {
        self.subapertures.iter().map(|s| s.center).collect()
    }

    /// Length of the slope vector: x then y for each valid subaperture.
    pub fn slope_len(&self) -> usize {
        2 * self.subapertures.len()
    }
}

fn gradient_slopes(sub: &Subaperture, data: &[Complex64], n: usize, pitch: f64) -> Option<(f64, f64)> {
    let mut cx = Complex64::new(0.0, 0.0);
    let mut cy = Complex64::new(0.0, 0.0);
    let mut power = 0.0;
    // rows are consecutive, so a pixel's lower neighbour is inside when the next
    // run covers its column
    for (k, &(row, a, b)) in sub.runs.iter().enumerate() {
        let line = &data[row * n..row * n + n];
        for col in a..b {
            power += line[col].norm_sqr();
            if col + 1 < b {
                cx += line[col].conj() * line[col + 1];
            }
        }
        if let Some(&(next_row, na, nb)) = sub.runs.get(k + 1) {
            if next_row == row + 1 {
                let below = &data[next_row * n..next_row * n + n];
                for col in a.max(na)..b.min(nb) {
                    cy += line[col].conj() * below[col];
                }
            }
        }
    }
    (power > 0.0).then(|| (cx.arg() / pitch, cy.arg() / pitch))
}

fn focal_spot_slopes(sub: &Subaperture, data: &[Complex64], n: usize, pitch: f64) -> Option<(f64, f64)> {
    let (r0, r1) = (sub.runs.first()?.0, sub.runs.last()?.0);
    let c0 = sub.runs.iter().map(|r| r.1).min()?;
    let c1 = sub.runs.iter().map(|r| r.2).max()?;
    let span = (r1 + 1 - r0).max(c1 - c0);
    let m = (4 * span).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    for &(row, a, b) in &sub.runs {
        let dst = (row - r0) * m;
        for col in a..b {
            buf[dst + col - c0] = data[row * n + col];
        }
    }
    fft::plan(m, m).forward(&mut buf);
    let spot: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = spot.iter().sum();
    if total <= 0.0 {
        return None;
    }
    // Windowed centre of gravity, re-centred until it settles. The spot of a
    // symmetric lenslet is symmetric about its true centre, which is therefore a
    // fixed point; the window suppresses the slowly decaying box sidelobes that
    // bias a plain first moment.
    let peak = spot.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i)?;
    let mf = m as f64;
    let wrap = |d: f64| d - mf * (d / mf).round();
    let width = mf / span as f64;
    let inv = 1.0 / (2.0 * width * width);
    let half = mf / 2.0;
    let window = |d: f64| if d.abs() >= half { 0.0 } else { (-d * d * inv).exp() };
    let (mut cx, mut cy) = ((peak % m) as f64, (peak / m) as f64);
    for _ in 0..50 {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for ky in 0..m {
            let dy = wrap(ky as f64 - cy);
            let wy = window(dy);
            for kx in 0..m {
                let dx = wrap(kx as f64 - cx);
                let w = spot[ky * m + kx] * wy * window(dx);
                sx += w * dx;
                sy += w * dy;
                sw += w;
            }
        }
        let (ex, ey) = (sx / sw, sy / sw);
        cx += ex;
        cy += ey;
        if ex.abs().max(ey.abs()) < 1e-12 {
            break;
        }
    }
    let (sx, sy) = (wrap(cx), wrap(cy));
    // forward FFT uses exp(-i ...), so a phase ramp +k x lands at bin +k x m p / 2 pi
    let scale = 2.0 * std::f64::consts::PI / (m as f64 * pitch);
    Some((sx * scale, sy * scale))
}

/// Measures per-lenslet wavefront slopes (rad/m), x then y per valid subaperture.
///
/// Dark lenslets report zero slope; a fully dark sensor is an error. `rng` draws
/// the optional additive noise.
pub fn wfs_measure<R: Rng + ?Sized>(field: &ComplexField, geom: &WfsGeometry, rng: &mut R) -> Result<Vec<f64>> {
    geom.grid.ensure_same(field.grid())?;
    let n = geom.grid.n;
    let p = geom.grid.pitch;
    let data = field.samples();
    let mut out = Vec::with_capacity(geom.slope_len());
    let mut lit = 0usize;
    for sub in &geom.subapertures {
        let s = match geom.method {
            SlopeMethod::Gradient => gradient_slopes(sub, data, n, p),
            SlopeMethod::FocalSpot => focal_spot_slopes(sub, data, n, p),
        };
        let (sx, sy) = match s {
            Some(v) => {
                lit += 1;
                v
            }
            None => (0.0, 0.0),
        };
        out.push(sx);
        out.push(sy);
    }
    if lit == 0 {
        return Err(Error::NoWfsSignal);
    }
    if geom.noise > 0.0 {
        let dist = Normal::new(0.0, geom.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        out.iter_mut().for_each(|v| *v += dist.sample(rng));
    }
    Ok(out)
}

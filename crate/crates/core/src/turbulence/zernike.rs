//! ANSI single-index Zernike polynomials (piston is `j = 1`), orthonormal over the
//! unit disk with respect to the area-normalized inner product.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::turbulence::screen::{PhaseScreen, ScreenMethod};

/// Highest supported index (complete through radial order 10).
pub const MAX_INDEX: usize = 66;

/// Radial order `n` and azimuthal frequency `m` of ANSI index `j`.
pub fn nm(j: usize) -> Result<(u32, i32)> {
    if !(1..=MAX_INDEX).contains(&j) {
        return Err(Error::ZernikeIndex(j));
    }
    let k = (j - 1) as i64;
    let mut n = 0i64;
    while (n + 1) * (n + 2) / 2 <= k {
        n += 1;
    }
    let m = 2 * k - n * (n + 2);
    Ok((n as u32, m as i32))
}

pub fn name(j: usize) -> String {
    const NAMES: [&str; 10] = [
        "Piston",
        "Tip Y",
        "Tip X",
        "Astigmatism +45d",
        "Defocus",
        "Astigmatism 0/90d",
        "Trefoil Y",
        "Coma X",
        "Coma Y",
        "Trefoil X",
    ];
    match j {
        1..=10 => NAMES[j - 1].to_string(),
        _ => match nm(j) {
            Ok((n, m)) => format!("Z(n={n},m={m})"),
            Err(_) => "invalid".to_string(),
        },
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn radial(n: u32, m: u32, rho: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..=(n - m) / 2 {
        let c = factorial(n - k)
            / (factorial(k) * factorial((n + m) / 2 - k) * factorial((n - m) / 2 - k));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * c * rho.powi((n - 2 * k) as i32);
    }
    sum
}

/// Evaluates the normalized polynomial `Z_j(rho, phi)` on the unit disk.
pub fn zernike_eval(j: usize, rho: f64, phi: f64) -> Result<f64> {
    let (n, m) = nm(j)?;
    let norm = if m == 0 { f64::from(n + 1).sqrt() } else { (2.0 * f64::from(n + 1)).sqrt() };
    let ang = match m.signum() {
        1 => (f64::from(m) * phi).cos(),
        -1 => (f64::from(-m) * phi).sin(),
        _ => 1.0,
    };
    Ok(norm * radial(n, m.unsigned_abs(), rho) * ang)
}

/// Coefficients `a_j` (radians) over indices `1..=coeffs.len()` on an aperture of radius `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZernikeSpectrum {
    pub coeffs: Vec<f64>,
    pub radius: f64,
}

impl ZernikeSpectrum {
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j.wrapping_sub(1)).copied().unwrap_or(0.0)
    }

    pub fn jmax(&self) -> usize {
        self.coeffs.len()
    }

    /// Writes `index,name,coefficient` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,name,coefficient")?;
        for (i, a) in self.coeffs.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, name(i + 1), a)?;
        }
        Ok(())
    }

    /// Samples `sum_j a_j Z_j(rho / R, phi)` inside the aperture, zero outside.
    pub fn reconstruct(&self, grid: &GridSpec) -> Result<PhaseScreen> {
        let fitter = ZernikeFitter::new(grid, self.radius, self.jmax())?;
        let phase = fitter.synthesize(&self.coeffs);
        Ok(PhaseScreen::new(*grid, phase, None, ScreenMethod::ZernikeSynthesis, self.radius))
    }
}

/// Least-squares projector onto `Z_1..Z_jmax` over the pixels of an aperture disk.
///
/// Holds the sampled basis and the Cholesky factor of its Gram matrix so repeated
/// decompositions on one grid are cheap.
#[derive(Debug, Clone)]
pub struct ZernikeFitter {
    grid: GridSpec,
    radius: f64,
    /// Pixel indices inside the aperture.
    pixels: Vec<usize>,
    /// `pixels.len() x jmax` basis samples.
    basis: DMatrix<f64>,
    gram: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
}

impl ZernikeFitter {
    pub fn new(grid: &GridSpec, radius: f64, jmax: usize) -> Result<Self> {
        if jmax == 0 || jmax > MAX_INDEX {
            return Err(Error::ZernikeIndex(jmax));
        }
        if !(radius > 0.0) || radius > grid.width() / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "aperture radius {radius:.3e} m is not inscribed in a {:.3e} m grid",
                grid.width()
            )));
        }
        let pixels: Vec<usize> =
            grid.points().filter(|(_, x, y)| x.hypot(*y) <= radius).map(|(i, _, _)| i).collect();
        let polar = grid.polar();
        let mut basis = DMatrix::zeros(pixels.len(), jmax);
        for (row, &p) in pixels.iter().enumerate() {
            let (rho, phi) = polar[p];
            for j in 1..=jmax {
                basis[(row, j - 1)] = zernike_eval(j, rho / radius, phi)?;
            }
        }
        let gram = basis.tr_mul(&basis).cholesky().ok_or_else(|| {
            Error::InvalidArgument("Zernike Gram matrix is singular on this grid".into())
        })?;
        Ok(Self { grid: *grid, radius, pixels, basis, gram })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn jmax(&self) -> usize {
        self.basis.ncols()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    /// Least-squares coefficients of a full-grid phase map.
    pub fn fit(&self, phase: &[f64]) -> Vec<f64> {
        let v = DVector::from_iterator(self.pixels.len(), self.pixels.iter().map(|&p| phase[p]));
        self.gram.solve(&self.basis.tr_mul(&v)).iter().copied().collect()
    }

    /// Full-grid phase map of the given coefficients (zero outside the aperture).
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        let k = coeffs.len().min(self.jmax());
        for (row, &p) in self.pixels.iter().enumerate() {
            out[p] = (0..k).map(|j| coeffs[j] * self.basis[(row, j)]).sum();
        }
        out
    }

    pub fn decompose(&self, screen: &PhaseScreen) -> Result<ZernikeSpectrum> {
        self.grid.ensure_same(&screen.grid)?;
        Ok(ZernikeSpectrum { coeffs: self.fit(&screen.phase), radius: self.radius })
    }
}

/// Least-squares decomposition of a screen over its aperture disk.
pub fn decompose(screen: &PhaseScreen, jmax: usize) -> Result<ZernikeSpectrum> {
    ZernikeFitter::new(&screen.grid, screen.aperture_radius, jmax)?.decompose(screen)
}

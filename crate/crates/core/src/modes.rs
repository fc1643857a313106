//! OAM logical modes, the angular (ANG) Fourier basis, and measurement helpers.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{overlap, overlap_unchecked, ComplexField};
use crate::grid::GridSpec;

/// Largest supported OAM charge magnitude.
pub const MAX_ELL: i32 = 16;

/// Relative power allowed outside the sampled window before a mode is rejected.
const CLIP_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Logical,
    Angular,
    /// Basis `alpha` of a complete MUB set rendered over the logical modes.
    Mub(usize),
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisKind::Logical => write!(f, "logical"),
            BasisKind::Angular => write!(f, "ang"),
            BasisKind::Mub(a) => write!(f, "mub{a}"),
        }
    }
}

/// An ordered set of `d` orthonormal fields plus the OAM charges they are built from.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub dimension: usize,
    pub kind: BasisKind,
    /// OAM charges of the underlying logical modes, in logical index order.
    pub ells: Vec<i32>,
    pub modes: Vec<ComplexField>,
    pub w0: f64,
}

impl ModeBasis {
    pub fn grid(&self) -> &GridSpec {
        self.modes[0].grid()
    }

    /// Applies the same linear map (e.g. free-space propagation) to every mode.
    pub fn map_modes(&self, mut f: impl FnMut(&ComplexField) -> Result<ComplexField>) -> Result<ModeBasis> {
        let modes = self.modes.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(ModeBasis { modes, ..self.clone() })
    }
}

/// Charges used for a `d`-dimensional logical basis: `±1..±d/2` for even `d`
/// (no `ell = 0`), `-(d-1)/2..=(d-1)/2` for odd `d`.
pub fn logical_ells(d: usize) -> Vec<i32> {
    let d = d as i32;
    if d % 2 == 0 {
        (-d / 2..=d / 2).filter(|&l| l != 0).collect()
    } else {
        (-(d - 1) / 2..=(d - 1) / 2).collect()
    }
}

/// Position of charge `ell` in the angular-basis Fourier sum:
/// `j = d/2 + (ell - 1) H(ell) + ell H(-ell)`. Undefined for `ell = 0`.
pub fn ang_index(ell: i32, d: usize) -> Option<usize> {
    let half = (d / 2) as i32;
    let j = match ell.signum() {
        1 => half + ell - 1,
        -1 => half + ell,
        _ => return None,
    };
    (0..d as i32).contains(&j).then_some(j as usize)
}

/// Fraction of an LG(p=0, ell) mode's power beyond radius `r`.
///
/// `2 rho^2 / w0^2` is Gamma(|ell|+1)-distributed under the mode intensity, so the
/// tail is `exp(-u) * sum_{k<=|ell|} u^k / k!`.
pub fn lg_power_beyond(ell: i32, w0: f64, r: f64) -> f64 {
    let u = 2.0 * r * r / (w0 * w0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=ell.unsigned_abs() {
        term *= u / k as f64;
        sum += term;
    }
    (-u).exp() * sum
}

/// Normalized Laguerre-Gauss mode with radial index 0:
/// `(sqrt(2) rho / w0)^|ell| exp(-rho^2 / w0^2) exp(i ell phi)`.
pub fn make_oam_mode(ell: i32, w0: f64, grid: &GridSpec) -> Result<ComplexField> {
    if ell.abs() > MAX_ELL {
        return Err(Error::InvalidArgument(format!("|ell| = {} exceeds {MAX_ELL}", ell.abs())));
    }
    if !(w0.is_finite() && w0 > 0.0) {
        return Err(Error::InvalidArgument(format!("waist {w0} must be > 0")));
    }
    let clipped = lg_power_beyond(ell, w0, grid.width() / 2.0);
    if w0 * (1.0 + ell.abs() as f64).sqrt() >= grid.width() / 4.0 || clipped > CLIP_TOLERANCE {
        return Err(Error::ModeClipped { ell, clipped });
    }
    let m = ell.unsigned_abs() as i32;
    let field = ComplexField::from_fn(*grid, |x, y| {
        let rho = x.hypot(y);
        let amp = (2f64.sqrt() * rho / w0).powi(m) * (-(rho * rho) / (w0 * w0)).exp();
        // (x + i y)^ell / rho^|ell| avoids the atan2 branch at the origin
        let winding = if m == 0 || rho == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            let u = Complex64::new(x / rho, if ell > 0 { y / rho } else { -y / rho });
            u.powi(m)
        };
        winding * amp
    });
    field.normalized()
}

/// Logical (pure OAM) basis of dimension `d`.
pub fn make_logical_basis(d: usize, w0: f64, grid: &GridSpec) -> Result<ModeBasis> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension {d} must be >= 2")));
    }
    let ells = logical_ells(d);
    let modes = ells.iter().map(|&l| make_oam_mode(l, w0, grid)).collect::<Result<Vec<_>>>()?;
    Ok(ModeBasis { dimension: d, kind: BasisKind::Logical, ells, modes, w0 })
}

/// Renders the superposition `sum_j coeffs[j] |ell_j>` over a logical basis.
pub fn superpose(logical: &ModeBasis, coeffs: &[Complex64]) -> Result<ComplexField> {
    if coeffs.len() != logical.modes.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for a {}-mode basis",
            coeffs.len(),
            logical.modes.len()
        )));
    }
    let mut out = ComplexField::zeros(*logical.grid());
    for (c, m) in coeffs.iter().zip(&logical.modes) {
        out.add_scaled(*c, m)?;
    }
    Ok(out)
}

/// Discrete-Fourier coefficients of angular mode `k`, indexed by logical (ascending `ell`) order.
pub fn ang_coefficients(d: usize, k: usize) -> Result<Vec<Complex64>> {
    if d % 2 != 0 || !(2..=16).contains(&d) {
        return Err(Error::InvalidArgument(format!(
            "angular basis needs an even dimension in 2..=16, got {d}"
        )));
    }
    let norm = 1.0 / (d as f64).sqrt();
    logical_ells(d)
        .iter()
        .map(|&l| {
            let j = ang_index(l, d).expect("even-d charges are nonzero");
            Ok(Complex64::from_polar(norm, 2.0 * PI * (j * k) as f64 / d as f64))
        })
        .collect()
}

/// Angular basis: the quantum Fourier transform of the logical OAM modes.
pub fn make_ang_basis(d: usize, w0: f64, grid: &GridSpec) -> Result<ModeBasis> {
    // validates d before any mode is built
    ang_coefficients(d, 0)?;
    let logical = make_logical_basis(d, w0, grid)?;
    let modes = (0..d)
        .map(|k| Ok(superpose(&logical, &ang_coefficients(d, k)?)?.phase_fixed()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeBasis { dimension: d, kind: BasisKind::Angular, ells: logical.ells, modes, w0 })
}

/// Single-mode-fiber coupling efficiency `|<G_fiber|field>|^2`.
pub fn fiber_coupling(field: &ComplexField, fiber_w0: f64) -> Result<f64> {
    let fiber = make_oam_mode(0, fiber_w0, field.grid())?;
    Ok(overlap(&fiber, field)?.norm_sqr())
}

/// Unnormalized detection probabilities `|<mode_j|field>|^2`.
pub fn projective_probability(field: &ComplexField, basis: &ModeBasis) -> Result<Vec<f64>> {
    basis.grid().ensure_same(field.grid())?;
    let da = field.grid().pitch * field.grid().pitch;
    Ok(basis
        .modes
        .iter()
        .map(|m| (overlap_unchecked(m.samples(), field.samples()) * da).norm_sqr())
        .collect())
}

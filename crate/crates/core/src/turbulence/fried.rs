//! Fried-parameter estimation from beam wander.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::turbulence::screen::PhaseScreen;

/// Minimum number of centroid samples accepted by [`estimate_fried`].
pub const MIN_SAMPLES: usize = 100;

/// Estimates `r0 = 0.98 lambda / beta` from a time series of beam centroids.
///
/// `beta = s / L` where `s` is the mean distance of the centroids from their
/// average position. A perfectly still beam gives [`Error::InfiniteR0`].
pub fn estimate_fried(centroids: &[(f64, f64)], length: f64, wavelength: f64) -> Result<f64> {
    if centroids.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} centroid samples, got {}",
            centroids.len()
        )));
    }
    if !(length > 0.0 && wavelength > 0.0) {
        return Err(Error::InvalidArgument("channel length and wavelength must be > 0".into()));
    }
    let n = centroids.len() as f64;
    let mx = centroids.iter().map(|c| c.0).sum::<f64>() / n;
    let my = centroids.iter().map(|c| c.1).sum::<f64>() / n;
    let mean_disp = centroids.iter().map(|c| (c.0 - mx).hypot(c.1 - my)).sum::<f64>() / n;
    // identical samples can leave rounding-level residuals around their mean
    let floor = 16.0 * f64::EPSILON * mx.abs().max(my.abs());
    if mean_disp <= floor {
        return Err(Error::InfiniteR0);
    }
    let beta = mean_disp / length;
    Ok(0.98 * wavelength / beta)
}

/// Centroid displacement of a collimated Gaussian probe (1/e^2 intensity radius
/// `probe_waist`, centered on the grid) after free propagation over `length`
/// behind a thin screen.
///
/// Uses the paraxial centroid theorem: the centroid moves along the
/// intensity-weighted mean wavevector, so the displacement is
/// `lambda L / (2 pi) <grad phi>_I`.
pub fn probe_centroid(screen: &PhaseScreen, probe_waist: f64, length: f64) -> (f64, f64) {
    let g = screen.grid;
    let n = g.n;
    let p = &screen.phase;
    let (mut sx, mut sy, mut si) = (0.0, 0.0, 0.0);
    for iy in 1..n - 1 {
        let y = g.coord(iy);
        for ix in 1..n - 1 {
            let x = g.coord(ix);
            let w = (-2.0 * (x * x + y * y) / (probe_waist * probe_waist)).exp();
            if w < 1e-12 {
                continue;
            }
            let k = iy * n + ix;
            sx += w * (p[k + 1] - p[k - 1]);
            sy += w * (p[k + n] - p[k - n]);
            si += w;
        }
    }
    let scale = g.wavelength * length / (2.0 * PI) / (2.0 * g.pitch * si);
    (sx * scale, sy * scale)
}

/// Probe waist, as a fraction of r0, for which the wander estimator is unbiased
/// on a Kolmogorov screen.
///
/// For a Gaussian probe of waist `w` the one-axis tilt variance is
/// `0.023 * 2 pi^3 Gamma(1/6) (lambda / 2 pi)^2 r0^(-5/3) (pi w)^(-1/3)`, so the estimate
/// scales as `r0_est / r0 = (w / (KAPPA r0))^(1/6)`.
pub const UNBIASED_PROBE_FRACTION: f64 = 0.011_326_6;

/// Expected estimator bias `r0_est / r0` for a probe of waist `w`.
pub fn expected_bias(probe_waist: f64, r0: f64) -> f64 {
    (probe_waist / (UNBIASED_PROBE_FRACTION * r0)).powf(1.0 / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::turbulence::screen::ScreenMethod;

    fn ring(n: usize, radius: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                (radius * a.cos(), radius * a.sin())
            })
            .collect()
    }

    #[test]
    fn closed_form_on_ring() {
        let c = ring(200, 2e-4);
        let r0 = estimate_fried(&c, 1.0, 800e-9).unwrap();
        assert!((r0 - 0.98 * 800e-9 / 2e-4).abs() < 1e-12);
    }

    #[test]
    fn still_beam_is_infinite() {
        let c = vec![(1e-3, -2e-3); 150];
        assert!(matches!(estimate_fried(&c, 1.0, 800e-9), Err(Error::InfiniteR0)));
    }

    #[test]
    fn too_few_samples() {
        assert!(estimate_fried(&ring(99, 1e-4), 1.0, 800e-9).is_err());
        assert!(estimate_fried(&ring(100, 1e-4), 0.0, 800e-9).is_err());
    }

    #[test]
    fn tilt_moves_probe_by_angle_times_length() {
        let g = GridSpec::new(128, 5e-6, 800e-9).unwrap();
        let theta = 3e-5;
        let k = 2.0 * PI / g.wavelength;
        let phase: Vec<f64> = g.points().map(|(_, x, _)| k * theta * x).collect();
        let s = PhaseScreen::new(g, phase, None, ScreenMethod::ZernikeSynthesis, 2e-4);
        let (dx, dy) = probe_centroid(&s, 5e-5, 0.5);
        assert!((dx / (theta * 0.5) - 1.0).abs() < 1e-9);
        assert!(dy.abs() < 1e-15);
    }

    #[test]
    fn bias_law_is_unity_at_reference() {
        assert!((expected_bias(UNBIASED_PROBE_FRACTION * 2e-3, 2e-3) - 1.0).abs() < 1e-12);
        assert!((expected_bias(2.0 * UNBIASED_PROBE_FRACTION, 1.0) - 2f64.powf(1.0 / 6.0)).abs() < 1e-12);
    }
}

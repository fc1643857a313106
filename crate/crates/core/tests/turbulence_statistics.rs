//! Ensemble statistics of the screen generators. Seeds are fixed, so every
//! tolerance below is checked against one deterministic draw.

use turbqkd_core::turbulence::{gen_screen_fft, gen_screen_zernike_with, PhaseScreen, TurbulenceSeries, ZernikeFitter};
use turbqkd_core::GridSpec;

fn grid() -> GridSpec {
    GridSpec::new(128, 1e-3 / 24.0, 633e-9).unwrap()
}

fn aperture_variance(screen: &PhaseScreen, pixels: &[usize]) -> f64 {
    let n = pixels.len() as f64;
    let mean = pixels.iter().map(|&i| screen.phase[i]).sum::<f64>() / n;
    pixels.iter().map(|&i| (screen.phase[i] - mean).powi(2)).sum::<f64>() / n
}

#[test]
fn halving_r0_scales_variance_by_two_to_the_five_thirds() {
    let g = grid();
    let radius = 1e-3;
    let pixels: Vec<usize> = g.points().filter(|(_, x, y)| x.hypot(*y) <= radius).map(|(i, _, _)| i).collect();
    let screens = 400;
    let mean_var = |r0: f64, seed0: u64| {
        (0..screens)
            .map(|s| aperture_variance(&gen_screen_fft(r0, &g, radius, seed0 + s).unwrap(), &pixels))
            .sum::<f64>()
            / screens as f64
    };
    // independent draws for the two strengths
    let ratio = mean_var(0.6e-3, 10_000) / mean_var(1.2e-3, 20_000);
    let expected = 2f64.powf(5.0 / 3.0);
    assert!((ratio / expected - 1.0).abs() < 0.10, "variance ratio {ratio:.3}, expected {expected:.3}");
}

#[test]
fn zernike_sigmas_are_recovered_over_1000_draws() {
    let g = grid();
    let fitter = ZernikeFitter::new(&g, 1.2e-3, 10).unwrap();
    let sigma = [0.9, 0.8, 0.3, 0.25, 0.3, 0.15, 0.12, 0.12, 0.15];
    let draws = 1000;
    let mut second = vec![0.0; sigma.len()];
    for s in 0..draws {
        let screen = gen_screen_zernike_with(&fitter, &sigma, s).unwrap();
        let coeffs = fitter.fit(&screen.phase);
        for (acc, c) in second.iter_mut().zip(&coeffs[1..]) {
            *acc += c * c / draws as f64;
        }
    }
    for (j, (m2, s)) in second.iter().zip(&sigma).enumerate() {
        let est = m2.sqrt();
        assert!((est / s - 1.0).abs() < 0.05, "index {}: sigma {est:.4} vs {s}", j + 2);
    }
}

#[test]
fn frozen_flow_decorrelates_with_displacement() {
    let g = grid();
    let radius = 1.2e-3;
    let pixels: Vec<usize> = g.points().filter(|(_, x, y)| x.hypot(*y) <= radius).map(|(i, _, _)| i).collect();
    let shifts_px = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let seeds = 40u64;
    let dt = 1e-3;
    let correlation: Vec<f64> = shifts_px
        .iter()
        .map(|&px| {
            let wind = px * g.pitch / dt;
            let mut sum = 0.0;
            for seed in 0..seeds {
                let mut series = TurbulenceSeries::new(g, 1e-3, wind, dt, radius, 500 + seed).unwrap();
                let a = series.advance();
                let b = series.advance();
                let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
                for &i in &pixels {
                    ab += a.phase[i] * b.phase[i];
                    aa += a.phase[i] * a.phase[i];
                    bb += b.phase[i] * b.phase[i];
                }
                sum += ab / (aa * bb).sqrt();
            }
            sum / seeds as f64
        })
        .collect();
    assert!(correlation.windows(2).all(|w| w[1] < w[0]), "{correlation:?}");
    assert!(correlation[0] > 0.95);
}

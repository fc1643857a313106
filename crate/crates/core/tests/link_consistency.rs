use turbqkd_core::link::{AoHardware, AoSettings, Link};
use turbqkd_core::propagation::{run_channel, ChannelSpec};
use turbqkd_core::turbulence::{gen_screen_fft, PhaseScreen};
use turbqkd_core::{make_oam_mode, overlap, ComplexField, GridSpec};

const W0: f64 = 1e-3;

fn grid() -> GridSpec {
    GridSpec::new(256, W0 / 24.0, 633e-9).unwrap()
}

fn channel() -> ChannelSpec {
    ChannelSpec::single_cell(0.5, 0.3, 0.5, Some(8e-3))
}

/// Propagating each mode field by field and projecting by hand must agree with
/// the link's cached transfer-matrix path, with and without a mirror correction.
#[test]
fn field_path_matches_transfer_matrix() {
    let g = grid();
    let spec = channel();
    let link = Link::new(&g, W0, &spec, 2, None).unwrap();
    let screen = gen_screen_fft(2.0 * W0 / 1.7, &g, 3.5e-3, 77).unwrap();
    let flat = PhaseScreen::flat(g, 3.5e-3);
    let ells = [-2, -1, 0, 1, 2];
    let correction: Vec<f64> = g.points().map(|(_, x, y)| 300.0 * x - 200.0 * y + 4e4 * x * y).collect();

    let received = link.received(&ells, &[&screen]).unwrap();
    for corr in [None, Some(correction.as_slice())] {
        let t = link.transfer(&ells, &received, corr).unwrap();
        for (j, &lj) in ells.iter().enumerate() {
            let mut out = run_channel(&make_oam_mode(lj, W0, &g).unwrap(), &spec.without_aperture(), &[&screen]).unwrap();
            if let Some(c) = corr {
                out.apply_phase(c, -1.0);
            }
            out.apply_aperture(8e-3);
            for (i, &li) in ells.iter().enumerate() {
                let rx = run_channel(&make_oam_mode(li, W0, &g).unwrap(), &spec.without_aperture(), &[&flat]).unwrap();
                let direct = overlap(&rx, &out).unwrap();
                assert!((direct - t.t[(i, j)]).norm() < 1e-9, "({li}, {lj}): {direct} vs {}", t.t[(i, j)]);
            }
        }
    }
}

#[test]
fn static_loop_residual_is_non_increasing_after_iteration_five() {
    let g = grid();
    let settings = AoSettings::default();
    let hw = AoHardware::new(&g, &settings).unwrap();
    let radius = settings.pupil_diameter / 2.0;
    for seed in 0..3 {
        let screen = gen_screen_fft(2.0 * W0 / 1.7, &g, radius, 900 + seed).unwrap();
        let mut reference = ComplexField::plane_wave(g);
        reference.apply_phase(&screen.phase, 1.0);
        let mut state = hw.new_loop(seed).unwrap();
        for _ in 0..50 {
            state.step_reference(&reference).unwrap();
        }
        let h = &state.residual_history;
        assert!(h[5..].windows(2).all(|w| w[1] <= w[0] + 1e-12), "seed {seed}: {h:?}");
        assert!(h[49] < 0.5 * h[0], "seed {seed}: {} -> {}", h[0], h[49]);
    }
}

#[test]
fn flat_wavefront_keeps_the_mirror_flat() {
    let g = grid();
    let hw = AoHardware::new(&g, &AoSettings::default()).unwrap();
    let mut state = hw.new_loop(0).unwrap();
    let reference = ComplexField::plane_wave(g);
    for _ in 0..10 {
        let report = state.step_reference(&reference).unwrap();
        assert!(report.residual < 1e-12);
    }
    assert!(state.correction().iter().all(|v| v.abs() < 1e-12));
}

//! The experiments behind each CLI subcommand.
//!
//! Each `run_*` function computes results in memory; each `cmd_*` function runs
//! it and persists CSV plus a JSON summary. Trials fan out over the rayon pool
//! and are collected in index order, so every reduction is order-deterministic.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::GridSpec;
use crate::harness::config::RunConfig;
use crate::harness::output::{ArtifactSink, Csv};
use crate::harness::seeds::{derive_seed, Stream};
use crate::link::{run_trial, Link, TransferMatrix, TurbulenceSettings};
use crate::modes::BasisKind;
use crate::qkd::{qder_threshold, CrosstalkMatrix, Estimate, QkdReport};
use crate::quantum::{
    build_mubs, process_fidelity, reconstruct_chi, DetectionAccumulator, GellMannBasis, ProcessMatrix,
    ProbabilityTable,
};
use crate::turbulence::fried::{estimate_fried, expected_bias, probe_centroid};
use crate::turbulence::zernike::name as zernike_name;
use crate::turbulence::{gen_screen_fft, gen_screen_zernike_with, PhaseScreen, TurbulenceSeries, ZernikeFitter};

fn link_for(cfg: &RunConfig, max_ell: i32, ao: bool) -> Result<Link> {
    let grid = cfg.grid_spec()?;
    Link::new(&grid, cfg.w0, &cfg.channel.spec(), max_ell, ao.then_some(&cfg.ao.hardware))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Gaussian coupling time series

/// One frame of the coupling time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingSample {
    pub time: f64,
    pub ao_on: bool,
    /// Residual RMS phase of the (corrected) reference over the pupil (rad).
    pub residual: f64,
    /// Single-mode-fiber coupling of the Gaussian beam.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRun {
    pub run: usize,
    pub seed: u64,
    pub mean_off: f64,
    pub mean_on: f64,
    pub mean_residual_off: f64,
    pub mean_residual_on: f64,
    pub clipped: usize,
    #[serde(skip)]
    pub samples: Vec<CouplingSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub greenwood_frequency: Option<f64>,
    pub loop_rate: f64,
    pub under_sampled: bool,
    pub mean_off: Estimate,
    pub mean_on: Estimate,
    pub runs: Vec<CouplingRun>,
}

/// Simulates `duration` seconds of Gaussian transmission, AO off until
/// `ao_on_at`, for each configured run.
pub fn run_coupling(cfg: &RunConfig) -> Result<CouplingSummary> {
    cfg.validate()?;
    let link = link_for(cfg, 0, true)?;
    let turb = cfg.turbulence_settings();
    let c = &cfg.coupling;
    let rate = cfg.ao.hardware.control.loop_rate;
    let frames = (c.duration * rate).round() as usize;
    let on_frame = (c.ao_on_at * rate).round() as usize;
    let settle_frames = (c.settle_time * rate).round() as usize;
    let runs = (0..c.runs)
        .into_par_iter()
        .map(|run| {
            let seed = derive_seed(cfg.seed, Stream::Coupling, run as u64);
            coupling_run(&link, &turb, rate, frames, on_frame, settle_frames, run, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let offs: Vec<f64> = runs.iter().map(|r| r.mean_off).collect();
    let ons: Vec<f64> = runs.iter().map(|r| r.mean_on).collect();
    let greenwood_frequency = turb.greenwood_frequency();
    Ok(CouplingSummary {
        greenwood_frequency,
        loop_rate: rate,
        under_sampled: greenwood_frequency.is_some_and(|f| f > rate / 2.0),
        mean_off: Estimate::from_samples(&offs),
        mean_on: Estimate::from_samples(&ons),
        runs,
    })
}

#[allow(clippy::too_many_arguments)]
fn coupling_run(
    link: &Link,
    turb: &TurbulenceSettings,
    rate: f64,
    frames: usize,
    on_frame: usize,
    settle_frames: usize,
    run: usize,
    seed: u64,
) -> Result<CouplingRun> {
    let grid = *link.grid();
    let ao = link.ao.as_ref().expect("coupling link carries AO");
    let radius = ao.geom.pupil_diameter() / 2.0;
    let mut series = match turb.r0 {
        Some(r0) => Some(TurbulenceSeries::with_constant(
            grid,
            r0,
            turb.wind,
            1.0 / rate,
            radius,
            seed,
            turb.greenwood_constant,
        )?),
        None => None,
    };
    let flat = PhaseScreen::flat(grid, radius);
    let mut state = ao.new_loop(seed ^ 0x5eed_a0a0)?;
    let zero = vec![0.0; grid.len()];
    let mut samples = Vec::with_capacity(frames);
    let mut clipped = 0;
    for k in 0..frames {
        let screen = match &mut series {
            Some(s) => s.advance(),
            None => flat.clone(),
        };
        let screens = vec![&screen; link.screen_count()];
        let (rx, reference) = link.received_and_reference(&[0], &screens)?;
        let ao_on = k >= on_frame;
        // one frame of latency: this frame sees the mirror shape computed from the previous one
        let correction = if ao_on { state.correction() } else { zero.clone() };
        let residual = if ao_on {
            let report = state.step_reference(&reference)?;
            clipped += report.clipped;
            report.residual
        } else {
            state.residual_rms(&reference)
        };
        let t = link.transfer(&[0], &rx, ao_on.then_some(correction.as_slice()))?;
        samples.push(CouplingSample { time: k as f64 / rate, ao_on, residual, coupling: t.gaussian_coupling()? });
    }
    let pick = |f: &dyn Fn(&(usize, &CouplingSample)) -> bool, v: fn(&CouplingSample) -> f64| -> f64 {
        mean(&samples.iter().enumerate().filter(|p| f(p)).map(|(_, s)| v(s)).collect::<Vec<_>>())
    };
    let off = |p: &(usize, &CouplingSample)| p.0 < on_frame;
    let on = |p: &(usize, &CouplingSample)| p.0 >= on_frame + settle_frames;
    Ok(CouplingRun {
        run,
        seed,
        mean_off: pick(&off, |s| s.coupling),
        mean_on: pick(&on, |s| s.coupling),
        mean_residual_off: pick(&off, |s| s.residual),
        mean_residual_on: pick(&on, |s| s.residual),
        clipped,
        samples,
    })
}

pub fn cmd_coupling(cfg: &RunConfig) -> Result<CouplingSummary> {
    let summary = run_coupling(cfg)?;
    let mut sink = ArtifactSink::create(&cfg.out_dir)?;
    let mut csv = Csv::new(&["run", "time", "ao_on", "residual", "coupling"]);
    for r in &summary.runs {
        for s in r.samples.iter().step_by(cfg.coupling.decimate) {
            csv.row(&[&r.run, &s.time, &u8::from(s.ao_on), &s.residual, &s.coupling]);
        }
    }
    sink.write_csv("coupling.csv", &csv)?;
    sink.write_summary("coupling", cfg, &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Trial ensembles shared by the tomography and QKD commands

/// Uncorrected and corrected transfer matrices for `trials` independent realizations.
fn run_ensemble(cfg: &RunConfig, stream: Stream, max_ell: i32) -> Result<Vec<(TransferMatrix, TransferMatrix)>> {
    let link = link_for(cfg, max_ell, true)?;
    let turb = cfg.turbulence_settings();
    let ells = link.ells().to_vec();
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.seed, stream, i as u64);
            let out = run_trial(&link, &turb, cfg.ao.schedule, &ells, seed)?;
            let corrected = out.corrected.expect("link carries AO");
            Ok((out.uncorrected, corrected))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Process tomography

/// The four tomography conditions: turbulence on/off crossed with AO on/off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Condition {
    pub turbulence: bool,
    pub ao: bool,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition { turbulence: false, ao: false },
        Condition { turbulence: false, ao: true },
        Condition { turbulence: true, ao: false },
        Condition { turbulence: true, ao: true },
    ];

    pub fn label(&self) -> String {
        format!(
            "{}-ao-{}",
            if self.turbulence { "turbulence" } else { "still" },
            if self.ao { "on" } else { "off" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyResult {
    pub dimension: usize,
    pub condition: Condition,
    /// Realizations contributing.
    pub samples: usize,
    /// Fidelity of the reconstructed channel with the identity. For averaged
    /// acquisition this is a single value (zero standard error).
    pub fidelity: Estimate,
    #[serde(skip)]
    pub chi: ProcessMatrix,
    #[serde(skip)]
    pub table: ProbabilityTable,
}

fn tomography_of(
    d: usize,
    condition: Condition,
    matrices: &[&TransferMatrix],
    averaged: bool,
) -> Result<TomographyResult> {
    let mubs = build_mubs(d)?;
    let gm = GellMannBasis::new(d)?;
    let identity = ProcessMatrix::identity(d);
    let mut acc = DetectionAccumulator::new(&mubs);
    let mut fids = Vec::new();
    let mut last = None;
    for t in matrices {
        let logical = t.logical(d)?;
        if averaged {
            acc.add_transfer(&mubs, &logical)?;
        } else {
            let mut single = DetectionAccumulator::new(&mubs);
            single.add_transfer(&mubs, &logical)?;
            let table = single.table()?;
            let chi = reconstruct_chi(&table, &mubs, &gm)?;
            fids.push(process_fidelity(&chi, &identity)?);
            last = Some((chi, table));
        }
    }
    let (chi, table, fidelity) = if averaged {
        let table = acc.table()?;
        let chi = reconstruct_chi(&table, &mubs, &gm)?;
        let f = process_fidelity(&chi, &identity)?;
        (chi, table, Estimate { mean: f, stderr: 0.0 })
    } else {
        let (chi, table) = last.ok_or_else(|| Error::InvalidArgument("no realizations".into()))?;
        (chi, table, Estimate::from_samples(&fids))
    };
    Ok(TomographyResult { dimension: d, condition, samples: matrices.len(), fidelity, chi, table })
}

/// Runs MUB process tomography for every configured dimension and condition.
///
/// One ensemble of realizations serves every dimension. The still channel is
/// deterministic, so a single realization represents it.
pub fn run_tomography(cfg: &RunConfig) -> Result<Vec<TomographyResult>> {
    cfg.validate()?;
    let dims = &cfg.tomography.dimensions;
    let max_ell = dims.iter().map(|d| (*d / 2) as i32).max().unwrap_or(1).max(1);
    let turbulent = if cfg.r0().is_some() { run_ensemble(cfg, Stream::Tomography, max_ell)? } else { Vec::new() };
    let still = {
        let mut quiet = cfg.clone();
        quiet.turbulence.d_over_r0 = 0.0;
        quiet.turbulence.r0 = None;
        quiet.trials = 1;
        run_ensemble(&quiet, Stream::Tomography, max_ell)?
    };
    let mut out = Vec::new();
    for &d in dims {
        for condition in Condition::ALL {
            let source = if condition.turbulence { &turbulent } else { &still };
            if source.is_empty() {
                continue;
            }
            let matrices: Vec<&TransferMatrix> =
                source.iter().map(|(off, on)| if condition.ao { on } else { off }).collect();
            out.push(tomography_of(d, condition, &matrices, cfg.tomography.averaged)?);
        }
    }
    Ok(out)
}

pub fn cmd_tomography(cfg: &RunConfig) -> Result<Vec<TomographyResult>> {
    let results = run_tomography(cfg)?;
    let mut sink = ArtifactSink::create(&cfg.out_dir)?;
    let mut csv = Csv::new(&["dimension", "condition", "turbulence", "ao", "samples", "fidelity", "stderr"]);
    for r in &results {
        let label = r.condition.label();
        csv.row(&[
            &r.dimension,
            &label,
            &u8::from(r.condition.turbulence),
            &u8::from(r.condition.ao),
            &r.samples,
            &r.fidelity.mean,
            &r.fidelity.stderr,
        ]);
        let stem = format!("d{}_{label}", r.dimension);
        let mut chi = Vec::new();
        r.chi.write_csv(&mut chi)?;
        sink.write_bytes(&format!("chi_{stem}.csv"), &chi)?;
        let mut json = r.chi.to_json()?;
        json.push('\n');
        sink.write_bytes(&format!("chi_{stem}.json"), json.as_bytes())?;
        let mut table = Vec::new();
        r.table.write_csv(&mut table)?;
        sink.write_bytes(&format!("probabilities_{stem}.csv"), &table)?;
    }
    sink.write_csv("tomography.csv", &csv)?;
    sink.write_summary("tomography", cfg, &results)?;
    Ok(results)
}

// ---------------------------------------------------------------------------
// QDER sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QkdRow {
    pub dimension: usize,
    pub basis: BasisKind,
    pub off: Estimate,
    pub on: Estimate,
    pub threshold: f64,
    #[serde(skip)]
    pub crosstalk_off: CrosstalkMatrix,
    #[serde(skip)]
    pub crosstalk_on: CrosstalkMatrix,
}

impl QkdRow {
    pub fn secure_off(&self) -> bool {
        self.off.mean < self.threshold
    }

    pub fn secure_on(&self) -> bool {
        self.on.mean < self.threshold
    }

    /// QDER reduction achieved by correction.
    pub fn improvement(&self) -> f64 {
        self.off.mean - self.on.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QkdSweep {
    pub trials: usize,
    pub rows: Vec<QkdRow>,
    pub reports_off: Vec<QkdReport>,
    pub reports_on: Vec<QkdReport>,
    /// Mean QDER reduction over every (dimension, basis) case.
    pub mean_improvement: f64,
    /// Mean residual phase is not tracked per trial here; see the coupling command.
    pub greenwood_frequency: Option<f64>,
}

impl QkdSweep {
    pub fn row(&self, d: usize, basis: BasisKind) -> Option<&QkdRow> {
        self.rows.iter().find(|r| r.dimension == d && r.basis == basis)
    }
}

/// Crosstalk and QDER for every configured dimension, both bases, AO off and on.
pub fn run_qkd(cfg: &RunConfig) -> Result<QkdSweep> {
    cfg.validate()?;
    let dims = &cfg.qkd.dimensions;
    let max_ell = dims.iter().map(|d| (*d / 2) as i32).max().unwrap_or(1);
    let ensemble = run_ensemble(cfg, Stream::Qkd, max_ell)?;
    let mut rows = Vec::new();
    let (mut reports_off, mut reports_on) = (Vec::new(), Vec::new());
    for &d in dims {
        let threshold = qder_threshold(d)?;
        let mut per_basis = Vec::new();
        for basis in [BasisKind::Logical, BasisKind::Angular] {
            let raw = |on: bool| -> Result<Vec<Vec<f64>>> {
                ensemble.iter().map(|(a, b)| if on { b } else { a }.crosstalk_raw(d, basis)).collect()
            };
            let crosstalk_off = CrosstalkMatrix::from_trials(d, basis, &raw(false)?)?;
            let crosstalk_on = CrosstalkMatrix::from_trials(d, basis, &raw(true)?)?;
            let row = QkdRow {
                dimension: d,
                basis,
                off: crosstalk_off.qder_estimate(),
                on: crosstalk_on.qder_estimate(),
                threshold,
                crosstalk_off,
                crosstalk_on,
            };
            per_basis.push((row.off, row.on));
            rows.push(row);
        }
        reports_off.push(QkdReport::new(d, per_basis[0].0, Some(per_basis[1].0))?);
        reports_on.push(QkdReport::new(d, per_basis[0].1, Some(per_basis[1].1))?);
    }
    let mean_improvement = mean(&rows.iter().map(QkdRow::improvement).collect::<Vec<_>>());
    Ok(QkdSweep {
        trials: cfg.trials,
        rows,
        reports_off,
        reports_on,
        mean_improvement,
        greenwood_frequency: cfg.turbulence_settings().greenwood_frequency(),
    })
}

pub fn cmd_qkd(cfg: &RunConfig) -> Result<QkdSweep> {
    let sweep = run_qkd(cfg)?;
    let mut sink = ArtifactSink::create(&cfg.out_dir)?;
    let mut csv = Csv::new(&[
        "dimension",
        "basis",
        "qder_off",
        "stderr_off",
        "qder_on",
        "stderr_on",
        "boundary",
        "secure_off",
        "secure_on",
    ]);
    for r in &sweep.rows {
        csv.row(&[
            &r.dimension,
            &r.basis,
            &r.off.mean,
            &r.off.stderr,
            &r.on.mean,
            &r.on.stderr,
            &r.threshold,
            &u8::from(r.secure_off()),
            &u8::from(r.secure_on()),
        ]);
        for (tag, m) in [("off", &r.crosstalk_off), ("on", &r.crosstalk_on)] {
            let mut grid = Vec::new();
            m.write_grid_csv(&mut grid)?;
            sink.write_bytes(&format!("crosstalk_d{}_{}_{tag}.csv", r.dimension, r.basis), &grid)?;
        }
    }
    sink.write_csv("qkd.csv", &csv)?;
    let mut rates = Csv::new(&["dimension", "ao", "average_qder", "key_rate", "boundary", "secure"]);
    for (tag, reports) in [("off", &sweep.reports_off), ("on", &sweep.reports_on)] {
        for q in reports {
            rates.row(&[&q.dimension, &tag, &q.average, &q.key_rate, &q.threshold, &u8::from(q.secure)]);
        }
    }
    sink.write_csv("key_rate.csv", &rates)?;
    sink.write_summary("qkd", cfg, &sweep)?;
    Ok(sweep)
}

// ---------------------------------------------------------------------------
// Zernike statistics

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZernikeStat {
    pub index: usize,
    pub name: String,
    /// Generator input (zero beyond the configured list).
    pub sigma_in: f64,
    pub sigma_est: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSetting {
    pub setting: usize,
    pub d_over_r0: f64,
    /// Standard deviation of each coefficient, `j = 2..=jmax`.
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZernikeStats {
    pub screens: usize,
    pub recovery: Vec<ZernikeStat>,
    pub sweep: Vec<SweepSetting>,
}

fn coefficient_sigmas(fitter: &ZernikeFitter, screens: &[PhaseScreen]) -> Result<Vec<f64>> {
    let jmax = fitter.jmax();
    let spectra = screens.iter().map(|s| fitter.decompose(s)).collect::<Result<Vec<_>>>()?;
    Ok((2..=jmax)
        .map(|j| {
            let xs: Vec<f64> = spectra.iter().map(|s| s.coeff(j)).collect();
            let m = mean(&xs);
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
        })
        .collect())
}

/// Recovers generator statistics and sweeps Kolmogorov screens of several strengths.
pub fn run_zernike_stats(cfg: &RunConfig) -> Result<ZernikeStats> {
    cfg.validate()?;
    let z = &cfg.zernike;
    let grid = cfg.grid_spec()?;
    let fitter = ZernikeFitter::new(&grid, z.radius, z.jmax)?;
    let screens = (0..z.screens)
        .into_par_iter()
        .map(|i| gen_screen_zernike_with(&fitter, &z.sigma, derive_seed(cfg.seed, Stream::Zernike, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let est = coefficient_sigmas(&fitter, &screens)?;
    drop(screens);
    let recovery = (2..=z.jmax)
        .map(|j| ZernikeStat {
            index: j,
            name: zernike_name(j),
            sigma_in: z.sigma.get(j - 2).copied().unwrap_or(0.0),
            sigma_est: est[j - 2],
        })
        .collect();
    let mut sweep = Vec::new();
    for (setting, &dr) in z.sweep_d_over_r0.iter().enumerate() {
        let base = (setting as u64 + 1) << 32;
        let screens = (0..z.sweep_screens)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(cfg.seed, Stream::Zernike, base + i as u64);
                if dr > 0.0 {
                    gen_screen_fft(2.0 * cfg.w0 / dr, &grid, z.radius, seed)
                } else {
                    Ok(PhaseScreen::flat(grid, z.radius))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        sweep.push(SweepSetting { setting, d_over_r0: dr, sigma: coefficient_sigmas(&fitter, &screens)? });
    }
    Ok(ZernikeStats { screens: z.screens, recovery, sweep })
}

pub fn cmd_zernike_stats(cfg: &RunConfig) -> Result<ZernikeStats> {
    let stats = run_zernike_stats(cfg)?;
    let mut sink = ArtifactSink::create(&cfg.out_dir)?;
    let mut csv = Csv::new(&["index", "name", "sigma_in", "sigma_est"]);
    for s in &stats.recovery {
        csv.row(&[&s.index, &s.name, &s.sigma_in, &s.sigma_est]);
    }
    sink.write_csv("zernike_sigma.csv", &csv)?;
    let mut sweep = Csv::new(&["setting", "d_over_r0", "index", "name", "sigma"]);
    for s in &stats.sweep {
        for (k, sigma) in s.sigma.iter().enumerate() {
            sweep.row(&[&s.setting, &s.d_over_r0, &(k + 2), &zernike_name(k + 2), sigma]);
        }
    }
    sink.write_csv("zernike_sweep.csv", &sweep)?;
    sink.write_summary("zernike-stats", cfg, &stats)?;
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Fried parameter from beam wander

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedResult {
    pub frames: usize,
    pub path_length: f64,
    pub probe_waist: f64,
    pub r0_configured: f64,
    pub r0_estimated: f64,
    pub d_over_r0_configured: f64,
    pub d_over_r0_estimated: f64,
    /// Analytic `r0_est / r0` for this probe.
    pub expected_bias: f64,
    #[serde(skip)]
    pub centroids: Vec<(f64, f64)>,
}

impl FriedResult {
    pub fn relative_error(&self) -> f64 {
        (self.r0_estimated - self.r0_configured).abs() / self.r0_configured
    }
}

/// Estimates r0 from the wander of a narrow Gaussian probe over independent screens.
pub fn run_fried(cfg: &RunConfig) -> Result<FriedResult> {
    cfg.validate()?;
    let r0 = cfg
        .r0()
        .ok_or_else(|| Error::Config("fried estimation needs turbulence (d_over_r0 > 0 or r0)".into()))?;
    let grid = cfg.fried_grid()?;
    let f = &cfg.fried;
    let length = cfg.screen_to_receiver();
    let centroids = (0..f.frames)
        .into_par_iter()
        .map(|i| {
            let screen = gen_screen_fft(r0, &grid, grid.width() / 2.0, derive_seed(cfg.seed, Stream::Fried, i as u64))?;
            Ok(probe_centroid(&screen, f.probe_waist, length))
        })
        .collect::<Result<Vec<_>>>()?;
    let r0_estimated = estimate_fried(&centroids, length, grid.wavelength)?;
    Ok(FriedResult {
        frames: f.frames,
        path_length: length,
        probe_waist: f.probe_waist,
        r0_configured: r0,
        r0_estimated,
        d_over_r0_configured: 2.0 * cfg.w0 / r0,
        d_over_r0_estimated: 2.0 * cfg.w0 / r0_estimated,
        expected_bias: expected_bias(f.probe_waist, r0),
        centroids,
    })
}

pub fn cmd_fried(cfg: &RunConfig) -> Result<FriedResult> {
    let res = run_fried(cfg)?;
    let mut sink = ArtifactSink::create(&cfg.out_dir)?;
    let mut csv = Csv::new(&["frame", "x", "y"]);
    for (i, (x, y)) in res.centroids.iter().enumerate() {
        csv.row(&[&i, x, y]);
    }
    sink.write_csv("fried_centroids.csv", &csv)?;
    let mut est = Csv::new(&["r0_configured", "r0_estimated", "d_over_r0_configured", "d_over_r0_estimated"]);
    est.row(&[&res.r0_configured, &res.r0_estimated, &res.d_over_r0_configured, &res.d_over_r0_estimated]);
    sink.write_csv("fried.csv", &est)?;
    sink.write_summary("fried", cfg, &res)?;
    Ok(res)
}

// ---------------------------------------------------------------------------
// Screen export

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenRecord {
    pub index: usize,
    pub seed: u64,
    pub file: String,
    pub rms: f64,
}

/// Writes `screens.count` Kolmogorov screens as binary containers.
pub fn cmd_gen_screens(cfg: &RunConfig) -> Result<Vec<ScreenRecord>> {
    cfg.validate()?;
    let r0 = cfg.r0().ok_or_else(|| Error::Config("gen-screens needs turbulence (d_over_r0 > 0 or r0)".into()))?;
    let grid: GridSpec = cfg.grid_spec()?;
    let radius = cfg.ao.hardware.pupil_diameter / 2.0;
    let mut sink = ArtifactSink::create(&cfg.out_dir)?;
    let mut records = Vec::new();
    let mut csv = Csv::new(&["index", "seed", "file", "rms"]);
    for index in 0..cfg.screens.count {
        let seed = derive_seed(cfg.seed, Stream::Screens, index as u64);
        let screen = gen_screen_fft(r0, &grid, radius, seed)?;
        let file = format!("screen_{index:04}.bin");
        let mut bytes = Vec::new();
        screen.write_container(&mut bytes)?;
        sink.write_bytes(&file, &bytes)?;
        if cfg.screens.png {
            let samples = screen.phase.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
            let path = sink.dir().join(format!("screen_{index:04}.png"));
            ComplexField::from_samples(grid, samples)?.save_phase_png(&path)?;
            sink.written.push(path);
        }
        let rms = screen.rms();
        csv.row(&[&index, &seed, &file, &rms]);
        records.push(ScreenRecord { index, seed, file, rms });
    }
    sink.write_csv("screens.csv", &csv)?;
    sink.write_summary("gen-screens", cfg, &records)?;
    Ok(records)
}

//! Interaction-matrix calibration and the integrator control loop.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ao::dm::DmModel;
use crate::ao::wfs::{wfs_measure, WfsGeometry};
use crate::error::{Error, Result};
use crate::field::ComplexField;

/// Push-pull poke amplitude used during calibration, in radians.
const POKE: f64 = 0.1;

/// Controller settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlParams {
    pub gain: f64,
    pub leak: f64,
    /// Singular values below `truncation * max` are discarded.
    pub truncation: f64,
    /// Loop rate in Hz.
    pub loop_rate: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self { gain: 0.4, leak: 0.99, truncation: 0.05, loop_rate: 200.0 }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain <= 1.0) {
            return Err(Error::Config(format!("ao gain must be in (0, 1], got {}", self.gain)));
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return Err(Error::Config(format!("ao leak must be in (0, 1], got {}", self.leak)));
        }
        if !(self.truncation > 0.0 && self.truncation < 1.0) {
            return Err(Error::Config(format!("ao truncation must be in (0, 1), got {}", self.truncation)));
        }
        if !(self.loop_rate > 0.0) {
            return Err(Error::Config(format!("loop rate must be > 0, got {}", self.loop_rate)));
        }
        Ok(())
    }
}

/// Interaction matrix and its truncated pseudo-inverse.
#[derive(Debug, Clone)]
pub struct Calibration {
    /// Slopes per unit command (`slopes x actuators`).
    pub interaction: DMatrix<f64>,
    /// Commands per unit slope (`actuators x slopes`).
    pub reconstructor: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub retained: usize,
    /// Right singular vectors (columns) in descending singular-value order.
    pub modes: DMatrix<f64>,
}

impl Calibration {
    /// Ratio of largest to smallest retained singular value.
    pub fn condition_number(&self) -> f64 {
        self.singular_values[0] / self.singular_values[self.retained - 1]
    }
}

/// Pokes every actuator (push-pull) on a flat pupil and inverts the response.
pub fn calibrate(dm: &DmModel, geom: &WfsGeometry, truncation: f64) -> Result<Calibration> {
    dm.grid().ensure_same(geom.grid())?;
    let mut reference = ComplexField::plane_wave(*dm.grid());
    reference.apply_aperture(geom.pupil_diameter());
    let mut noiseless = geom.clone();
    noiseless.noise = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let m = dm.actuator_count();
    let mut interaction = DMatrix::zeros(geom.slope_len(), m);
    for k in 0..m {
        let infl = dm.influence(k);
        let mut push = reference.clone();
        push.apply_phase(&infl, -POKE);
        let mut pull = reference.clone();
        pull.apply_phase(&infl, POKE);
        let sp = wfs_measure(&push, &noiseless, &mut rng)?;
        let sm = wfs_measure(&pull, &noiseless, &mut rng)?;
        for (r, (a, b)) in sp.iter().zip(&sm).enumerate() {
            interaction[(r, k)] = (a - b) / (2.0 * POKE);
        }
    }
    invert(interaction, truncation)
}

fn invert(interaction: DMatrix<f64>, truncation: f64) -> Result<Calibration> {
    let svd = interaction.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or(Error::RankCollapse)?;
    let vt = svd.v_t.as_ref().ok_or(Error::RankCollapse)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return Err(Error::RankCollapse);
    }
    let retained = sv.iter().take_while(|&&s| s >= truncation * smax).count();
    if retained == 0 {
        return Err(Error::RankCollapse);
    }
    let cols = interaction.ncols();
    let mut reconstructor = DMatrix::zeros(cols, interaction.nrows());
    let mut modes = DMatrix::zeros(cols, order.len());
    for (rank, &i) in order.iter().enumerate() {
        let v = vt.row(i).transpose();
        modes.set_column(rank, &v);
        if rank < retained {
            reconstructor += (&v / sv[rank]) * u.column(i).transpose();
        }
    }
    log::debug!("calibration kept {retained}/{} modes, condition {:.3e}", sv.len(), sv[0] / sv[retained - 1]);
    Ok(Calibration { interaction, reconstructor, singular_values: sv, retained, modes })
}

/// What one loop iteration did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Piston-removed RMS phase of the corrected reference over the pupil (rad).
    pub residual: f64,
    /// Actuators clipped by this update.
    pub clipped: usize,
}

/// Closed-loop state: mirror, calibration, controller settings and history.
#[derive(Debug, Clone)]
pub struct LoopState {
    pub dm: DmModel,
    pub geom: WfsGeometry,
    pub calibration: Arc<Calibration>,
    pub params: ControlParams,
    pub iteration: usize,
    pub residual_history: Vec<f64>,
    pupil: Vec<usize>,
    /// Pixels of the square enclosing the pupil.
    window: Vec<usize>,
    rng: ChaCha8Rng,
}

impl LoopState {
    /// `seed` drives the sensor noise only.
    pub fn new(
        dm: DmModel,
        geom: WfsGeometry,
        calibration: Arc<Calibration>,
        params: ControlParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        dm.grid().ensure_same(geom.grid())?;
        if calibration.reconstructor.nrows() != dm.actuator_count()
            || calibration.reconstructor.ncols() != geom.slope_len()
        {
            return Err(Error::InvalidArgument("calibration does not match mirror/sensor".into()));
        }
        let r = geom.pupil_diameter() / 2.0;
        let pupil = dm.grid().points().filter(|(_, x, y)| x.hypot(*y) <= r).map(|(i, _, _)| i).collect();
        let half = r + 2.0 * dm.grid().pitch;
        let window = dm.grid().points().filter(|(_, x, y)| x.abs().max(y.abs()) <= half).map(|(i, _, _)| i).collect();
        Ok(Self {
            dm,
            geom,
            calibration,
            params,
            iteration: 0,
            residual_history: Vec::new(),
            pupil,
            window,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Zeroes the mirror and history, keeping calibration.
    pub fn reset(&mut self) {
        let zeros = vec![0.0; self.dm.actuator_count()];
        self.dm.set_commands(&zeros).expect("length matches");
        self.iteration = 0;
        self.residual_history.clear();
    }

    /// Current mirror surface phase (rad).
    pub fn correction(&self) -> Vec<f64> {
        self.dm.surface()
    }

    /// Piston-removed RMS phase over the pupil, amplitude weighted.
    pub fn residual_rms(&self, field: &ComplexField) -> f64 {
        pupil_rms(field, &self.pupil)
    }

    /// One iteration: correct both beams with the current mirror, measure the
    /// corrected reference and update the commands (one-frame latency).
    ///
    /// Returns the corrected signal and a report.
    pub fn step(&mut self, reference: &ComplexField, signal: &ComplexField) -> Result<(ComplexField, StepReport)> {
        let surface = self.dm.surface();
        let mut corrected_ref = reference.clone();
        corrected_ref.apply_phase(&surface, -1.0);
        let mut corrected_sig = signal.clone();
        signal.grid().ensure_same(self.dm.grid())?;
        corrected_sig.apply_phase(&surface, -1.0);
        let residual = self.residual_rms(&corrected_ref);
        let clipped = self.update(&corrected_ref)?;
        self.residual_history.push(residual);
        self.iteration += 1;
        Ok((corrected_sig, StepReport { residual, clipped }))
    }

    /// Measure-and-update without a signal beam.
    pub fn step_reference(&mut self, reference: &ComplexField) -> Result<StepReport> {
        reference.grid().ensure_same(self.dm.grid())?;
        // the sensor and the residual only read the pupil square
        let surface = self.dm.surface();
        let mut corrected = reference.clone();
        let s = corrected.samples_mut();
        for &k in &self.window {
            s[k] *= num_complex::Complex64::from_polar(1.0, -surface[k]);
        }
        let residual = self.residual_rms(&corrected);
        let clipped = self.update(&corrected)?;
        self.residual_history.push(residual);
        self.iteration += 1;
        Ok(StepReport { residual, clipped })
    }

    fn update(&mut self, corrected_ref: &ComplexField) -> Result<usize> {
        let slopes = wfs_measure(corrected_ref, &self.geom, &mut self.rng)?;
        let s = DVector::from_vec(slopes);
        let delta = &self.calibration.reconstructor * s;
        let next: Vec<f64> = self
            .dm
            .commands()
            .iter()
            .zip(delta.iter())
            .map(|(c, d)| self.params.leak * c - self.params.gain * d)
            .collect();
        self.dm.set_commands(&next)
    }
}

/// Piston-removed, amplitude-weighted RMS phase over the given pixels.
pub(crate) fn pupil_rms(field: &ComplexField, pixels: &[usize]) -> f64 {
    let s = field.samples();
    let mean: num_complex::Complex64 = pixels.iter().map(|&i| s[i]).sum();
    let rot = if mean.norm() > 0.0 { mean.conj() / mean.norm() } else { 1.0.into() };
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for &i in pixels {
        let a = s[i].norm();
        if a == 0.0 {
            continue;
        }
        let ph = (s[i] * rot).arg();
        w += a;
        m1 += a * ph;
        m2 += a * ph * ph;
    }
    if w == 0.0 {
        return 0.0;
    }
    let mean = m1 / w;
    (m2 / w - mean * mean).max(0.0).sqrt()
}

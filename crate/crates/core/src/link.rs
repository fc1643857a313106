//! End-to-end link simulation: OAM modes and an AO reference beam through a
//! turbulent channel, reduced to a modal transfer matrix.
//!
//! The channel is linear in the field, so one propagation per OAM charge gives the
//! complete response; any superposition (angular basis, MUB states) is a linear
//! combination of the columns of the transfer matrix.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{calibrate, Calibration, ControlParams, DmModel, LoopState, SlopeMethod, WfsGeometry};
use crate::error::{Error, Result};
use crate::field::{overlap_unchecked, ComplexField};
use crate::grid::GridSpec;
use crate::modes::{ang_coefficients, logical_ells, make_oam_mode, BasisKind};
use crate::propagation::{ChannelSpec, Propagator, Segment};
use crate::quantum::CMatrix;
use crate::turbulence::{gen_screen_fft, PhaseScreen, TurbulenceSeries, GREENWOOD_CONSTANT};

/// Adaptive-optics hardware and controller settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
// unknown keys are rejected by the innermost flattened struct
#[serde(default)]
pub struct AoSettings {
    /// Pupil diameter shared by the sensor and the mirror (m).
    pub pupil_diameter: f64,
    pub lenslets: usize,
    /// Minimum illuminated fraction for a lenslet to be used.
    pub validity_threshold: f64,
    pub coupling: f64,
    /// Stroke limit in radians of phase.
    pub stroke: f64,
    pub slope_method: SlopeMethod,
    /// Additive slope noise (rad/m).
    pub slope_noise: f64,
    #[serde(flatten)]
    pub control: ControlParams,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            pupil_diameter: 7e-3,
            lenslets: crate::ao::wfs::LENSLETS,
            validity_threshold: 0.5,
            coupling: crate::ao::dm::DEFAULT_COUPLING,
            stroke: crate::ao::dm::DEFAULT_STROKE,
            slope_method: SlopeMethod::Gradient,
            slope_noise: 0.0,
            control: ControlParams::default(),
        }
    }
}

/// Calibrated mirror and sensor, shared read-only across trials.
#[derive(Debug, Clone)]
pub struct AoHardware {
    pub dm: DmModel,
    pub geom: WfsGeometry,
    pub calibration: Arc<Calibration>,
    pub control: ControlParams,
}

impl AoHardware {
    pub fn new(grid: &GridSpec, settings: &AoSettings) -> Result<Self> {
        settings.control.validate()?;
        let dm = DmModel::new(grid, settings.pupil_diameter, settings.coupling, settings.stroke)?;
        let mut geom = WfsGeometry::new(grid, settings.pupil_diameter, settings.lenslets, settings.validity_threshold)?;
        geom.method = settings.slope_method;
        geom.noise = settings.slope_noise;
        let calibration = Arc::new(calibrate(&dm, &geom, settings.control.truncation)?);
        Ok(Self { dm, geom, calibration, control: settings.control })
    }

    pub fn new_loop(&self, seed: u64) -> Result<LoopState> {
        LoopState::new(self.dm.clone(), self.geom.clone(), Arc::clone(&self.calibration), self.control, seed)
    }
}

/// Channel response restricted to a set of OAM charges:
/// `t[(i, j)] = <rx_{ells[i]} | out_{ells[j]}>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub ells: Vec<i32>,
    pub t: CMatrix,
}

impl TransferMatrix {
    fn position(&self, ell: i32) -> Result<usize> {
        self.ells
            .iter()
            .position(|&l| l == ell)
            .ok_or_else(|| Error::InvalidArgument(format!("charge {ell} was not simulated")))
    }

    /// Sub-matrix over the logical charges of dimension `d`.
    pub fn logical(&self, d: usize) -> Result<CMatrix> {
        let idx = logical_ells(d).iter().map(|&l| self.position(l)).collect::<Result<Vec<_>>>()?;
        Ok(CMatrix::from_fn(d, d, |i, j| self.t[(idx[i], idx[j])]))
    }

    /// Raw detected power, row-major with Alice's input on rows.
    pub fn crosstalk_raw(&self, d: usize, kind: BasisKind) -> Result<Vec<f64>> {
        let t = self.logical(d)?;
        let states: Vec<Vec<Complex64>> = match kind {
            BasisKind::Logical => (0..d)
                .map(|k| (0..d).map(|j| Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.0)).collect())
                .collect(),
            BasisKind::Angular => (0..d).map(|k| ang_coefficients(d, k)).collect::<Result<_>>()?,
            BasisKind::Mub(_) => {
                return Err(Error::InvalidArgument("crosstalk is defined for logical and angular bases".into()))
            }
        };
        let mut raw = Vec::with_capacity(d * d);
        for a in &states {
            let out: Vec<Complex64> = (0..d).map(|r| (0..d).map(|c| t[(r, c)] * a[c]).sum()).collect();
            for b in &states {
                let amp: Complex64 = b.iter().zip(&out).map(|(x, y)| x.conj() * y).sum();
                raw.push(amp.norm_sqr());
            }
        }
        Ok(raw)
    }

    /// Single-mode-fiber coupling of the Gaussian (`ell = 0`) beam.
    pub fn gaussian_coupling(&self) -> Result<f64> {
        let i = self.position(0)?;
        Ok(self.t[(i, i)].norm_sqr())
    }
}

/// Precomputed source/receiver modes and optional AO hardware for one geometry.
#[derive(Debug, Clone)]
pub struct Link {
    grid: GridSpec,
    w0: f64,
    ells: Vec<i32>,
    /// Segments from the first screen slot onwards.
    tail: Vec<Segment>,
    screens: usize,
    /// Source modes carried through the fixed segments before the first screen.
    launched: Vec<ComplexField>,
    /// Plane-wave reference at the first screen.
    reference: ComplexField,
    /// Ideal receiver modes (free-space propagated, no aperture).
    rx: Vec<ComplexField>,
    tail_props: Vec<Option<Arc<Propagator>>>,
    /// Pixels passed by the receiver aperture.
    window: Vec<usize>,
    pub ao: Option<AoHardware>,
}

impl Link {
    /// Builds modes for every charge in `-max_ell..=max_ell`.
    pub fn new(grid: &GridSpec, w0: f64, spec: &ChannelSpec, max_ell: i32, ao: Option<&AoSettings>) -> Result<Self> {
        spec.validate()?;
        let ells: Vec<i32> = (-max_ell..=max_ell).collect();
        let split = spec.segments.iter().position(|s| matches!(s, Segment::Screen)).unwrap_or(spec.segments.len());
        let (head, tail) = spec.segments.split_at(split);
        let props = |segs: &[Segment]| -> Result<Vec<Option<Arc<Propagator>>>> {
            segs.iter()
                .map(|s| match s {
                    Segment::Free { z } if *z != 0.0 => Ok(Some(Arc::new(Propagator::new(grid, *z)?))),
                    _ => Ok(None),
                })
                .collect()
        };
        let head_props = props(head)?;
        let tail_props = props(tail)?;
        let run_fixed = |f: ComplexField, ps: &[Option<Arc<Propagator>>]| -> Result<ComplexField> {
            let mut f = f;
            for p in ps.iter().flatten() {
                p.apply_in_place(&mut f)?;
            }
            Ok(f)
        };
        let sources = ells.iter().map(|&l| make_oam_mode(l, w0, grid)).collect::<Result<Vec<_>>>()?;
        let launched = sources
            .par_iter()
            .map(|m| run_fixed(m.clone(), &head_props))
            .collect::<Result<Vec<_>>>()?;
        let rx = launched
            .par_iter()
            .map(|m| run_fixed(m.clone(), &tail_props))
            .collect::<Result<Vec<_>>>()?;
        let reference = run_fixed(ComplexField::plane_wave(*grid), &head_props)?;
        let ao = ao.map(|s| AoHardware::new(grid, s)).transpose()?;
        Ok(Self {
            grid: *grid,
            w0,
            ells,
            tail: tail.to_vec(),
            screens: spec.screen_count(),
            launched,
            reference,
            rx,
            tail_props,
            window: match spec.aperture_diameter {
                Some(d) => grid.points().filter(|(_, x, y)| x.hypot(*y) <= d / 2.0).map(|(i, _, _)| i).collect(),
                None => (0..grid.len()).collect(),
            },
            ao,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn ells(&self) -> &[i32] {
        &self.ells
    }

    pub fn screen_count(&self) -> usize {
        self.screens
    }

    fn run_tail(&self, mut f: ComplexField, phasors: &[Vec<Complex64>]) -> Result<ComplexField> {
        let mut next = phasors.iter();
        for (seg, prop) in self.tail.iter().zip(&self.tail_props) {
            match seg {
                Segment::Free { .. } => {
                    if let Some(p) = prop {
                        p.apply_in_place(&mut f)?;
                    }
                }
                Segment::Screen => {
                    let p = next.next().expect("screen count checked");
                    f.samples_mut().iter_mut().zip(p).for_each(|(v, p)| *v *= p);
                }
            }
        }
        Ok(f)
    }

    fn phasors(&self, screens: &[&PhaseScreen]) -> Result<Vec<Vec<Complex64>>> {
        self.check_screens(screens)?;
        screens
            .iter()
            .map(|s| {
                self.grid.ensure_same(&s.grid)?;
                Ok(s.phase.iter().map(|&p| Complex64::from_polar(1.0, p)).collect())
            })
            .collect()
    }

    fn check_screens(&self, screens: &[&PhaseScreen]) -> Result<()> {
        if screens.len() != self.screens {
            return Err(Error::InvalidArgument(format!(
                "link has {} screen slots but {} screens were supplied",
                self.screens,
                screens.len()
            )));
        }
        Ok(())
    }

    /// Received fields (before mirror and aperture) for the given charges.
    pub fn received(&self, ells: &[i32], screens: &[&PhaseScreen]) -> Result<Vec<ComplexField>> {
        let phasors = self.phasors(screens)?;
        self.received_with(ells, &phasors)
    }

    fn received_with(&self, ells: &[i32], phasors: &[Vec<Complex64>]) -> Result<Vec<ComplexField>> {
        let idx = ells
            .iter()
            .map(|l| {
                self.ells
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::InvalidArgument(format!("charge {l} outside the link's mode set")))
            })
            .collect::<Result<Vec<_>>>()?;
        idx.par_iter().map(|&i| self.run_tail(self.launched[i].clone(), phasors)).collect()
    }

    /// Plane-wave reference beam at the receiver.
    pub fn reference(&self, screens: &[&PhaseScreen]) -> Result<ComplexField> {
        let phasors = self.phasors(screens)?;
        self.run_tail(self.reference.clone(), &phasors)
    }

    /// Received fields and the reference beam for one set of screens.
    pub fn received_and_reference(
        &self,
        ells: &[i32],
        screens: &[&PhaseScreen],
    ) -> Result<(Vec<ComplexField>, ComplexField)> {
        let phasors = self.phasors(screens)?;
        let reference = self.run_tail(self.reference.clone(), &phasors)?;
        Ok((self.received_with(ells, &phasors)?, reference))
    }

    /// Ideal receiver mode for `ell`.
    pub fn receiver_mode(&self, ell: i32) -> Option<&ComplexField> {
        self.ells.iter().position(|&l| l == ell).map(|i| &self.rx[i])
    }

    /// Applies the mirror `correction` (if any) and the aperture to received fields
    /// and projects onto the ideal receiver modes of the same charges.
    pub fn transfer(&self, ells: &[i32], received: &[ComplexField], correction: Option<&[f64]>) -> Result<TransferMatrix> {
        if ells.len() != received.len() {
            return Err(Error::InvalidArgument("one received field per charge required".into()));
        }
        let da = self.grid.pitch * self.grid.pitch;
        let rx: Vec<&ComplexField> =
            ells.iter().map(|&l| self.receiver_mode(l).ok_or(Error::InvalidArgument(format!("charge {l}")))).collect::<Result<_>>()?;
        if correction.is_some_and(|c| c.len() != self.grid.len()) {
            return Err(Error::GridMismatch("correction does not match the grid".into()));
        }
        // only pixels inside the aperture contribute, so gather them once
        let phasor: Option<Vec<Complex64>> =
            correction.map(|c| self.window.iter().map(|&k| Complex64::from_polar(1.0, -c[k])).collect());
        let gather = |f: &ComplexField| -> Vec<Complex64> {
            let s = f.samples();
            match &phasor {
                Some(p) => self.window.iter().zip(p).map(|(&k, p)| s[k] * p).collect(),
                None => self.window.iter().map(|&k| s[k]).collect(),
            }
        };
        let outs: Vec<Vec<Complex64>> = received.iter().map(gather).collect();
        let rxs: Vec<Vec<Complex64>> = rx.iter().map(|f| self.window.iter().map(|&k| f.samples()[k]).collect()).collect();
        let n = ells.len();
        let t = CMatrix::from_fn(n, n, |i, j| overlap_unchecked(&rxs[i], &outs[j]) * da);
        Ok(TransferMatrix { ells: ells.to_vec(), t })
    }
}

/// How the AO loop is run within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AoSchedule {
    /// Closed loop on a frozen screen for a fixed number of iterations.
    Static { iterations: usize },
    /// Frozen-flow turbulence advancing one frame per loop period; the loop runs
    /// `settle` frames before the measured frame and corrects with one frame of latency.
    Dynamic { settle: usize },
}

/// Turbulence strength and evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbulenceSettings {
    /// Fried parameter (m); `None` disables turbulence.
    pub r0: Option<f64>,
    /// Frozen-flow wind speed (m/s).
    pub wind: f64,
    pub greenwood_constant: f64,
}

impl Default for TurbulenceSettings {
    fn default() -> Self {
        Self { r0: Some(2e-3 / 1.7), wind: 0.014, greenwood_constant: GREENWOOD_CONSTANT }
    }
}

impl TurbulenceSettings {
    pub fn greenwood_frequency(&self) -> Option<f64> {
        self.r0.map(|r0| self.greenwood_constant * self.wind / r0)
    }
}

/// Result of one trial: the channel with and without correction.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub uncorrected: TransferMatrix,
    pub corrected: Option<TransferMatrix>,
    /// Residual RMS phase (rad) of the corrected reference at the measured frame.
    pub residual: Option<f64>,
}

/// One independent realization: draws turbulence from `seed`, runs the loop if the
/// link carries AO hardware, and returns transfer matrices for `ells`.
pub fn run_trial(
    link: &Link,
    turbulence: &TurbulenceSettings,
    schedule: AoSchedule,
    ells: &[i32],
    seed: u64,
) -> Result<TrialOutcome> {
    let grid = *link.grid();
    let radius = link.ao.as_ref().map(|a| a.geom.pupil_diameter() / 2.0).unwrap_or(grid.width() / 4.0);
    let rate = link.ao.as_ref().map(|a| a.control.loop_rate).unwrap_or(200.0);
    let mut series = match (turbulence.r0, schedule) {
        (Some(r0), AoSchedule::Dynamic { .. }) => Some(TurbulenceSeries::with_constant(
            grid,
            r0,
            turbulence.wind,
            1.0 / rate,
            radius,
            seed,
            turbulence.greenwood_constant,
        )?),
        _ => None,
    };
    let mut next_screen = || -> Result<PhaseScreen> {
        match (&mut series, turbulence.r0) {
            (Some(s), _) => Ok(s.advance()),
            (None, Some(r0)) => gen_screen_fft(r0, &grid, radius, seed),
            (None, None) => Ok(PhaseScreen::flat(grid, radius)),
        }
    };
    let slots = link.screen_count();
    let Some(ao) = &link.ao else {
        let screen = next_screen()?;
        let screens = vec![&screen; slots];
        let rx = link.received(ells, &screens)?;
        return Ok(TrialOutcome { uncorrected: link.transfer(ells, &rx, None)?, corrected: None, residual: None });
    };
    let mut state = ao.new_loop(seed ^ 0x5eed_a0a0)?;
    let screen = match schedule {
        AoSchedule::Static { iterations } => {
            let screen = next_screen()?;
            let reference = link.reference(&vec![&screen; slots])?;
            for _ in 0..iterations {
                state.step_reference(&reference)?;
            }
            screen
        }
        AoSchedule::Dynamic { settle } => {
            for _ in 0..settle {
                let frame = next_screen()?;
                state.step_reference(&link.reference(&vec![&frame; slots])?)?;
            }
            next_screen()?
        }
    };
    let screens = vec![&screen; slots];
    let (rx, reference) = link.received_and_reference(ells, &screens)?;
    let correction = state.correction();
    let mut corrected_ref = reference;
    corrected_ref.apply_phase(&correction, -1.0);
    let residual = state.residual_rms(&corrected_ref);
    Ok(TrialOutcome {
        uncorrected: link.transfer(ells, &rx, None)?,
        corrected: Some(link.transfer(ells, &rx, Some(&correction))?),
        residual: Some(residual),
    })
}

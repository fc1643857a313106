//! Run configuration: a TOML document with defaults for every field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::link::{AoSchedule, AoSettings, TurbulenceSettings};
use crate::propagation::ChannelSpec;
use crate::turbulence::GREENWOOD_CONSTANT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub n: usize,
    /// Sample pitch (m).
    pub pitch: f64,
    /// Wavelength (m).
    pub wavelength: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { n: 256, pitch: 1e-3 / 24.0, wavelength: 633e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSettings {
    /// Source to turbulence cell (m).
    pub to_cell: f64,
    /// Cell length (m); modelled as one thin screen at its centre.
    pub cell: f64,
    /// Cell to receiver (m).
    pub from_cell: f64,
    /// Hard receiver aperture diameter (m).
    pub aperture_diameter: f64,
}

impl Default for ChannelSettings {
    fn default() -> Self {
        Self { to_cell: 0.5, cell: 0.3, from_cell: 0.5, aperture_diameter: 8e-3 }
    }
}

impl ChannelSettings {
    pub fn spec(&self) -> ChannelSpec {
        ChannelSpec::single_cell(self.to_cell, self.cell, self.from_cell, Some(self.aperture_diameter))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbulenceConfig {
    /// Strength as `D / r0` with `D` the beam waist diameter `2 w0`; 0 disables turbulence.
    pub d_over_r0: f64,
    /// Explicit Fried parameter (m); overrides `d_over_r0` when set.
    pub r0: Option<f64>,
    /// Frozen-flow wind speed (m/s).
    pub wind: f64,
    pub greenwood_constant: f64,
}

impl Default for TurbulenceConfig {
    fn default() -> Self {
        Self { d_over_r0: 1.7, r0: None, wind: 0.014, greenwood_constant: GREENWOOD_CONSTANT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoConfig {
    #[serde(flatten)]
    pub hardware: AoSettings,
    pub schedule: AoSchedule,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self { hardware: AoSettings::default(), schedule: AoSchedule::Dynamic { settle: 30 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    /// Simulated duration (s).
    pub duration: f64,
    /// Time at which the loop is closed (s).
    pub ao_on_at: f64,
    /// Time excluded from the AO-on mean while the loop converges (s).
    pub settle_time: f64,
    /// Independent runs (turbulence realizations).
    pub runs: usize,
    /// Write every k-th frame to the time series.
    pub decimate: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self { duration: 100.0, ao_on_at: 10.0, settle_time: 0.5, runs: 3, decimate: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    pub dimensions: Vec<usize>,
    /// Average detections over all trials (time-averaged acquisition) rather
    /// than reconstructing each realization separately.
    pub averaged: bool,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self { dimensions: vec![2, 3, 4, 5], averaged: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QkdConfig {
    pub dimensions: Vec<usize>,
}

impl Default for QkdConfig {
    fn default() -> Self {
        Self { dimensions: vec![2, 4, 6, 8, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZernikeConfig {
    /// Per-index standard deviations (rad) for `j = 2, 3, ...`, used by the
    /// statistics-first generator.
    pub sigma: Vec<f64>,
    /// Highest index analysed.
    pub jmax: usize,
    /// Radius of the analysis disk (m).
    pub radius: f64,
    /// Screens drawn from the statistics-first generator.
    pub screens: usize,
    /// Turbulence strengths (`D / r0`) of the strength sweep, one per setting.
    pub sweep_d_over_r0: Vec<f64>,
    /// Kolmogorov screens per sweep setting.
    pub sweep_screens: usize,
}

impl Default for ZernikeConfig {
    fn default() -> Self {
        Self {
            sigma: vec![0.9, 0.8, 0.3, 0.25, 0.3, 0.15, 0.12, 0.12, 0.15],
            jmax: 10,
            radius: 3.5e-3,
            screens: 1000,
            sweep_d_over_r0: vec![0.0, 1.7, 2.6, 3.4],
            sweep_screens: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FriedConfig {
    pub frames: usize,
    /// Waist of the Gaussian wander probe (m).
    pub probe_waist: f64,
    /// Grid used for the wander simulation.
    pub n: usize,
    pub pitch: f64,
}

impl Default for FriedConfig {
    fn default() -> Self {
        Self { frames: 500, probe_waist: 1.35e-5, n: 256, pitch: 3.5e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreensConfig {
    pub count: usize,
    /// Also write PNG previews of each screen.
    pub png: bool,
}

impl Default for ScreensConfig {
    fn default() -> Self {
        Self { count: 10, png: false }
    }
}

/// Complete, validated description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    /// Worker threads (0 = library default).
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Beam waist of the transmitted modes (m).
    pub w0: f64,
    pub grid: GridSettings,
    pub channel: ChannelSettings,
    pub turbulence: TurbulenceConfig,
    pub ao: AoConfig,
    pub coupling: CouplingConfig,
    pub tomography: TomographyConfig,
    pub qkd: QkdConfig,
    pub zernike: ZernikeConfig,
    pub fried: FriedConfig,
    pub screens: ScreensConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 100,
            threads: 0,
            out_dir: PathBuf::from("out"),
            w0: 1e-3,
            grid: GridSettings::default(),
            channel: ChannelSettings::default(),
            turbulence: TurbulenceConfig::default(),
            ao: AoConfig::default(),
            coupling: CouplingConfig::default(),
            tomography: TomographyConfig::default(),
            qkd: QkdConfig::default(),
            zernike: ZernikeConfig::default(),
            fried: FriedConfig::default(),
            screens: ScreensConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a positive number, got {v}")))
    }
}

/// The `[ao]` table is assembled from flattened structs, which serde cannot
/// check for unknown keys; compare against the keys of the defaults instead.
fn check_ao_keys(doc: &toml::Table) -> Result<()> {
    let Some(ao) = doc.get("ao").and_then(toml::Value::as_table) else {
        return Ok(());
    };
    let known = toml::Table::try_from(AoConfig::default()).map_err(|e| Error::Serde(e.to_string()))?;
    match ao.keys().find(|k| !known.contains_key(*k)) {
        Some(k) => Err(Error::Config(format!("unknown key `{k}` in [ao]"))),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        check_ao_keys(&doc)?;
        let cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// SHA-256 of the canonical TOML serialization, hex encoded.
    ///
    /// The output directory and thread count do not change results, so they
    /// are left out: identical runs written to different places hash equally.
    pub fn hash(&self) -> Result<String> {
        let canonical = RunConfig { out_dir: PathBuf::new(), threads: 0, ..self.clone() };
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.pitch, self.grid.wavelength).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fried parameter implied by the turbulence section, `None` when turbulence is off.
    pub fn r0(&self) -> Option<f64> {
        match self.turbulence.r0 {
            Some(r0) => Some(r0),
            None if self.turbulence.d_over_r0 > 0.0 => Some(2.0 * self.w0 / self.turbulence.d_over_r0),
            None => None,
        }
    }

    pub fn turbulence_settings(&self) -> TurbulenceSettings {
        TurbulenceSettings {
            r0: self.r0(),
            wind: self.turbulence.wind,
            greenwood_constant: self.turbulence.greenwood_constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid_spec()?;
        positive("w0", self.w0)?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let c = &self.channel;
        for (name, v) in [("channel.to_cell", c.to_cell), ("channel.cell", c.cell), ("channel.from_cell", c.from_cell)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        positive("channel.aperture_diameter", c.aperture_diameter)?;
        if c.aperture_diameter > grid.width() {
            return Err(Error::Config(format!(
                "channel.aperture_diameter {} exceeds the grid width {}",
                c.aperture_diameter,
                grid.width()
            )));
        }
        let t = &self.turbulence;
        if !(t.d_over_r0.is_finite() && t.d_over_r0 >= 0.0) {
            return Err(Error::Config(format!("turbulence.d_over_r0 must be >= 0, got {}", t.d_over_r0)));
        }
        if let Some(r0) = t.r0 {
            positive("turbulence.r0", r0)?;
        }
        if let Some(r0) = self.r0() {
            if r0 < 2.0 * grid.pitch {
                return Err(Error::Config(format!(
                    "r0 = {r0} m is below two grid samples ({} m); refine the grid or weaken the turbulence",
                    2.0 * grid.pitch
                )));
            }
        }
        if !(t.wind.is_finite() && t.wind >= 0.0) {
            return Err(Error::Config(format!("turbulence.wind must be >= 0, got {}", t.wind)));
        }
        positive("turbulence.greenwood_constant", t.greenwood_constant)?;
        let ao = &self.ao.hardware;
        positive("ao.pupil_diameter", ao.pupil_diameter)?;
        if ao.pupil_diameter > grid.width() {
            return Err(Error::Config("ao.pupil_diameter exceeds the grid width".into()));
        }
        if ao.lenslets == 0 {
            return Err(Error::Config("ao.lenslets must be >= 1".into()));
        }
        if !(ao.coupling > 0.0 && ao.coupling < 1.0) {
            return Err(Error::Config(format!("ao.coupling must be in (0, 1), got {}", ao.coupling)));
        }
        positive("ao.stroke", ao.stroke)?;
        if !(ao.slope_noise.is_finite() && ao.slope_noise >= 0.0) {
            return Err(Error::Config("ao.slope_noise must be >= 0".into()));
        }
        ao.control.validate()?;
        let co = &self.coupling;
        positive("coupling.duration", co.duration)?;
        if !(co.ao_on_at >= 0.0 && co.ao_on_at <= co.duration) {
            return Err(Error::Config("coupling.ao_on_at must lie within [0, duration]".into()));
        }
        if co.decimate == 0 || co.runs == 0 {
            return Err(Error::Config("coupling.decimate and coupling.runs must be >= 1".into()));
        }
        if !(co.settle_time >= 0.0) {
            return Err(Error::Config("coupling.settle_time must be >= 0".into()));
        }
        if let Some(d) = self.tomography.dimensions.iter().find(|d| !(2..=5).contains(*d)) {
            return Err(Error::Config(format!("tomography dimension {d} unsupported; use 2, 3, 4 or 5")));
        }
        if let Some(d) = self.qkd.dimensions.iter().find(|d| **d < 2 || **d % 2 != 0 || **d > 16) {
            return Err(Error::Config(format!("qkd dimension {d} must be even and in 2..=16")));
        }
        let max_ell = self.max_ell();
        if let Some(ell) = (1..=max_ell).find(|&l| self.w0 * (1.0 + l as f64).sqrt() >= grid.width() / 4.0) {
            return Err(Error::Config(format!("OAM charge {ell} does not fit the grid at w0 = {}", self.w0)));
        }
        let z = &self.zernike;
        if z.jmax < 2 || z.jmax > crate::turbulence::zernike::MAX_INDEX {
            return Err(Error::Config(format!("zernike.jmax must be in 2..=66, got {}", z.jmax)));
        }
        if z.sigma.len() + 1 > z.jmax || z.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("zernike.sigma needs finite entries >= 0 and at most jmax - 1 of them".into()));
        }
        positive("zernike.radius", z.radius)?;
        if 2.0 * z.radius > grid.width() {
            return Err(Error::Config("zernike.radius exceeds the grid".into()));
        }
        if z.sweep_d_over_r0.iter().any(|&v| v > 0.0 && 2.0 * self.w0 / v < 2.0 * grid.pitch) {
            return Err(Error::Config("a zernike sweep strength is too strong for the grid pitch".into()));
        }
        if z.screens < 2 || z.sweep_screens < 2 || z.sweep_d_over_r0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("zernike screen counts must be >= 2 and sweep strengths >= 0".into()));
        }
        let f = &self.fried;
        if f.frames < crate::turbulence::fried::MIN_SAMPLES {
            return Err(Error::Config(format!(
                "fried.frames must be >= {}",
                crate::turbulence::fried::MIN_SAMPLES
            )));
        }
        positive("fried.probe_waist", f.probe_waist)?;
        self.fried_grid()?;
        if self.screens.count == 0 {
            return Err(Error::Config("screens.count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn fried_grid(&self) -> Result<GridSpec> {
        let f = &self.fried;
        GridSpec::new(f.n, f.pitch, self.grid.wavelength).map_err(|e| Error::Config(format!("fried grid: {e}")))
    }

    /// Distance from the turbulence screen to the receiver (m).
    pub fn screen_to_receiver(&self) -> f64 {
        0.5 * self.channel.cell + self.channel.from_cell
    }

    /// Largest OAM charge any configured experiment needs.
    pub fn max_ell(&self) -> i32 {
        let q = self.qkd.dimensions.iter().map(|d| (*d / 2) as i32).max().unwrap_or(0);
        let t = self.tomography.dimensions.iter().map(|d| (*d / 2) as i32).max().unwrap_or(0);
        q.max(t).max(1)
    }
}

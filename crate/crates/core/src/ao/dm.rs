//! 97-actuator deformable mirror with Gaussian influence functions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::GridSpec;

/// Actuators across the mirror diameter.
pub const ACTUATORS_ACROSS: usize = 11;
/// Influence at the neighbouring actuator.
pub const DEFAULT_COUPLING: f64 = 0.3;
/// Default per-actuator stroke limit in radians of phase.
pub const DEFAULT_STROKE: f64 = 20.0;

/// Indices `(i, j)` in `-5..=5` kept on the 11x11 lattice: a disk of radius 5.5
/// pitches, which drops six actuators per corner and leaves 97.
pub fn actuator_lattice() -> Vec<(i32, i32)> {
    let h = (ACTUATORS_ACROSS / 2) as i32;
    let r2 = (h as f64 + 0.5).powi(2);
    let mut out = Vec::new();
    for j in -h..=h {
        for i in -h..=h {
            if f64::from(i * i + j * j) <= r2 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Deformable mirror acting as a transmissive phase element `exp(-i * surface)`.
///
/// The Gaussian influence functions are separable, so the surface is evaluated
/// as `Gy^T C Gx` with `C` the commands scattered onto the 11x11 lattice.
#[derive(Debug, Clone)]
pub struct DmModel {
    grid: GridSpec,
    pitch: f64,
    sigma: f64,
    lattice: Vec<(i32, i32)>,
    /// `ACTUATORS_ACROSS x n` 1-D influence profiles (identical along x and y).
    profile: DMatrix<f64>,
    commands: Vec<f64>,
    stroke: f64,
    clipped: usize,
}

impl DmModel {
    /// Mirror spanning `diameter` (outer actuators on the rim) with neighbour
    /// coupling `coupling` in (0, 1).
    pub fn new(grid: &GridSpec, diameter: f64, coupling: f64, stroke: f64) -> Result<Self> {
        if !(diameter > 0.0 && coupling > 0.0 && coupling < 1.0 && stroke > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid mirror: diameter {diameter}, coupling {coupling}, stroke {stroke}"
            )));
        }
        let pitch = diameter / (ACTUATORS_ACROSS - 1) as f64;
        let sigma = pitch / (2.0 * (1.0 / coupling).ln()).sqrt();
        let h = (ACTUATORS_ACROSS / 2) as f64;
        let profile = DMatrix::from_fn(ACTUATORS_ACROSS, grid.n, |a, x| {
            let d = grid.coord(x) - (a as f64 - h) * pitch;
            (-d * d / (2.0 * sigma * sigma)).exp()
        });
        let lattice = actuator_lattice();
        let commands = vec![0.0; lattice.len()];
        Ok(Self { grid: *grid, pitch, sigma, lattice, profile, commands, stroke, clipped: 0 })
    }

    pub fn standard(grid: &GridSpec, diameter: f64) -> Result<Self> {
        Self::new(grid, diameter, DEFAULT_COUPLING, DEFAULT_STROKE)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn actuator_count(&self) -> usize {
        self.lattice.len()
    }

    pub fn actuator_pitch(&self) -> f64 {
        self.pitch
    }

    /// Gaussian influence width in meters.
    pub fn influence_sigma(&self) -> f64 {
        self.sigma
    }

    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.lattice.iter().map(|&(i, j)| (f64::from(i) * self.pitch, f64::from(j) * self.pitch)).collect()
    }

    pub fn commands(&self) -> &[f64] {
        &self.commands
    }

    pub fn stroke(&self) -> f64 {
        self.stroke
    }

    /// Number of actuator writes clipped at the stroke limit so far.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Sets commands, clipping each to `±stroke`. Returns how many were clipped.
    pub fn set_commands(&mut self, commands: &[f64]) -> Result<usize> {
        if commands.len() != self.lattice.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} commands, got {}",
                self.lattice.len(),
                commands.len()
            )));
        }
        let mut clipped = 0;
        for (dst, &c) in self.commands.iter_mut().zip(commands) {
            let v = c.clamp(-self.stroke, self.stroke);
            if v != c {
                clipped += 1;
            }
            *dst = v;
        }
        if clipped > 0 {
            log::warn!("{clipped} actuator command(s) clipped at ±{} rad", self.stroke);
        }
        self.clipped += clipped;
        Ok(clipped)
    }

    /// Surface phase (rad) for arbitrary commands, row-major on the grid.
    pub fn surface_for(&self, commands: &[f64]) -> Vec<f64> {
        let k = ACTUATORS_ACROSS;
        let h = (k / 2) as i32;
        let mut c = DMatrix::<f64>::zeros(k, k);
        for (&(i, j), &v) in self.lattice.iter().zip(commands) {
            c[((j + h) as usize, (i + h) as usize)] = v;
        }
        // rows: y actuators; surface[y][x] = sum_{j,i} P[j][y] C[j][i] P[i][x]
        let cx = &c * &self.profile;
        let s = self.profile.transpose() * cx;
        let n = self.grid.n;
        let mut out = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                out[y * n + x] = s[(y, x)];
            }
        }
        out
    }

    pub fn surface(&self) -> Vec<f64> {
        self.surface_for(&self.commands)
    }

    /// Single-actuator influence map.
    pub fn influence(&self, actuator: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.lattice.len()];
        c[actuator] = 1.0;
        self.surface_for(&c)
    }

    /// Least-squares commands that best reproduce `phase` over a disk of `radius`.
    pub fn fit(&self, phase: &[f64], radius: f64) -> Result<Vec<f64>> {
        let pix: Vec<usize> =
            self.grid.points().filter(|(_, x, y)| x.hypot(*y) <= radius).map(|(i, _, _)| i).collect();
        let m = self.lattice.len();
        let infl: Vec<Vec<f64>> = (0..m).map(|k| self.influence(k)).collect();
        let a = DMatrix::from_fn(pix.len(), m, |r, k| infl[k][pix[r]]);
        let b = nalgebra::DVector::from_iterator(pix.len(), pix.iter().map(|&i| phase[i]));
        let svd = a.svd(true, true);
        let x = svd.solve(&b, 1e-10).map_err(|e| Error::RankDeficient(e.to_string()))?;
        Ok(x.iter().copied().collect())
    }
}

/// Applies the mirror correction: `field * exp(-i * surface)`.
pub fn dm_apply(field: &ComplexField, dm: &DmModel) -> Result<ComplexField> {
    dm.grid.ensure_same(field.grid())?;
    let mut out = field.clone();
    out.apply_phase(&dm.surface(), -1.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm() -> DmModel {
        let g = GridSpec::new(64, 1e-4, 633e-9).unwrap();
        DmModel::standard(&g, 5e-3).unwrap()
    }

    #[test]
    fn lattice_has_97_symmetric_actuators() {
        let l = actuator_lattice();
        assert_eq!(l.len(), 97);
        for &(i, j) in &l {
            assert!(l.contains(&(-j, i)));
        }
        for corner in [(5, 5), (5, 4), (4, 5), (5, 3), (3, 5), (4, 4)] {
            assert!(!l.contains(&corner));
        }
    }

    #[test]
    fn zero_commands_leave_field_unchanged() {
        let d = dm();
        let f = ComplexField::plane_wave(*d.grid());
        assert_eq!(dm_apply(&f, &d).unwrap(), f);
    }

    #[test]
    fn neighbour_coupling() {
        let d = dm();
        let centre = d.lattice.iter().position(|&p| p == (0, 0)).unwrap();
        let s = d.influence(centre);
        let g = d.grid();
        let at = |x: f64| {
            let col = (x / g.pitch).round() as i64 + (g.n / 2) as i64;
            s[(g.n / 2) * g.n + col as usize]
        };
        assert!((at(0.0) - 1.0).abs() < 1e-12);
        assert!((at(d.actuator_pitch()) - DEFAULT_COUPLING).abs() < 1e-9);
    }

    #[test]
    fn stroke_clipping_is_flagged() {
        let mut d = dm();
        let mut c = vec![0.0; 97];
        c[3] = 25.0;
        c[4] = -21.0;
        assert_eq!(d.set_commands(&c).unwrap(), 2);
        assert_eq!(d.commands()[3], 20.0);
        assert_eq!(d.clipped(), 2);
        assert!(d.set_commands(&[0.0; 3]).is_err());
    }
}

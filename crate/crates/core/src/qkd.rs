//! High-dimensional BB84 figures of merit: crosstalk, QDER, key rate and the
//! security threshold.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::BasisKind;

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Standard error uses the unbiased sample deviation; a single sample has zero error.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, stderr: (var / n).sqrt() }
    }
}

/// Row-stochastic detection matrix: row `i` is Alice's input, column `j` Bob's outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosstalkMatrix {
    pub dimension: usize,
    pub basis: BasisKind,
    pub trials: usize,
    /// Row-major ensemble mean.
    pub values: Vec<f64>,
    /// Row-major standard error of each entry.
    pub stderr: Vec<f64>,
    /// QDER of each trial's matrix.
    pub trial_qder: Vec<f64>,
}

/// Row-normalizes a raw power matrix (row-major, `d x d`).
pub fn row_normalize(raw: &[f64], d: usize) -> Result<Vec<f64>> {
    if raw.len() != d * d {
        return Err(Error::InvalidArgument(format!("{} entries for a {d}x{d} matrix", raw.len())));
    }
    let mut out = raw.to_vec();
    for (i, row) in out.chunks_mut(d).enumerate() {
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroPower(format!("crosstalk row {i} detected no power")));
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

fn trace_qder(c: &[f64], d: usize) -> f64 {
    1.0 - (0..d).map(|i| c[i * d + i]).sum::<f64>() / d as f64
}

impl CrosstalkMatrix {
    /// Ensemble of raw per-trial power matrices → averaged row-stochastic matrix.
    pub fn from_trials(d: usize, basis: BasisKind, raw_trials: &[Vec<f64>]) -> Result<Self> {
        if raw_trials.is_empty() {
            return Err(Error::InvalidArgument("crosstalk needs at least one trial".into()));
        }
        let normalized = raw_trials.iter().map(|r| row_normalize(r, d)).collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(d * d);
        let mut stderr = Vec::with_capacity(d * d);
        for k in 0..d * d {
            let xs: Vec<f64> = normalized.iter().map(|c| c[k]).collect();
            let e = Estimate::from_samples(&xs);
            values.push(e.mean);
            stderr.push(e.stderr);
        }
        let trial_qder = normalized.iter().map(|c| trace_qder(c, d)).collect();
        Ok(Self { dimension: d, basis, trials: raw_trials.len(), values, stderr, trial_qder })
    }

    pub fn identity(d: usize, basis: BasisKind) -> Self {
        let values = (0..d * d).map(|k| if k % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
        Self { dimension: d, basis, trials: 1, values, stderr: vec![0.0; d * d], trial_qder: vec![0.0] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.dimension + col]
    }

    /// QDER of the mean matrix with the standard error across trials.
    pub fn qder_estimate(&self) -> Estimate {
        Estimate { mean: qder(self), stderr: Estimate::from_samples(&self.trial_qder).stderr }
    }

    /// Grid CSV: header `row,c0,c1,...`, one line per Alice input.
    pub fn write_grid_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dimension;
        let header: Vec<String> = (0..d).map(|j| format!("c{j}")).collect();
        writeln!(w, "row,{}", header.join(","))?;
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| self.get(i, j).to_string()).collect();
            writeln!(w, "{i},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Quantum dit error rate `1 - Tr(C) / d`.
pub fn qder(c: &CrosstalkMatrix) -> f64 {
    trace_qder(&c.values, c.dimension)
}

/// `h(x) = -x log2(x / (d - 1)) - (1 - x) log2(1 - x)`, with `h(0) = 0`.
fn entropy(x: f64, d: usize) -> f64 {
    let a = if x > 0.0 { -x * (x / (d as f64 - 1.0)).log2() } else { 0.0 };
    let b = if x < 1.0 { -(1.0 - x) * (1.0 - x).log2() } else { 0.0 };
    a + b
}

/// Asymptotic secret-key rate `log2(d) - 2 h(Q)` in bits per sifted photon.
pub fn key_rate(q: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("QDER {q} outside [0, 1)")));
    }
    Ok((d as f64).log2() - 2.0 * entropy(q, d))
}

/// QDER at which the key rate vanishes, by bisection on `(0, (d - 1) / d)`.
pub fn qder_threshold(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let (mut lo, mut hi) = (0.0, (d as f64 - 1.0) / d as f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if key_rate(mid, d)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One dimension's security summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QkdReport {
    pub dimension: usize,
    pub logical: Estimate,
    /// Absent for odd dimensions, which have no angular basis.
    pub angular: Option<Estimate>,
    /// Mean of the per-basis QDERs.
    pub average: f64,
    /// Key rate at the average QDER.
    pub key_rate: f64,
    pub threshold: f64,
    pub logical_secure: bool,
    pub angular_secure: Option<bool>,
    /// Average QDER below the threshold.
    pub secure: bool,
}

impl QkdReport {
    pub fn new(dimension: usize, logical: Estimate, angular: Option<Estimate>) -> Result<Self> {
        let threshold = qder_threshold(dimension)?;
        let average = match angular {
            Some(a) => 0.5 * (logical.mean + a.mean),
            None => logical.mean,
        };
        let key_rate = key_rate(average.min(1.0 - 1e-15).max(0.0), dimension)?;
        Ok(Self {
            dimension,
            logical,
            angular,
            average,
            key_rate,
            threshold,
            logical_secure: logical.mean < threshold,
            angular_secure: angular.map(|a| a.mean < threshold),
            secure: average < threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(key_rate(0.0, 2).unwrap(), 1.0);
        assert_eq!(key_rate(0.0, 8).unwrap(), 3.0);
        assert!(key_rate(0.110, 2).unwrap().abs() < 5e-3);
        assert!(key_rate(1.0, 2).is_err());
        assert!(key_rate(-0.1, 2).is_err());
    }

    #[test]
    fn thresholds() {
        for (d, q) in [(2, 0.110), (4, 0.189), (6, 0.225), (8, 0.247), (10, 0.262)] {
            let t = qder_threshold(d).unwrap();
            assert!((t - q).abs() < 5e-4, "d = {d}: {t}");
            assert!(key_rate(t, d).unwrap().abs() < 1e-6);
        }
        let ts: Vec<f64> = (2..=16).map(|d| qder_threshold(d).unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn qder_of_identity_and_uniform() {
        assert_eq!(qder(&CrosstalkMatrix::identity(4, BasisKind::Logical)), 0.0);
        let u = CrosstalkMatrix::from_trials(4, BasisKind::Logical, &[vec![1.0; 16]]).unwrap();
        assert_eq!(qder(&u), 0.75);
    }

    #[test]
    fn rows_are_normalized_and_errors_reported() {
        let raw = vec![vec![2.0, 2.0, 0.0, 4.0], vec![1.0, 3.0, 1.0, 1.0]];
        let c = CrosstalkMatrix::from_trials(2, BasisKind::Angular, &raw).unwrap();
        // trials normalize to [[.5, .5], [0, 1]] and [[.25, .75], [.5, .5]]
        assert!((c.get(0, 0) - 0.375).abs() < 1e-15 && (c.get(1, 1) - 0.75).abs() < 1e-15);
        for i in 0..2 {
            let row: f64 = (0..2).map(|j| c.get(i, j)).sum();
            assert!((row - 1.0).abs() < 1e-15);
        }
        assert!((c.stderr[0] - 0.125).abs() < 1e-12);
        assert!((c.stderr[2] - 0.25).abs() < 1e-12);
        assert!(CrosstalkMatrix::from_trials(2, BasisKind::Angular, &[vec![0.0, 0.0, 1.0, 1.0]]).is_err());
    }

    #[test]
    fn report_flags() {
        let r = QkdReport::new(
            4,
            Estimate { mean: 0.05, stderr: 0.01 },
            Some(Estimate { mean: 0.2, stderr: 0.01 }),
        )
        .unwrap();
        assert!(r.logical_secure);
        assert_eq!(r.angular_secure, Some(false));
        assert!(r.secure);
    }
}

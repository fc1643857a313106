//! Process tomography over MUBs: forward model, chi inversion and fidelity.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{overlap, ComplexField};
use crate::quantum::gellmann::{CMatrix, GellMannBasis};
use crate::quantum::mub::MubSet;

/// Eigenvalues below this are treated as negative when validating a process matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Detection probabilities `p[alpha][m | beta][n] = Tr(Pi_m^alpha E(Pi_n^beta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbEntry {
    pub alpha: usize,
    pub m: usize,
    pub beta: usize,
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub dimension: usize,
    pub entries: Vec<ProbEntry>,
}

impl ProbabilityTable {
    pub fn get(&self, alpha: usize, m: usize, beta: usize, n: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.alpha == alpha && e.m == m && e.beta == beta && e.n == n)
            .map(|e| e.p)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha,m,beta,n,p")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{},{}", e.alpha, e.m, e.beta, e.n, e.p)?;
        }
        Ok(())
    }
}

/// Accumulates raw detected power for every (prepared, measured) MUB pair and
/// normalizes per input state and measurement basis on output.
#[derive(Debug, Clone)]
pub struct DetectionAccumulator {
    dimension: usize,
    bases: usize,
    powers: Vec<f64>,
    samples: usize,
}

impl DetectionAccumulator {
    pub fn new(mubs: &MubSet) -> Self {
        let d = mubs.dimension;
        let nb = mubs.basis_count();
        Self { dimension: d, bases: nb, powers: vec![0.0; nb * d * nb * d], samples: 0 }
    }

    fn index(&self, alpha: usize, m: usize, beta: usize, n: usize) -> usize {
        ((beta * self.dimension + n) * self.bases + alpha) * self.dimension + m
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Adds one channel realization given as a transfer matrix in the logical
    /// basis (`out = T * in`, columns are inputs).
    pub fn add_transfer(&mut self, mubs: &MubSet, t: &CMatrix) -> Result<()> {
        let d = self.dimension;
        if t.nrows() != d || t.ncols() != d || mubs.dimension != d {
            return Err(Error::InvalidArgument(format!(
                "transfer matrix {}x{} does not match dimension {d}",
                t.nrows(),
                t.ncols()
            )));
        }
        let det: Vec<Vec<DVector<Complex64>>> = mubs
            .bases
            .iter()
            .map(|b| b.iter().map(|v| DVector::from_column_slice(v)).collect())
            .collect();
        for (beta, basis) in det.iter().enumerate() {
            for (n, input) in basis.iter().enumerate() {
                let out = t * input;
                for (alpha, mb) in det.iter().enumerate() {
                    for (m, meas) in mb.iter().enumerate() {
                        let amp = meas.dotc(&out);
                        let i = self.index(alpha, m, beta, n);
                        self.powers[i] += amp.norm_sqr();
                    }
                }
            }
        }
        self.samples += 1;
        Ok(())
    }

    /// Adds raw detected power for one (alpha, m, beta, n) entry.
    pub fn add_power(&mut self, alpha: usize, m: usize, beta: usize, n: usize, power: f64) {
        let i = self.index(alpha, m, beta, n);
        self.powers[i] += power;
    }

    pub fn mark_sample(&mut self) {
        self.samples += 1;
    }

    /// Normalized table; each (input state, measurement basis) sums to one.
    pub fn table(&self) -> Result<ProbabilityTable> {
        let d = self.dimension;
        let mut entries = Vec::with_capacity(self.powers.len());
        for beta in 0..self.bases {
            for n in 0..d {
                for alpha in 0..self.bases {
                    let start = self.index(alpha, 0, beta, n);
                    let total: f64 = self.powers[start..start + d].iter().sum();
                    if !(total > 0.0) {
                        return Err(Error::ZeroPower(format!(
                            "input state {n} of basis {beta} measured in basis {alpha}"
                        )));
                    }
                    for m in 0..d {
                        entries.push(ProbEntry { alpha, m, beta, n, p: self.powers[start + m] / total });
                    }
                }
            }
        }
        Ok(ProbabilityTable { dimension: d, entries })
    }
}

/// Field-level tomography: propagates every prepared state through `channel` and
/// projects onto every detection field.
///
/// `prepared[beta][n]` and `detection[alpha][m]` are the rendered MUB states.
pub fn channel_from_simulation<F>(
    prepared: &[Vec<ComplexField>],
    detection: &[Vec<ComplexField>],
    mut channel: F,
) -> Result<ProbabilityTable>
where
    F: FnMut(&ComplexField) -> Result<ComplexField>,
{
    let d = prepared.first().map(Vec::len).unwrap_or(0);
    let nb = prepared.len();
    if d == 0 || detection.len() != nb || prepared.iter().chain(detection).any(|b| b.len() != d) {
        return Err(Error::InvalidArgument("prepared and detection sets must be complete and equal-sized".into()));
    }
    let mut acc = DetectionAccumulator { dimension: d, bases: nb, powers: vec![0.0; nb * d * nb * d], samples: 0 };
    for (beta, basis) in prepared.iter().enumerate() {
        for (n, state) in basis.iter().enumerate() {
            let out = channel(state)?;
            for (alpha, mb) in detection.iter().enumerate() {
                for (m, meas) in mb.iter().enumerate() {
                    acc.add_power(alpha, m, beta, n, overlap(meas, &out)?.norm_sqr());
                }
            }
        }
    }
    acc.mark_sample();
    acc.table()
}

/// Process matrix over the Gell-Mann basis, normalized to unit trace so that the
/// identity channel has a single unit entry at (0, 0).
///
/// The channel acts as `E(rho) = d * sum_ab chi_ab s_a rho s_b^†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub dimension: usize,
    pub chi: CMatrix,
}

#[derive(Serialize)]
struct ChiJson<'a> {
    dimension: usize,
    operator_basis: &'a str,
    normalization: &'a str,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl ProcessMatrix {
    pub fn identity(d: usize) -> Self {
        let mut chi = CMatrix::zeros(d * d, d * d);
        chi[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { dimension: d, chi }
    }

    /// Fully depolarizing channel `E(rho) = I / d`.
    pub fn depolarizing(d: usize) -> Self {
        let k = d * d;
        Self { dimension: d, chi: CMatrix::identity(k, k) / Complex64::new(k as f64, 0.0) }
    }

    /// Unitary channel `rho -> U rho U^†`.
    pub fn from_unitary(u: &CMatrix, gm: &GellMannBasis) -> Self {
        let d = gm.dimension;
        let coeffs: Vec<Complex64> = gm.elements.iter().map(|s| (s.adjoint() * u).trace()).collect();
        let v = DVector::from_vec(coeffs);
        let chi = (&v * v.adjoint()) / Complex64::new(d as f64, 0.0);
        Self { dimension: d, chi }
    }

    /// `(1 - eps) * a + eps * b`.
    pub fn mix(a: &Self, b: &Self, eps: f64) -> Self {
        Self {
            dimension: a.dimension,
            chi: &a.chi * Complex64::new(1.0 - eps, 0.0) + &b.chi * Complex64::new(eps, 0.0),
        }
    }

    pub fn apply(&self, rho: &CMatrix, gm: &GellMannBasis) -> CMatrix {
        let d = self.dimension;
        let mut out = CMatrix::zeros(d, d);
        for (a, sa) in gm.elements.iter().enumerate() {
            let left = sa * rho;
            for (b, sb) in gm.elements.iter().enumerate() {
                let c = self.chi[(a, b)];
                if c != Complex64::new(0.0, 0.0) {
                    out += &left * sb.adjoint() * c;
                }
            }
        }
        out * Complex64::new(d as f64, 0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_part(&self.chi).symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.chi - self.chi.adjoint()).camax()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,re,im")?;
        for r in 0..self.chi.nrows() {
            for c in 0..self.chi.ncols() {
                let v = self.chi[(r, c)];
                writeln!(w, "{r},{c},{},{}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let k = self.chi.nrows();
        let grab = |f: fn(&Complex64) -> f64| (0..k).map(|r| (0..k).map(|c| f(&self.chi[(r, c)])).collect()).collect();
        let doc = ChiJson {
            dimension: self.dimension,
            operator_basis: "gell-mann (s0 = I/sqrt(d), pairs j<k symmetric then antisymmetric, then diagonal)",
            normalization: "unit trace",
            re: grab(|v| v.re),
            im: grab(|v| v.im),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Serde(e.to_string()))
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Forward model: exact probability table of a process over a MUB set.
pub fn probabilities_from_chi(chi: &ProcessMatrix, mubs: &MubSet, gm: &GellMannBasis) -> ProbabilityTable {
    let d = mubs.dimension;
    let mut entries = Vec::new();
    for (beta, bb) in mubs.bases.iter().enumerate() {
        for (n, psi) in bb.iter().enumerate() {
            let v = DVector::from_column_slice(psi);
            let rho = &v * v.adjoint();
            let out = chi.apply(&rho, gm);
            for (alpha, ba) in mubs.bases.iter().enumerate() {
                for (m, phi) in ba.iter().enumerate() {
                    let u = DVector::from_column_slice(phi);
                    let p = (u.adjoint() * &out * &u)[(0, 0)].re;
                    entries.push(ProbEntry { alpha, m, beta, n, p });
                }
            }
        }
    }
    ProbabilityTable { dimension: d, entries }
}

type Key = (usize, Vec<(usize, usize, usize, usize)>);

fn pseudo_inverse_cache() -> &'static Mutex<HashMap<Key, Arc<CMatrix>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<CMatrix>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn design_pseudo_inverse(table: &ProbabilityTable, mubs: &MubSet, gm: &GellMannBasis) -> Result<Arc<CMatrix>> {
    let d = mubs.dimension;
    let key: Key = (d, table.entries.iter().map(|e| (e.alpha, e.m, e.beta, e.n)).collect());
    if let Some(p) = pseudo_inverse_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(Arc::clone(p));
    }
    let k = d * d;
    let mut a = CMatrix::zeros(table.entries.len(), k * k);
    for (row, e) in table.entries.iter().enumerate() {
        if e.alpha >= mubs.basis_count() || e.beta >= mubs.basis_count() || e.m >= d || e.n >= d {
            return Err(Error::InvalidArgument(format!("table entry {e:?} outside the MUB set")));
        }
        let phi = DVector::from_column_slice(mubs.state(e.alpha, e.m));
        let psi = DVector::from_column_slice(mubs.state(e.beta, e.n));
        let amps: Vec<Complex64> = gm.elements.iter().map(|s| phi.dotc(&(s * &psi))).collect();
        for ia in 0..k {
            for ib in 0..k {
                a[(row, ia * k + ib)] = amps[ia] * amps[ib].conj() * d as f64;
            }
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    if rank < k * k {
        return Err(Error::RankDeficient(format!(
            "tomography system has rank {rank}, need {} (incomplete table?)",
            k * k
        )));
    }
    let pinv = Arc::new(svd.pseudo_inverse(1e-10 * smax).map_err(|e| Error::RankDeficient(e.to_string()))?);
    pseudo_inverse_cache().lock().expect("cache poisoned").insert(key, Arc::clone(&pinv));
    Ok(pinv)
}

/// Least-squares inversion of `p = A vec(chi)`, then Hermitization, eigenvalue
/// clipping to the positive cone and renormalization to unit trace.
pub fn reconstruct_chi(table: &ProbabilityTable, mubs: &MubSet, gm: &GellMannBasis) -> Result<ProcessMatrix> {
    let d = mubs.dimension;
    if table.dimension != d || gm.dimension != d {
        return Err(Error::InvalidArgument("table, MUB set and operator basis dimensions differ".into()));
    }
    let pinv = design_pseudo_inverse(table, mubs, gm)?;
    let p = DVector::from_iterator(table.entries.len(), table.entries.iter().map(|e| Complex64::new(e.p, 0.0)));
    let x = &*pinv * p;
    let k = d * d;
    let raw = CMatrix::from_fn(k, k, |a, b| x[a * k + b]);
    let herm = hermitian_part(&raw);
    let eig = herm.symmetric_eigen();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::RankDeficient("reconstructed process has no positive part".into()));
    }
    let q = &eig.eigenvectors;
    let lambda = CMatrix::from_diagonal(&DVector::from_iterator(k, clipped.iter().map(|&l| Complex64::new(l / total, 0.0))));
    let chi = hermitian_part(&(q * lambda * q.adjoint()));
    Ok(ProcessMatrix { dimension: d, chi })
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_part(m).symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPsd(min));
    }
    let k = m.nrows();
    let root = CMatrix::from_diagonal(&DVector::from_iterator(
        k,
        eig.eigenvalues.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    Ok(&eig.eigenvectors * root * eig.eigenvectors.adjoint())
}

/// Uhlmann fidelity `[Tr sqrt(sqrt(a) b sqrt(a))]^2` of unit-trace process matrices.
pub fn process_fidelity(a: &ProcessMatrix, b: &ProcessMatrix) -> Result<f64> {
    if a.chi.shape() != b.chi.shape() {
        return Err(Error::InvalidArgument("process matrices differ in size".into()));
    }
    let min_b = b.min_eigenvalue();
    if min_b < -PSD_TOLERANCE {
        return Err(Error::NotPsd(min_b));
    }
    let sa = psd_sqrt(&a.chi)?;
    let inner = hermitian_part(&(&sa * &b.chi * &sa));
    let tr: f64 = inner.symmetric_eigen().eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::mub::build_mubs;

    fn setup(d: usize) -> (MubSet, GellMannBasis) {
        (build_mubs(d).unwrap(), GellMannBasis::new(d).unwrap())
    }

    #[test]
    fn identity_channel_round_trip() {
        for d in [2, 3] {
            let (m, gm) = setup(d);
            let t = probabilities_from_chi(&ProcessMatrix::identity(d), &m, &gm);
            for e in &t.entries {
                if e.alpha == e.beta {
                    let expect = if e.m == e.n { 1.0 } else { 0.0 };
                    assert!((e.p - expect).abs() < 1e-12);
                }
            }
            let chi = reconstruct_chi(&t, &m, &gm).unwrap();
            assert!((chi.chi[(0, 0)].re - 1.0).abs() < 1e-9);
            let f = process_fidelity(&chi, &ProcessMatrix::identity(d)).unwrap();
            assert!((f - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn depolarizing_fidelity() {
        let (m, gm) = setup(3);
        let t = ProbabilityTable {
            dimension: 3,
            entries: probabilities_from_chi(&ProcessMatrix::identity(3), &m, &gm)
                .entries
                .into_iter()
                .map(|e| ProbEntry { p: 1.0 / 3.0, ..e })
                .collect(),
        };
        let chi = reconstruct_chi(&t, &m, &gm).unwrap();
        let f = process_fidelity(&ProcessMatrix::identity(3), &chi).unwrap();
        assert!((f - 1.0 / 9.0).abs() < 1e-3);
        let f2 = process_fidelity(&ProcessMatrix::identity(2), &ProcessMatrix::depolarizing(2)).unwrap();
        assert!((f2 - 0.25).abs() < 1e-6);
    }

    #[test]
    fn incomplete_table_is_rank_deficient() {
        let (m, gm) = setup(2);
        let mut t = probabilities_from_chi(&ProcessMatrix::identity(2), &m, &gm);
        t.entries.retain(|e| e.alpha == 0 && e.beta == 0);
        assert!(matches!(reconstruct_chi(&t, &m, &gm), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn non_psd_is_rejected() {
        let mut bad = ProcessMatrix::identity(2);
        bad.chi[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(matches!(process_fidelity(&bad, &ProcessMatrix::identity(2)), Err(Error::NotPsd(_))));
    }

    #[test]
    fn transfer_accumulator_matches_forward_model() {
        let (m, gm) = setup(3);
        let mut acc = DetectionAccumulator::new(&m);
        acc.add_transfer(&m, &CMatrix::identity(3, 3)).unwrap();
        let a = acc.table().unwrap();
        let b = probabilities_from_chi(&ProcessMatrix::identity(3), &m, &gm);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!((x.alpha, x.m, x.beta, x.n), (y.alpha, y.m, y.beta, y.n));
            assert!((x.p - y.p).abs() < 1e-12);
        }
    }

    #[test]
    fn exports() {
        let chi = ProcessMatrix::identity(2);
        let mut buf = Vec::new();
        chi.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row,col,re,im\n0,0,1,0\n"));
        assert_eq!(text.lines().count(), 17);
        let json: serde_json::Value = serde_json::from_str(&chi.to_json().unwrap()).unwrap();
        assert_eq!(json["dimension"], 2);
    }
}

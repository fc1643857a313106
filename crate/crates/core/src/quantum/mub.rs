//! Complete sets of mutually unbiased bases.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `d + 1` orthonormal bases of `C^d`; basis 0 is the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MubSet {
    pub dimension: usize,
    /// `bases[alpha][m]` is the state vector `|psi_m^alpha>`.
    pub bases: Vec<Vec<Vec<Complex64>>>,
}

impl MubSet {
    pub fn basis_count(&self) -> usize {
        self.bases.len()
    }

    pub fn state(&self, alpha: usize, m: usize) -> &[Complex64] {
        &self.bases[alpha][m]
    }

    /// `<psi_a | psi_b>`.
    pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    /// Largest deviation from `|<psi_m^a|psi_n^b>|^2 = delta_mn` (same basis)
    /// or `1/d` (different bases).
    pub fn unbiasedness_error(&self) -> f64 {
        let d = self.dimension as f64;
        let mut worst = 0.0f64;
        for (a, ba) in self.bases.iter().enumerate() {
            for (b, bb) in self.bases.iter().enumerate() {
                for (m, u) in ba.iter().enumerate() {
                    for (n, v) in bb.iter().enumerate() {
                        let p = Self::inner(u, v).norm_sqr();
                        let expect = match (a == b, m == n) {
                            (true, true) => 1.0,
                            (true, false) => 0.0,
                            (false, _) => 1.0 / d,
                        };
                        worst = worst.max((p - expect).abs());
                    }
                }
            }
        }
        worst
    }
}

fn is_prime(d: usize) -> bool {
    d >= 2 && (2..d).take_while(|k| k * k <= d).all(|k| d % k != 0)
}

fn computational(d: usize) -> Vec<Vec<Complex64>> {
    (0..d)
        .map(|m| (0..d).map(|j| Complex64::new(if j == m { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect()
}

/// MUBs for prime `p`: the computational basis plus
/// `|psi_t^alpha> = p^(-1/2) sum_j (w^t)^(p - j) (w^(-alpha))^(s_j) |j>`
/// with `w = exp(2 pi i / p)` and `s_j = j + (j + 1) + ... + (p - 1)`.
///
/// For `p = 2` the quadratic phase `s_j` is constant and the formula yields the
/// same basis for both `alpha`; the second basis is then the `sigma_y`
/// eigenbasis `(1, ±i)/sqrt(2)`. `d = 4` is delegated to [`build_mubs_dim4`].
pub fn build_mubs(d: usize) -> Result<MubSet> {
    if d == 4 {
        return Ok(build_mubs_dim4());
    }
    if !is_prime(d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let norm = 1.0 / (d as f64).sqrt();
    let w = |k: i64| Complex64::from_polar(norm, 2.0 * PI * (k.rem_euclid(d as i64)) as f64 / d as f64);
    let s = |j: usize| -> i64 { (j..d).map(|k| k as i64).sum() };
    let mut bases = vec![computational(d)];
    let alphas = if d == 2 { 1 } else { d };
    for alpha in 0..alphas as i64 {
        let basis = (0..d as i64)
            .map(|t| (0..d).map(|j| w(t * (d as i64 - j as i64) - alpha * s(j))).collect())
            .collect();
        bases.push(basis);
    }
    if d == 2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        bases.push(vec![
            vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)],
            vec![Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
        ]);
    }
    Ok(MubSet { dimension: d, bases })
}

/// The explicit five bases for `d = 4`.
pub fn build_mubs_dim4() -> MubSet {
    let c = |re: f64, im: f64| Complex64::new(re / 2.0, im / 2.0);
    let r = |v: [f64; 4]| v.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>();
    let b1 = vec![r([1., 1., 1., 1.]), r([1., -1., -1., 1.]), r([1., 1., -1., -1.]), r([1., -1., 1., -1.])];
    let b2 = vec![
        vec![c(1., 0.), c(0., 1.), c(0., 1.), c(-1., 0.)],
        vec![c(1., 0.), c(0., -1.), c(0., -1.), c(-1., 0.)],
        vec![c(1., 0.), c(0., 1.), c(0., -1.), c(1., 0.)],
        vec![c(1., 0.), c(0., -1.), c(0., 1.), c(1., 0.)],
    ];
    let b3 = vec![
        vec![c(1., 0.), c(1., 0.), c(0., -1.), c(0., 1.)],
        vec![c(1., 0.), c(-1., 0.), c(0., 1.), c(0., 1.)],
        vec![c(1., 0.), c(1., 0.), c(0., 1.), c(0., -1.)],
        vec![c(1., 0.), c(-1., 0.), c(0., -1.), c(0., -1.)],
    ];
    let b4 = vec![
        vec![c(1., 0.), c(0., -1.), c(1., 0.), c(0., 1.)],
        vec![c(1., 0.), c(0., 1.), c(-1., 0.), c(0., 1.)],
        vec![c(1., 0.), c(0., 1.), c(1., 0.), c(0., -1.)],
        vec![c(1., 0.), c(0., -1.), c(-1., 0.), c(0., -1.)],
    ];
    MubSet { dimension: 4, bases: vec![computational(4), b1, b2, b3, b4] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_first_basis_is_x() {
        let m = build_mubs(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = m.state(1, 0);
        let minus = m.state(1, 1);
        assert!((plus[0] - h).norm() < 1e-15 && (plus[1] - h).norm() < 1e-15);
        assert!((minus[0] * minus[1].conj() / minus[0].norm_sqr()).re < -0.999);
    }

    #[test]
    fn prime_sets_are_unbiased() {
        for d in [2, 3, 5, 7] {
            let m = build_mubs(d).unwrap();
            assert_eq!(m.basis_count(), d + 1);
            assert!(m.unbiasedness_error() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn dim4_set() {
        let m = build_mubs_dim4();
        assert_eq!(m.basis_count(), 5);
        assert_eq!(m.bases.iter().map(Vec::len).sum::<usize>(), 20);
        assert_eq!(m.state(2, 0), &[Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.5), Complex64::new(-0.5, 0.0)]);
        assert!(m.unbiasedness_error() < 1e-12);
    }

    #[test]
    fn composite_dimensions_are_rejected() {
        assert!(matches!(build_mubs(6), Err(Error::UnsupportedDimension(6))));
        assert!(build_mubs(1).is_err());
    }
}

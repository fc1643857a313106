//! Generalized Gell-Mann operator basis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// `d^2` Hermitian, trace-orthonormal operators: `Tr(s_m^† s_n) = delta_mn`.
///
/// Ordering: `s_0 = I / sqrt(d)`, then for each pair `j < k` the symmetric and
/// antisymmetric generators, then the `d - 1` diagonal generators. With this
/// normalization `sum_m s_m^† s_m = d I`.
#[derive(Debug, Clone, PartialEq)]
pub struct GellMannBasis {
    pub dimension: usize,
    pub elements: Vec<CMatrix>,
}

impl GellMannBasis {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        let zero = Complex64::new(0.0, 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut elements = Vec::with_capacity(d * d);
        elements.push(CMatrix::from_diagonal_element(d, d, Complex64::new(1.0 / (d as f64).sqrt(), 0.0)));
        for j in 0..d {
            for k in j + 1..d {
                let mut sym = CMatrix::from_element(d, d, zero);
                sym[(j, k)] = Complex64::new(h, 0.0);
                sym[(k, j)] = Complex64::new(h, 0.0);
                elements.push(sym);
                let mut anti = CMatrix::from_element(d, d, zero);
                anti[(j, k)] = Complex64::new(0.0, -h);
                anti[(k, j)] = Complex64::new(0.0, h);
                elements.push(anti);
            }
        }
        for l in 1..d {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut diag = CMatrix::from_element(d, d, zero);
            for j in 0..l {
                diag[(j, j)] = Complex64::new(norm, 0.0);
            }
            diag[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
            elements.push(diag);
        }
        Ok(Self { dimension: d, elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

//! Cached 2-D FFT plans over row-major complex buffers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    rows: usize,
    cols: usize,
    fwd_row: Arc<dyn Fft<f64>>,
    inv_row: Arc<dyn Fft<f64>>,
    fwd_col: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
}

static PLANS: OnceLock<Mutex<HashMap<(usize, usize), Arc<Fft2>>>> = OnceLock::new();

/// Returns a shared plan for a `rows x cols` transform.
pub fn plan(rows: usize, cols: usize) -> Arc<Fft2> {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((rows, cols))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft2 {
                rows,
                cols,
                fwd_row: planner.plan_fft_forward(cols),
                inv_row: planner.plan_fft_inverse(cols),
                fwd_col: planner.plan_fft_forward(rows),
                inv_col: planner.plan_fft_inverse(rows),
            })
        })
        .clone()
}

impl Fft2 {
    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd_row, &self.fwd_col);
    }

    /// Inverse transform including the `1/(rows*cols)` factor, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv_row, &self.inv_col);
        let scale = 1.0 / (self.rows * self.cols) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.rows * self.cols, "fft buffer size mismatch");
        let zero = Complex64::new(0.0, 0.0);
        let mut scratch = vec![zero; row.get_inplace_scratch_len().max(col.get_inplace_scratch_len())];
        row.process_with_scratch(data, &mut scratch);
        let mut t = vec![zero; data.len()];
        transpose_into(data, &mut t, self.rows, self.cols);
        col.process_with_scratch(&mut t, &mut scratch);
        transpose_into(&t, data, self.cols, self.rows);
    }
}

fn transpose_into(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_rectangular() {
        let p = plan(8, 32);
        let orig: Vec<Complex64> =
            (0..256).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut buf = orig.clone();
        p.forward(&mut buf);
        p.inverse(&mut buf);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn delta_transforms_to_constant() {
        let p = plan(4, 4);
        let mut buf = vec![Complex64::new(0.0, 0.0); 16];
        buf[0] = Complex64::new(1.0, 0.0);
        p.forward(&mut buf);
        assert!(buf.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }
}

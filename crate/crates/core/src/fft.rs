//! d-dimensional cyclic FFT on flat row-major arrays (d axes of equal size).

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLAN_CACHE: RefCell<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>> =
        RefCell::new(HashMap::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLAN_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

/// In-place FFT along every axis of a d-dimensional N^d array.
fn transform(data: &mut [Complex64], d: usize, n: usize, inverse: bool) {
    let (fwd, inv) = plans(n);
    let fft = if inverse { inv } else { fwd };
    let total = data.len();
    debug_assert_eq!(total, n.pow(d as u32));
    let mut lane = vec![Complex64::default(); n];
    for axis in 0..d {
        // stride between consecutive elements along `axis` (row-major)
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for k in 0..n {
                    lane[k] = data[start + k * stride];
                }
                fft.process(&mut lane);
                for k in 0..n {
                    data[start + k * stride] = lane[k];
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Spectrum of a real array.
pub(crate) fn forward_real(values: &[f64], d: usize, n: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut data, d, n, false);
    data
}

/// Cyclic convolution via pointwise spectral product; output is real.
pub(crate) fn convolve_spectra(
    field_spectrum: &mut [Complex64],
    kernel_spectrum: &[Complex64],
    d: usize,
    n: usize,
) -> Vec<f64> {
    for (a, b) in field_spectrum.iter_mut().zip(kernel_spectrum) {
        *a *= b;
    }
    transform(field_spectrum, d, n, true);
    field_spectrum.iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_2d() {
        let n = 6;
        let vals: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut spec = forward_real(&vals, 2, n);
        transform(&mut spec, 2, n, true);
        for (a, b) in spec.iter().zip(&vals) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }
}

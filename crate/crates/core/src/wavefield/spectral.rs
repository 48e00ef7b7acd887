//! In-place 3D FFTs over row-major buffers.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Unnormalised forward FFT, or inverse FFT scaled by `1/N` when `inverse`.
pub fn fft3(buf: &mut [Complex64], shape: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plans: Vec<Arc<dyn Fft<f64>>> = shape
        .iter()
        .map(|&n| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) })
        .collect();
    fft3_with(buf, shape, &plans);
    if inverse {
        let s = 1.0 / (shape[0] * shape[1] * shape[2]) as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Applies the three axis plans; no normalisation.
pub fn fft3_with(buf: &mut [Complex64], shape: [usize; 3], plans: &[Arc<dyn Fft<f64>>]) {
    let [n0, n1, n2] = shape;
    assert_eq!(buf.len(), n0 * n1 * n2);
    // last axis is contiguous
    plans[2].process(buf);
    let mut line = vec![Complex64::new(0.0, 0.0); n0.max(n1)];
    for i in 0..n0 {
        for k in 0..n2 {
            for j in 0..n1 {
                line[j] = buf[(i * n1 + j) * n2 + k];
            }
            plans[1].process(&mut line[..n1]);
            for j in 0..n1 {
                buf[(i * n1 + j) * n2 + k] = line[j];
            }
        }
    }
    for j in 0..n1 {
        for k in 0..n2 {
            for i in 0..n0 {
                line[i] = buf[(i * n1 + j) * n2 + k];
            }
            plans[0].process(&mut line[..n0]);
            for i in 0..n0 {
                buf[(i * n1 + j) * n2 + k] = line[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_single_mode() {
        let shape = [4, 6, 8];
        let n = 4 * 6 * 8;
        let orig: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * 0.37).sin(), 0.0)).collect();
        let mut b = orig.clone();
        fft3(&mut b, shape, false);
        fft3(&mut b, shape, true);
        for (a, c) in orig.iter().zip(&b) {
            assert!((a - c).norm() < 1e-12);
        }
        // constant -> only DC
        let mut c = vec![Complex64::new(1.0, 0.0); n];
        fft3(&mut c, shape, false);
        assert!((c[0].re - n as f64).abs() < 1e-10);
        assert!(c[1..].iter().all(|v| v.norm() < 1e-10));
    }
}

//! Sobolev norms on the raster and Littlewood-Paley ratios.
//!
//! `||u||_{H^s}^2` is the discrete spectral norm of the samples, weighted by
//! either `(1 + |2 pi xi|^2)^s` or `(1 + |2 pi xi|)^(2s)`. The two weights are
//! equivalent within a factor `2^|s|`; the ratios against each are returned as
//! the (lower, upper) pair.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{CoeffVec, Dictionary};
use crate::error::{PatError, Result};
use crate::wavefield::grid::ScalarField3;
use crate::wavefield::spectral::fft3;

fn weights(xi2: f64, s: f64) -> (f64, f64) {
    let a = 4.0 * PI * PI * xi2;
    ((1.0 + a).powf(s), (1.0 + a.sqrt()).powf(2.0 * s))
}

/// Both spectral `H^s` norms (squared) of a sampled field.
pub fn h_s_norm_sq(u: &ScalarField3, s: f64) -> (f64, f64) {
    let g = u.grid;
    let mut buf: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3(&mut buf, g.shape, false);
    let n = g.len() as f64;
    let mut acc = (0.0, 0.0);
    for i in 0..g.shape[0] {
        let f0 = g.frequency(0, i);
        for j in 0..g.shape[1] {
            let f1 = g.frequency(1, j);
            for k in 0..g.shape[2] {
                let f2 = g.frequency(2, k);
                let p = buf[g.index(i, j, k)].norm_sqr();
                let (w1, w2) = weights(f0 * f0 + f1 * f1 + f2 * f2, s);
                acc.0 += w1 * p;
                acc.1 += w2 * p;
            }
        }
    }
    let c = g.cell_volume() / n;
    (acc.0 * c, acc.1 * c)
}

fn weighted_coeff_sum(dict: &Dictionary, x: &CoeffVec, s: f64) -> f64 {
    x.values
        .iter()
        .zip(&dict.atoms)
        .map(|(v, a)| (2f64).powf(2.0 * s * a.index.dilation() as f64) * v * v)
        .sum()
}

fn order(r1: f64, r2: f64) -> (f64, f64) {
    (r1.min(r2), r1.max(r2))
}

/// Littlewood-Paley ratios of a field on an aligned grid.
pub fn littlewood_paley_ratio(u: &ScalarField3, s: f64, dict: &Dictionary) -> Result<(f64, f64)> {
    check_s(s)?;
    let x = dict.analyze(u, dict.j_max)?;
    let (n1, n2) = h_s_norm_sq(u, s);
    if n1 == 0.0 {
        return Err(PatError::InvalidConfig("zero field has no Littlewood-Paley ratio".into()));
    }
    let c = weighted_coeff_sum(dict, &x, s);
    Ok(order(c / n1, c / n2))
}

fn check_s(s: f64) -> Result<()> {
    if !(s > -2.0 && s < 2.0) {
        return Err(PatError::InvalidConfig(format!("Sobolev exponent {s} outside (-2, 2)")));
    }
    Ok(())
}

/// Same ratios for `u = synthesize(x)`, computed from per-atom 1D DFTs on the
/// native raster without materialising the field.
pub fn littlewood_paley_ratio_coeffs(x: &CoeffVec, s: f64, dict: &Dictionary) -> Result<(f64, f64)> {
    check_s(s)?;
    let (n1, n2) = coeff_h_s_norm_sq(x, s, dict);
    if n1 == 0.0 {
        return Err(PatError::InvalidConfig("zero field has no Littlewood-Paley ratio".into()));
    }
    let c = weighted_coeff_sum(dict, x, s);
    Ok(order(c / n1, c / n2))
}

/// Both spectral `H^s` norms of `synthesize(x)` on the native raster.
pub fn coeff_h_s_norm_sq(x: &CoeffVec, s: f64, dict: &Dictionary) -> (f64, f64) {
    let grid = dict.raster_grid();
    let shape = grid.shape;
    let kfirst: [i64; 3] = std::array::from_fn(|i| {
        ((dict.k_box.lo[i] - dict.geometry.origin[i]) / dict.cell()).round() as i64
    });
    let mut planner = FftPlanner::<f64>::new();
    let ffts: Vec<_> = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
    let dft = |axis: usize, p: &super::Profile1D| -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); shape[axis]];
        for (k, &val) in p.values.iter().enumerate() {
            let m = p.first - kfirst[axis] + k as i64;
            if m >= 0 && (m as usize) < shape[axis] {
                v[m as usize].re = val;
            }
        }
        ffts[axis].process(&mut v);
        v
    };
    // group atoms sharing the third factor
    let mut keys: HashMap<(i64, usize, bool), usize> = HashMap::new();
    let mut third: Vec<Vec<Complex64>> = Vec::new();
    let mut planes: Vec<Vec<Complex64>> = Vec::new();
    let plane_len = shape[0] * shape[1];
    for (a, &xa) in x.values.iter().enumerate() {
        if xa == 0.0 {
            continue;
        }
        let atom = &dict.atoms[a];
        let f3 = &atom.factors[2];
        let key = (f3.first, f3.values.len(), atom.index.eps.is_wavelet_axis(2));
        let gi = *keys.entry(key).or_insert_with(|| {
            third.push(dft(2, f3));
            planes.push(vec![Complex64::new(0.0, 0.0); plane_len]);
            third.len() - 1
        });
        let d0 = dft(0, &atom.factors[0]);
        let d1 = dft(1, &atom.factors[1]);
        let pl = &mut planes[gi];
        for i in 0..shape[0] {
            let a0 = d0[i] * xa;
            for j in 0..shape[1] {
                pl[i * shape[1] + j] += a0 * d1[j];
            }
        }
    }
    let f: [Vec<f64>; 3] = std::array::from_fn(|ax| (0..shape[ax]).map(|k| grid.frequency(ax, k)).collect());
    let mut acc = (0.0, 0.0);
    let ng = planes.len();
    let mut gvals = vec![Complex64::new(0.0, 0.0); ng];
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for (g, pl) in planes.iter().enumerate() {
                gvals[g] = pl[i * shape[1] + j];
            }
            let base = f[0][i] * f[0][i] + f[1][j] * f[1][j];
            for k in 0..shape[2] {
                let mut u = Complex64::new(0.0, 0.0);
                for g in 0..ng {
                    u += gvals[g] * third[g][k];
                }
                let (w1, w2) = weights(base + f[2][k] * f[2][k], s);
                let p = u.norm_sqr();
                acc.0 += w1 * p;
                acc.1 += w2 * p;
            }
        }
    }
    let c = grid.cell_volume() / grid.len() as f64;
    (acc.0 * c, acc.1 * c)
}

//! Point evaluation of grid fields and restriction to the sphere.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::grid::ScalarField3;
use super::spectral::fft3;
use crate::error::{PatError, Result};
use crate::geom::{norm, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Trilinear,
    /// Tensor Lagrange interpolation with `p` (even) points per axis.
    Lagrange(usize),
    /// Trigonometric interpolation (exact for band-limited periodic data).
    Spectral,
}

/// Stencil start and weights of `p`-point Lagrange interpolation at `u`
/// (in grid units).
fn lagrange_weights(u: f64, p: usize, w: &mut [f64]) -> i64 {
    let i0 = u.floor() as i64 - (p as i64 / 2 - 1);
    for (a, wa) in w.iter_mut().enumerate().take(p) {
        let xa = (i0 + a as i64) as f64;
        let mut v = 1.0;
        for b in 0..p {
            if b != a {
                let xb = (i0 + b as i64) as f64;
                v *= (u - xb) / (xa - xb);
            }
        }
        *wa = v;
    }
    i0
}

fn wrap(i: i64, n: usize, periodic: bool) -> Option<usize> {
    if periodic {
        Some(i.rem_euclid(n as i64) as usize)
    } else if i >= 0 && (i as usize) < n {
        Some(i as usize)
    } else {
        None
    }
}

/// Local polynomial interpolation (`p = 2` is trilinear).
pub fn interpolate_lagrange(u: &ScalarField3, x: Vec3, p: usize) -> f64 {
    assert!(p >= 2 && p % 2 == 0 && p <= 12);
    let g = &u.grid;
    let mut w = [[0.0; 12]; 3];
    let mut i0 = [0i64; 3];
    for ax in 0..3 {
        let t = (x[ax] - g.origin[ax]) / g.spacing;
        i0[ax] = lagrange_weights(t, p, &mut w[ax]);
    }
    let mut s = 0.0;
    for a in 0..p {
        let Some(ia) = wrap(i0[0] + a as i64, g.shape[0], g.periodic) else { continue };
        for b in 0..p {
            let Some(ib) = wrap(i0[1] + b as i64, g.shape[1], g.periodic) else { continue };
            let wab = w[0][a] * w[1][b];
            let row = g.index(ia, ib, 0);
            for c in 0..p {
                let Some(ic) = wrap(i0[2] + c as i64, g.shape[2], g.periodic) else { continue };
                s += wab * w[2][c] * u.values[row + ic];
            }
        }
    }
    s
}

/// Spectral interpolant, prepared once per field.
pub struct SpectralInterpolant {
    field: ScalarField3,
    spectrum: Vec<Complex64>,
}

impl SpectralInterpolant {
    pub fn new(u: &ScalarField3) -> Self {
        let mut spectrum: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft3(&mut spectrum, u.grid.shape, false);
        let s = 1.0 / u.grid.len() as f64;
        for v in &mut spectrum {
            *v *= s;
        }
        SpectralInterpolant { field: u.clone(), spectrum }
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        let g = &self.field.grid;
        let ph: [Vec<Complex64>; 3] = std::array::from_fn(|ax| {
            let d = x[ax] - g.origin[ax];
            (0..g.shape[ax])
                .map(|k| {
                    let a = 2.0 * PI * g.frequency(ax, k) * d;
                    Complex64::new(a.cos(), a.sin())
                })
                .collect()
        });
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..g.shape[0] {
            for j in 0..g.shape[1] {
                let pij = ph[0][i] * ph[1][j];
                let row = g.index(i, j, 0);
                let mut t = Complex64::new(0.0, 0.0);
                for k in 0..g.shape[2] {
                    t += self.spectrum[row + k] * ph[2][k];
                }
                s += pij * t;
            }
        }
        s.re
    }
}

pub fn interpolate(u: &ScalarField3, x: Vec3, method: Interp) -> f64 {
    match method {
        Interp::Trilinear => interpolate_lagrange(u, x, 2),
        Interp::Lagrange(p) => interpolate_lagrange(u, x, p),
        Interp::Spectral => SpectralInterpolant::new(u).eval(x),
    }
}

pub fn check_on_sphere(nodes: &[Vec3], r: f64) -> Result<()> {
    for (k, x) in nodes.iter().enumerate() {
        if (norm(*x) - r).abs() > 1e-9 * r {
            return Err(PatError::OffSphere(format!("node {k} has radius {} != {r}", norm(*x))));
        }
    }
    Ok(())
}

/// Values of `u` at sphere nodes.
pub fn restrict_to_sphere(u: &ScalarField3, nodes: &[Vec3], r: f64, method: Interp) -> Result<Vec<f64>> {
    check_on_sphere(nodes, r)?;
    if r >= u.grid.half_width() && u.grid.periodic {
        return Err(PatError::InvalidConfig("sphere does not fit in the grid".into()));
    }
    Ok(match method {
        Interp::Spectral => {
            let s = SpectralInterpolant::new(u);
            nodes.iter().map(|x| s.eval(*x)).collect()
        }
        Interp::Trilinear => nodes.iter().map(|x| interpolate_lagrange(u, *x, 2)).collect(),
        Interp::Lagrange(p) => nodes.iter().map(|x| interpolate_lagrange(u, *x, p)).collect(),
    })
}

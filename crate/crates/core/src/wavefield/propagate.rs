//! Periodic spectral propagator `u(t) = F^-1 cos(2 pi |xi| t) F u0`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{Grid3, ScalarField3};
use super::spectral::fft3_with;
use crate::error::{PatError, Result};

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || n_steps == 0 {
            return Err(PatError::InvalidConfig("time grid needs T > 0 and n_steps >= 1".into()));
        }
        Ok(TimeGrid { t_final, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt()).collect()
    }

    /// Trapezoid weights for `int_0^T`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps)
            .map(|k| if k == 0 || k == self.n_steps { 0.5 * dt } else { dt })
            .collect()
    }

    /// Checks `T >= 2R` and `dt <= spacing / 2`.
    pub fn validate(&self, r: f64, spacing: Option<f64>) -> Result<()> {
        if self.t_final < 2.0 * r - 1e-12 {
            return Err(PatError::InvalidConfig(format!(
                "T = {} is below 2R = {}",
                self.t_final,
                2.0 * r
            )));
        }
        if let Some(h) = spacing {
            if self.dt() > 0.5 * h + 1e-12 {
                return Err(PatError::InvalidConfig(format!(
                    "dt = {} exceeds half the grid spacing {h}",
                    self.dt()
                )));
            }
        }
        Ok(())
    }
}

/// Radius of the smallest origin-centred ball holding all samples with
/// `|u| > tol * max|u|`.
pub fn support_radius(u: &ScalarField3, tol: f64) -> f64 {
    let thr = tol * u.max_abs();
    let g = u.grid;
    let mut r2: f64 = 0.0;
    for i in 0..g.shape[0] {
        for j in 0..g.shape[1] {
            for k in 0..g.shape[2] {
                if u.values[g.index(i, j, k)].abs() > thr {
                    let p = g.node(i, j, k);
                    r2 = r2.max(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
                }
            }
        }
    }
    r2.sqrt()
}

/// Holds the spectrum of `u0` and reusable FFT plans.
pub struct Propagator {
    pub grid: Grid3,
    spectrum: Vec<Complex64>,
    freqs: [Vec<f64>; 3],
    plans: Vec<Arc<dyn Fft<f64>>>,
}

impl Propagator {
    pub fn new(u0: &ScalarField3) -> Result<Self> {
        let g = u0.grid;
        if !g.periodic {
            return Err(PatError::GridMismatch("spectral propagation needs a periodic grid".into()));
        }
        let mut planner = FftPlanner::<f64>::new();
        let fwd: Vec<Arc<dyn Fft<f64>>> = g.shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let plans: Vec<Arc<dyn Fft<f64>>> = g.shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let mut spectrum: Vec<Complex64> = u0.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft3_with(&mut spectrum, g.shape, &fwd);
        let s = 1.0 / g.len() as f64;
        for v in &mut spectrum {
            *v *= s;
        }
        let freqs = std::array::from_fn(|ax| (0..g.shape[ax]).map(|k| g.frequency(ax, k)).collect());
        Ok(Propagator { grid: g, spectrum, freqs, plans })
    }

    fn xi_norm(&self, i: usize, j: usize, k: usize) -> f64 {
        let (a, b, c) = (self.freqs[0][i], self.freqs[1][j], self.freqs[2][k]);
        (a * a + b * b + c * c).sqrt()
    }

    /// Spectral derivative factor `2 pi i xi` along `axis`, zero at Nyquist.
    fn deriv(&self, axis: usize, k: usize) -> Complex64 {
        let n = self.grid.shape[axis];
        if n % 2 == 0 && k == n / 2 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, 2.0 * PI * self.freqs[axis][k])
    }

    fn field(&self, buf: &[Complex64], imag: bool) -> ScalarField3 {
        ScalarField3 {
            grid: self.grid,
            values: buf.iter().map(|c| if imag { c.im } else { c.re }).collect(),
        }
    }

    /// `u(., t)` without any wrap-around check.
    pub fn at(&self, t: f64) -> ScalarField3 {
        let g = self.grid;
        let mut buf = self.spectrum.clone();
        for i in 0..g.shape[0] {
            for j in 0..g.shape[1] {
                for k in 0..g.shape[2] {
                    let m = (2.0 * PI * self.xi_norm(i, j, k) * t).cos();
                    buf[g.index(i, j, k)] *= m;
                }
            }
        }
        fft3_with(&mut buf, g.shape, &self.plans);
        self.field(&buf, false)
    }

    /// `[u, d1 u, d2 u, d3 u]` at time `t`, two real outputs per inverse FFT.
    pub fn at_with_gradient(&self, t: f64) -> [ScalarField3; 4] {
        let g = self.grid;
        let mut a = self.spectrum.clone();
        let mut b = self.spectrum.clone();
        let iu = Complex64::new(0.0, 1.0);
        for i in 0..g.shape[0] {
            for j in 0..g.shape[1] {
                for k in 0..g.shape[2] {
                    let idx = g.index(i, j, k);
                    let c = self.spectrum[idx] * (2.0 * PI * self.xi_norm(i, j, k) * t).cos();
                    a[idx] = c + iu * (c * self.deriv(0, i));
                    b[idx] = c * self.deriv(1, j) + iu * (c * self.deriv(2, k));
                }
            }
        }
        fft3_with(&mut a, g.shape, &self.plans);
        fft3_with(&mut b, g.shape, &self.plans);
        [self.field(&a, false), self.field(&a, true), self.field(&b, false), self.field(&b, true)]
    }

    /// Spectral gradient of `u0`.
    pub fn gradient0(&self) -> [ScalarField3; 3] {
        let [_, a, b, c] = self.at_with_gradient(0.0);
        [a, b, c]
    }
}

/// `u(., t)` for data whose wavefront cannot wrap around the periodic box.
pub fn propagate(u0: &ScalarField3, t: f64) -> Result<ScalarField3> {
    check_wrap(u0, t)?;
    if t == 0.0 {
        return Ok(u0.clone());
    }
    Ok(Propagator::new(u0)?.at(t))
}

/// `u(., t)` of the periodic problem, no support requirement.
pub fn propagate_periodic(u0: &ScalarField3, t: f64) -> Result<ScalarField3> {
    if t == 0.0 {
        return Ok(u0.clone());
    }
    Ok(Propagator::new(u0)?.at(t))
}

pub fn check_wrap(u0: &ScalarField3, t: f64) -> Result<()> {
    let rs = support_radius(u0, 1e-8);
    let l = u0.grid.half_width();
    if rs + t.abs() > l {
        return Err(PatError::WrapAround(format!(
            "support radius {rs:.4} + t {t:.4} exceeds half width {l:.4}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(grid: Grid3, c: [f64; 3], s: f64) -> ScalarField3 {
        ScalarField3::from_fn(grid, |p| {
            let r2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
            (-r2 / (2.0 * s * s)).exp()
        })
    }

    #[test]
    fn time_zero_is_identity() {
        let g = Grid3::periodic(3.0, 16).unwrap();
        let u = bump(g, [0.1, 0.0, -0.2], 0.4);
        assert_eq!(propagate(&u, 0.0).unwrap(), u);
    }

    #[test]
    fn plane_wave_is_eigenfunction() {
        let g = Grid3::periodic(1.0, 16).unwrap();
        // on [-1,1)^3 integer mode vectors are k / 2
        let kv = [1.0, 0.5, -1.5];
        let u = ScalarField3::from_fn(g, |p| (2.0 * PI * (kv[0] * p[0] + kv[1] * p[1] + kv[2] * p[2])).cos());
        let t = 0.37;
        let v = propagate_periodic(&u, t).unwrap();
        let m = (2.0 * PI * (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]).sqrt() * t).cos();
        for (a, b) in v.values.iter().zip(&u.values) {
            assert!((a - m * b).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_bump_matches_dalembert() {
        let g = Grid3::periodic(3.0, 64).unwrap();
        let s = 0.3;
        let u = bump(g, [0.0; 3], s);
        let t = 1.0;
        let v = propagate(&u, t).unwrap();
        let gr = |r: f64| (-r * r / (2.0 * s * s)).exp();
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for i in 32..64 {
            let r = g.coord(0, i);
            if r < 0.2 {
                continue;
            }
            let want = ((r - t) * gr(r - t) + (r + t) * gr(r + t)) / (2.0 * r);
            let got = v.values[g.index(i, 32, 32)];
            worst = worst.max((got - want).abs());
            peak = peak.max(want.abs());
        }
        assert!(worst < 1e-3 * peak, "{worst} vs {peak}");
    }

    #[test]
    fn cosine_product_to_sum() {
        let g = Grid3::periodic(3.0, 32).unwrap();
        let u = bump(g, [0.2, -0.1, 0.0], 0.35);
        let t = 0.6;
        let p = Propagator::new(&u).unwrap();
        let once = p.at(t);
        let twice = Propagator::new(&once).unwrap().at(t);
        let two_t = p.at(2.0 * t);
        for k in 0..u.values.len() {
            let want = 0.5 * (two_t.values[k] + u.values[k]);
            assert!((twice.values[k] - want).abs() < 1e-8);
        }
        assert!(once.l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn wrap_around_refused() {
        let g = Grid3::periodic(2.0, 32).unwrap();
        let u = bump(g, [0.0; 3], 0.1);
        assert!(matches!(propagate(&u, 1.9), Err(PatError::WrapAround(_))));
    }

    #[test]
    fn gradient_packing_matches_analytic() {
        let g = Grid3::periodic(3.0, 64).unwrap();
        let c = [0.1, -0.2, 0.05];
        let sg = 0.35;
        let u = bump(g, c, sg);
        let p = Propagator::new(&u).unwrap();
        let [v, d1, d2, d3] = p.at_with_gradient(0.0);
        let w = p.at(0.5);
        let [v5, ..] = p.at_with_gradient(0.5);
        let mut worst: f64 = 0.0;
        for k in 0..v.values.len() {
            assert!((v5.values[k] - w.values[k]).abs() < 1e-12);
            let x = g.node(k / (64 * 64), (k / 64) % 64, k % 64);
            let want: [f64; 3] = std::array::from_fn(|a| -(x[a] - c[a]) / (sg * sg) * u.values[k]);
            worst = worst
                .max((d1.values[k] - want[0]).abs())
                .max((d2.values[k] - want[1]).abs())
                .max((d3.values[k] - want[2]).abs())
                .max((v.values[k] - u.values[k]).abs());
        }
        assert!(worst < 1e-8, "{worst}");
    }
}

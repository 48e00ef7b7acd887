//! Orthonormal Daubechies low-pass filters built by spectral factorisation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};

/// Tolerance for the quadrature-mirror conditions.
pub const QMF_TOL: f64 = 1e-12;

/// Hölder exponents of the Daubechies scaling functions with 2..=10 vanishing moments.
const HOLDER: [f64; 9] = [0.550, 1.088, 1.618, 1.969, 2.189, 2.460, 2.761, 3.073, 3.381];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter1D {
    pub name: String,
    pub lowpass_taps: Vec<f64>,
    /// First integer of the scaling function support; the support is
    /// `[support_offset, support_offset + taps - 1]`.
    pub support_offset: i32,
    /// Integer part of the Hölder regularity of the scaling function.
    pub smoothness_order: u32,
}

impl Filter1D {
    /// Wraps raw taps, rejecting anything that fails the orthonormality conditions.
    pub fn from_taps(name: &str, taps: Vec<f64>, smoothness_order: u32) -> Result<Self> {
        let f = Filter1D {
            name: name.to_string(),
            lowpass_taps: taps,
            support_offset: 0,
            smoothness_order,
        };
        f.validate()?;
        Ok(f)
    }

    /// Daubechies filter with `p` vanishing moments (`2p` taps).
    pub fn daubechies(p: usize) -> Result<Self> {
        if !(1..=10).contains(&p) {
            return Err(PatError::InvalidConfig(format!(
                "Daubechies order {p} outside supported range 1..=10"
            )));
        }
        let taps = daubechies_taps(p);
        let smooth = if p == 1 { 0 } else { HOLDER[p - 2].floor() as u32 };
        Filter1D::from_taps(&format!("db{p}"), taps, smooth)
    }

    /// Parses names like `db2`, `db4` or `haar`.
    pub fn by_name(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        if lower == "haar" {
            return Filter1D::daubechies(1);
        }
        let p = lower
            .strip_prefix("db")
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| PatError::InvalidConfig(format!("unknown filter '{name}'")))?;
        Filter1D::daubechies(p)
    }

    pub fn len(&self) -> usize {
        self.lowpass_taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass_taps.is_empty()
    }

    /// Length of the 1D support `L_s = taps - 1`.
    pub fn support_len(&self) -> usize {
        self.lowpass_taps.len() - 1
    }

    /// Hölder exponent from the published table, if known.
    pub fn holder_exponent(&self) -> Option<f64> {
        let p = self.lowpass_taps.len() / 2;
        match p {
            1 => Some(0.0),
            2..=10 => Some(HOLDER[p - 2]),
            _ => None,
        }
    }

    /// High-pass taps `g_k = (-1)^k h_{L-1-k}`.
    pub fn highpass_taps(&self) -> Vec<f64> {
        let h = &self.lowpass_taps;
        let l = h.len();
        (0..l)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                s * h[l - 1 - k]
            })
            .collect()
    }

    /// Largest violation of `sum h = sqrt 2` and `sum_k h_k h_{k+2m} = delta_m0`.
    pub fn qmf_defect(&self) -> f64 {
        let h = &self.lowpass_taps;
        let mut worst = (h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs();
        let mut m = 0;
        while 2 * m < h.len() {
            let s: f64 = (0..h.len() - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
            m += 1;
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.lowpass_taps;
        if h.len() < 2 || h.len() % 2 != 0 {
            return Err(PatError::InvalidFilter(format!(
                "filter needs an even number of taps, got {}",
                h.len()
            )));
        }
        let d = self.qmf_defect();
        if !(d <= QMF_TOL) {
            return Err(PatError::InvalidFilter(format!(
                "{}: quadrature-mirror defect {d:e} exceeds {QMF_TOL:e}",
                self.name
            )));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn poly_eval(coef: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    // coef in ascending order; returns value and derivative
    let mut v = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for c in coef.iter().rev() {
        d = d * z + v;
        v = v * z + c;
    }
    (v, d)
}

/// Roots of a real polynomial given by ascending coefficients, via the
/// companion matrix followed by Newton polishing.
fn real_poly_roots(coef: &[f64]) -> Vec<Complex64> {
    let deg = coef.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = coef[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coef[i] / lead;
    }
    let ccoef: Vec<Complex64> = coef.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    comp.complex_eigenvalues()
        .iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..8 {
                let (v, d) = poly_eval(&ccoef, z);
                if d.norm() == 0.0 {
                    break;
                }
                let step = v / d;
                z -= step;
                if step.norm() < 1e-17 * z.norm().max(1.0) {
                    break;
                }
            }
            z
        })
        .collect()
}

fn daubechies_taps(p: usize) -> Vec<f64> {
    // P(y) = sum_{k<p} C(p-1+k, k) y^k, y = sin^2(w/2); each root y_k gives a
    // pair z, 1/z of z^2 - (2 - 4y) z + 1; keep the one inside the unit circle.
    let pc: Vec<f64> = (0..p).map(|k| binomial(p - 1 + k, k)).collect();
    let yroots = real_poly_roots(&pc);
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    let mul = |poly: &mut Vec<Complex64>, root: Complex64| {
        let mut out = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            out[i + 1] += c;
            out[i] -= c * root;
        }
        *poly = out;
    };
    for y in yroots {
        let b = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) / 2.0;
        let z2 = (b - disc) / 2.0;
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        mul(&mut poly, z);
    }
    for _ in 0..p {
        mul(&mut poly, Complex64::new(-1.0, 0.0));
    }
    // descending coefficients give the minimum-phase ordering h_0 .. h_{2p-1}
    let mut taps: Vec<f64> = poly.iter().rev().map(|c| c.re).collect();
    let s: f64 = taps.iter().sum();
    for t in &mut taps {
        *t *= std::f64::consts::SQRT_2 / s;
    }
    taps
}

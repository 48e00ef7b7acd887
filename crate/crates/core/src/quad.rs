//! Gauss-Legendre rules and product rules on the unit sphere.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

use crate::geom::Vec3;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`
/// (Golub-Welsch), sorted by node.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrise to remove eigen-solver noise
    for i in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| a + h * (t + 1.0)).collect(), w.iter().map(|v| v * h).collect())
}

/// Product rule on the unit sphere exact for spherical harmonics of degree
/// `<= degree`: Gauss-Legendre in `cos theta` times the trapezoid rule in `phi`.
/// Weights sum to `4 pi`.
pub fn sphere_rule(degree: usize) -> Vec<(Vec3, f64)> {
    let nt = degree / 2 + 1;
    let np = degree + 1;
    let (u, w) = gauss_legendre(nt);
    let mut out = Vec::with_capacity(nt * np);
    for (ui, wi) in u.iter().zip(&w) {
        let s = (1.0 - ui * ui).max(0.0).sqrt();
        for k in 0..np {
            let p = 2.0 * PI * (k as f64 + 0.5) / np as f64;
            out.push(([s * p.cos(), s * p.sin(), *ui], wi * 2.0 * PI / np as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let s: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(p as i32) * b).sum();
                let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((s - want).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn sphere_rule_exact_for_low_degree() {
        let rule = sphere_rule(12);
        let total: f64 = rule.iter().map(|r| r.1).sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        // int x^4 y^2 z^6 dsigma = 4 pi * 3!! 1!! 5!! / 15!!-style ratio
        let s: f64 = rule.iter().map(|(p, w)| p[0].powi(4) * p[1].powi(2) * p[2].powi(6) * w).sum();
        // closed form: 2 G(5/2)G(3/2)G(7/2)/G(15/2)
        let g = |x: f64| statrs::function::gamma::gamma(x);
        let want = 2.0 * g(2.5) * g(1.5) * g(3.5) / g(7.5);
        assert!((s - want).abs() < 1e-13, "{s} vs {want}");
    }
}

use super::*;
use crate::wavelet3d::{build_dictionary, Filter1D, LatticeGeometry};

/// Exact `D(t^2)` of a unit radial Gaussian of width `s` seen from distance `r`.
fn gaussian_d(r: f64, s: f64, t: f64) -> f64 {
    let g = |p: f64| (-p * p / (2.0 * s * s)).exp();
    PI * s * s / r * (g(r - t) - g(r + t))
}

fn gaussian_avg_oracle(r: f64, s: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let a = if k == 0 { 0.0 } else { (k as f64 - 0.5) * dt };
            let b = (k as f64 + 0.5) * dt;
            (gaussian_d(r, s, b) - gaussian_d(r, s, a)) / (2.0 * PI * (b - a))
        })
        .collect()
}

#[test]
fn gaussian_matches_dalembert() {
    let s = 0.2;
    let c = [0.1, -0.2, 0.05];
    let x = [1.5, 0.0, 0.0];
    let r = crate::geom::dist(x, c);
    let term = SeparableTerm::gaussian(c, s, 1.0);
    let n = 150;
    let dt = 0.02;
    let oracle = gaussian_avg_oracle(r, s, dt, n);
    let peak = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut errs = Vec::new();
    for kappa in [0.5, 0.25] {
        let eng = RadialEngine::new(dt, n, kappa);
        let tr = eng.trace(&term, x);
        let err = tr.iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / peak;
        errs.push(err);
    }
    assert!(errs[0] < 2e-3, "{errs:?}");
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn pointwise_dalembert_with_fine_cells() {
    // short time cells approach point values of the d'Alembert solution
    let s = 0.25;
    let term = SeparableTerm::gaussian([0.0; 3], s, 1.0);
    let x = [0.0, 2.0, 0.0];
    let dt = 0.002;
    let eng = RadialEngine::new(dt, 1500, 0.25);
    let tr = eng.trace(&term, x);
    let g = |p: f64| (-p * p / (2.0 * s * s)).exp();
    let r = 2.0;
    for k in [800, 900, 1000, 1100, 1200] {
        let t = k as f64 * dt;
        let want = ((r - t) * g(r - t) + (r + t) * g(r + t)) / (2.0 * r);
        assert!((tr[k] - want).abs() < 2e-3, "t={t}: {} vs {want}", tr[k]);
    }
}

#[test]
fn mass_is_conserved() {
    let term = SeparableTerm::gaussian([0.1, 0.0, 0.2], 0.15, 2.0);
    let eng = RadialEngine::new(0.02, 10, 0.5);
    let delta = 0.003;
    let rhos: Vec<f64> = (0..5000).map(|k| (k as f64 + 0.5) * delta).collect();
    let d = eng.spherical_density(&term, [1.0, 0.5, 0.0], &rhos, delta);
    let mass: f64 = d.iter().sum::<f64>() * delta;
    let want = 2.0 * (2.0 * PI * 0.15 * 0.15).powf(1.5);
    assert!((mass - want).abs() < 1e-6 * want, "{mass} vs {want}");
}

#[test]
fn atom_traces_vanish_outside_huygens_window() {
    let f = Filter1D::daubechies(2).unwrap();
    let d = build_dictionary(&f, 1, 5, LatticeGeometry::centered(0.25, 3)).unwrap();
    let eng = RadialEngine::new(0.02, 150, 0.5);
    let x = [0.3, -1.2, 0.84];
    let r = crate::geom::norm(x);
    let x = crate::geom::scale(x, 1.5 / r);
    for atom in d.atoms.iter().step_by(17) {
        let term = SeparableTerm::from_atom(atom);
        let tr = eng.trace(&term, x);
        let lo = atom.support_box.dist_to_point(x);
        let hi = atom.support_box.max_dist_to_point(x);
        let energy: f64 = tr.iter().map(|v| v * v).sum();
        assert!(energy > 0.0);
        for (k, v) in tr.iter().enumerate() {
            let t = k as f64 * eng.dt;
            if t + eng.dt / 2.0 <= lo || t - eng.dt / 2.0 >= hi {
                assert_eq!(*v, 0.0, "t={t} lo={lo} hi={hi}");
            }
        }
    }
}

#[test]
fn batch_matches_single_and_is_linear() {
    let f = Filter1D::daubechies(2).unwrap();
    let d = build_dictionary(&f, 1, 5, LatticeGeometry::centered(0.25, 3)).unwrap();
    let terms: Vec<SeparableTerm> = d.atoms.iter().map(SeparableTerm::from_atom).collect();
    let eng = RadialEngine::new(0.02, 150, 0.5);
    let x = [1.5 * 0.6, 1.5 * 0.8, 0.0];
    let dist = d.k_box.dist_to_point(x);
    let mut batch = AtomTraceBatch::new(eng, &terms);
    let all = batch.traces_at(x, dist);
    let nt = 151;
    let delta = eng.bin_width(dist);
    for a in [0, 13, 100, 215] {
        let dd = eng.spherical_density(&terms[a], x, &eng.edges_sq(), delta);
        let single = eng.averages(&dd);
        let peak = single.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..nt {
            assert!((all[a * nt + k] - single[k]).abs() <= 1e-11 * peak);
        }
    }
    // linearity of the combined trace
    let mut t2 = terms[3].clone();
    t2.coef = -2.5;
    let sum = eng.trace_sum(&[terms[7].clone(), t2], x);
    // same joint support, hence the same bin width
    let mut z3 = terms[3].clone();
    z3.coef = 0.0;
    let mut z7 = terms[7].clone();
    z7.coef = 0.0;
    let a = eng.trace_sum(&[terms[7].clone(), z3], x);
    let b = eng.trace_sum(&[z7, terms[3].clone()], x);
    for k in 0..nt {
        assert!((sum[k] - (a[k] - 2.5 * b[k])).abs() < 1e-10);
    }
}

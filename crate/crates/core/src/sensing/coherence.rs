//! Coherence of the measurement columns and the balancing defect
//! `||(I - P_F) U||` on the span of the coarse atoms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::cache::{for_each_node, ColumnCache};
use crate::error::{PatError, Result};
use crate::geom::{dist, norm, scale};
use crate::spheregeom::DetectorPartition;
use crate::wavefield::radial::SeparableTerm;
use crate::wavefield::TimeGrid;
use crate::wavelet3d::Dictionary;

use super::trapezoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// `max ||row_i(phi)||` over rows and atoms, `row_i = M_i U` or `P_i A M U`.
    pub b_raw: f64,
    /// `max ||F_i phi|| / sqrt(nu_i)`; equals `sqrt(|Sigma|) b_raw` for averages.
    pub b_nu: f64,
    /// Maximising `(row, atom)`.
    pub argmax: (usize, usize),
    /// `b_raw` restricted to each dictionary label.
    pub per_label: Vec<f64>,
    /// Mean over atoms of the fraction of rows holding more than 1% of the
    /// atom's measurement energy.
    pub huygens_fraction: f64,
}

/// Scans the first `n_atoms` columns of the cache.
pub fn coherence_bound(cache: &ColumnCache, dict: &Dictionary, n_atoms: usize) -> Result<CoherenceReport> {
    if n_atoms > cache.n_atoms {
        return Err(PatError::SizeMismatch("cache holds fewer atoms than requested".into()));
    }
    let w = trapezoid(cache.nt, cache.dt);
    let total: f64 = cache.areas.iter().sum();
    let sensed = cache.matrix_tag.is_some();
    let mut rep = CoherenceReport { b_raw: 0.0, b_nu: 0.0, argmax: (0, 0), per_label: Vec::new(), huygens_fraction: 0.0 };
    let mut energies = vec![0.0; cache.n_rows];
    let mut frac = 0.0;
    for a in 0..n_atoms {
        let label = dict.atoms[a].index.j as usize;
        if rep.per_label.len() <= label {
            rep.per_label.resize(label + 1, 0.0);
        }
        for (i, e) in energies.iter_mut().enumerate() {
            let n2: f64 = cache.column(i, a).iter().zip(&w).map(|(v, w)| w * v * v).sum();
            let n = n2.sqrt();
            // nu_i = |E_i| / |Sigma| for averages; uniform 1/N once A mixes rows
            let bn = if sensed { n * (cache.n_rows as f64).sqrt() } else { n * total.sqrt() };
            if n > rep.b_raw {
                rep.b_raw = n;
                rep.argmax = (i, a);
            }
            rep.b_nu = rep.b_nu.max(bn);
            rep.per_label[label] = rep.per_label[label].max(n);
            *e = if sensed { n2 } else { cache.areas[i] * n2 };
        }
        let sum: f64 = energies.iter().sum();
        if sum > 0.0 {
            frac += energies.iter().filter(|&&e| e > 0.01 * sum).count() as f64 / cache.n_rows as f64;
        }
    }
    rep.huygens_fraction = if n_atoms > 0 { frac / n_atoms as f64 } else { 0.0 };
    Ok(rep)
}

/// Largest `|M_i U phi|` sample outside the geometric window
/// `[d - h - diam, d + h + diam]` (padded by `dt`), relative to the column
/// maximum; `d` is the distance from the detector centre to the atom's box
/// centre and `h` the box half-diagonal. Plain average caches only.
pub fn window_violation(cache: &ColumnCache, dict: &Dictionary, partition: &DetectorPartition, n_atoms: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, det) in partition.detectors.iter().enumerate() {
        // detector centres sit on the sphere; caps use the pole
        let c = scale(det.center, partition.radius / norm(det.center).max(1e-300));
        for a in 0..n_atoms {
            let b = &dict.atoms[a].support_box;
            let d = dist(c, b.center());
            let (lo, hi) = (d - b.half_diagonal() - det.diameter - cache.dt, d + b.half_diagonal() + det.diameter + cache.dt);
            let col = cache.column(i, a);
            let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak == 0.0 {
                continue;
            }
            for (k, v) in col.iter().enumerate() {
                let t = k as f64 * cache.dt;
                if t < lo || t > hi {
                    worst = worst.max(v.abs() / peak);
                }
            }
        }
    }
    worst
}

/// Gram matrices of `u0 -> U u0` (sphere-time quadrature) and
/// `u0 -> P_F U u0` over the atoms `<= j0`.
#[derive(Debug, Clone)]
pub struct Grams {
    pub full: DMatrix<f64>,
    pub projected: DMatrix<f64>,
}

pub fn gram_matrices(
    dict: &Dictionary,
    j0: u32,
    partition: &DetectorPartition,
    time: TimeGrid,
    kappa: f64,
) -> Grams {
    let terms: Vec<SeparableTerm> = dict.atoms_upto(j0).iter().map(SeparableTerm::from_atom).collect();
    let (na, nt) = (terms.len(), time.n_steps + 1);
    let sw: Vec<f64> = time.trapezoid_weights().iter().map(|w| w.sqrt()).collect();
    let mut full = DMatrix::zeros(na, na);
    let mut projected = DMatrix::zeros(na, na);
    let mut avg = DMatrix::zeros(nt, na);
    let mut cur = usize::MAX;
    let flush = |avg: &mut DMatrix<f64>, projected: &mut DMatrix<f64>, d: usize| {
        if d == usize::MAX {
            return;
        }
        // |E_i| avg^T W avg with avg = sum w T / |E_i|
        let a = partition.detectors[d].area;
        *avg /= a.sqrt();
        projected.gemm_tr(1.0, avg, avg, 1.0);
        avg.fill(0.0);
    };
    for_each_node(&terms, partition, time, kappa, |d, w, tr| {
        if d != cur {
            flush(&mut avg, &mut projected, cur);
            cur = d;
        }
        // tr is [atoms x nt] row-major, i.e. an nt x atoms column-major block
        let mut t = DMatrix::from_column_slice(nt, na, tr);
        for (k, s) in sw.iter().enumerate() {
            t.row_mut(k).scale_mut(*s);
        }
        avg += &t * w;
        t.scale_mut(w.sqrt());
        full.gemm_tr(1.0, &t, &t, 1.0);
    });
    flush(&mut avg, &mut projected, cur);
    Grams { full, projected }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancingReport {
    /// `theta_hat = sqrt(lambda_max(G_full - G_P))`.
    pub theta: f64,
    /// Same quantity from a dense symmetric eigensolve, for reference.
    pub theta_dense: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Smallest and largest eigenvalue of `G_full`: measured frame constants.
    pub c_lower: f64,
    pub c_upper: f64,
    /// Smallest eigenvalue of `G_P`: lower bound of `||F u0||^2 / ||u0||^2`.
    pub projected_lower: f64,
}

/// Power iteration for the top eigenvalue of a symmetric PSD matrix.
/// Stops when the eigen-residual `|M v - lambda v|` drops below `tol lambda`.
pub fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> (f64, usize, bool) {
    let n = m.nrows();
    if n == 0 {
        return (0.0, 0, true);
    }
    // fixed, generic start vector
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.754_877_666).fract());
    v /= v.norm();
    let mut lam = 0.0;
    for it in 1..=max_iter {
        let w = m * &v;
        lam = v.dot(&w);
        let res = (&w - &v * lam).norm();
        let nw = w.norm();
        if nw == 0.0 {
            return (0.0, it, true);
        }
        if res <= tol * lam.abs() {
            return (lam, it, true);
        }
        v = w / nw;
    }
    (lam, max_iter, false)
}

pub fn balancing_defect(grams: &Grams, tol: f64, max_iter: usize) -> BalancingReport {
    let diff = &grams.full - &grams.projected;
    let (lam, iterations, converged) = power_iteration(&diff, tol, max_iter);
    let ed = SymmetricEigen::new(diff.clone()).eigenvalues;
    let ef = SymmetricEigen::new(grams.full.clone()).eigenvalues;
    let ep = SymmetricEigen::new(grams.projected.clone()).eigenvalues;
    BalancingReport {
        theta: lam.max(0.0).sqrt(),
        theta_dense: ed.max().max(0.0).sqrt(),
        iterations,
        converged,
        c_lower: ef.min(),
        c_upper: ef.max(),
        projected_lower: ep.min(),
    }
}

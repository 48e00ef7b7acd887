//! Primal-dual (Chambolle-Pock) iteration for
//! `min ||x||_1  s.t.  ||K x - z||_2 <= eps`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpParams {
    pub max_iter: usize,
    pub tol: f64,
    pub check_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpLogEntry {
    pub iter: usize,
    pub l1: f64,
    /// `||K x - z||`.
    pub misfit: f64,
    pub eps: f64,
    /// Relative primal change since the previous iteration.
    pub change: f64,
    /// Best feasible objective minus best dual bound seen so far.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct CpOutput {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<CpLogEntry>,
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest singular value of `k` by power iteration on `K^T K`.
pub fn operator_norm(k: &DMatrix<f64>) -> f64 {
    let n = k.ncols();
    if n == 0 || k.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.618_033_988_7).fract());
    v /= v.norm();
    let mut lam: f64 = 0.0;
    for _ in 0..500 {
        let w = k.tr_mul(&(k * &v));
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        if (next - lam).abs() <= 1e-10 * next {
            lam = next;
            break;
        }
        lam = next;
    }
    lam.sqrt()
}

fn project_ball(u: &DVector<f64>, z: &DVector<f64>, eps: f64) -> DVector<f64> {
    let d = u - z;
    let n = d.norm();
    if n <= eps {
        u.clone()
    } else {
        z + d * (eps / n)
    }
}

/// Dual objective `-<q, z> - eps ||q||` after scaling `q` into `||K^T q||_inf <= 1`.
fn dual_value(k: &DMatrix<f64>, q: &DVector<f64>, z: &DVector<f64>, eps: f64) -> f64 {
    let kt = k.tr_mul(q);
    let s = kt.amax().max(1.0);
    -(q.dot(z) + eps * q.norm()) / s
}

/// Tries the least-squares point on the current support: accepted if its
/// misfit is within `accept` and it does not increase the objective.
pub fn polish(k: &DMatrix<f64>, z: &DVector<f64>, accept: f64, x: &DVector<f64>) -> Option<DVector<f64>> {
    let peak = x.amax();
    if peak == 0.0 {
        return None;
    }
    let supp: Vec<usize> = (0..x.len()).filter(|&j| x[j].abs() > 1e-6 * peak).collect();
    if supp.is_empty() || supp.len() > k.nrows() {
        return None;
    }
    let ks = k.select_columns(&supp);
    let sol = ks.clone().svd(true, true).solve(z, 1e-12).ok()?;
    let mut y = DVector::zeros(x.len());
    for (a, &j) in supp.iter().enumerate() {
        y[j] = sol[a];
    }
    let feas = (k * &y - z).norm() <= accept;
    (feas && y.lp_norm(1) <= x.lp_norm(1) * (1.0 + 1e-12)).then_some(y)
}

/// Feasible point near an iterate that sits just outside the ball: the
/// segment from `x` to the least-squares point on its support, cut where it
/// enters `||K y - z|| <= eps`.
pub fn restore(k: &DMatrix<f64>, z: &DVector<f64>, eps: f64, x: &DVector<f64>) -> Option<DVector<f64>> {
    let peak = x.amax();
    let supp: Vec<usize> = (0..x.len()).filter(|&j| x[j].abs() > 1e-9 * peak).collect();
    if peak == 0.0 || supp.len() > k.nrows() {
        return None;
    }
    let sol = k.select_columns(&supp).svd(true, true).solve(z, 1e-12).ok()?;
    let mut y = DVector::zeros(x.len());
    for (a, &j) in supp.iter().enumerate() {
        y[j] = sol[a];
    }
    let r0 = k * x - z;
    if r0.norm() <= eps {
        return Some(x.clone());
    }
    let d = k * (&y - x);
    // ||r0 + a d||^2 = eps^2, smallest root in [0, 1]
    let (qa, qb, qc) = (d.norm_squared(), 2.0 * r0.dot(&d), r0.norm_squared() - eps * eps);
    let disc = qb * qb - 4.0 * qa * qc;
    if qa == 0.0 || disc < 0.0 {
        return None;
    }
    let a = (-qb - disc.sqrt()) / (2.0 * qa);
    (0.0..=1.0).contains(&a).then(|| x + (&y - x) * a)
}

/// Default acceptance radius: `eps sqrt(1 + tol)`, or `1e-3 tol ||z||` for
/// equality constraints.
pub fn accept_radius(eps: f64, z: &DVector<f64>, tol: f64) -> f64 {
    (eps * (1.0 + tol).sqrt()).max(1e-3 * tol * z.norm())
}

pub fn solve_l1_ball(k: &DMatrix<f64>, z: &DVector<f64>, eps: f64, params: CpParams) -> CpOutput {
    solve_l1_ball_with(k, z, eps, accept_radius(eps, z, params.tol), params)
}

/// Scalar steps `tau = sigma = 0.99 / ||K||`, ball projection for the dual
/// prox. Iterates with `||K x - z|| <= accept` count as feasible.
pub fn solve_l1_ball_with(k: &DMatrix<f64>, z: &DVector<f64>, eps: f64, accept: f64, params: CpParams) -> CpOutput {
    let n = k.ncols();
    let l = operator_norm(k);
    let mut x = DVector::zeros(n);
    let mut q = DVector::zeros(k.nrows());
    let mut log = Vec::new();
    if l == 0.0 || z.norm() <= eps {
        // zero is feasible and has the smallest possible objective
        return CpOutput { x, iterations: 0, converged: true, log };
    }
    let tau = 0.99 / l;
    let sigma = 0.99 / l;
    let feas_tol = |misfit: f64| misfit <= accept;
    let (mut best_primal, mut best_dual) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut best_x = x.clone();
    let check = params.check_every.max(1);
    for it in 1..=params.max_iter {
        let ktq = k.tr_mul(&q);
        let xn = DVector::from_fn(n, |j, _| soft(x[j] - tau * ktq[j], tau));
        let xbar = &xn * 2.0 - &x;
        let v = &q + k * &xbar * sigma;
        q = &v - project_ball(&(&v / sigma), z, eps) * sigma;
        let change = (&xn - &x).norm() / xn.norm().max(1e-300);
        x = xn;
        if it % check == 0 || it == params.max_iter {
            let misfit = (k * &x - z).norm();
            let l1 = x.lp_norm(1);
            if feas_tol(misfit) && l1 < best_primal {
                best_primal = l1;
                best_x = x.clone();
            } else if !feas_tol(misfit) {
                if let Some(y) = restore(k, z, eps, &x) {
                    let ly = y.lp_norm(1);
                    if ly < best_primal {
                        best_primal = ly;
                        best_x = y;
                    }
                }
            }
            best_dual = best_dual.max(dual_value(k, &q, z, eps));
            let gap = best_primal - best_dual;
            log.push(CpLogEntry { iter: it, l1, misfit, eps, change, gap });
            if gap.is_finite() && gap <= params.tol * best_primal.max(1e-300) && change <= params.tol {
                return finish(k, z, accept, best_x, it, true, log);
            }
        }
    }
    let out = if best_primal.is_finite() { best_x } else { x };
    finish(k, z, accept, out, params.max_iter, false, log)
}

fn finish(
    k: &DMatrix<f64>,
    z: &DVector<f64>,
    accept: f64,
    x: DVector<f64>,
    iterations: usize,
    converged: bool,
    log: Vec<CpLogEntry>,
) -> CpOutput {
    let x = polish(k, z, accept, &x).unwrap_or(x);
    CpOutput { x, iterations, converged, log }
}

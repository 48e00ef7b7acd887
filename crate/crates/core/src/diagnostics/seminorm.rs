//! Sobolev-Slobodeckij `H^{1/2}(Sigma)` seminorm of sphere traces,
//! `int_0^T int int |u(t,y) - u(t,x)|^2 / |x - y|^3 dsigma dsigma dt`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::CertificateReport;
use crate::error::{PatError, Result};
use crate::geom::{cross, dist, dot, norm, scale, sub, Vec3};
use crate::spheregeom::zonal_cells;
use crate::wavefield::{forward_trace, TimeGrid, TraceOptions, TraceSource, TraceTable};
use crate::wavefield::SeparableTerm;
use crate::wavelet3d::{coeff_h_s_norm_sq, CoeffVec, Dictionary};

/// Centres of an equal-area partition with cell areas as weights; `spacing`
/// is the local node spacing `sqrt(area)`.
#[derive(Debug, Clone)]
pub struct SeminormNodes {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl SeminormNodes {
    pub fn equal_area(r: f64, n: usize) -> Result<Self> {
        let cells = zonal_cells(n)?;
        let nodes = cells.iter().map(|c| c.center(r)).collect();
        let weights: Vec<f64> = cells.iter().map(|c| c.area(r)).collect();
        let spacing = weights.iter().map(|a| a.sqrt()).collect();
        Ok(SeminormNodes { nodes, weights, spacing })
    }
}

/// Smooth exclusion profile: 0 below `s = 1/2`, 1 above `s = 3/2`.
fn cutoff(s: f64) -> f64 {
    let x = (s - 0.5).clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// `K_xy = chi(|x - y| / rho) w_x w_y / |x - y|^3` with
/// `rho = factor * max(h_x, h_y)` and a smooth cutoff `chi` that removes the
/// diagonal band `|x - y| < rho / 2`.
pub fn slobodeckij_kernel(q: &SeminormNodes, factor: f64) -> DMatrix<f64> {
    let n = q.nodes.len();
    DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            return 0.0;
        }
        let d = dist(q.nodes[a], q.nodes[b]);
        let c = cutoff(d / (factor * q.spacing[a].max(q.spacing[b])));
        if c == 0.0 {
            0.0
        } else {
            c * q.weights[a] * q.weights[b] / (d * d * d)
        }
    })
}

/// Least-squares tangential gradients from the neighbours within `reach`
/// local spacings: `g_x = P_x (u_nb - u_x)` in a tangent basis at `x`.
#[derive(Debug, Clone)]
pub struct GradientStencil {
    pub neighbours: Vec<Vec<usize>>,
    pub pinv: Vec<DMatrix<f64>>,
}

impl GradientStencil {
    pub fn new(q: &SeminormNodes, reach: f64) -> Result<Self> {
        let n = q.nodes.len();
        let mut neighbours = Vec::with_capacity(n);
        let mut pinv = Vec::with_capacity(n);
        for a in 0..n {
            let x = q.nodes[a];
            let (e1, e2) = tangent_basis(x);
            let nb: Vec<usize> =
                (0..n).filter(|&b| b != a && dist(x, q.nodes[b]) <= reach * q.spacing[a]).collect();
            if nb.len() < 3 {
                return Err(PatError::QuadratureOrder(format!("node {a} has {} gradient neighbours", nb.len())));
            }
            let m = DMatrix::from_fn(nb.len(), 2, |i, c| {
                let d = sub(q.nodes[nb[i]], x);
                dot(d, if c == 0 { e1 } else { e2 })
            });
            let p = m
                .clone()
                .pseudo_inverse(1e-12)
                .map_err(|e| PatError::QuadratureOrder(format!("gradient stencil: {e}")))?;
            neighbours.push(nb);
            pinv.push(p);
        }
        Ok(GradientStencil { neighbours, pinv })
    }
}

fn tangent_basis(x: Vec3) -> (Vec3, Vec3) {
    let n = scale(x, 1.0 / norm(x));
    let a = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(n, a);
    let e1 = scale(e1, 1.0 / norm(e1));
    (e1, cross(n, e1))
}

/// `sum_t w_t sum_{x,y} K_xy (u_x - u_y)^2 = 2 sum_t w_t (sum_x D_x u_x^2 - u^T K u)`,
/// the seminorm with the diagonal band removed.
pub fn slobodeckij_truncated_sq(table: &TraceTable, kernel: &DMatrix<f64>) -> f64 {
    let (n, nt) = (table.nodes.len(), table.n_times());
    let u = DMatrix::from_row_slice(n, nt, &table.values);
    let deg: Vec<f64> = (0..n).map(|a| kernel.row(a).sum()).collect();
    let ku = kernel * &u;
    let tw = table.time.trapezoid_weights();
    let mut s = 0.0;
    for (k, w) in tw.iter().enumerate() {
        let mut e = 0.0;
        for a in 0..n {
            let v = u[(a, k)];
            e += deg[a] * v * v - v * ku[(a, k)];
        }
        s += w * e;
    }
    (2.0 * s).max(0.0)
}

/// Truncated seminorm plus the removed band, `pi |grad u|^2 int (1 - chi)`
/// per unit area with the linearised integrand, i.e. `pi rho |g_x|^2 w_x`.
pub fn slobodeckij_seminorm_sq(
    table: &TraceTable,
    q: &SeminormNodes,
    kernel: &DMatrix<f64>,
    factor: f64,
    stencil: &GradientStencil,
) -> f64 {
    let nt = table.n_times();
    let tw = table.time.trapezoid_weights();
    let mut band = 0.0;
    for a in 0..q.nodes.len() {
        let nb = &stencil.neighbours[a];
        let ua = table.row(a);
        let mut g2 = vec![0.0; nt];
        let mut diff = DMatrix::zeros(nb.len(), nt);
        for (i, &b) in nb.iter().enumerate() {
            let ub = table.row(b);
            for k in 0..nt {
                diff[(i, k)] = ub[k] - ua[k];
            }
        }
        let g = &stencil.pinv[a] * diff;
        for (k, v) in g2.iter_mut().enumerate() {
            *v = g[(0, k)].powi(2) + g[(1, k)].powi(2);
        }
        // int_0^inf (1 - chi(s)) ds = 1 for the symmetric cutoff
        let rho = factor * q.spacing[a];
        band += PI * rho * q.weights[a] * g2.iter().zip(&tw).map(|(g, w)| g * w).sum::<f64>();
    }
    slobodeckij_truncated_sq(table, kernel) + band
}

/// Midpoints of `count` equal runs of level `j`'s atoms.
pub(crate) fn level_sample(dict: &Dictionary, j: u32, count: usize) -> Vec<usize> {
    let lo = if j == 0 { 0 } else { dict.count_upto(j - 1) };
    let hi = dict.count_upto(j);
    let len = hi - lo;
    let k = count.clamp(1, len);
    let mut out: Vec<usize> = (0..k).map(|i| lo + ((2 * i + 1) * len) / (2 * k)).collect();
    out.dedup();
    out
}

/// Ratio `||U phi||_{L2(0,T; H^1/2(Sigma))} / ||phi||_{H^1/2}` for sampled
/// atoms at each level `0..=j0`; passes when the largest per-level ratio
/// varies by at most a factor 5 across levels and the seminorm moves by less
/// than 5% when the exclusion band shrinks from 1.5 to 1.0 node spacings.
pub fn check_h_half_bound(
    dict: &Dictionary,
    j0: u32,
    r: f64,
    time: TimeGrid,
    n_nodes: usize,
    kappa: f64,
    atoms_per_level: usize,
) -> Result<CertificateReport> {
    if j0 > dict.j_max {
        return Err(PatError::InvalidConfig("j0 exceeds the dictionary depth".into()));
    }
    let q = SeminormNodes::equal_area(r, n_nodes)?;
    let stencil = GradientStencil::new(&q, 2.5)?;
    let k15 = slobodeckij_kernel(&q, 1.5);
    let k10 = slobodeckij_kernel(&q, 1.0);
    let mut rep = CertificateReport::new("h_half_bound");
    let mut per_level = Vec::new();
    let mut sens: f64 = 0.0;
    for j in 0..=j0 {
        let mut best: f64 = 0.0;
        for a in level_sample(dict, j, atoms_per_level) {
            let term = [SeparableTerm::from_atom(&dict.atoms[a])];
            let opts = TraceOptions { kappa, ..TraceOptions::default() };
            let tab = forward_trace(TraceSource::Separable(&term), &q.nodes, r, time, opts)?;
            let l2 = tab.weighted_energy(&q.weights, 0);
            let semi = slobodeckij_seminorm_sq(&tab, &q, &k15, 1.5, &stencil);
            let semi10 = slobodeckij_seminorm_sq(&tab, &q, &k10, 1.0, &stencil);
            if semi > 0.0 {
                sens = sens.max((semi10 - semi).abs() / semi);
            }
            let h = coeff_h_s_norm_sq(&CoeffVec::unit(dict, dict.atoms[a].index.j, a), 0.5, dict).0;
            best = best.max(((l2 + semi) / h).sqrt());
        }
        rep.measure(&format!("ratio_j{j}"), best);
        per_level.push(best);
    }
    let lo = per_level.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_level.iter().copied().fold(0.0, f64::max);
    let spread = hi / lo;
    rep.measure("spread", spread)
        .measure("exclusion_sensitivity", sens)
        .tol("spread", 5.0)
        .tol("exclusion_sensitivity", 0.05);
    rep.note(format!("{n_nodes} equal-area nodes, exclusion 1.5 spacings"));
    rep.pass = spread <= 5.0 && sens < 0.05;
    Ok(rep)
}

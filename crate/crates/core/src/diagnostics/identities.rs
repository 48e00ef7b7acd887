//! Trace identities on the sphere and the two-sided stability bound.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::CertificateReport;
use crate::error::{PatError, Result};
use crate::geom::Vec3;
use crate::quad::sphere_rule;
use crate::wavefield::propagate::Propagator;
use crate::wavefield::radial::joint_box;
use crate::wavefield::trace::forward_trace_with_gradient;
use crate::wavefield::{forward_trace, AtomTraceBatch, RadialEngine, ScalarField3, SeparableTerm, TimeGrid};
use crate::wavefield::{TraceOptions, TraceSource};
use crate::wavelet3d::{CoeffVec, Dictionary};

/// Nodes and weights of the product rule on the sphere of radius `r`.
pub fn sphere_quadrature(r: f64, degree: usize) -> (Vec<Vec3>, Vec<f64>) {
    sphere_rule(degree).into_iter().map(|(p, w)| (p.map(|c| c * r), w * r * r)).unzip()
}

fn identity_report(name: &str, lhs: f64, rhs: f64, tol: f64, nodes: usize) -> CertificateReport {
    let mut rep = CertificateReport::new(name);
    rep.measure("lhs", lhs).measure("rhs", rhs).tol("ratio_deviation", tol);
    if rhs == 0.0 && lhs == 0.0 {
        rep.measure("ratio", 1.0).note("zero field: both sides vanish");
        rep.pass = true;
    } else {
        let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
        rep.measure("ratio", ratio);
        rep.pass = (ratio - 1.0).abs() <= tol;
    }
    rep.note(format!("{nodes} sphere nodes"));
    rep
}

/// `int_0^T int_Sigma t |U u0|^2` against `(R/2) ||u0||^2` on the FFT route.
/// Under-resolved time steps and wrap-around are errors.
pub fn check_trace_identity(
    u0: &ScalarField3,
    r: f64,
    time: TimeGrid,
    degree: usize,
    interp_order: usize,
) -> Result<CertificateReport> {
    let (nodes, w) = sphere_quadrature(r, degree);
    let rhs = 0.5 * r * u0.dot(u0);
    let opts = TraceOptions { interp_order, ..TraceOptions::default() };
    let table = forward_trace(TraceSource::Field(u0), &nodes, r, time, opts).map_err(under_resolved)?;
    let lhs = table.weighted_energy(&w, 1);
    Ok(identity_report("trace_identity", lhs, rhs, 2e-2, nodes.len()))
}

/// The trace identity for `u0 = sum x_a phi_a` on the exact radial route,
/// where `||u0||^2 = |x|^2` by orthonormality. Only `dt` and the sphere rule
/// are discretised, so this is the variant that shows refinement.
pub fn check_trace_identity_atoms(
    dict: &Dictionary,
    x: &CoeffVec,
    r: f64,
    time: TimeGrid,
    degree: usize,
    kappa: f64,
) -> Result<CertificateReport> {
    let terms: Vec<SeparableTerm> = x
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(a, v)| SeparableTerm { coef: *v, ..SeparableTerm::from_atom(&dict.atoms[a]) })
        .collect();
    let (nodes, w) = sphere_quadrature(r, degree);
    let rhs = 0.5 * r * x.values.iter().map(|v| v * v).sum::<f64>();
    let lhs = if terms.is_empty() {
        0.0
    } else {
        let opts = TraceOptions { kappa, ..TraceOptions::default() };
        forward_trace(TraceSource::Separable(&terms), &nodes, r, time, opts)?.weighted_energy(&w, 1)
    };
    Ok(identity_report("trace_identity", lhs, rhs, 2e-2, nodes.len()))
}

/// Same identity for `grad u` with spectral derivatives.
pub fn check_gradient_trace_identity(
    u0: &ScalarField3,
    r: f64,
    time: TimeGrid,
    degree: usize,
    interp_order: usize,
) -> Result<CertificateReport> {
    let (nodes, w) = sphere_quadrature(r, degree);
    if r + time.t_final > u0.grid.half_width() + 1e-12 {
        return Err(PatError::WrapAround(format!("R + T exceeds half width {}", u0.grid.half_width())));
    }
    if u0.max_abs() == 0.0 {
        return Ok(identity_report("gradient_trace_identity", 0.0, 0.0, 5e-2, nodes.len()));
    }
    let rhs = 0.5 * r * Propagator::new(u0)?.gradient0().iter().map(|g| g.dot(g)).sum::<f64>();
    let tr = forward_trace_with_gradient(u0, &nodes, r, time, interp_order).map_err(under_resolved)?;
    let lhs: f64 = tr.grad.iter().map(|g| g.weighted_energy(&w, 1)).sum();
    Ok(identity_report("gradient_trace_identity", lhs, rhs, 5e-2, nodes.len()))
}

fn under_resolved(e: PatError) -> PatError {
    match e {
        PatError::InvalidConfig(m) if m.contains("dt") => PatError::UnderResolved(m),
        e => e,
    }
}

/// Gram matrix of `x -> U sum x_a phi_a` over atoms `<= j0` in
/// `L2((0, T) x Sigma)`, product sphere rule in space, trapezoid in time.
pub fn sphere_gram(dict: &Dictionary, j0: u32, r: f64, time: TimeGrid, degree: usize, kappa: f64) -> DMatrix<f64> {
    let terms: Vec<SeparableTerm> = dict.atoms_upto(j0).iter().map(SeparableTerm::from_atom).collect();
    let (na, nt) = (terms.len(), time.n_steps + 1);
    let mut g = DMatrix::zeros(na, na);
    let Some(bb) = joint_box(&terms) else {
        return g;
    };
    let sw: Vec<f64> = time.trapezoid_weights().iter().map(|w| w.sqrt()).collect();
    let (nodes, w) = sphere_quadrature(r, degree);
    let mut batch = AtomTraceBatch::new(RadialEngine::new(time.dt(), time.n_steps, kappa), &terms);
    for (x, wx) in nodes.iter().zip(&w) {
        let tr = batch.traces_at(*x, bb.dist_to_point(*x));
        let mut t = DMatrix::from_column_slice(nt, na, &tr);
        for (k, s) in sw.iter().enumerate() {
            t.row_mut(k).scale_mut(s * wx.sqrt());
        }
        g.gemm_tr(1.0, &t, &t, 1.0);
    }
    g
}

fn ratio(g: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return 0.0;
    }
    (v.dot(&(g * &v)).max(0.0) / n2).sqrt()
}

/// `||U u0|| / ||u0||` over a family in `M_{<=j0}` against
/// `[0.9 sqrt(R/2T), 1.1 sqrt(R/(2 d(K, Sigma)))]`. The time window is taken
/// as given, so `T < 2R` is measured rather than rejected.
pub fn check_stability_sandwich(
    dict: &Dictionary,
    j0: u32,
    family: &[CoeffVec],
    r: f64,
    time: TimeGrid,
    degree: usize,
    kappa: f64,
) -> Result<CertificateReport> {
    let d = dict.k_distance_to_sphere(r);
    if !(d > 0.0) {
        return Err(PatError::InvalidConfig("K must lie strictly inside the sphere".into()));
    }
    let n = dict.count_upto(j0);
    if family.iter().any(|x| x.len() != n) {
        return Err(PatError::SizeMismatch("family members must hold every atom up to j0".into()));
    }
    let g = sphere_gram(dict, j0, r, time, degree, kappa);
    let (c, cc) = ((r / (2.0 * time.t_final)).sqrt(), (r / (2.0 * d)).sqrt());
    let ratios: Vec<f64> = family.iter().map(|x| ratio(&g, &x.values)).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    // homogeneity: the ratio of 10 u0 equals that of u0
    let hom = family
        .iter()
        .zip(&ratios)
        .map(|(x, q)| {
            let y: Vec<f64> = x.values.iter().map(|v| 10.0 * v).collect();
            (ratio(&g, &y) - q).abs() / q.max(1e-300)
        })
        .fold(0.0, f64::max);
    let eig = SymmetricEigen::new(g).eigenvalues;
    let mut rep = CertificateReport::new("stability_sandwich");
    rep.measure("min_ratio", lo)
        .measure("max_ratio", hi)
        .measure("c", c)
        .measure("C", cc)
        .measure("d_k_sigma", d)
        .measure("frame_lower", eig.min().max(0.0).sqrt())
        .measure("frame_upper", eig.max().max(0.0).sqrt())
        .measure("homogeneity_defect", hom)
        .tol("lower_factor", 0.9)
        .tol("upper_factor", 1.1)
        .tol("homogeneity", 1e-12);
    rep.note(format!("{} family members, {} atoms", family.len(), n));
    let lower_ok = lo >= 0.9 * c;
    let upper_ok = hi <= 1.1 * cc;
    if !lower_ok {
        rep.note("lower bound violated");
    }
    if !upper_ok {
        rep.note("upper bound violated");
    }
    rep.pass = !family.is_empty() && lower_ok && upper_ok && hom <= 1e-12;
    Ok(rep)
}

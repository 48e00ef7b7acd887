//! Dictionary, coherence, balancing and Huygens certificates.

use nalgebra::{DMatrix, DVector};

use super::identities::sphere_quadrature;
use super::seminorm::level_sample;
use super::CertificateReport;
use crate::error::{PatError, Result};
use crate::geom::norm;
use crate::sensing::{balancing_defect, for_each_node, gram_matrices, trapezoid, CoherenceReport};
use crate::spheregeom::{detectors_for_scale, equal_area_partition, DetectorPartition, QuadSpec};
use crate::wavefield::radial::joint_box;
use crate::wavefield::{AtomTraceBatch, RadialEngine, SeparableTerm, TimeGrid};
use crate::wavelet3d::{littlewood_paley_ratio_coeffs, CoeffVec, Dictionary};

pub fn check_gram(dict: &Dictionary, j0: u32) -> CertificateReport {
    let d = dict.gram_defect(j0.min(dict.j_max));
    let mut rep = CertificateReport::new("gram");
    rep.measure("gram_defect", d).tol("gram_defect", 1e-4);
    rep.pass = d <= 1e-4;
    rep
}

/// `s = 1/2` Littlewood-Paley ratios of sampled single atoms at each level;
/// passes when every ratio lies in a bracket `[lo, hi]` with `hi / lo <= 5`.
pub fn check_littlewood_paley(dict: &Dictionary, j0: u32, atoms_per_level: usize) -> Result<CertificateReport> {
    let mut rep = CertificateReport::new("littlewood_paley");
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..=j0.min(dict.j_max) {
        let (mut l, mut h) = (f64::INFINITY, 0.0f64);
        for a in level_sample(dict, j, atoms_per_level) {
            let (r1, r2) = littlewood_paley_ratio_coeffs(&CoeffVec::unit(dict, j, a), 0.5, dict)?;
            l = l.min(r1);
            h = h.max(r2);
        }
        rep.measure(&format!("lower_j{j}"), l).measure(&format!("upper_j{j}"), h);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    rep.measure("bracket_lo", lo).measure("bracket_hi", hi).measure("spread", hi / lo).tol("spread", 5.0);
    rep.pass = hi / lo <= 5.0;
    Ok(rep)
}

/// Coherence of the detector averages of every atom `<= j0`, computed one
/// detector at a time without storing the column cache. Agrees with
/// [`crate::sensing::coherence_bound`] on an unsensed cache.
pub fn scan_coherence(
    dict: &Dictionary,
    j0: u32,
    partition: &DetectorPartition,
    time: TimeGrid,
    kappa: f64,
) -> CoherenceReport {
    let terms: Vec<SeparableTerm> = dict.atoms_upto(j0).iter().map(SeparableTerm::from_atom).collect();
    let (na, nt, nd) = (terms.len(), time.n_steps + 1, partition.len());
    let tw = trapezoid(nt, time.dt());
    // norms[d * na + a] = ||M_d U phi_a||
    let mut norms = vec![0.0; nd * na];
    let mut avg = vec![0.0; na * nt];
    let mut cur = usize::MAX;
    let mut flush = |avg: &mut Vec<f64>, d: usize| {
        if d == usize::MAX {
            return;
        }
        let area = partition.detectors[d].area;
        for a in 0..na {
            let s: f64 = (0..nt).map(|k| tw[k] * (avg[a * nt + k] / area).powi(2)).sum();
            norms[d * na + a] = s.sqrt();
        }
        avg.iter_mut().for_each(|v| *v = 0.0);
    };
    for_each_node(&terms, partition, time, kappa, |d, w, tr| {
        if d != cur {
            flush(&mut avg, cur);
            cur = d;
        }
        for (o, v) in avg.iter_mut().zip(tr) {
            *o += w * v;
        }
    });
    flush(&mut avg, cur);
    let total = partition.total_area();
    let mut rep = CoherenceReport { b_raw: 0.0, b_nu: 0.0, argmax: (0, 0), per_label: Vec::new(), huygens_fraction: 0.0 };
    let mut frac = 0.0;
    for a in 0..na {
        let label = dict.atoms[a].index.j as usize;
        if rep.per_label.len() <= label {
            rep.per_label.resize(label + 1, 0.0);
        }
        let mut sum = 0.0;
        for d in 0..nd {
            let n = norms[d * na + a];
            if n > rep.b_raw {
                rep.b_raw = n;
                rep.argmax = (d, a);
            }
            rep.per_label[label] = rep.per_label[label].max(n);
            sum += partition.detectors[d].area * n * n;
        }
        if sum > 0.0 {
            let count = (0..nd)
                .filter(|&d| partition.detectors[d].area * norms[d * na + a].powi(2) > 0.01 * sum)
                .count();
            frac += count as f64 / nd as f64;
        }
    }
    rep.b_nu = rep.b_raw * total.sqrt();
    rep.huygens_fraction = if na > 0 { frac / na as f64 } else { 0.0 };
    rep
}

/// `B_nu` at the partitions matched to each `j0` by `partition_for_scale`;
/// passes when `max B / min B - 1 < 0.25`.
pub fn check_coherence_flatness(
    dict: &Dictionary,
    levels: &[u32],
    mu: f64,
    r: f64,
    time: TimeGrid,
    kappa: f64,
    quad: QuadSpec,
) -> Result<CertificateReport> {
    let mut rep = CertificateReport::new("coherence");
    if levels.is_empty() {
        return Err(PatError::InvalidConfig("coherence needs at least one level".into()));
    }
    let mut bs = Vec::new();
    for &j in levels {
        if j > dict.j_max {
            return Err(PatError::InvalidConfig(format!("coherence level {j} exceeds the dictionary depth")));
        }
        let n = detectors_for_scale(r, j, mu)?;
        let p = equal_area_partition(r, n, quad)?;
        let c = scan_coherence(dict, j, &p, time, kappa);
        rep.measure(&format!("b_nu_j{j}"), c.b_nu)
            .measure(&format!("detectors_j{j}"), n as f64)
            .measure(&format!("huygens_fraction_j{j}"), c.huygens_fraction);
        let scale = p.total_area().sqrt();
        for (l, b) in c.per_label.iter().enumerate() {
            rep.measure(&format!("b_nu_j{j}_level{l}"), b * scale);
        }
        bs.push(c.b_nu);
    }
    let lo = bs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = bs.iter().copied().fold(0.0, f64::max);
    let var = hi / lo - 1.0;
    rep.measure("variation", var).tol("variation", 0.25);
    rep.pass = var < 0.25;
    Ok(rep)
}

/// Detector counts of the balancing trend: the scale-matched count `n` and
/// three coarser or finer steps by a factor 4, `[n/16, n/4, n, 4n]`.
pub fn balancing_ladder(n: usize) -> Vec<usize> {
    vec![(n / 16).max(2), (n / 4).max(2), n, 4 * n]
}

/// `theta_hat` over [`balancing_ladder`] at fixed `j0`: passes when it
/// decreases strictly along the ladder and lies below `sqrt(c_hat / 2)` at
/// the scale-matched partition, `c_hat` the smallest eigenvalue of the full
/// trace Gram matrix there.
pub fn check_balancing_trend(
    dict: &Dictionary,
    j0: u32,
    mu: f64,
    r: f64,
    time: TimeGrid,
    kappa: f64,
    quad: QuadSpec,
) -> Result<CertificateReport> {
    let n = detectors_for_scale(r, j0, mu)?;
    let mut rep = CertificateReport::new("balancing");
    let mut thetas = Vec::new();
    let mut threshold = 0.0;
    let mut at_scale = 0.0;
    for (k, nk) in balancing_ladder(n).into_iter().enumerate() {
        let p = equal_area_partition(r, nk, quad)?;
        let g = gram_matrices(dict, j0, &p, time, kappa);
        let b = balancing_defect(&g, 1e-3, 200);
        rep.measure(&format!("theta_{k}"), b.theta).measure(&format!("detectors_{k}"), nk as f64);
        if nk == n {
            threshold = (b.c_lower / 2.0).max(0.0).sqrt();
            at_scale = b.theta;
            rep.measure("c_hat", b.c_lower);
        }
        if !b.converged {
            rep.note(format!("power iteration did not converge at N = {nk}"));
        }
        thetas.push(b.theta);
    }
    let monotone = thetas.windows(2).all(|w| w[1] < w[0]);
    rep.measure("threshold", threshold).measure("theta_at_scale", at_scale).tol("power_tol", 1e-3);
    rep.pass = monotone && at_scale < threshold;
    if !monotone {
        rep.note("theta is not monotone along the ladder");
    }
    Ok(rep)
}

/// Lower frame constant of the detector averages at the scale-matched
/// partition: passes when both the smallest eigenvalue of `G_P` and the
/// smallest Rayleigh quotient over `family` reach `c_hat / 2`.
#[allow(clippy::too_many_arguments)]
pub fn check_quasi_diagonal(
    dict: &Dictionary,
    j0: u32,
    family: &[CoeffVec],
    mu: f64,
    r: f64,
    time: TimeGrid,
    kappa: f64,
    quad: QuadSpec,
) -> Result<CertificateReport> {
    let n = detectors_for_scale(r, j0, mu)?;
    let p = equal_area_partition(r, n, quad)?;
    let g = gram_matrices(dict, j0, &p, time, kappa);
    let b = balancing_defect(&g, 1e-3, 200);
    let q = |m: &DMatrix<f64>, x: &CoeffVec| {
        let v = DVector::from_column_slice(&x.values);
        v.dot(&(m * &v)) / v.norm_squared()
    };
    let fam_min = family.iter().map(|x| q(&g.projected, x)).fold(f64::INFINITY, f64::min);
    let mut rep = CertificateReport::new("quasi_diagonal");
    rep.measure("c_hat", b.c_lower)
        .measure("projected_lower", b.projected_lower)
        .measure("family_min", fam_min)
        .measure("detectors", n as f64)
        .tol("fraction", 0.5);
    rep.pass = b.projected_lower >= 0.5 * b.c_lower && fam_min >= 0.5 * b.c_lower;
    Ok(rep)
}

/// Energy of every atom trace (sphere rule nodes) in time cells entirely
/// outside `[dist(supp, Sigma), 2R]`, relative to the atom's total.
pub fn check_huygens_windows(
    dict: &Dictionary,
    j0: u32,
    r: f64,
    time: TimeGrid,
    degree: usize,
    kappa: f64,
) -> Result<CertificateReport> {
    let terms: Vec<SeparableTerm> = dict.atoms_upto(j0).iter().map(SeparableTerm::from_atom).collect();
    let Some(bb) = joint_box(&terms) else {
        return Err(PatError::InvalidConfig("no atoms".into()));
    };
    let (na, nt, dt) = (terms.len(), time.n_steps + 1, time.dt());
    let windows: Vec<(f64, f64)> = dict.atoms_upto(j0)
        .iter()
        .map(|a| (r - a.support_box.max_dist_to_point([0.0; 3]), 2.0 * r))
        .collect();
    let (nodes, w) = sphere_quadrature(r, degree);
    let mut inside = vec![0.0; na];
    let mut outside = vec![0.0; na];
    let mut batch = AtomTraceBatch::new(RadialEngine::new(dt, time.n_steps, kappa), &terms);
    for (x, wx) in nodes.iter().zip(&w) {
        debug_assert!((norm(*x) - r).abs() < 1e-9);
        let tr = batch.traces_at(*x, bb.dist_to_point(*x));
        for a in 0..na {
            let (lo, hi) = windows[a];
            for k in 0..nt {
                let t = k as f64 * dt;
                let e = wx * tr[a * nt + k].powi(2);
                // a sample averages over [t - dt/2, t + dt/2]
                if t + 0.5 * dt < lo || t - 0.5 * dt > hi {
                    outside[a] += e;
                } else {
                    inside[a] += e;
                }
            }
        }
    }
    let worst = (0..na)
        .map(|a| {
            let tot = inside[a] + outside[a];
            if tot > 0.0 {
                outside[a] / tot
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let mut rep = CertificateReport::new("huygens");
    rep.measure("max_outside_fraction", worst).measure("atoms", na as f64).tol("max_outside_fraction", 1e-6);
    rep.pass = worst <= 1e-6;
    Ok(rep)
}

//! Detector partitions of the sphere `|x| = R`: recursive zonal equal-area
//! cells, exact cell diameters, per-cell product Gauss quadrature, the
//! sampling distribution and i.i.d. detector draws.

pub mod expmap;

#[cfg(test)]
mod tests;

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::geom::{dist, norm, Vec3};
use crate::quad::gauss_legendre_on;

pub use expmap::{delta_for_mu, exp_map, exp_map_cap, inflation_factor, CapImage, PlanarRegion};

/// Largest supported detector count.
pub const MAX_DETECTORS: usize = 200_000;
/// Largest total number of quadrature nodes in one partition.
pub const MAX_NODES: usize = 4_000_000;

/// Cell `{z_lo <= cos(theta) <= z_hi, phi0 <= phi <= phi0 + width}` of the
/// unit sphere. Polar caps have `width = 2 pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneCell {
    pub z_lo: f64,
    pub z_hi: f64,
    pub phi0: f64,
    pub width: f64,
}

impl ZoneCell {
    pub fn area(&self, r: f64) -> f64 {
        r * r * (self.z_hi - self.z_lo) * self.width
    }

    fn theta_range(&self) -> (f64, f64) {
        (self.z_hi.clamp(-1.0, 1.0).acos(), self.z_lo.clamp(-1.0, 1.0).acos())
    }

    /// Exact Euclidean diameter.
    ///
    /// For colatitudes `a, b` and longitude gap `D` the cosine of the angle
    /// between two points is `cos a cos b + sin a sin b cos D`; it is smallest at
    /// `D = min(width, pi)`. On an edge `a = const` it is `rho cos(b - psi)`, whose
    /// minimum over an interval is at an endpoint or at `psi + pi`. The only
    /// interior critical point (`a = b = pi/2`) is a saddle.
    pub fn diameter(&self, r: f64) -> f64 {
        let (ta, tb) = self.theta_range();
        let cd = self.width.min(PI).cos();
        let f = |a: f64, b: f64| a.cos() * b.cos() + a.sin() * b.sin() * cd;
        let mut fmin = f64::INFINITY;
        for a in [ta, tb] {
            let psi = (a.sin() * cd).atan2(a.cos());
            let mut cands = vec![ta, tb];
            for k in [-1.0, 1.0, 3.0] {
                let b = psi + k * PI;
                if b > ta && b < tb {
                    cands.push(b);
                }
            }
            for b in cands {
                fmin = fmin.min(f(a, b));
            }
        }
        r * (2.0 * (1.0 - fmin).max(0.0)).sqrt()
    }

    /// Representative point: the pole for caps, else the `(z, phi)` midpoint.
    pub fn center(&self, r: f64) -> Vec3 {
        if self.width >= 2.0 * PI - 1e-12 && self.z_hi >= 1.0 {
            return [0.0, 0.0, r];
        }
        if self.width >= 2.0 * PI - 1e-12 && self.z_lo <= -1.0 {
            return [0.0, 0.0, -r];
        }
        point(r, 0.5 * (self.z_lo + self.z_hi), self.phi0 + 0.5 * self.width)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let z = p[2] / norm(p);
        if z < self.z_lo || z > self.z_hi {
            return false;
        }
        if self.width >= 2.0 * PI {
            return true;
        }
        let phi = (p[1].atan2(p[0]) - self.phi0).rem_euclid(2.0 * PI);
        phi <= self.width
    }

    /// Product Gauss rule in `(cos theta, phi)`; node counts scale with the
    /// cell extent so the node spacing is about `spacing`.
    pub fn quadrature(&self, r: f64, q: QuadSpec) -> Vec<(Vec3, f64)> {
        let (ta, tb) = self.theta_range();
        let smax = if ta <= PI / 2.0 && tb >= PI / 2.0 { 1.0 } else { ta.sin().max(tb.sin()) };
        let nz = q.min_nodes.max((r * (tb - ta) / q.spacing).ceil() as usize);
        let np = q.min_nodes.max((r * smax * self.width / q.spacing).ceil() as usize);
        let (zs, wz) = gauss_legendre_on(nz, self.z_lo, self.z_hi);
        let (ps, wp) = gauss_legendre_on(np, self.phi0, self.phi0 + self.width);
        let mut out = Vec::with_capacity(nz * np);
        for (z, a) in zs.iter().zip(&wz) {
            for (p, b) in ps.iter().zip(&wp) {
                out.push((point(r, *z, *p), r * r * a * b));
            }
        }
        out
    }
}

fn point(r: f64, z: f64, phi: f64) -> Vec3 {
    let s = (1.0 - z * z).max(0.0).sqrt();
    [r * s * phi.cos(), r * s * phi.sin(), r * z]
}

/// Quadrature resolution of every detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Target node spacing (length).
    pub spacing: f64,
    /// Minimum nodes per coordinate.
    pub min_nodes: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { spacing: 0.05, min_nodes: 4 }
    }
}

impl QuadSpec {
    /// Same rule with roughly twice the nodes per coordinate.
    pub fn refined(&self) -> Self {
        QuadSpec { spacing: 0.5 * self.spacing, min_nodes: 2 * self.min_nodes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub id: usize,
    pub center: Vec3,
    pub area: f64,
    pub diameter: f64,
    pub cells: Vec<ZoneCell>,
    pub quad_nodes: Vec<(Vec3, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorPartition {
    pub radius: f64,
    pub detectors: Vec<Detector>,
    /// Measured `max diam / sqrt(area)`.
    pub c_ecc: f64,
    /// Measured `max area / min area`.
    pub c_u: f64,
    pub quad: QuadSpec,
}

/// Zone boundaries `(z_lo, z_hi, count)` from north to south for `n` equal
/// areas: a cap, collars of equal-longitude cells, a cap.
fn zones(n: usize) -> Vec<(f64, f64, usize)> {
    if n == 2 {
        return vec![(0.0, 1.0, 1), (-1.0, 0.0, 1)];
    }
    let nf = n as f64;
    let area = 4.0 * PI / nf;
    let th_c = 2.0 * (1.0 / nf).sqrt().asin();
    let ideal = area.sqrt();
    let ncol = (((PI - 2.0 * th_c) / ideal).round() as usize).max(1);
    let fit = (PI - 2.0 * th_c) / ncol as f64;
    let cap = |t: f64| 2.0 * PI * (1.0 - t.cos());
    let mut counts = Vec::with_capacity(ncol);
    let mut carry = 0.0;
    for i in 1..=ncol {
        let y = (cap(th_c + i as f64 * fit) - cap(th_c + (i - 1) as f64 * fit)) / area;
        let m = (y + carry).round();
        carry += y - m;
        counts.push(m as usize);
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), n - 2);
    // cumulative caps have exactly k equal areas: z = 1 - 2k/n
    let z_of = |k: usize| 1.0 - 2.0 * k as f64 / nf;
    let mut out = vec![(z_of(1), 1.0, 1)];
    let mut k = 1;
    for m in counts.into_iter().filter(|&m| m > 0) {
        out.push((z_of(k + m), z_of(k), m));
        k += m;
    }
    out.push((-1.0, z_of(k), 1));
    out
}

/// The `n` cells of the zonal equal-area construction on the unit sphere.
pub fn zonal_cells(n: usize) -> Result<Vec<ZoneCell>> {
    if n < 2 {
        return Err(PatError::InvalidConfig("a partition needs at least 2 detectors".into()));
    }
    if n > MAX_DETECTORS {
        return Err(PatError::Infeasible(format!("{n} detectors exceed the budget {MAX_DETECTORS}")));
    }
    let mut cells = Vec::with_capacity(n);
    for (zi, (z_lo, z_hi, m)) in zones(n).into_iter().enumerate() {
        let w = 2.0 * PI / m as f64;
        // alternate collars are shifted by half a cell
        let off = if zi % 2 == 1 { 0.0 } else { 0.5 * w };
        for k in 0..m {
            let (phi0, width) = if m == 1 { (0.0, 2.0 * PI) } else { (off + k as f64 * w, w) };
            cells.push(ZoneCell { z_lo, z_hi, phi0, width });
        }
    }
    Ok(cells)
}

/// Largest cell diameter of the `n`-cell partition of the sphere of radius `r`
/// (cells within a zone are congruent).
pub fn max_diameter(r: f64, n: usize) -> Result<f64> {
    if !(2..=MAX_DETECTORS).contains(&n) {
        return Err(PatError::Infeasible(format!("detector count {n} outside 2..={MAX_DETECTORS}")));
    }
    Ok(zones(n)
        .into_iter()
        .map(|(z_lo, z_hi, m)| ZoneCell { z_lo, z_hi, phi0: 0.0, width: 2.0 * PI / m as f64 }.diameter(r))
        .fold(0.0, f64::max))
}

impl DetectorPartition {
    fn from_cells(r: f64, groups: Vec<Vec<ZoneCell>>, quad: QuadSpec) -> Result<Self> {
        let mut dets = Vec::with_capacity(groups.len());
        let mut total_nodes = 0usize;
        for (id, cells) in groups.into_iter().enumerate() {
            let area: f64 = cells.iter().map(|c| c.area(r)).sum();
            let quad_nodes: Vec<(Vec3, f64)> = cells.iter().flat_map(|c| c.quadrature(r, quad)).collect();
            total_nodes += quad_nodes.len();
            if total_nodes > MAX_NODES {
                return Err(PatError::Infeasible(format!("quadrature exceeds the node budget {MAX_NODES}")));
            }
            let diameter = group_diameter(r, &cells);
            let center = if cells.len() == 1 {
                cells[0].center(r)
            } else {
                let s = quad_nodes.iter().fold([0.0; 3], |acc, (p, w)| {
                    [acc[0] + w * p[0], acc[1] + w * p[1], acc[2] + w * p[2]]
                });
                crate::geom::scale(s, r / norm(s))
            };
            dets.push(Detector { id, center, area, diameter, cells, quad_nodes });
        }
        let c_ecc = dets.iter().map(|d| d.diameter / d.area.sqrt()).fold(0.0, f64::max);
        let amax = dets.iter().map(|d| d.area).fold(0.0, f64::max);
        let amin = dets.iter().map(|d| d.area).fold(f64::INFINITY, f64::min);
        Ok(DetectorPartition { radius: r, detectors: dets, c_ecc, c_u: amax / amin, quad })
    }

    pub fn len(&self) -> usize {
        self.detectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty()
    }

    pub fn max_diameter(&self) -> f64 {
        self.detectors.iter().map(|d| d.diameter).fold(0.0, f64::max)
    }

    pub fn min_area(&self) -> f64 {
        self.detectors.iter().map(|d| d.area).fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        self.detectors.iter().map(|d| d.area).sum()
    }

    /// All quadrature nodes, their weights and the node offset of each
    /// detector (`offsets[i]..offsets[i + 1]`).
    pub fn all_nodes(&self) -> (Vec<Vec3>, Vec<f64>, Vec<usize>) {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut offsets = vec![0];
        for d in &self.detectors {
            for (p, w) in &d.quad_nodes {
                nodes.push(*p);
                weights.push(*w);
            }
            offsets.push(nodes.len());
        }
        (nodes, weights, offsets)
    }

    /// Id of the detector containing `p`.
    pub fn locate(&self, p: Vec3) -> Option<usize> {
        self.detectors.iter().find(|d| d.cells.iter().any(|c| c.contains(p))).map(|d| d.id)
    }

    /// Replays every stored invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let r = self.radius;
        let full = 4.0 * PI * r * r;
        if ((self.total_area() - full) / full).abs() > 1e-4 {
            return Err(PatError::Infeasible(format!("areas sum to {} not {full}", self.total_area())));
        }
        for d in &self.detectors {
            let ws: f64 = d.quad_nodes.iter().map(|(_, w)| w).sum();
            if ((ws - d.area) / d.area).abs() > 1e-6 {
                return Err(PatError::Infeasible(format!("detector {}: weights {ws} vs area {}", d.id, d.area)));
            }
            if d.diameter > self.c_ecc * d.area.sqrt() * (1.0 + 1e-12) {
                return Err(PatError::Infeasible(format!("detector {}: eccentricity above C_ecc", d.id)));
            }
            for (p, _) in &d.quad_nodes {
                if (norm(*p) - r).abs() > 1e-12 * r {
                    return Err(PatError::OffSphere(format!("detector {} node off the sphere", d.id)));
                }
                if !d.cells.iter().any(|c| c.contains(*p)) {
                    return Err(PatError::Infeasible(format!("detector {} node outside its cell", d.id)));
                }
            }
        }
        let amax = self.detectors.iter().map(|d| d.area).fold(0.0, f64::max);
        if amax / self.min_area() > self.c_u * (1.0 + 1e-12) {
            return Err(PatError::Infeasible("quasi-uniformity ratio above C_u".into()));
        }
        Ok(())
    }

    /// Nodes that fall in the interior of more than one detector cell.
    pub fn shared_nodes(&self) -> usize {
        let mut shared = 0;
        for d in &self.detectors {
            for (p, _) in &d.quad_nodes {
                let owners = self
                    .detectors
                    .iter()
                    .filter(|e| e.id != d.id && e.cells.iter().any(|c| strictly_inside(c, *p)))
                    .count();
                shared += owners;
            }
        }
        shared
    }

    /// Partition with detectors `a` and `b` fused into one (ids renumbered).
    pub fn merged(&self, a: usize, b: usize) -> Result<Self> {
        if a == b || a >= self.len() || b >= self.len() {
            return Err(PatError::InvalidConfig("merge needs two distinct detector ids".into()));
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let mut groups = Vec::with_capacity(self.len() - 1);
        for d in &self.detectors {
            if d.id == hi {
                continue;
            }
            let mut cells = d.cells.clone();
            if d.id == lo {
                cells.extend(self.detectors[hi].cells.iter().copied());
            }
            groups.push(cells);
        }
        DetectorPartition::from_cells(self.radius, groups, self.quad)
    }
}

fn strictly_inside(c: &ZoneCell, p: Vec3) -> bool {
    let z = p[2] / norm(p);
    let tol = 1e-12;
    if z <= c.z_lo + tol || z >= c.z_hi - tol {
        return false;
    }
    if c.width >= 2.0 * PI {
        return true;
    }
    let phi = (p[1].atan2(p[0]) - c.phi0).rem_euclid(2.0 * PI);
    phi > tol && phi < c.width - tol
}

/// Diameter of a union of cells: exact for one cell, otherwise the upper
/// bound `max(d_a, d_b, d_a + |c_a - c_b| + d_b)` over pairs.
fn group_diameter(r: f64, cells: &[ZoneCell]) -> f64 {
    let ds: Vec<f64> = cells.iter().map(|c| c.diameter(r)).collect();
    let mut best = ds.iter().cloned().fold(0.0, f64::max);
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            let gap = dist(cells[i].center(r), cells[j].center(r));
            best = best.max(ds[i] + ds[j] + gap);
        }
    }
    best.min(2.0 * r)
}

/// Zonal equal-area partition with `n` detectors.
pub fn equal_area_partition(r: f64, n: usize, quad: QuadSpec) -> Result<DetectorPartition> {
    if !(r > 0.0) || !(quad.spacing > 0.0) || quad.min_nodes == 0 {
        return Err(PatError::InvalidConfig("partition needs R > 0 and a positive quadrature spacing".into()));
    }
    let cells = zonal_cells(n)?;
    DetectorPartition::from_cells(r, cells.into_iter().map(|c| vec![c]).collect(), quad)
}

/// Smallest equal-area partition whose cells all have diameter `<= mu 2^-j0`.
pub fn partition_for_scale(r: f64, j0: u32, mu: f64, quad: QuadSpec) -> Result<DetectorPartition> {
    let n = detectors_for_scale(r, j0, mu)?;
    equal_area_partition(r, n, quad)
}

/// The detector count chosen by [`partition_for_scale`].
pub fn detectors_for_scale(r: f64, j0: u32, mu: f64) -> Result<usize> {
    if !(mu > 0.0) {
        return Err(PatError::InvalidConfig("mu must be positive".into()));
    }
    let target = mu / (1u64 << j0) as f64;
    for n in 2..=MAX_DETECTORS {
        if max_diameter(r, n)? <= target {
            return Ok(n);
        }
    }
    Err(PatError::Infeasible(format!(
        "no partition with at most {MAX_DETECTORS} detectors has diameter <= {target}"
    )))
}

/// `nu_i = |E_i| / |Sigma|`.
pub fn sampling_distribution(p: &DetectorPartition) -> Vec<f64> {
    let total = p.total_area();
    p.detectors.iter().map(|d| d.area / total).collect()
}

/// `m` i.i.d. draws from `nu`, reproducible from `seed`.
pub fn sample_detectors(nu: &[f64], m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(PatError::InvalidConfig("m must be at least 1".into()));
    }
    let dist = WeightedIndex::new(nu).map_err(|e| PatError::InvalidConfig(format!("bad distribution: {e}")))?;
    let mut rng = crate::rng::substream(seed, "detector-sampling");
    Ok((0..m).map(|_| dist.sample(&mut rng)).collect())
}

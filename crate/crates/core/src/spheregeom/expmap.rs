//! Exponential map of the unit sphere and the scaling of planar detector
//! shapes onto small spherical caps.

use crate::error::{PatError, Result};
use crate::geom::{add, cross, dist, norm, scale, Vec3};
use crate::quad::gauss_legendre_on;

/// `exp_p(v) = cos|v| p + sin|v| v / |v|` for `v` tangent at the unit vector `p`.
pub fn exp_map(p: Vec3, v: Vec3) -> Vec3 {
    let r = norm(v);
    if r == 0.0 {
        return p;
    }
    add(scale(p, r.cos()), scale(v, r.sin() / r))
}

/// Diameter-over-root-area inflation bound `sqrt(mu0^2 + (1 + mu0^2)^2) (1 + mu0)^(1/2)`.
pub fn inflation_factor(mu0: f64) -> f64 {
    (mu0 * mu0 + (1.0 + mu0 * mu0).powi(2)).sqrt() * (1.0 + mu0).sqrt()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn sinc_slope(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        -x / 3.0
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

/// Largest `x` in `[lo, hi]` with `ok(x)`, assuming `ok` holds on a prefix.
fn bisect(mut lo: f64, mut hi: f64, ok: impl Fn(f64) -> bool) -> f64 {
    if ok(hi) {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `(mu0, delta)` for a target `mu > 0`: `mu0` is the largest value in
/// `(0, 1)` with `inflation_factor(mu0) <= 1 + mu`, and `delta` the largest
/// radius below 1 such that on `B_delta` the exp-map Jacobian stays above
/// `1 / (1 + mu0)`, `delta <= mu0`, and `sin(r)/r` is `mu0`-Lipschitz.
pub fn delta_for_mu(mu: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(PatError::InvalidConfig("mu must be positive".into()));
    }
    let mu0 = bisect(0.0, 1.0 - 1e-12, |m| inflation_factor(m) <= 1.0 + mu);
    let jac = bisect(0.0, 1.0, |d| sinc(d) >= 1.0 / (1.0 + mu0));
    let lip = bisect(0.0, 1.0, |d| sinc_slope(d).abs() <= mu0);
    Ok((mu0, mu0.min(jac).min(lip).min(1.0 - 1e-12)))
}

/// Planar detector shape in tangent-plane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanarRegion {
    Disk { radius: f64 },
    /// Convex polygon, vertices in order.
    Polygon(Vec<[f64; 2]>),
}

impl PlanarRegion {
    fn max_radius(&self) -> f64 {
        match self {
            PlanarRegion::Disk { radius } => *radius,
            PlanarRegion::Polygon(v) => v.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max),
        }
    }

    fn area(&self) -> f64 {
        match self {
            PlanarRegion::Disk { radius } => std::f64::consts::PI * radius * radius,
            PlanarRegion::Polygon(v) => {
                let n = v.len();
                0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>().abs()
            }
        }
    }

    fn boundary(&self, per_edge: usize) -> Vec<[f64; 2]> {
        match self {
            PlanarRegion::Disk { radius } => (0..4 * per_edge)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / (4 * per_edge) as f64;
                    [radius * a.cos(), radius * a.sin()]
                })
                .collect(),
            PlanarRegion::Polygon(v) => {
                let n = v.len();
                let per_edge = (4 * per_edge / n).max(1);
                let mut out = Vec::with_capacity(n * per_edge);
                for i in 0..n {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    for k in 0..per_edge {
                        let s = k as f64 / per_edge as f64;
                        out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                    }
                }
                out
            }
        }
    }
}

/// Image `E_t = exp_p(t E~)` with measured geometry.
#[derive(Debug, Clone)]
pub struct CapImage {
    /// Images of boundary samples.
    pub points: Vec<Vec3>,
    pub diameter: f64,
    pub area: f64,
    pub planar_diameter: f64,
    pub planar_area: f64,
    /// `(diam / sqrt(area))` of `E_t` over the same ratio of `t E~`.
    pub inflation: f64,
    /// Extremes of `|exp(tv) - exp(tw)| / (t |v - w|)` over sample pairs.
    pub distortion: (f64, f64),
}

fn tangent_basis(p: Vec3) -> (Vec3, Vec3) {
    let a = if p[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(p, a);
    let e1 = scale(e1, 1.0 / norm(e1));
    (e1, cross(p, e1))
}

/// Maps `t E~` onto the unit sphere at `p`. `E~` must lie in `B_delta(0)`.
pub fn exp_map_cap(p: Vec3, t: f64, region: &PlanarRegion, delta: f64) -> Result<CapImage> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(PatError::InvalidConfig("scale t must lie in (0, 1]".into()));
    }
    if (norm(p) - 1.0).abs() > 1e-12 {
        return Err(PatError::OffSphere("base point must be a unit vector".into()));
    }
    if region.max_radius() > delta {
        return Err(PatError::InvalidConfig(format!(
            "planar region radius {} exceeds delta {delta}",
            region.max_radius()
        )));
    }
    let (e1, e2) = tangent_basis(p);
    let lift = |q: [f64; 2]| add(scale(e1, t * q[0]), scale(e2, t * q[1]));
    let bnd = region.boundary(64);
    let points: Vec<Vec3> = bnd.iter().map(|q| exp_map(p, lift(*q))).collect();
    let mut diameter: f64 = 0.0;
    let mut planar_diameter: f64 = 0.0;
    let (mut dlo, mut dhi) = (f64::INFINITY, 0.0f64);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let c = dist(points[i], points[j]);
            let pd = t * (bnd[i][0] - bnd[j][0]).hypot(bnd[i][1] - bnd[j][1]);
            diameter = diameter.max(c);
            planar_diameter = planar_diameter.max(pd);
            if pd > 0.0 {
                dlo = dlo.min(c / pd);
                dhi = dhi.max(c / pd);
            }
        }
    }
    let planar_area = t * t * region.area();
    let area = match region {
        PlanarRegion::Disk { radius } => 2.0 * std::f64::consts::PI * (1.0 - (t * radius).cos()),
        PlanarRegion::Polygon(v) => spherical_polygon_area(v, t),
    };
    let inflation = (diameter / area.sqrt()) / (planar_diameter / planar_area.sqrt());
    Ok(CapImage { points, diameter, area, planar_diameter, planar_area, inflation, distortion: (dlo, dhi) })
}

/// `int_{t P} sin|v| / |v| dv` by fan triangulation from the vertex centroid
/// and a collapsed Gauss rule per triangle.
fn spherical_polygon_area(v: &[[f64; 2]], t: f64) -> f64 {
    let n = v.len();
    let c = [v.iter().map(|p| p[0]).sum::<f64>() / n as f64, v.iter().map(|p| p[1]).sum::<f64>() / n as f64];
    let (xs, ws) = gauss_legendre_on(16, 0.0, 1.0);
    let mut s = 0.0;
    for i in 0..n {
        let a = [t * c[0], t * c[1]];
        let b = [t * v[i][0], t * v[i][1]];
        let d = [t * v[(i + 1) % n][0], t * v[(i + 1) % n][1]];
        let jac = ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1])).abs();
        for (u, wu) in xs.iter().zip(&ws) {
            for (w, ww) in xs.iter().zip(&ws) {
                // (u, w) in the unit square -> triangle (1 - u) a + u ((1 - w) b + w d)
                let q = [
                    (1.0 - u) * a[0] + u * ((1.0 - w) * b[0] + w * d[0]),
                    (1.0 - u) * a[1] + u * ((1.0 - w) * b[1] + w * d[1]),
                ];
                s += wu * ww * u * jac * sinc(q[0].hypot(q[1]));
            }
        }
    }
    s
}

//! Kirchhoff's formula as an independent point oracle:
//! `u(x, t) = (1 / 4 pi t^2) int_{|y-x|=t} (u0(y) + grad u0(y) . (y - x)) dsigma(y)`.

use super::grid::ScalarField3;
use super::interp::interpolate_lagrange;
use super::propagate::Propagator;
use crate::error::{PatError, Result};
use crate::geom::{add, scale, Aabb, Vec3};
use crate::quad::sphere_rule;

pub const MIN_QUAD_ORDER: usize = 3;

/// `u0`, its spectral gradient and a bound on its support.
pub struct KirchhoffOracle {
    fields: [ScalarField3; 4],
    support: Aabb,
    interp_order: usize,
}

impl KirchhoffOracle {
    pub fn new(u0: &ScalarField3, interp_order: usize) -> Result<Self> {
        let p = Propagator::new(u0)?;
        let [g1, g2, g3] = p.gradient0();
        let g = u0.grid;
        let thr = 1e-14 * u0.max_abs();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in 0..g.shape[0] {
            for j in 0..g.shape[1] {
                for k in 0..g.shape[2] {
                    if u0.values[g.index(i, j, k)].abs() > thr {
                        let x = g.node(i, j, k);
                        for a in 0..3 {
                            lo[a] = lo[a].min(x[a]);
                            hi[a] = hi[a].max(x[a]);
                        }
                    }
                }
            }
        }
        // interpolation stencils reach half a stencil beyond the last sample
        let pad = g.spacing * (interp_order as f64 / 2.0);
        let support = if lo[0].is_finite() {
            Aabb::new(lo.map(|v| v - pad), hi.map(|v| v + pad))
        } else {
            Aabb::new([0.0; 3], [0.0; 3])
        };
        Ok(KirchhoffOracle { fields: [u0.clone(), g1, g2, g3], support, interp_order })
    }

    pub fn support(&self) -> Aabb {
        self.support
    }

    pub fn value(&self, x: Vec3, t: f64, quad_order: usize) -> Result<f64> {
        if quad_order < MIN_QUAD_ORDER {
            return Err(PatError::QuadratureOrder(format!(
                "order {quad_order} below minimum {MIN_QUAD_ORDER}"
            )));
        }
        if !(t > 0.0) {
            return Err(PatError::InvalidConfig("Kirchhoff evaluation needs t > 0".into()));
        }
        if self.fields[0].max_abs() == 0.0 || t < self.support.dist_to_point(x) {
            return Ok(0.0);
        }
        let p = self.interp_order;
        let mut s = 0.0;
        for (w_dir, w) in sphere_rule(quad_order) {
            let y = add(x, scale(w_dir, t));
            let u = interpolate_lagrange(&self.fields[0], y, p);
            let mut gd = 0.0;
            for a in 0..3 {
                gd += interpolate_lagrange(&self.fields[a + 1], y, p) * w_dir[a] * t;
            }
            s += w * (u + gd);
        }
        Ok(s / (4.0 * std::f64::consts::PI))
    }
}

/// One-shot Kirchhoff evaluation (builds the gradient each call).
pub fn kirchhoff_point(u0: &ScalarField3, x: Vec3, t: f64, quad_order: usize) -> Result<f64> {
    KirchhoffOracle::new(u0, 4)?.value(x, t, quad_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::grid::Grid3;
    use crate::wavefield::interp::{restrict_to_sphere, Interp};

    #[test]
    fn misses_support_gives_zero() {
        let g = Grid3::periodic(3.0, 32).unwrap();
        let u = ScalarField3::from_fn(g, |p| if p[0].abs() < 0.3 && p[1].abs() < 0.3 && p[2].abs() < 0.3 { 1.0 } else { 0.0 });
        let v = kirchhoff_point(&u, [2.0, 0.0, 0.0], 0.5, 10).unwrap();
        assert_eq!(v, 0.0);
        assert!(matches!(kirchhoff_point(&u, [2.0, 0.0, 0.0], 0.5, 1), Err(PatError::QuadratureOrder(_))));
    }

    #[test]
    fn constant_inside_gives_one() {
        let g = Grid3::periodic(3.0, 32).unwrap();
        let u = ScalarField3::from_fn(g, |_| 1.0);
        let v = kirchhoff_point(&u, [0.1, 0.2, 0.0], 0.8, 10).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_spectral_propagator() {
        let g = Grid3::periodic(3.0, 64).unwrap();
        let u0 = ScalarField3::from_fn(g, |p| {
            (-((p[0] - 0.1).powi(2) + p[1].powi(2) + (p[2] + 0.1).powi(2)) / (2.0 * 0.3 * 0.3)).exp()
        });
        let oracle = KirchhoffOracle::new(&u0, 4).unwrap();
        let prop = Propagator::new(&u0).unwrap();
        let x = [0.0, 1.5, 0.0];
        for t in [1.2, 1.5, 1.8] {
            let k = oracle.value(x, t, 40).unwrap();
            let ut = prop.at(t);
            let s = restrict_to_sphere(&ut, &[x], 1.5, Interp::Lagrange(4)).unwrap()[0];
            assert!((k - s).abs() < 1e-2 * s.abs().max(0.05), "t={t}: {k} vs {s}");
        }
    }
}

//! Space-time traces `U u0` on sphere nodes.
//!
//! Two sources are supported. A grid field goes through the periodic spectral
//! propagator and is interpolated at the nodes (point values at `t_k`). A sum
//! of separable terms goes through the radial engine (time-cell averages,
//! exact zeros outside the Huygens window).

use serde::{Deserialize, Serialize};

use super::grid::ScalarField3;
use super::interp::{check_on_sphere, interpolate_lagrange};
use super::propagate::{check_wrap, Propagator, TimeGrid};
use super::radial::{RadialEngine, SeparableTerm};
use crate::error::{PatError, Result};
use crate::geom::{Aabb, Vec3};

/// Row-major `nodes x (n_steps + 1)` table.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub nodes: Vec<Vec3>,
    pub time: TimeGrid,
    pub values: Vec<f64>,
}

impl TraceTable {
    pub fn zeros(nodes: Vec<Vec3>, time: TimeGrid) -> Self {
        let len = nodes.len() * (time.n_steps + 1);
        TraceTable { nodes, time, values: vec![0.0; len] }
    }

    pub fn n_times(&self) -> usize {
        self.time.n_steps + 1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nt = self.n_times();
        &self.values[i * nt..(i + 1) * nt]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let nt = self.n_times();
        &mut self.values[i * nt..(i + 1) * nt]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self += a * other` (same nodes and times).
    pub fn axpy(&mut self, a: f64, other: &TraceTable) -> Result<()> {
        if self.nodes != other.nodes || self.time != other.time {
            return Err(PatError::SizeMismatch("trace tables on different nodes or times".into()));
        }
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    /// `sum_i w_i int_0^T t^p |row_i|^2 dt` with trapezoid weights in time.
    pub fn weighted_energy(&self, node_weights: &[f64], t_power: i32) -> f64 {
        let tw = self.time.trapezoid_weights();
        let ts = self.time.times();
        let mut s = 0.0;
        for (i, w) in node_weights.iter().enumerate() {
            let row = self.row(i);
            let e: f64 = (0..row.len()).map(|k| tw[k] * ts[k].powi(t_power) * row[k] * row[k]).sum();
            s += w * e;
        }
        s
    }
}

/// Signal representation accepted by [`forward_trace`].
pub enum TraceSource<'a> {
    Field(&'a ScalarField3),
    Separable(&'a [SeparableTerm]),
}

/// Options for the two trace routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Lagrange stencil width for the grid route.
    pub interp_order: usize,
    /// Bin width factor of the radial engine.
    pub kappa: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { interp_order: 4, kappa: 0.5 }
    }
}

/// `U u0` on `nodes` (all on the sphere of radius `r`) at the samples of `time`.
pub fn forward_trace(
    src: TraceSource<'_>,
    nodes: &[Vec3],
    r: f64,
    time: TimeGrid,
    opts: TraceOptions,
) -> Result<TraceTable> {
    check_on_sphere(nodes, r)?;
    let mut table = TraceTable::zeros(nodes.to_vec(), time);
    match src {
        TraceSource::Field(u0) => {
            time.validate(r, Some(u0.grid.spacing))?;
            if r + time.t_final > u0.grid.half_width() + 1e-12 {
                return Err(PatError::WrapAround(format!(
                    "R + T = {} exceeds half width {}",
                    r + time.t_final,
                    u0.grid.half_width()
                )));
            }
            check_wrap(u0, time.t_final)?;
            if u0.max_abs() == 0.0 {
                return Ok(table);
            }
            let prop = Propagator::new(u0)?;
            let nt = table.n_times();
            for (k, t) in time.times().into_iter().enumerate() {
                let u = if k == 0 { u0.clone() } else { prop.at(t) };
                for (i, x) in nodes.iter().enumerate() {
                    table.values[i * nt + k] = interpolate_lagrange(&u, *x, opts.interp_order);
                }
            }
        }
        TraceSource::Separable(terms) => {
            let eng = RadialEngine::new(time.dt(), time.n_steps, opts.kappa);
            for (i, x) in nodes.iter().enumerate() {
                let tr = eng.trace_sum(terms, *x);
                table.row_mut(i).copy_from_slice(&tr);
            }
        }
    }
    Ok(table)
}

/// Value and full spatial gradient traces of a grid field.
pub struct GradientTraces {
    pub value: TraceTable,
    pub grad: [TraceTable; 3],
}

/// `U u0` and `grad U u0` on the sphere nodes, two real outputs per inverse FFT.
pub fn forward_trace_with_gradient(
    u0: &ScalarField3,
    nodes: &[Vec3],
    r: f64,
    time: TimeGrid,
    interp_order: usize,
) -> Result<GradientTraces> {
    check_on_sphere(nodes, r)?;
    time.validate(r, Some(u0.grid.spacing))?;
    check_wrap(u0, time.t_final)?;
    let prop = Propagator::new(u0)?;
    let mut tabs: [TraceTable; 4] = std::array::from_fn(|_| TraceTable::zeros(nodes.to_vec(), time));
    let nt = time.n_steps + 1;
    for (k, t) in time.times().into_iter().enumerate() {
        let fields = prop.at_with_gradient(t);
        for (c, f) in fields.iter().enumerate() {
            for (i, x) in nodes.iter().enumerate() {
                tabs[c].values[i * nt + k] = interpolate_lagrange(f, *x, interp_order);
            }
        }
    }
    let [value, g1, g2, g3] = tabs;
    Ok(GradientTraces { value, grad: [g1, g2, g3] })
}

/// Where a trace is allowed to be non-zero and how much leaks outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuygensReport {
    pub window_lo: f64,
    pub window_hi: f64,
    /// Largest `|value|` outside the padded window relative to the table max.
    pub max_outside_rel: f64,
    /// Trace energy outside the padded window relative to the total.
    pub energy_outside_rel: f64,
}

/// Window `[d(support, sphere), 2R]`, padded by one time step on each side.
pub fn huygens_report(table: &TraceTable, support: &Aabb, r: f64) -> HuygensReport {
    let far = corners(support).iter().map(|c| crate::geom::norm(*c)).fold(0.0, f64::max);
    let lo = (r - far).max(0.0);
    let hi = 2.0 * r;
    let dt = table.time.dt();
    let ts = table.time.times();
    let nt = table.n_times();
    let peak = table.max_abs();
    let (mut out_max, mut out_e, mut tot_e) = (0.0f64, 0.0, 0.0);
    for i in 0..table.nodes.len() {
        for k in 0..nt {
            let v = table.values[i * nt + k];
            tot_e += v * v;
            if ts[k] < lo - dt || ts[k] > hi + dt {
                out_max = out_max.max(v.abs());
                out_e += v * v;
            }
        }
    }
    HuygensReport {
        window_lo: lo,
        window_hi: hi,
        max_outside_rel: if peak > 0.0 { out_max / peak } else { 0.0 },
        energy_outside_rel: if tot_e > 0.0 { out_e / tot_e } else { 0.0 },
    }
}

fn corners(b: &Aabb) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(8);
    for m in 0..8 {
        out.push(std::array::from_fn(|a| if m >> a & 1 == 1 { b.hi[a] } else { b.lo[a] }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::sphere_rule;
    use crate::wavefield::grid::Grid3;
    use crate::wavelet3d::{build_dictionary, Filter1D, LatticeGeometry};

    fn sphere_nodes(r: f64, deg: usize) -> (Vec<Vec3>, Vec<f64>) {
        sphere_rule(deg).into_iter().map(|(p, w)| (p.map(|c| c * r), w * r * r)).unzip()
    }

    #[test]
    fn zero_field_gives_zero_table() {
        let g = Grid3::periodic(4.5, 32).unwrap();
        let u = ScalarField3::zeros(g);
        let (nodes, _) = sphere_nodes(1.5, 6);
        let tg = TimeGrid::new(3.0, 30).unwrap();
        let t = forward_trace(TraceSource::Field(&u), &nodes, 1.5, tg, TraceOptions::default()).unwrap();
        assert!(t.values.iter().all(|v| *v == 0.0));
        let t = forward_trace(TraceSource::Separable(&[]), &nodes, 1.5, tg, TraceOptions::default()).unwrap();
        assert!(t.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn atom_window_and_linearity() {
        let f = Filter1D::daubechies(2).unwrap();
        let d = build_dictionary(&f, 1, 5, LatticeGeometry::centered(0.25, 3)).unwrap();
        let (nodes, _) = sphere_nodes(1.5, 8);
        let tg = TimeGrid::new(3.0, 150).unwrap();
        let a = SeparableTerm::from_atom(&d.atoms[5]);
        let b = SeparableTerm::from_atom(&d.atoms[100]);
        let opts = TraceOptions::default();
        let (mut a0, mut b0) = (a.clone(), b.clone());
        a0.coef = 0.0;
        b0.coef = 0.0;
        // zero-weight partners keep the joint support (and bin width) fixed
        let ta = forward_trace(TraceSource::Separable(&[a.clone(), b0]), &nodes, 1.5, tg, opts).unwrap();
        let tb = forward_trace(TraceSource::Separable(&[a0, b.clone()]), &nodes, 1.5, tg, opts).unwrap();
        let mut a2 = a.clone();
        a2.coef *= 2.0;
        let mut b2 = b.clone();
        b2.coef *= -0.5;
        let tab = forward_trace(TraceSource::Separable(&[a2, b2]), &nodes, 1.5, tg, opts).unwrap();
        let peak = tab.max_abs();
        for k in 0..tab.values.len() {
            let want = 2.0 * ta.values[k] - 0.5 * tb.values[k];
            assert!((tab.values[k] - want).abs() <= 1e-10 * peak);
        }
        // the atom near the centre is silent before R - (its far corner radius)
        let ta = forward_trace(TraceSource::Separable(std::slice::from_ref(&a)), &nodes, 1.5, tg, opts).unwrap();
        let rep = huygens_report(&ta, &d.atoms[5].support_box, 1.5);
        assert!(rep.window_lo > 0.4);
        assert_eq!(rep.max_outside_rel, 0.0);
        assert!(rep.energy_outside_rel == 0.0);
        let first = (rep.window_lo / tg.dt()).floor() as usize;
        for i in 0..nodes.len() {
            assert!(ta.row(i)[..first.saturating_sub(1)].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn wrap_and_resolution_guards() {
        let g = Grid3::periodic(3.0, 32).unwrap();
        let u = ScalarField3::from_fn(g, |p| (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / 0.08).exp());
        let (nodes, _) = sphere_nodes(1.5, 6);
        let tg = TimeGrid::new(3.0, 100).unwrap();
        let r = forward_trace(TraceSource::Field(&u), &nodes, 1.5, tg, TraceOptions::default());
        assert!(matches!(r, Err(PatError::WrapAround(_))));
        let off = vec![[1.6, 0.0, 0.0]];
        let r = forward_trace(TraceSource::Separable(&[]), &off, 1.5, tg, TraceOptions::default());
        assert!(matches!(r, Err(PatError::OffSphere(_))));
    }
}

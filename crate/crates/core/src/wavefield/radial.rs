//! Sphere traces of separable sources by exact spherical means.
//!
//! For `f(y) = prod_i a_i(y_i)` and a fixed point `x`, let
//! `D(rho) = int f(y) delta(|y - x|^2 - rho) dy`. Then the free-space solution
//! with `u(0) = f, u_t(0) = 0` is `u(x, t) = (t / pi) D'(t^2)`, and its average
//! over `[a, b]` in time is `(D(b^2) - D(a^2)) / (2 pi (b - a))`.
//!
//! Per axis the measure `a_i(y_i) dy_i` is pushed forward under
//! `y_i -> (y_i - x_i)^2` into bins of width `delta` starting exactly at the
//! axis minimum; the three bin-mass sequences are convolved and each sum of
//! three in-bin uniforms spreads as a quadratic B-spline. `D` vanishes
//! identically below `dist(x, supp f)^2`, so traces respect Huygens' window
//! exactly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use statrs::function::erf::erf;

use crate::geom::Vec3;
use crate::wavelet3d::{Profile1D, WaveletAtom};

/// One-dimensional source factor with a closed-form antiderivative.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Piecewise constant on cells `[start + k cell, start + (k+1) cell)`;
    /// `prefix[k]` is the integral up to the start of cell `k`.
    Cells { start: f64, cell: f64, values: Vec<f64>, prefix: Vec<f64> },
    /// `amp exp(-(y - c)^2 / (2 s^2))`, truncated at 7 s.
    Gauss { c: f64, s: f64, amp: f64 },
    /// Derivative of `amp exp(-(y - c)^2 / (2 s^2))`.
    DGauss { c: f64, s: f64, amp: f64 },
}

const GAUSS_CUT: f64 = 7.0;

impl Factor {
    pub fn cells(start: f64, cell: f64, values: Vec<f64>) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &values {
            acc += v * cell;
            prefix.push(acc);
        }
        Factor::Cells { start, cell, values, prefix }
    }

    pub fn from_profile(p: &Profile1D) -> Self {
        // trim trailing zero padding so supports are tight
        let mut n = p.values.len();
        while n > 0 && p.values[n - 1] == 0.0 {
            n -= 1;
        }
        let mut k0 = 0;
        while k0 < n && p.values[k0] == 0.0 {
            k0 += 1;
        }
        Factor::cells(p.start + p.cell * k0 as f64, p.cell, p.values[k0..n].to_vec())
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Factor::Cells { start, cell, values, .. } => (*start, start + cell * values.len() as f64),
            Factor::Gauss { c, s, .. } | Factor::DGauss { c, s, .. } => (c - GAUSS_CUT * s, c + GAUSS_CUT * s),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Factor::Cells { start, cell, values, .. } => {
                let u = (y - start) / cell;
                if u < 0.0 {
                    0.0
                } else {
                    values.get(u as usize).copied().unwrap_or(0.0)
                }
            }
            Factor::Gauss { c, s, amp } => amp * (-(y - c).powi(2) / (2.0 * s * s)).exp(),
            Factor::DGauss { c, s, amp } => -amp * (y - c) / (s * s) * (-(y - c).powi(2) / (2.0 * s * s)).exp(),
        }
    }

    /// `int_{-inf}^{y} a`.
    pub fn cumulative(&self, y: f64) -> f64 {
        match self {
            Factor::Cells { start, cell, values, prefix } => {
                let u = (y - start) / cell;
                if u <= 0.0 {
                    return 0.0;
                }
                let k = u.floor() as usize;
                if k >= values.len() {
                    return prefix[values.len()];
                }
                prefix[k] + values[k] * (y - start - cell * k as f64)
            }
            Factor::Gauss { c, s, amp } => {
                amp * s * (PI / 2.0).sqrt() * (1.0 + erf((y - c) / (s * std::f64::consts::SQRT_2)))
            }
            Factor::DGauss { c, s, amp } => amp * (-(y - c).powi(2) / (2.0 * s * s)).exp(),
        }
    }

    /// Derivative factor for gradients (only defined for smooth factors).
    pub fn derivative(&self) -> Option<Factor> {
        match self {
            Factor::Gauss { c, s, amp } => Some(Factor::DGauss { c: *c, s: *s, amp: *amp }),
            _ => None,
        }
    }
}

/// `coef * a_0(y_0) a_1(y_1) a_2(y_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm {
    pub coef: f64,
    pub factors: [Factor; 3],
}

impl SeparableTerm {
    pub fn from_atom(atom: &WaveletAtom) -> Self {
        SeparableTerm { coef: 1.0, factors: std::array::from_fn(|i| Factor::from_profile(&atom.factors[i])) }
    }

    /// Isotropic Gaussian bump `amp exp(-|y - c|^2 / (2 s^2))`.
    pub fn gaussian(center: Vec3, s: f64, amp: f64) -> Self {
        SeparableTerm {
            coef: amp,
            factors: std::array::from_fn(|i| Factor::Gauss { c: center[i], s, amp: 1.0 }),
        }
    }

    pub fn eval(&self, y: Vec3) -> f64 {
        self.coef * self.factors[0].eval(y[0]) * self.factors[1].eval(y[1]) * self.factors[2].eval(y[2])
    }

    pub fn support_box(&self) -> crate::geom::Aabb {
        let s: [(f64, f64); 3] = std::array::from_fn(|i| self.factors[i].support());
        crate::geom::Aabb::new([s[0].0, s[1].0, s[2].0], [s[0].1, s[1].1, s[2].1])
    }

    /// Partial derivative along `axis`, if the factor is smooth.
    pub fn partial(&self, axis: usize) -> Option<SeparableTerm> {
        let mut t = self.clone();
        t.factors[axis] = self.factors[axis].derivative()?;
        Some(t)
    }
}

/// Per-axis push-forward bin masses: `(sigma_min, masses)`.
fn axis_masses(f: &Factor, x: f64, delta: f64) -> (f64, Vec<f64>) {
    let (lo, hi) = f.support();
    let zl = lo - x;
    let zh = hi - x;
    let smin = if zl <= 0.0 && zh >= 0.0 { 0.0 } else { zl.abs().min(zh.abs()).powi(2) };
    let smax = zl.abs().max(zh.abs()).powi(2);
    let nb = (((smax - smin) / delta).ceil() as usize).max(1);
    let mut m = Vec::with_capacity(nb);
    let r0 = smin.sqrt();
    let mut prev_pos = f.cumulative(x + r0);
    let mut prev_neg = f.cumulative(x - r0);
    for k in 0..nb {
        let r = (smin + delta * (k + 1) as f64).sqrt();
        let pos = f.cumulative(x + r);
        let neg = f.cumulative(x - r);
        m.push((pos - prev_pos) + (prev_neg - neg));
        prev_pos = pos;
        prev_neg = neg;
    }
    (smin, m)
}

/// Linear convolution of three sequences (FFT based).
fn conv3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() + c.len() - 2;
    let len = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let spec = |v: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (k, &x) in v.iter().enumerate() {
            buf[k].re = x;
        }
        fwd.process(&mut buf);
        buf
    };
    let (sa, sb, sc) = (spec(a), spec(b), spec(c));
    let mut buf: Vec<Complex64> = (0..len).map(|k| sa[k] * sb[k] * sc[k]).collect();
    inv.process(&mut buf);
    buf[..n].iter().map(|z| z.re / len as f64).collect()
}

/// Cardinal quadratic B-spline on `[0, 3]`.
#[inline]
fn b3(u: f64) -> f64 {
    if u <= 0.0 || u >= 3.0 {
        0.0
    } else if u < 1.0 {
        0.5 * u * u
    } else if u < 2.0 {
        0.5 * (-2.0 * u * u + 6.0 * u - 3.0)
    } else {
        0.5 * (3.0 - u) * (3.0 - u)
    }
}

/// Evaluates `D(rho)` from combined bin masses starting at offset `o`.
fn density(m: &[f64], o: f64, delta: f64, rho: f64) -> f64 {
    let u = (rho - o) / delta;
    if u <= 0.0 {
        return 0.0;
    }
    let kmax = u.floor() as i64;
    let mut s = 0.0;
    for k in (kmax - 2).max(0)..=kmax {
        if let Some(&mk) = m.get(k as usize) {
            s += mk * b3(u - k as f64);
        }
    }
    s / delta
}

/// Uniform time samples `t_k = k dt`, `k = 0..=n_steps`; sample `k` is the
/// average of the trace over `[max(t_k - dt/2, 0), t_k + dt/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEngine {
    pub dt: f64,
    pub n_steps: usize,
    /// Bin width relative to `2 dt dist(x, source)`.
    pub kappa: f64,
}

impl RadialEngine {
    pub fn new(dt: f64, n_steps: usize, kappa: f64) -> Self {
        RadialEngine { dt, n_steps, kappa }
    }

    fn edges_sq(&self) -> Vec<f64> {
        (0..=self.n_steps + 1)
            .map(|k| {
                let e = if k == 0 { 0.0 } else { (k as f64 - 0.5) * self.dt };
                e * e
            })
            .collect()
    }

    fn averages(&self, d_at_edges: &[f64]) -> Vec<f64> {
        let n = self.n_steps;
        (0..=n)
            .map(|k| {
                let a = if k == 0 { 0.0 } else { (k as f64 - 0.5) * self.dt };
                let b = (k as f64 + 0.5) * self.dt;
                (d_at_edges[k + 1] - d_at_edges[k]) / (2.0 * PI * (b - a))
            })
            .collect()
    }

    /// Bin width at a point whose distance to the source is `dist`.
    pub fn bin_width(&self, dist: f64) -> f64 {
        self.kappa * 2.0 * self.dt * dist.max(self.dt)
    }

    /// `D(rho)` of a separable term at `x` for each `rho`.
    pub fn spherical_density(&self, term: &SeparableTerm, x: Vec3, rhos: &[f64], delta: f64) -> Vec<f64> {
        let parts: Vec<(f64, Vec<f64>)> = (0..3).map(|i| axis_masses(&term.factors[i], x[i], delta)).collect();
        let o = parts.iter().map(|p| p.0).sum();
        let m = conv3(&parts[0].1, &parts[1].1, &parts[2].1);
        rhos.iter().map(|&r| term.coef * density(&m, o, delta, r)).collect()
    }

    /// Time-cell averaged trace of one separable term at `x`.
    pub fn trace(&self, term: &SeparableTerm, x: Vec3) -> Vec<f64> {
        self.trace_sum(std::slice::from_ref(term), x)
    }

    /// Trace of a sum of separable terms. One bin width is used for all terms
    /// (from the distance to their joint support box), so the result is
    /// exactly linear in the source.
    pub fn trace_sum(&self, terms: &[SeparableTerm], x: Vec3) -> Vec<f64> {
        let mut out = vec![0.0; self.n_steps + 1];
        let Some(bb) = joint_box(terms) else {
            return out;
        };
        let delta = self.bin_width(bb.dist_to_point(x));
        let edges = self.edges_sq();
        for t in terms {
            let d = self.spherical_density(t, x, &edges, delta);
            for (o, v) in out.iter_mut().zip(self.averages(&d)) {
                *o += v;
            }
        }
        out
    }
}

/// Smallest box containing the supports of all terms.
pub fn joint_box(terms: &[SeparableTerm]) -> Option<crate::geom::Aabb> {
    let mut bb = terms.first()?.support_box();
    for t in &terms[1..] {
        let b = t.support_box();
        for i in 0..3 {
            bb.lo[i] = bb.lo[i].min(b.lo[i]);
            bb.hi[i] = bb.hi[i].max(b.hi[i]);
        }
    }
    Some(bb)
}

/// Traces of many dictionary atoms at one point, sharing per-axis transforms.
pub struct AtomTraceBatch<'a> {
    engine: RadialEngine,
    terms: &'a [SeparableTerm],
    planner: FftPlanner<f64>,
    edges_sq: Vec<f64>,
}

impl<'a> AtomTraceBatch<'a> {
    pub fn new(engine: RadialEngine, terms: &'a [SeparableTerm]) -> Self {
        AtomTraceBatch { engine, terms, planner: FftPlanner::new(), edges_sq: engine.edges_sq() }
    }

    /// Row-major `[terms x (n_steps + 1)]` traces at `x`, using one bin width
    /// for all terms (`delta` from the nearest source distance `dist`).
    pub fn traces_at(&mut self, x: Vec3, dist: f64) -> Vec<f64> {
        let delta = self.engine.bin_width(dist);
        let nt = self.engine.n_steps + 1;
        // per-axis masses, deduplicated by factor identity
        let mut cache: [HashMap<FactorKey, usize>; 3] = Default::default();
        let mut masses: [Vec<(f64, Vec<f64>)>; 3] = Default::default();
        let mut ids = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            let id: [usize; 3] = std::array::from_fn(|i| {
                let key = FactorKey::of(&t.factors[i]);
                *cache[i].entry(key).or_insert_with(|| {
                    masses[i].push(axis_masses(&t.factors[i], x[i], delta));
                    masses[i].len() - 1
                })
            });
            ids.push(id);
        }
        let total: usize = (0..3).map(|i| masses[i].iter().map(|m| m.1.len()).max().unwrap_or(1)).sum();
        let len = total.next_power_of_two();
        let fwd: Arc<dyn Fft<f64>> = self.planner.plan_fft_forward(len);
        let inv: Arc<dyn Fft<f64>> = self.planner.plan_fft_inverse(len);
        let spectra: [Vec<Vec<Complex64>>; 3] = std::array::from_fn(|i| {
            masses[i]
                .iter()
                .map(|(_, m)| {
                    let mut b = vec![Complex64::new(0.0, 0.0); len];
                    for (k, &v) in m.iter().enumerate() {
                        b[k].re = v;
                    }
                    fwd.process(&mut b);
                    b
                })
                .collect()
        });
        let mut out = vec![0.0; self.terms.len() * nt];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut dvals = vec![0.0; self.edges_sq.len()];
        let scale = 1.0 / len as f64;
        for (a, t) in self.terms.iter().enumerate() {
            let id = ids[a];
            let o = masses[0][id[0]].0 + masses[1][id[1]].0 + masses[2][id[2]].0;
            let mlen = masses[0][id[0]].1.len() + masses[1][id[1]].1.len() + masses[2][id[2]].1.len() - 2;
            let (s0, s1, s2) = (&spectra[0][id[0]], &spectra[1][id[1]], &spectra[2][id[2]]);
            for k in 0..len {
                buf[k] = s0[k] * s1[k] * s2[k];
            }
            inv.process(&mut buf);
            let m: Vec<f64> = buf[..mlen].iter().map(|c| c.re * scale).collect();
            for (dv, &r) in dvals.iter_mut().zip(&self.edges_sq) {
                *dv = t.coef * density(&m, o, delta, r);
            }
            out[a * nt..(a + 1) * nt].copy_from_slice(&self.engine.averages(&dvals));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct FactorKey([u64; 4]);

impl FactorKey {
    fn of(f: &Factor) -> Self {
        match f {
            Factor::Cells { start, cell, values, prefix } => {
                // values are determined by start, length and total mass pattern
                let sig = values.iter().fold(0u64, |h, v| h.rotate_left(5) ^ v.to_bits());
                let _ = prefix;
                FactorKey([0, start.to_bits() ^ cell.to_bits().rotate_left(17), values.len() as u64, sig])
            }
            Factor::Gauss { c, s, amp } => FactorKey([1, c.to_bits(), s.to_bits(), amp.to_bits()]),
            Factor::DGauss { c, s, amp } => FactorKey([2, c.to_bits(), s.to_bits(), amp.to_bits()]),
        }
    }
}

#[cfg(test)]
mod tests;

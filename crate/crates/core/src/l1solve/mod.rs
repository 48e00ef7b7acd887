//! Constrained l1 reconstruction over the coarse atoms:
//!
//! `min ||x||_1  s.t.  (1/m) sum_k ||(M U v)_{i_k} - y_k||^2 <= C3 eta^2`,
//! `v = sum_a x_a phi_a`, plus the error decomposition against a known truth
//! and the sample-count planner.

pub mod cp;


use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::sensing::{ColumnCache, MeasurementSet, TimeSeries};
use crate::sensing::trapezoid;
use crate::wavelet3d::{sparse_error, CoeffVec, Dictionary};

pub use cp::{CpLogEntry, CpParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub max_iter: usize,
    pub tol: f64,
    pub check_every: usize,
    pub c3: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { max_iter: 20_000, tol: 1e-6, check_every: 50, c3: 1.0 }
    }
}

/// `eta = beta + max(1, min|E_i|^(-1/2)) r` for detector averages.
pub fn eta_average(beta: f64, r: f64, min_area: f64) -> f64 {
    beta + 1f64.max(min_area.powf(-0.5)) * r
}

/// `eta = beta + sqrt(N) r` once a sensing matrix mixes the detectors.
pub fn eta_matrix(beta: f64, r: f64, n: usize) -> f64 {
    beta + (n as f64).sqrt() * r
}

pub struct ReconProblem<'a> {
    pub dict: &'a Dictionary,
    pub cache: &'a ColumnCache,
    pub measurements: &'a MeasurementSet,
    pub j0: u32,
    pub eta: f64,
    pub params: SolverParams,
}

impl ReconProblem<'_> {
    pub fn n_coef(&self) -> usize {
        self.dict.count_upto(self.j0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.measurements.cache_key != self.cache.key {
            return Err(PatError::ArtifactMismatch(
                "measurements were generated with a different detector/dictionary cache".into(),
            ));
        }
        if self.n_coef() > self.cache.n_atoms {
            return Err(PatError::SizeMismatch("cache does not hold every atom up to j0".into()));
        }
        if !(self.eta >= 0.0) || !(self.params.c3 > 0.0) {
            return Err(PatError::InvalidConfig("eta must be >= 0 and C3 > 0".into()));
        }
        let m = &self.measurements;
        if m.series.len() != m.sampled_ids.len() || m.series.iter().any(|s| s.values.len() != self.cache.nt) {
            return Err(PatError::SizeMismatch("measurement series do not match the time grid".into()));
        }
        if m.sampled_ids.iter().any(|&i| i >= self.cache.n_rows) {
            return Err(PatError::SizeMismatch("sampled detector out of range".into()));
        }
        Ok(())
    }
}

/// Noise-free data of `x` at the sampled rows.
pub fn forward_apply(x: &CoeffVec, p: &ReconProblem<'_>) -> Result<Vec<TimeSeries>> {
    if x.len() > p.n_coef() {
        return Err(PatError::SizeMismatch("coefficients above j0".into()));
    }
    Ok(p.measurements.sampled_ids.iter().map(|&i| p.cache.combine(i, &x.values)).collect())
}

/// Adjoint of [`forward_apply`] for the trapezoid inner product on the data.
pub fn adjoint_apply(z: &[TimeSeries], p: &ReconProblem<'_>) -> Result<CoeffVec> {
    let ids = &p.measurements.sampled_ids;
    if z.len() != ids.len() {
        return Err(PatError::SizeMismatch("one series per sampled detector expected".into()));
    }
    let w = trapezoid(p.cache.nt, p.cache.dt);
    let n = p.n_coef();
    let mut out = CoeffVec { values: vec![0.0; n], max_scale: p.j0 };
    for (zk, &i) in z.iter().zip(ids) {
        for (a, o) in out.values.iter_mut().enumerate() {
            *o += p.cache.column(i, a).iter().zip(&zk.values).zip(&w).map(|((c, v), w)| w * c * v).sum::<f64>();
        }
    }
    Ok(out)
}

/// Weighted least-squares system `G x ~ b` with `||G x - b||^2` the fidelity.
fn system(p: &ReconProblem<'_>) -> (DMatrix<f64>, DVector<f64>) {
    let (nt, n) = (p.cache.nt, p.n_coef());
    let ids = &p.measurements.sampled_ids;
    let m = ids.len() as f64;
    let sw: Vec<f64> = trapezoid(nt, p.cache.dt).iter().map(|w| (w / m).sqrt()).collect();
    let rows = ids.len() * nt;
    let mut g = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for (k, &i) in ids.iter().enumerate() {
        for a in 0..n {
            for (t, v) in p.cache.column(i, a).iter().enumerate() {
                g[(k * nt + t, a)] = sw[t] * v;
            }
        }
        for (t, v) in p.measurements.series[k].values.iter().enumerate() {
            b[k * nt + t] = sw[t] * v;
        }
    }
    (g, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconResult {
    pub coefficients: CoeffVec,
    /// `(1/m) sum_k ||(M U x)_{i_k} - y_k||^2`.
    pub residual: f64,
    /// `C3 eta^2`.
    pub bound: f64,
    /// Smallest achievable residual (least squares).
    pub residual_floor: f64,
    pub l1: f64,
    pub iterations: usize,
    pub converged: bool,
    /// False when the bound lies below the least-squares floor; the solver then
    /// returns a least-squares point.
    pub feasible: bool,
    #[serde(skip)]
    pub log: Vec<CpLogEntry>,
}

pub fn solve_bpdn(p: &ReconProblem<'_>) -> Result<ReconResult> {
    p.validate()?;
    let (g, b) = system(p);
    let n = g.ncols();
    // reduce to a square-or-shorter system: ||G x - b||^2 = ||R x - z||^2 + floor
    let qr = g.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let z = q.tr_mul(&b);
    let floor = (b.norm_squared() - z.norm_squared()).max(0.0);
    let bound = p.params.c3 * p.eta * p.eta;
    let feasible = bound >= floor;
    let eps = (bound - floor).max(0.0).sqrt();
    let tol = p.params.tol;
    // residual <= bound (1 + tol), with a small absolute slack for equality constraints
    let accept = if bound > 0.0 {
        (eps * eps + tol * bound.max(floor) - (floor - bound).max(0.0)).max(0.0).sqrt()
    } else {
        1e-3 * tol * z.norm()
    };
    let out = cp::solve_l1_ball_with(
        &r,
        &z,
        eps,
        accept,
        CpParams { max_iter: p.params.max_iter, tol, check_every: p.params.check_every },
    );
    let x = out.x;
    let residual = (&g * &x - &b).norm_squared();
    debug_assert_eq!(x.len(), n);
    Ok(ReconResult {
        l1: x.lp_norm(1),
        coefficients: CoeffVec { values: x.as_slice().to_vec(), max_scale: p.j0 },
        residual,
        bound,
        residual_floor: floor,
        iterations: out.iterations,
        converged: out.converged,
        feasible,
        log: out.log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `||u0 - u_hat||_2`, computed on coefficients (orthonormal dictionary).
    pub error: f64,
    pub relative_error: f64,
    /// `sigma_s(P_{<=j0} u0)_1 / sqrt(s)`.
    pub term1: f64,
    /// `||P_{>j0} u0||`.
    pub truncation: f64,
    pub beta: f64,
    /// Noise-and-truncation term `eta`.
    pub term2: f64,
    /// Empirical constants with `error = C1 term1 + C2 term2`, `C1 = C2`;
    /// absent when both terms vanish.
    pub c1_hat: Option<f64>,
    pub c2_hat: Option<f64>,
    pub exact_regime: bool,
    pub s: usize,
}

/// Compares a reconstruction with the ground-truth coefficients (any depth).
pub fn error_report(result: &ReconResult, truth: &CoeffVec, dict: &Dictionary, s: usize, beta: f64, eta: f64) -> ErrorReport {
    let j0 = result.coefficients.max_scale;
    let n0 = dict.count_upto(j0).min(truth.len());
    let mut d2 = 0.0;
    for k in 0..truth.len().max(result.coefficients.len()) {
        let a = truth.values.get(k).copied().unwrap_or(0.0);
        let b = result.coefficients.values.get(k).copied().unwrap_or(0.0);
        d2 += (a - b) * (a - b);
    }
    let error = d2.sqrt();
    let tn = truth.norm2();
    let term1 = sparse_error(&truth.values[..n0], s) / (s.max(1) as f64).sqrt();
    let truncation = truth.values[n0..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let denom = term1 + eta;
    let exact_regime = denom <= 1e-12;
    let c = (!exact_regime).then(|| error / denom);
    ErrorReport {
        error,
        relative_error: if tn > 0.0 { error / tn } else { error },
        term1,
        truncation,
        beta,
        term2: eta,
        c1_hat: c,
        c2_hat: c,
        exact_regime,
        s,
    }
}

/// Planned number of detector draws
/// `m = ceil(C0 tau max(j0 ln^3 tau, ln(1/gamma)))` with `tau = s` for
/// averages and `tau = B^2 s` once a sensing matrix with coherence `B` is used.
pub fn sample_complexity_plan(s: usize, j0: u32, gamma: f64, c0: f64, b: Option<f64>) -> Result<usize> {
    if s < 3 {
        return Err(PatError::InvalidConfig("sparsity s must be at least 3".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) || !(c0 > 0.0) {
        return Err(PatError::InvalidConfig("need 0 < gamma < 1 and C0 > 0".into()));
    }
    let tau = match b {
        None => s as f64,
        Some(b) => b * b * s as f64,
    };
    let l = tau.ln().max(0.0);
    let m = (c0 * tau * (j0 as f64 * l * l * l).max((1.0 / gamma).ln())).ceil();
    Ok(m.max(1.0) as usize)
}

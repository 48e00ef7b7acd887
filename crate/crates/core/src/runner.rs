//! Pipeline stages behind the `patcs` subcommands. Stages run sequentially;
//! each one reads the artifacts of the previous stages from the output
//! directory (refusing foreign config hashes) and recomputes deterministic
//! intermediates (dictionary, partition, column cache) from the config.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, PartitionMode};
use crate::diagnostics::{run_certificate_suite, Provenance, SuiteReport};
use crate::error::{PatError, Result};
use crate::geom::Aabb;
use crate::io;
use crate::l1solve::{error_report, eta_average, eta_matrix, sample_complexity_plan, solve_bpdn, ErrorReport, ReconProblem, ReconResult};
use crate::rng::{substream, substream_seed};
use crate::sensing::{build_column_cache, make_measurements, ColumnCache, MatrixKind, MeasurementSet, SensingMatrix};
use crate::spheregeom::{detectors_for_scale, equal_area_partition, sample_detectors, sampling_distribution, DetectorPartition};
use crate::wavefield::trace::{huygens_report, HuygensReport};
use crate::wavefield::{forward_trace, SeparableTerm, TraceOptions, TraceSource};
use crate::wavelet3d::{project_scales, CoeffVec, Dictionary};

/// How a stage ended; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Infeasible,
    NotConverged,
    CertificateFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Infeasible => 2,
            Status::NotConverged => 3,
            Status::CertificateFailed => 4,
        }
    }
}

/// Exit code of an error: configuration problems are 2, anything else 1.
pub fn error_exit_code(e: &PatError) -> i32 {
    match e {
        PatError::Io(_) | PatError::Json(_) | PatError::Csv(_) => 1,
        _ => 2,
    }
}

/// The ground truth: coefficients up to `max_scale` and the truncation
/// norm `||P_{>j0} u0||` left out of the reconstruction space.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub coefficients: CoeffVec,
    pub truncation: f64,
}

/// Random `s`-sparse coefficients among the atoms `<= j0`, magnitudes in
/// `[min_amp, min_amp + 1]` with random signs.
pub fn sparse_signal(dict: &Dictionary, j0: u32, s: usize, min_amp: f64, seed: u64) -> Result<CoeffVec> {
    let mut x = CoeffVec::zeros(dict, j0);
    if s > x.len() {
        return Err(PatError::InvalidConfig(format!("s = {s} exceeds the {} atoms up to j0", x.len())));
    }
    let mut rng = substream(seed, "signal");
    let mut k = 0;
    while k < s {
        let i = rng.random_range(0..x.len());
        if x.values[i] == 0.0 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x.values[i] = sign * (min_amp + rng.random::<f64>());
            k += 1;
        }
    }
    Ok(x)
}

/// Everything one reconstruction trial needs, built once per config.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub dict: Dictionary,
    pub partition: DetectorPartition,
    pub target_diameter: Option<f64>,
    /// Columns of `(A) M U phi_a` for the atoms the truth uses.
    pub cache: ColumnCache,
    pub truth: Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub m: usize,
    pub beta: f64,
    pub eta: f64,
    pub relative_error: f64,
    pub converged: bool,
    pub feasible: bool,
}

pub fn build_partition(cfg: &ExperimentConfig) -> Result<(DetectorPartition, Option<f64>)> {
    let p = &cfg.partition;
    let r = cfg.geometry.radius;
    match p.mode {
        PartitionMode::Count => Ok((equal_area_partition(r, p.n, p.quad())?, None)),
        PartitionMode::Scale => {
            let n = detectors_for_scale(r, p.j0, p.mu)?;
            Ok((equal_area_partition(r, n, p.quad())?, Some(p.mu / (1u64 << p.j0) as f64)))
        }
    }
}

fn load_truth(cfg: &ExperimentConfig, dict: &Dictionary) -> Result<Truth> {
    let j0 = cfg.partition.j0;
    match &cfg.signal.field {
        None => Ok(Truth {
            coefficients: sparse_signal(dict, j0, cfg.signal.s, cfg.signal.min_amp, cfg.seed)?,
            truncation: 0.0,
        }),
        Some(path) => {
            let stem = path.with_extension("");
            let u = io::read_field(&stem, None)?;
            let x = dict.analyze(&u, dict.j_max)?;
            let (_, hi) = project_scales(dict, &x, j0);
            Ok(Truth { truncation: hi.norm2(), coefficients: x })
        }
    }
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let dict = cfg.build_dictionary()?;
        let (partition, target_diameter) = build_partition(cfg)?;
        let truth = load_truth(cfg, &dict)?;
        let depth = truth.coefficients.max_scale.max(cfg.partition.j0);
        let g = &cfg.geometry;
        let mut cache = build_column_cache(&dict, depth, &partition, cfg.time(), g.kappa)?;
        if cfg.matrix_kind() != MatrixKind::Identity {
            cache = cache.sensed(&SensingMatrix::new(partition.len(), cfg.matrix_kind())?)?;
        }
        Ok(Context { cfg: cfg.clone(), dict, partition, target_diameter, cache, truth })
    }

    pub fn n(&self) -> usize {
        self.partition.len()
    }

    pub fn matrix_mode(&self) -> bool {
        self.cache.matrix_tag.is_some()
    }

    /// `m` from the config, or the planned count.
    pub fn planned_m(&self) -> Result<usize> {
        let c = &self.cfg;
        match c.sensing.m {
            Some(m) => Ok(m),
            None => sample_complexity_plan(self.sparsity(), c.partition.j0, c.sensing.gamma, c.sensing.c0, None),
        }
    }

    /// Sparsity used for planning: the number of nonzero truth coefficients up
    /// to `j0` (at least 3).
    pub fn sparsity(&self) -> usize {
        let n0 = self.dict.count_upto(self.cfg.partition.j0);
        self.truth.coefficients.values[..n0.min(self.truth.coefficients.len())]
            .iter()
            .filter(|v| **v != 0.0)
            .count()
            .max(3)
    }

    /// `m` detector draws from `nu` (rows drawn uniformly once `A` mixes them).
    pub fn draw(&self, m: usize, seed: u64) -> Result<Vec<usize>> {
        let nu = if self.matrix_mode() { vec![1.0 / self.n() as f64; self.n()] } else { sampling_distribution(&self.partition) };
        sample_detectors(&nu, m, substream_seed(seed, "partition-sampling"))
    }

    /// Measurements of the truth at `ids`; `beta` is relative to the RMS clean
    /// norm when the config says so. Returns the set and the absolute level.
    pub fn measure(&self, ids: &[usize], beta: f64, seed: u64) -> Result<(MeasurementSet, f64)> {
        let x = &self.truth.coefficients;
        let noise_seed = substream_seed(seed, "noise");
        let abs = if self.cfg.noise.relative && beta > 0.0 {
            let (_, clean) = make_measurements(x, &self.cache, ids, noise_seed, 0.0)?;
            let ms = clean.series.iter().map(|s| s.l2_norm().powi(2)).sum::<f64>() / ids.len() as f64;
            beta * ms.sqrt()
        } else {
            beta
        };
        let (set, _) = make_measurements(x, &self.cache, ids, noise_seed, abs)?;
        Ok((set, abs))
    }

    pub fn eta(&self, beta_abs: f64) -> f64 {
        if self.matrix_mode() {
            eta_matrix(beta_abs, self.truth.truncation, self.n())
        } else {
            eta_average(beta_abs, self.truth.truncation, self.partition.min_area())
        }
    }

    pub fn reconstruct(&self, set: &MeasurementSet, beta_abs: f64) -> Result<(ReconResult, ErrorReport, f64)> {
        let eta = self.eta(beta_abs);
        let p = ReconProblem {
            dict: &self.dict,
            cache: &self.cache,
            measurements: set,
            j0: self.cfg.partition.j0,
            eta,
            params: self.cfg.solver,
        };
        let res = solve_bpdn(&p)?;
        let rep = error_report(&res, &self.truth.coefficients, &self.dict, self.sparsity(), beta_abs, eta);
        Ok((res, rep, eta))
    }

    /// Draw, measure, reconstruct with sampling and noise streams from `seed`.
    pub fn trial(&self, m: usize, beta: f64, seed: u64) -> Result<TrialOutcome> {
        let ids = self.draw(m, seed)?;
        let (set, abs) = self.measure(&ids, beta, seed)?;
        let (res, rep, eta) = self.reconstruct(&set, abs)?;
        Ok(TrialOutcome {
            m,
            beta: abs,
            eta,
            relative_error: rep.relative_error,
            converged: res.converged,
            feasible: res.feasible,
        })
    }

    fn truth_terms(&self) -> Vec<SeparableTerm> {
        self.truth
            .coefficients
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(a, v)| SeparableTerm { coef: *v, ..SeparableTerm::from_atom(&self.dict.atoms[a]) })
            .collect()
    }
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares line `y = a + b x` and its `R^2`.
pub fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (a, b, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub n: usize,
    pub m: usize,
    pub planned_m: usize,
    pub seed: u64,
    pub sampled_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub n: usize,
    pub m: usize,
    pub eta: f64,
    pub beta: f64,
    pub result: ReconResult,
    pub errors: Option<ErrorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardReport {
    pub nodes: usize,
    pub nonzero: usize,
    pub truncation: f64,
    pub huygens: HuygensReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub beta: f64,
    pub median_error: f64,
    pub errors: Vec<f64>,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub planned_m: usize,
    pub m_rows: Vec<SweepRow>,
    pub beta_rows: Vec<SweepRow>,
    /// Affine fit of median error against the relative noise level.
    pub beta_intercept: f64,
    pub beta_slope: f64,
    pub beta_r2: f64,
}

/// A config bound to an output directory.
pub struct Runner {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
    ctx: Option<Context>,
}

impl Runner {
    pub fn new(cfg: ExperimentConfig, out: &Path) -> Result<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(out)?;
        let hash = cfg.hash();
        io::write_stamped(&out.join("config.json"), &cfg, &hash)?;
        Ok(Runner { cfg, hash, out: out.to_path_buf(), ctx: None })
    }

    pub fn context(&mut self) -> Result<&Context> {
        if self.ctx.is_none() {
            self.ctx = Some(Context::new(&self.cfg)?);
        }
        Ok(self.ctx.as_ref().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn partition(&mut self) -> Result<(Status, io::PartitionSummary)> {
        let (p, target) = build_partition(&self.cfg)?;
        let s = io::write_partition(&self.path("partition"), &p, target, &self.hash)?;
        Ok((Status::Ok, s))
    }

    /// Truth coefficients, sphere traces of the truth and its Huygens report.
    pub fn forward(&mut self) -> Result<(Status, ForwardReport)> {
        let hash = self.hash.clone();
        let out = self.out.clone();
        let ctx = self.context()?;
        let g = &ctx.cfg.geometry;
        let x = &ctx.truth.coefficients;
        io::write_coeff_csv(&out.join("truth_coefficients.csv"), x, &ctx.dict, &hash)?;
        let terms = ctx.truth_terms();
        let (nodes, _) = crate::diagnostics::sphere_quadrature(g.radius, g.sphere_degree);
        let opts = TraceOptions { kappa: g.kappa, ..TraceOptions::default() };
        let table = forward_trace(TraceSource::Separable(&terms), &nodes, g.radius, ctx.cfg.time(), opts)?;
        io::write_trace_csv(&out.join("traces.csv"), &table, &hash)?;
        io::write_tensor(&out.join("traces"), &table.values, &[nodes.len(), table.n_times()], None, None, &hash)?;
        let support = terms.iter().map(|t| t.support_box()).reduce(|a, b| a.union(&b)).unwrap_or(Aabb::new([0.0; 3], [0.0; 3]));
        let rep = ForwardReport {
            nodes: nodes.len(),
            nonzero: x.nnz(),
            truncation: ctx.truth.truncation,
            huygens: huygens_report(&table, &support, g.radius),
        };
        io::write_stamped(&out.join("forward.json"), &rep, &hash)?;
        Ok((Status::Ok, rep))
    }

    pub fn sample(&mut self) -> Result<(Status, SampleRecord)> {
        let seed = self.cfg.seed;
        let ctx = self.context()?;
        let planned = ctx.planned_m()?;
        let rec = SampleRecord { n: ctx.n(), m: planned, planned_m: planned, seed, sampled_ids: ctx.draw(planned, seed)? };
        io::write_stamped(&self.path("sample.json"), &rec, &self.hash)?;
        Ok((Status::Ok, rec))
    }

    /// Needs `sample.json` from this config.
    pub fn measure(&mut self) -> Result<(Status, MeasurementSet)> {
        let rec: SampleRecord = io::read_stamped(&self.path("sample.json"), Some(&self.hash))?;
        let (beta, seed) = (self.cfg.noise.beta, self.cfg.seed);
        let hash = self.hash.clone();
        let out = self.out.clone();
        let ctx = self.context()?;
        let (set, _) = ctx.measure(&rec.sampled_ids, beta, seed)?;
        io::write_measurements(&out.join("measurements"), &set, &hash)?;
        io::write_series_csv(&out.join("measurements.csv"), &set.sampled_ids, &set.series, &hash)?;
        Ok((Status::Ok, set))
    }

    /// Needs `measurements.*` from this config. Non-convergence keeps every
    /// artifact and reports status 3; a noise bound below the least-squares
    /// floor reports status 2.
    pub fn reconstruct(&mut self) -> Result<(Status, ReconReport)> {
        let set = io::read_measurements(&self.path("measurements"), Some(&self.hash))?;
        let hash = self.hash.clone();
        let out = self.out.clone();
        let ctx = self.context()?;
        let (res, errors, eta) = ctx.reconstruct(&set, set.noise_level)?;
        io::write_coeff_csv(&out.join("coefficients.csv"), &res.coefficients, &ctx.dict, &hash)?;
        io::write_solver_log(&out.join("solver_log.jsonl"), &res.log, &hash)?;
        io::write_field(&out.join("reconstruction"), &ctx.dict.synthesize(&res.coefficients)?, &hash)?;
        let status = if !res.feasible {
            Status::Infeasible
        } else if !res.converged {
            Status::NotConverged
        } else {
            Status::Ok
        };
        let rep = ReconReport { n: ctx.n(), m: set.m(), eta, beta: set.noise_level, result: res, errors: Some(errors) };
        io::write_stamped(&out.join("report.json"), &rep, &hash)?;
        Ok((status, rep))
    }

    pub fn certify(&mut self) -> Result<(Status, SuiteReport)> {
        let dict = self.cfg.build_dictionary()?;
        let prov = Provenance { config_hash: self.hash.clone(), seed: self.cfg.seed };
        let rep = run_certificate_suite(&self.cfg.suite(), &dict, self.cfg.certify.select.as_deref(), prov)?;
        io::write_json(&self.path("certificates.json"), &rep)?;
        Ok((if rep.pass { Status::Ok } else { Status::CertificateFailed }, rep))
    }

    /// Median error against `m` (noise as configured) and against the noise
    /// levels (at the planned `m`), `seeds` trials each.
    pub fn sweep(&mut self) -> Result<(Status, SweepReport)> {
        let sw = self.cfg.sweep.clone();
        let (seed, beta0) = (self.cfg.seed, self.cfg.noise.beta);
        let ctx = self.context()?;
        let planned = ctx.planned_m()?;
        let row = |m: usize, beta: f64, label: &str| -> Result<SweepRow> {
            let mut errs = Vec::with_capacity(sw.seeds);
            let mut bad = 0;
            for k in 0..sw.seeds {
                let t = ctx.trial(m, beta, substream_seed(seed, &format!("{label}-{m}-{beta}-{k}")))?;
                bad += usize::from(!t.converged);
                errs.push(t.relative_error);
            }
            let mut sorted = errs.clone();
            Ok(SweepRow { m, beta, median_error: median(&mut sorted), errors: errs, not_converged: bad })
        };
        let m_rows = sw.m_values.iter().map(|&m| row(m, beta0, "sweep-m")).collect::<Result<Vec<_>>>()?;
        let beta_rows = sw.betas.iter().map(|&b| row(planned, b, "sweep-beta")).collect::<Result<Vec<_>>>()?;
        let xs: Vec<f64> = beta_rows.iter().map(|r| r.beta).collect();
        let ys: Vec<f64> = beta_rows.iter().map(|r| r.median_error).collect();
        let (a, b, r2) = if xs.len() >= 2 { affine_fit(&xs, &ys) } else { (f64::NAN, f64::NAN, f64::NAN) };
        let rep = SweepReport { planned_m: planned, m_rows, beta_rows, beta_intercept: a, beta_slope: b, beta_r2: r2 };
        let table = |rows: &[SweepRow]| rows.iter().map(|r| vec![r.m as f64, r.beta, r.median_error]).collect::<Vec<_>>();
        io::write_table(&self.path("sweep_m.csv"), &["m", "beta", "median_error"], &table(&rep.m_rows), &self.hash)?;
        io::write_table(&self.path("sweep_beta.csv"), &["m", "beta", "median_error"], &table(&rep.beta_rows), &self.hash)?;
        io::write_stamped(&self.path("sweep.json"), &rep, &self.hash)?;
        let bad = rep.m_rows.iter().chain(&rep.beta_rows).any(|r| r.not_converged > 0);
        Ok((if bad { Status::NotConverged } else { Status::Ok }, rep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.dictionary.j_max = 1;
        c.partition.j0 = 0;
        c.partition.n = 16;
        c.sensing.m = Some(16);
        c
    }

    #[test]
    fn median_and_fit() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let (a, b, r2) = affine_fit(&x, &y);
        assert!((a - 0.5).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_signal_is_reproducible() {
        let c = small();
        let d = c.build_dictionary().unwrap();
        let a = sparse_signal(&d, 0, 3, 0.5, 4).unwrap();
        assert_eq!(a, sparse_signal(&d, 0, 3, 0.5, 4).unwrap());
        assert_ne!(a, sparse_signal(&d, 0, 3, 0.5, 5).unwrap());
        assert_eq!(a.nnz(), 3);
        assert!(a.values.iter().all(|v| *v == 0.0 || (0.5..=1.5).contains(&v.abs())));
        assert!(sparse_signal(&d, 0, 28, 0.5, 4).is_err());
    }

    #[test]
    fn pipeline_refuses_foreign_artifacts() {
        let dir = std::env::temp_dir().join(format!("patcs-runner-{}", std::process::id()));
        let mut r = Runner::new(small(), &dir).unwrap();
        r.partition().unwrap();
        r.sample().unwrap();
        r.measure().unwrap();
        let (st, rep) = r.reconstruct().unwrap();
        assert_eq!(st, Status::Ok);
        assert!(rep.errors.unwrap().relative_error < 1e-3);
        // a different seed is a different config: its runner will not read these files
        let mut other = small();
        other.seed = 2;
        let mut r2 = Runner { hash: other.hash(), cfg: other, out: dir.clone(), ctx: None };
        assert!(matches!(r2.measure(), Err(PatError::ArtifactMismatch(_))));
        assert!(matches!(r2.reconstruct(), Err(PatError::ArtifactMismatch(_))));
    }
}

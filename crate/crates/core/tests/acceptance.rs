//! Desk-scale acceptance run. One PASS/FAIL line per criterion; the binary
//! exits nonzero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use pat_core::config::{ExperimentConfig, MatrixChoice};
use pat_core::diagnostics::{
    check_balancing_trend, check_coherence_flatness, check_gradient_trace_identity, check_gram,
    check_huygens_windows, check_littlewood_paley, check_stability_sandwich, check_trace_identity, random_family,
    random_smooth_field,
};
use pat_core::runner::{median, Context, Runner, SweepReport};
use pat_core::sensing::{MatrixKind, SensingMatrix};
use pat_core::wavefield::{Grid3, ScalarField3, TimeGrid};
use pat_core::wavelet3d::Dictionary;
use pat_core::{PatError, Result};

const SEED: u64 = 20261015;

struct Tally {
    failed: Vec<usize>,
}

impl Tally {
    fn record(&mut self, k: usize, started: Instant, outcome: Result<(bool, String)>) {
        let secs = started.elapsed().as_secs_f64();
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("criterion {k:2}: {} {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(k);
        }
    }
}

/// Re-raises an error held by a result that several criteria share.
fn shared(e: &PatError) -> PatError {
    PatError::InvalidConfig(e.to_string())
}

fn base() -> ExperimentConfig {
    ExperimentConfig { seed: SEED, ..ExperimentConfig::default() }
}

fn deep_dictionary() -> Result<Dictionary> {
    let mut c = base();
    c.dictionary.j_max = 2;
    c.dictionary.refinement = 6;
    c.build_dictionary()
}

fn fields(cfg: &ExperimentConfig) -> Result<Vec<ScalarField3>> {
    let g = &cfg.geometry;
    let grid = Grid3::periodic(g.half_width, 128)?;
    Ok((0..5).map(|k| random_smooth_field(grid, SEED, &format!("acceptance-field-{k}"), 3, 0.35, (0.12, 0.18))).collect())
}

fn identity_criterion(
    fields: &[ScalarField3],
    cfg: &ExperimentConfig,
    time: TimeGrid,
    gradient: bool,
) -> Result<(bool, String)> {
    let g = &cfg.geometry;
    let (mut pass, mut ratios, mut slowest) = (true, Vec::new(), 0.0f64);
    for u in fields {
        let t = Instant::now();
        let rep = if gradient {
            check_gradient_trace_identity(u, g.radius, time, g.sphere_degree, g.interp_order)?
        } else {
            check_trace_identity(u, g.radius, time, g.sphere_degree, g.interp_order)?
        };
        slowest = slowest.max(t.elapsed().as_secs_f64());
        pass &= rep.pass;
        ratios.push(format!("{:.4}", rep.measured["ratio"]));
    }
    let budget = slowest <= 120.0;
    Ok((pass && budget, format!("ratios [{}], slowest field {slowest:.1} s", ratios.join(", "))))
}

fn sweep(cfg: ExperimentConfig, dir: &Path) -> Result<SweepReport> {
    let _ = std::fs::remove_dir_all(dir);
    Ok(Runner::new(cfg, dir)?.sweep()?.1)
}

fn same_files(a: &Path, b: &Path) -> Result<(bool, usize)> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(a)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    names.sort();
    let mut same = true;
    for p in &names {
        let q = b.join(p.file_name().unwrap());
        same &= q.exists() && std::fs::read(p)? == std::fs::read(&q)?;
    }
    let count_b = std::fs::read_dir(b)?.count();
    Ok((same && count_b == names.len(), names.len()))
}

fn main() -> ExitCode {
    let mut tally = Tally { failed: Vec::new() };
    let cfg = base();
    let g = cfg.geometry.clone();
    let tmp = std::env::temp_dir().join(format!("patcs-acceptance-{}", std::process::id()));

    // 1, 2: identities at 128^3
    let t = Instant::now();
    let id_time = TimeGrid::new(g.t_final, 100).expect("time grid");
    let us = fields(&cfg);
    tally.record(1, t, us.as_ref().map_err(shared).and_then(|us| identity_criterion(us, &cfg, id_time, false)));
    let t = Instant::now();
    tally.record(2, t, us.as_ref().map_err(shared).and_then(|us| identity_criterion(us, &cfg, id_time, true)));
    drop(us);

    // 3: stability sandwich on M_{<=1}
    let t = Instant::now();
    let out = cfg.build_dictionary().and_then(|d| {
        let fam = random_family(&d, 1, SEED, "acceptance-family", 50);
        let r = check_stability_sandwich(&d, 1, &fam, g.radius, cfg.time(), g.sphere_degree, g.kappa)?;
        let m = &r.measured;
        Ok((
            r.pass,
            format!(
                "ratios in [{:.4}, {:.4}] against [{:.4}, {:.4}]",
                m["min_ratio"],
                m["max_ratio"],
                0.9 * m["c"],
                1.1 * m["C"]
            ),
        ))
    });
    tally.record(3, t, out);

    let t = Instant::now();
    let deep = deep_dictionary();

    // 4: Gram and Littlewood-Paley to j = 2
    let out = deep.as_ref().map_err(shared).and_then(|d| {
        let gram = check_gram(d, 2);
        let lp = check_littlewood_paley(d, 2, 1)?;
        Ok((
            gram.pass && lp.pass,
            format!("gram defect {:.2e}, LP spread {:.3}", gram.measured["gram_defect"], lp.measured["spread"]),
        ))
    });
    tally.record(4, t, out);

    // 5: coherence at scale-matched partitions, j0 = 0, 1, 2
    let t = Instant::now();
    let out = deep.as_ref().map_err(shared).and_then(|d| {
        let r = check_coherence_flatness(d, &[0, 1, 2], cfg.partition.mu, g.radius, cfg.time(), g.kappa, cfg.partition.quad())?;
        let m = &r.measured;
        Ok((
            r.pass,
            format!(
                "B = {:.4} / {:.4} / {:.4} at N = {} / {} / {}, variation {:.3}",
                m["b_nu_j0"],
                m["b_nu_j1"],
                m["b_nu_j2"],
                m["detectors_j0"],
                m["detectors_j1"],
                m["detectors_j2"],
                m["variation"]
            ),
        ))
    });
    tally.record(5, t, out);

    // 6: balancing trend at j0 = 0
    let t = Instant::now();
    let out = cfg.build_dictionary().and_then(|d| {
        let mut p = cfg.partition.clone();
        p.quad_spacing = 0.15;
        let r = check_balancing_trend(&d, 0, p.mu, g.radius, cfg.time(), g.kappa, p.quad())?;
        let m = &r.measured;
        let thetas: Vec<String> = (0..4).map(|k| format!("{:.3}", m[&format!("theta_{k}")])).collect();
        Ok((r.pass, format!("theta [{}], threshold {:.3}", thetas.join(", "), m["threshold"])))
    });
    tally.record(6, t, out);

    // 7: full sampling, noiseless
    let t = Instant::now();
    let out = Context::new(&cfg).and_then(|ctx| {
        let ids: Vec<usize> = (0..ctx.n()).collect();
        let (set, abs) = ctx.measure(&ids, 0.0, SEED)?;
        let (res, rep, _) = ctx.reconstruct(&set, abs)?;
        let ok = res.converged && rep.relative_error <= 1e-3 && t.elapsed().as_secs_f64() <= 600.0;
        Ok((ok, format!("m = N = {}, relative error {:.3e}", ctx.n(), rep.relative_error)))
    });
    tally.record(7, t, out);

    // 8: planned m against m / 4
    let t = Instant::now();
    let mut c8 = cfg.clone();
    c8.sweep.betas.clear();
    let planned = Context::new(&cfg).and_then(|c| Ok((c.planned_m()?, c.n())));
    let out = planned.and_then(|(m, n)| {
        c8.sweep.m_values = vec![(m / 4).max(1), m];
        let rep = sweep(c8.clone(), &tmp.join("sweep-a"))?;
        let (lo, hi) = (rep.m_rows[0].median_error, rep.m_rows[1].median_error);
        let ok = n >= 4 * m && hi <= 5e-2 && lo >= 5.0 * hi;
        Ok((ok, format!("N = {n}, planned m = {m}: median {hi:.3e}; at m = {}: {lo:.3e}", (m / 4).max(1))))
    });
    tally.record(8, t, out);

    // 9: noise linearity, identity A
    let t = Instant::now();
    let mut c9 = cfg.clone();
    c9.sweep.m_values.clear();
    let identity = sweep(c9.clone(), &tmp.join("sweep-beta"));
    let out = identity.as_ref().map_err(shared).map(|rep| {
        let med: Vec<String> = rep.beta_rows.iter().map(|r| format!("{:.3e}", r.median_error)).collect();
        (rep.beta_r2 >= 0.95, format!("medians [{}], R^2 = {:.4}", med.join(", "), rep.beta_r2))
    });
    tally.record(9, t, out);

    // 10: scrambled Hadamard at the same (s, m)
    let t = Instant::now();
    let out = identity.as_ref().map_err(shared).and_then(|id| {
        let n = cfg.partition.n;
        let a = SensingMatrix::new(n, MatrixKind::ScrambledHadamard { seed: SEED })?;
        let mut unit = 0.0f64;
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let back = a.apply_transpose(&a.apply(&e)?)?;
            unit = unit.max(back.iter().zip(&e).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
        let beta = 0.02;
        let mut ch = c9.clone();
        ch.sensing.matrix = MatrixChoice::ScrambledHadamard;
        ch.sweep.betas = vec![beta];
        let had = sweep(ch, &tmp.join("sweep-hadamard"))?.beta_rows[0].median_error;
        let mut base_errs: Vec<f64> =
            id.beta_rows.iter().find(|r| (r.beta - beta).abs() < 1e-12).map(|r| r.errors.clone()).unwrap_or_default();
        let base_med = median(&mut base_errs);
        let ok = unit <= 1e-10 && had <= 2.0 * base_med;
        Ok((ok, format!("beta {beta}: Hadamard {had:.3e} vs identity {base_med:.3e}, unitarity defect {unit:.1e}")))
    });
    tally.record(10, t, out);

    // 11: Huygens windows to j = 2
    let t = Instant::now();
    let out = deep.as_ref().map_err(shared).and_then(|d| {
        let r = check_huygens_windows(d, 2, g.radius, cfg.time(), g.sphere_degree, g.kappa)?;
        let worst = r.measured["max_outside_fraction"];
        Ok((r.pass, format!("worst relative energy outside the window {worst:.2e}")))
    });
    tally.record(11, t, out);
    drop(deep);

    // 12: criterion 8 again, compared byte for byte
    let t = Instant::now();
    let out = sweep(c8, &tmp.join("sweep-b")).and_then(|_| {
        let (same, files) = same_files(&tmp.join("sweep-a"), &tmp.join("sweep-b"))?;
        Ok((same, format!("{files} files compared")))
    });
    tally.record(12, t, out);

    let _ = std::fs::remove_dir_all(&tmp);
    if tally.failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {:?}", tally.failed);
        ExitCode::FAILURE
    }
}

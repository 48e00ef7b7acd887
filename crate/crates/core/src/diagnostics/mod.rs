//! Numerical certificates: trace identities, the stability sandwich, the
//! `H^{1/2}` trace bound, dictionary checks, coherence and balancing scans,
//! Huygens windows, and the suite runner that orders them.

pub mod identities;
pub mod scans;
pub mod seminorm;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::rng::substream;
use crate::spheregeom::QuadSpec;
use crate::wavefield::{Grid3, ScalarField3, TimeGrid};
use crate::wavelet3d::{CoeffVec, Dictionary};

pub use identities::{
    check_gradient_trace_identity, check_stability_sandwich, check_trace_identity, check_trace_identity_atoms, sphere_gram,
    sphere_quadrature,
};
pub use scans::{
    check_balancing_trend, check_coherence_flatness, check_gram, check_huygens_windows, check_littlewood_paley,
    check_quasi_diagonal, scan_coherence,
};
pub use seminorm::{
    check_h_half_bound, slobodeckij_kernel, slobodeckij_seminorm_sq, slobodeckij_truncated_sq, GradientStencil, SeminormNodes,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// Outcome of one certificate. `pass` is decided from `measured` against
/// `tolerance` by the check that built it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub name: String,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, f64>,
    pub pass: bool,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl CertificateReport {
    pub fn new(name: &str) -> Self {
        CertificateReport {
            name: name.into(),
            measured: BTreeMap::new(),
            tolerance: BTreeMap::new(),
            pass: false,
            notes: Vec::new(),
            provenance: Provenance::default(),
        }
    }

    pub fn measure(&mut self, key: &str, v: f64) -> &mut Self {
        self.measured.insert(key.into(), v);
        self
    }

    pub fn tol(&mut self, key: &str, v: f64) -> &mut Self {
        self.tolerance.insert(key.into(), v);
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    /// One summary line, `PASS name key=value ...`.
    pub fn summary_line(&self) -> String {
        let mut s = format!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.name);
        for (k, v) in &self.measured {
            s.push_str(&format!(" {k}={v:.6e}"));
        }
        s
    }
}

/// Certificate names in suite order with the claim each one checks.
pub const CERTIFICATES: &[(&str, &str)] = &[
    ("trace_identity", "sphere trace energy weighted by t equals (R/2) times the L2 energy of the initial pressure"),
    ("gradient_trace_identity", "same identity for the spatial gradient of the wave field"),
    ("stability_sandwich", "two-sided L2 bound of the trace map with c = sqrt(R/2T), C = sqrt(R/(2 d(K, sphere)))"),
    ("h_half_bound", "the trace map is bounded from H^1/2 of space into L2 in time of H^1/2 of the sphere"),
    ("gram", "the dictionary atoms are orthonormal"),
    ("littlewood_paley", "weighted wavelet coefficient sums are equivalent to the H^1/2 norm, uniformly in scale"),
    ("coherence", "the per-detector coherence bound of single atoms does not grow with the scale"),
    ("balancing", "the piecewise-constant projection loses a vanishing fraction of trace energy as detectors shrink"),
    ("quasi_diagonal", "detector averages keep at least half of the lower frame constant"),
    ("huygens", "atom traces vanish outside the window [dist(support, sphere), 2R]"),
];

/// Coverage table entry: certificate and the claim it certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub certificate: String,
    pub claim: String,
}

/// Parameters of the certificate suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub radius: f64,
    pub t_final: f64,
    pub n_steps: usize,
    /// Periodic box for the FFT identities.
    pub grid_half_width: f64,
    pub grid_points: usize,
    pub sphere_degree: usize,
    pub interp_order: usize,
    pub kappa: f64,
    pub j0: u32,
    pub mu: f64,
    pub quad: QuadSpec,
    /// Random smooth fields for the two identities.
    pub n_fields: usize,
    /// Random members of `M_{<=j0}` for the sandwich and quasi-diagonal checks.
    pub family_size: usize,
    pub seminorm_nodes: usize,
    pub atoms_per_level: usize,
    pub coherence_levels: Vec<u32>,
}

impl SuiteConfig {
    pub fn time(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_final, self.n_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub provenance: Provenance,
    pub reports: Vec<CertificateReport>,
    pub coverage: Vec<CoverageRow>,
    pub pass: bool,
}

/// Sum of Gaussian bumps with centres in the ball of radius `center_radius`
/// and widths in `sigma`, drawn from the substream `label`.
pub fn random_smooth_field(
    grid: Grid3,
    seed: u64,
    label: &str,
    bumps: usize,
    center_radius: f64,
    sigma: (f64, f64),
) -> ScalarField3 {
    let mut rng = substream(seed, label);
    let mut spec = Vec::with_capacity(bumps);
    for _ in 0..bumps {
        let c = loop {
            let c: [f64; 3] = std::array::from_fn(|_| center_radius * (2.0 * rng.random::<f64>() - 1.0));
            if crate::geom::norm(c) <= center_radius {
                break c;
            }
        };
        let s = sigma.0 + (sigma.1 - sigma.0) * rng.random::<f64>();
        let a = 0.5 + rng.random::<f64>();
        let a = if rng.random::<bool>() { a } else { -a };
        spec.push((c, s, a));
    }
    ScalarField3::from_fn(grid, |x| {
        spec.iter()
            .map(|(c, s, a)| {
                let r2 = crate::geom::dist(x, *c).powi(2);
                a * (-0.5 * r2 / (s * s)).exp()
            })
            .sum()
    })
}

/// Random unit-norm members of `M_{<=j0}` with Gaussian coefficients.
pub fn random_family(dict: &Dictionary, j0: u32, seed: u64, label: &str, size: usize) -> Vec<CoeffVec> {
    use rand_distr::StandardNormal;
    let mut rng = substream(seed, label);
    (0..size)
        .map(|_| {
            let mut x = CoeffVec::zeros(dict, j0);
            for v in x.values.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let n = x.norm2();
            x.values.iter_mut().for_each(|v| *v /= n);
            x
        })
        .collect()
}

/// Widest Gaussian width allowed so that the `1e-8` support of every bump
/// stays inside the ball of radius `r` and clear of periodic wrap-around.
fn sigma_cap(cfg: &SuiteConfig, center_radius: f64) -> f64 {
    let room = (cfg.radius - 0.05).min(cfg.grid_half_width - cfg.t_final) - center_radius;
    room / 6.1
}

/// Runs the selected certificates in suite order. `None` runs all of them;
/// an empty selection runs none.
pub fn run_certificate_suite(
    cfg: &SuiteConfig,
    dict: &Dictionary,
    selection: Option<&[String]>,
    provenance: Provenance,
) -> Result<SuiteReport> {
    if let Some(sel) = selection {
        if let Some(bad) = sel.iter().find(|s| !CERTIFICATES.iter().any(|(n, _)| n == s)) {
            return Err(PatError::InvalidConfig(format!("unknown certificate '{bad}'")));
        }
    }
    if cfg.j0 > dict.j_max {
        return Err(PatError::InvalidConfig("j0 exceeds the dictionary depth".into()));
    }
    let wanted = |name: &str| selection.is_none_or(|s| s.iter().any(|x| x == name));
    let time = cfg.time()?;
    let seed = provenance.seed;
    let mut reports = Vec::new();
    let needs_fields = wanted("trace_identity") || wanted("gradient_trace_identity");
    let fields = if needs_fields {
        let grid = Grid3::periodic(cfg.grid_half_width, cfg.grid_points)?;
        let cr = 0.35f64.min(0.5 * cfg.radius);
        let smax = sigma_cap(cfg, cr).min(0.18);
        if smax <= 2.0 * grid.spacing {
            return Err(PatError::InvalidConfig("box too small for resolved smooth test fields".into()));
        }
        (0..cfg.n_fields)
            .map(|k| random_smooth_field(grid, seed, &format!("suite-field-{k}"), 3, cr, (0.12f64.min(smax), smax)))
            .collect()
    } else {
        Vec::new()
    };
    for (name, _) in CERTIFICATES {
        if !wanted(name) {
            continue;
        }
        let rep = match *name {
            "trace_identity" => worst_of(name, &fields, |u| {
                check_trace_identity(u, cfg.radius, time, cfg.sphere_degree, cfg.interp_order)
            })?,
            "gradient_trace_identity" => worst_of(name, &fields, |u| {
                check_gradient_trace_identity(u, cfg.radius, time, cfg.sphere_degree, cfg.interp_order)
            })?,
            "stability_sandwich" => {
                let fam = random_family(dict, cfg.j0.min(1), seed, "suite-family", cfg.family_size);
                check_stability_sandwich(dict, cfg.j0.min(1), &fam, cfg.radius, time, cfg.sphere_degree, cfg.kappa)?
            }
            "h_half_bound" => check_h_half_bound(
                dict,
                cfg.j0,
                cfg.radius,
                time,
                cfg.seminorm_nodes,
                cfg.kappa,
                cfg.atoms_per_level,
            )?,
            "gram" => check_gram(dict, cfg.j0),
            "littlewood_paley" => check_littlewood_paley(dict, cfg.j0, cfg.atoms_per_level)?,
            "coherence" => {
                check_coherence_flatness(dict, &cfg.coherence_levels, cfg.mu, cfg.radius, time, cfg.kappa, cfg.quad)?
            }
            "balancing" => check_balancing_trend(dict, 0, cfg.mu, cfg.radius, time, cfg.kappa, cfg.quad)?,
            "quasi_diagonal" => {
                let j = cfg.j0.min(1);
                let fam = random_family(dict, j, seed, "suite-family", cfg.family_size);
                check_quasi_diagonal(dict, j, &fam, cfg.mu, cfg.radius, time, cfg.kappa, cfg.quad)?
            }
            "huygens" => check_huygens_windows(dict, cfg.j0, cfg.radius, time, cfg.sphere_degree, cfg.kappa)?,
            _ => unreachable!(),
        };
        reports.push(CertificateReport { provenance: provenance.clone(), ..rep });
    }
    let coverage = CERTIFICATES
        .iter()
        .filter(|(n, _)| wanted(n))
        .map(|(n, c)| CoverageRow { certificate: n.to_string(), claim: c.to_string() })
        .collect();
    let pass = reports.iter().all(|r| r.pass);
    Ok(SuiteReport { provenance, reports, coverage, pass })
}

/// Runs a field check over several fields and keeps the worst report, with
/// every ratio recorded.
fn worst_of(
    name: &str,
    fields: &[ScalarField3],
    f: impl Fn(&ScalarField3) -> Result<CertificateReport>,
) -> Result<CertificateReport> {
    let mut out = CertificateReport::new(name);
    out.pass = true;
    let mut worst: f64 = 0.0;
    for (k, u) in fields.iter().enumerate() {
        let r = f(u)?;
        let ratio = r.measured.get("ratio").copied().unwrap_or(1.0);
        out.measure(&format!("ratio_{k}"), ratio);
        worst = worst.max((ratio - 1.0).abs());
        out.pass &= r.pass;
        out.tolerance = r.tolerance.clone();
    }
    out.measure("worst_deviation", worst);
    Ok(out)
}

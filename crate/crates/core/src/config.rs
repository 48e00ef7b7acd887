//! Experiment configuration: one TOML file, one root seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::SuiteConfig;
use crate::digest::hash_json;
use crate::error::{PatError, Result};
use crate::l1solve::SolverParams;
use crate::sensing::MatrixKind;
use crate::spheregeom::QuadSpec;
use crate::wavefield::TimeGrid;
use crate::wavelet3d::{build_dictionary, Dictionary, Filter1D, LatticeGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub radius: f64,
    pub t_final: f64,
    pub n_steps: usize,
    /// Half width `L` of the periodic propagation box.
    pub half_width: f64,
    pub grid_points: usize,
    /// Radial bin width of the atom-trace engine, in time steps.
    pub kappa: f64,
    pub interp_order: usize,
    pub sphere_degree: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            radius: 1.5,
            t_final: 3.0,
            n_steps: 150,
            half_width: 4.5,
            grid_points: 64,
            kappa: 0.5,
            interp_order: 8,
            sphere_degree: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DictionaryConfig {
    pub filter: String,
    pub j_max: u32,
    pub refinement: u32,
    /// Lattice step of the scale-0 atoms.
    pub step: f64,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig { filter: "db2".into(), j_max: 1, refinement: 5, step: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// `N` detectors given directly.
    Count,
    /// `N` chosen so that every diameter is at most `mu 2^-j0`.
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub mode: PartitionMode,
    pub n: usize,
    pub j0: u32,
    pub mu: f64,
    pub quad_spacing: f64,
    pub quad_min_nodes: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig { mode: PartitionMode::Count, n: 32, j0: 1, mu: 0.5, quad_spacing: 0.2, quad_min_nodes: 4 }
    }
}

impl PartitionConfig {
    pub fn quad(&self) -> QuadSpec {
        QuadSpec { spacing: self.quad_spacing, min_nodes: self.quad_min_nodes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixChoice {
    Identity,
    Bernoulli,
    ScrambledHadamard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingConfig {
    pub matrix: MatrixChoice,
    /// Number of detector draws; planned from `c0`, `gamma` and `s` when absent.
    pub m: Option<usize>,
    /// Planner constant. The default puts the planned `m` at twice the
    /// smallest `m` with median error below 5e-2 for the default geometry
    /// (noiseless, s = 3, j0 = 1: transition between m = 1 and m = 2).
    pub c0: f64,
    pub gamma: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig { matrix: MatrixChoice::Identity, m: None, c0: 0.575, gamma: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    /// Number of nonzero coefficients among the atoms `<= j0`.
    pub s: usize,
    /// Smallest coefficient magnitude; magnitudes are uniform on `[min_amp, min_amp + 1]`.
    pub min_amp: f64,
    /// Optional binary tensor holding a field on the dictionary raster; it
    /// replaces the random sparse signal.
    pub field: Option<PathBuf>,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig { s: 3, min_amp: 0.5, field: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub beta: f64,
    /// Read `beta` as a fraction of the RMS per-detector clean norm.
    pub relative: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { beta: 0.0, relative: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub select: Option<Vec<String>>,
    pub n_fields: usize,
    pub family_size: usize,
    pub seminorm_nodes: usize,
    pub atoms_per_level: usize,
    pub coherence_levels: Vec<u32>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            select: None,
            n_fields: 2,
            family_size: 20,
            seminorm_nodes: 3000,
            atoms_per_level: 1,
            coherence_levels: vec![0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub m_values: Vec<usize>,
    pub betas: Vec<f64>,
    pub seeds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { m_values: vec![2, 4, 8, 16], betas: vec![0.01, 0.02, 0.04], seeds: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub geometry: Geometry,
    pub dictionary: DictionaryConfig,
    pub partition: PartitionConfig,
    pub sensing: SensingConfig,
    pub signal: SignalConfig,
    pub noise: NoiseConfig,
    pub solver: SolverParams,
    pub certify: CertifyConfig,
    pub sweep: SweepConfig,
    /// Output directory; not part of the hash.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            geometry: Geometry::default(),
            dictionary: DictionaryConfig::default(),
            partition: PartitionConfig::default(),
            sensing: SensingConfig::default(),
            signal: SignalConfig::default(),
            noise: NoiseConfig::default(),
            solver: SolverParams::default(),
            certify: CertifyConfig::default(),
            sweep: SweepConfig::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// sha256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> String {
        hash_json(self)
    }

    pub fn time(&self) -> TimeGrid {
        TimeGrid { t_final: self.geometry.t_final, n_steps: self.geometry.n_steps }
    }

    pub fn filter(&self) -> Result<Filter1D> {
        Filter1D::by_name(&self.dictionary.filter)
    }

    pub fn lattice(&self) -> Result<LatticeGeometry> {
        Ok(LatticeGeometry::centered(self.dictionary.step, self.filter()?.support_len()))
    }

    pub fn build_dictionary(&self) -> Result<Dictionary> {
        let d = &self.dictionary;
        build_dictionary(&self.filter()?, d.j_max, d.refinement, self.lattice()?)
    }

    pub fn matrix_kind(&self) -> MatrixKind {
        let seed = crate::rng::substream_seed(self.seed, "sensing-matrix");
        match self.sensing.matrix {
            MatrixChoice::Identity => MatrixKind::Identity,
            MatrixChoice::Bernoulli => MatrixKind::Bernoulli { seed },
            MatrixChoice::ScrambledHadamard => MatrixKind::ScrambledHadamard { seed },
        }
    }

    /// Cross-field checks: `L >= R + T`, K strictly inside the sphere,
    /// `j0 <= j_max`, and the per-module ranges.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let bad = |m: String| Err(PatError::InvalidConfig(m));
        if !(g.radius > 0.0 && g.t_final > 0.0) || g.n_steps == 0 {
            return bad("radius, t_final and n_steps must be positive".into());
        }
        if g.half_width < g.radius + g.t_final {
            return bad(format!("L = {} < R + T = {}", g.half_width, g.radius + g.t_final));
        }
        if !g.grid_points.is_power_of_two() || g.grid_points < 8 {
            return bad("grid_points must be a power of two >= 8".into());
        }
        if !(g.kappa > 0.0) || g.interp_order < 2 || g.sphere_degree == 0 {
            return bad("kappa > 0, interp_order >= 2 and sphere_degree >= 1 required".into());
        }
        let filter = self.filter()?;
        let d = &self.dictionary;
        if d.refinement < d.j_max + 4 {
            return Err(PatError::UnderResolved(format!("refinement {} < j_max + 4", d.refinement)));
        }
        if !(d.step > 0.0) {
            return bad("dictionary step must be positive".into());
        }
        // the hull of the centred lattice is (2 L_s - 1) step wide at every level
        let half = 0.5 * (2 * filter.support_len() - 1) as f64 * d.step;
        let margin = g.radius - half * 3f64.sqrt();
        if !(margin > 0.0) {
            return bad(format!("K reaches the sphere: d(K, Sigma) = {margin}"));
        }
        let p = &self.partition;
        if p.j0 > d.j_max {
            return bad(format!("j0 = {} > j_max = {}", p.j0, d.j_max));
        }
        if p.mode == PartitionMode::Count && p.n < 2 {
            return bad("a partition needs at least 2 detectors".into());
        }
        if !(p.mu > 0.0) || !(p.quad_spacing > 0.0) || p.quad_min_nodes == 0 {
            return bad("mu, quad_spacing and quad_min_nodes must be positive".into());
        }
        let s = &self.sensing;
        if s.m == Some(0) || !(s.gamma > 0.0 && s.gamma < 1.0) || !(s.c0 > 0.0) {
            return bad("need m >= 1, 0 < gamma < 1, c0 > 0".into());
        }
        if self.signal.field.is_none() && (self.signal.s == 0 || !(self.signal.min_amp >= 0.0)) {
            return bad("signal needs s >= 1 and min_amp >= 0".into());
        }
        if !(self.noise.beta >= 0.0) {
            return bad("noise level must be non-negative".into());
        }
        let sp = &self.solver;
        if sp.max_iter == 0 || sp.check_every == 0 || !(sp.tol > 0.0) || !(sp.c3 > 0.0) {
            return bad("solver needs max_iter, check_every, tol, c3 > 0".into());
        }
        if self.certify.coherence_levels.iter().any(|&j| j > d.j_max) {
            return bad("coherence level above j_max".into());
        }
        if self.sweep.seeds == 0 || self.sweep.m_values.contains(&0) || self.sweep.betas.iter().any(|b| !(*b >= 0.0)) {
            return bad("sweep needs seeds >= 1, m >= 1, beta >= 0".into());
        }
        Ok(())
    }

    pub fn suite(&self) -> SuiteConfig {
        let g = &self.geometry;
        let c = &self.certify;
        SuiteConfig {
            radius: g.radius,
            t_final: g.t_final,
            n_steps: g.n_steps,
            grid_half_width: g.half_width,
            grid_points: g.grid_points,
            sphere_degree: g.sphere_degree,
            interp_order: g.interp_order,
            kappa: g.kappa,
            j0: self.partition.j0,
            mu: self.partition.mu,
            quad: self.partition.quad(),
            n_fields: c.n_fields,
            family_size: c.family_size,
            seminorm_nodes: c.seminorm_nodes,
            atoms_per_level: c.atoms_per_level,
            coherence_levels: c.coherence_levels.clone(),
        }
    }
}

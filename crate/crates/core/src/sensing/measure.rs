//! Noisy measurement sets `y_k = (M U u0)_{i_k} + eps_k` (or `(A M U u0)_{i_k}`).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cache::ColumnCache;
use super::TimeSeries;
use crate::error::{PatError, Result};
use crate::rng::substream;
use crate::wavelet3d::CoeffVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingMode {
    Average,
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub sampled_ids: Vec<usize>,
    pub series: Vec<TimeSeries>,
    pub noise_level: f64,
    pub noise_seed: u64,
    pub sensing_mode: SensingMode,
    pub matrix_tag: Option<String>,
    /// Key of the column cache the data were generated with.
    pub cache_key: String,
}

impl MeasurementSet {
    pub fn m(&self) -> usize {
        self.sampled_ids.len()
    }
}

/// Noiseless data and injected noise norms; diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanData {
    pub series: Vec<TimeSeries>,
    pub noise_norms: Vec<f64>,
}

/// White Gaussian samples smoothed by a `[1, 2, 1] / 4` stencil and scaled
/// to trapezoid norm exactly `target`.
fn filtered_noise(rng: &mut impl Rng, nt: usize, dt: f64, target: f64) -> TimeSeries {
    let w: Vec<f64> = (0..nt).map(|_| rng.sample(StandardNormal)).collect();
    let at = |k: isize| w[k.clamp(0, nt as isize - 1) as usize];
    let values = (0..nt as isize).map(|k| 0.25 * at(k - 1) + 0.5 * at(k) + 0.25 * at(k + 1)).collect();
    let mut s = TimeSeries { values, dt };
    let n = s.l2_norm();
    let c = if n > 0.0 { target / n } else { 0.0 };
    for v in &mut s.values {
        *v *= c;
    }
    s
}

/// Data of the signal `x` (coefficients over the first `x.len()` cached atoms)
/// at `sampled_ids`, with noise of norm `beta * r_k`, `r_k ~ U[0, 1]`.
pub fn make_measurements(
    x: &CoeffVec,
    cache: &ColumnCache,
    sampled_ids: &[usize],
    noise_seed: u64,
    beta: f64,
) -> Result<(MeasurementSet, CleanData)> {
    if x.len() > cache.n_atoms {
        return Err(PatError::SizeMismatch(format!(
            "signal has {} coefficients, cache holds {} atoms",
            x.len(),
            cache.n_atoms
        )));
    }
    if !(beta >= 0.0) {
        return Err(PatError::InvalidConfig("noise level must be non-negative".into()));
    }
    if let Some(&i) = sampled_ids.iter().find(|&&i| i >= cache.n_rows) {
        return Err(PatError::SizeMismatch(format!("detector {i} out of range")));
    }
    let mut rng = substream(noise_seed, "noise");
    let mut clean = Vec::with_capacity(sampled_ids.len());
    let mut series = Vec::with_capacity(sampled_ids.len());
    let mut norms = Vec::with_capacity(sampled_ids.len());
    for &i in sampled_ids {
        let c = cache.combine(i, &x.values);
        let r: f64 = rng.random();
        let target = beta * r;
        let mut y = c.clone();
        if target > 0.0 {
            let e = filtered_noise(&mut rng, cache.nt, cache.dt, target);
            for (a, b) in y.values.iter_mut().zip(&e.values) {
                *a += b;
            }
        }
        norms.push(target);
        clean.push(c);
        series.push(y);
    }
    let set = MeasurementSet {
        sampled_ids: sampled_ids.to_vec(),
        series,
        noise_level: beta,
        noise_seed,
        sensing_mode: if cache.matrix_tag.is_some() { SensingMode::Matrix } else { SensingMode::Average },
        matrix_tag: cache.matrix_tag.clone(),
        cache_key: cache.key.clone(),
    };
    Ok((set, CleanData { series: clean, noise_norms: norms }))
}

//! Orthogonal `N x N` sensing matrices, applied implicitly.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{PatError, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatrixKind {
    Identity,
    /// Random signs, orthogonalised by QR. Dense; meant for diagnostics.
    Bernoulli { seed: u64 },
    /// `P H D / sqrt(N)`: random row permutation, Walsh-Hadamard, random signs.
    ScrambledHadamard { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct SensingMatrix {
    pub n: usize,
    pub kind: MatrixKind,
    perm: Vec<usize>,
    signs: Vec<f64>,
    dense: Option<DMatrix<f64>>,
}

/// Unnormalised in-place fast Walsh-Hadamard transform (Sylvester order).
pub fn fwht(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for k in i..i + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
}

impl SensingMatrix {
    pub fn new(n: usize, kind: MatrixKind) -> Result<Self> {
        if n == 0 {
            return Err(PatError::InvalidConfig("sensing matrix needs N >= 1".into()));
        }
        let mut m = SensingMatrix { n, kind, perm: (0..n).collect(), signs: vec![1.0; n], dense: None };
        match kind {
            MatrixKind::Identity => {}
            MatrixKind::ScrambledHadamard { seed } => {
                if !n.is_power_of_two() {
                    return Err(PatError::Infeasible(format!(
                        "scrambled Hadamard needs a power-of-two detector count, got {n}"
                    )));
                }
                let mut rng = substream(seed, "sensing-matrix");
                m.perm.shuffle(&mut rng);
                for s in &mut m.signs {
                    *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            MatrixKind::Bernoulli { seed } => {
                if n > 4096 {
                    return Err(PatError::Infeasible(format!("dense Bernoulli matrix with N = {n} is too large")));
                }
                let mut rng = substream(seed, "sensing-matrix");
                let b = DMatrix::from_fn(n, n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
                m.dense = Some(b.qr().q());
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        SensingMatrix { n, kind: MatrixKind::Identity, perm: (0..n).collect(), signs: vec![1.0; n], dense: None }
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(PatError::SizeMismatch(format!("vector of length {} for N = {}", v.len(), self.n)));
        }
        Ok(())
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(match (&self.kind, &self.dense) {
            (MatrixKind::Identity, _) => v.to_vec(),
            (_, Some(d)) => (d * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec(),
            _ => {
                let mut w: Vec<f64> = v.iter().zip(&self.signs).map(|(a, s)| a * s).collect();
                fwht(&mut w);
                let c = 1.0 / (self.n as f64).sqrt();
                self.perm.iter().map(|&p| w[p] * c).collect()
            }
        })
    }

    /// `A^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(match (&self.kind, &self.dense) {
            (MatrixKind::Identity, _) => v.to_vec(),
            (_, Some(d)) => (d.transpose() * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec(),
            _ => {
                let mut w = vec![0.0; self.n];
                for (i, &p) in self.perm.iter().enumerate() {
                    w[p] = v[i];
                }
                fwht(&mut w);
                let c = 1.0 / (self.n as f64).sqrt();
                w.iter().zip(&self.signs).map(|(a, s)| a * s * c).collect()
            }
        })
    }

    /// Short description for manifests.
    pub fn tag(&self) -> String {
        match self.kind {
            MatrixKind::Identity => format!("identity-{}", self.n),
            MatrixKind::Bernoulli { seed } => format!("bernoulli-qr-{}-{seed}", self.n),
            MatrixKind::ScrambledHadamard { seed } => format!("scrambled-hadamard-{}-{seed}", self.n),
        }
    }
}

/// Applies `A` across the detector index of an `N x time` table, one time
/// sample at a time.
pub fn apply_sensing_matrix(a: &SensingMatrix, table: &[TimeSeries]) -> Result<Vec<TimeSeries>> {
    if table.len() != a.n {
        return Err(PatError::SizeMismatch(format!("{} series for N = {}", table.len(), a.n)));
    }
    if table.is_empty() {
        return Ok(Vec::new());
    }
    let nt = table[0].values.len();
    if table.iter().any(|s| s.values.len() != nt) {
        return Err(PatError::SizeMismatch("series of different lengths".into()));
    }
    let mut out: Vec<TimeSeries> = table.iter().map(|s| TimeSeries::zeros(nt, s.dt)).collect();
    let mut col = vec![0.0; a.n];
    for k in 0..nt {
        for (c, s) in col.iter_mut().zip(table) {
            *c = s.values[k];
        }
        for (o, v) in out.iter_mut().zip(a.apply(&col)?) {
            o.values[k] = v;
        }
    }
    Ok(out)
}

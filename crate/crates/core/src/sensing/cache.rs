//! Column cache: detector averages of every atom's trace, the matrix behind
//! all forward/adjoint products of the solver.

use serde::Serialize;

use super::matrix::SensingMatrix;
use super::TimeSeries;
use crate::digest::hash_json;
use crate::error::{PatError, Result};
use crate::spheregeom::DetectorPartition;
use crate::wavefield::radial::{joint_box, AtomTraceBatch, RadialEngine, SeparableTerm};
use crate::wavefield::TimeGrid;
use crate::wavelet3d::Dictionary;

/// `data[(row * n_atoms + atom) * nt + k]` is `(M U phi_atom)_row (t_k)`, or
/// `(A M U phi_atom)_row (t_k)` once a sensing matrix has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnCache {
    pub n_rows: usize,
    pub n_atoms: usize,
    pub nt: usize,
    pub dt: f64,
    /// Detector areas `|E_i|`.
    pub areas: Vec<f64>,
    pub data: Vec<f64>,
    pub matrix_tag: Option<String>,
    /// Content address of (partition, dictionary, time grid, engine, matrix).
    pub key: String,
}

#[derive(Serialize)]
struct CacheKey<'a> {
    filter: &'a str,
    j_max: u32,
    refinement: u32,
    step: f64,
    origin: [f64; 3],
    n_atoms: usize,
    radius: f64,
    nodes: String,
    t_final: f64,
    n_steps: usize,
    kappa: f64,
}

/// Content hash of a partition's node set.
pub fn partition_key(p: &DetectorPartition) -> String {
    let (nodes, w, _) = p.all_nodes();
    let mut flat = Vec::with_capacity(nodes.len() * 4);
    for (x, w) in nodes.iter().zip(&w) {
        flat.extend_from_slice(x);
        flat.push(*w);
    }
    crate::digest::hash_f64s(&flat)
}

/// Calls `f(detector, node_weight, traces)` for every quadrature node, with
/// `traces` the row-major `[terms x nt]` traces there.
pub fn for_each_node(
    terms: &[SeparableTerm],
    partition: &DetectorPartition,
    time: TimeGrid,
    kappa: f64,
    mut f: impl FnMut(usize, f64, &[f64]),
) {
    let Some(bb) = joint_box(terms) else {
        return;
    };
    let mut batch = AtomTraceBatch::new(RadialEngine::new(time.dt(), time.n_steps, kappa), terms);
    for (d, det) in partition.detectors.iter().enumerate() {
        for (x, w) in &det.quad_nodes {
            let tr = batch.traces_at(*x, bb.dist_to_point(*x));
            f(d, *w, &tr);
        }
    }
}

/// Averages of the traces of atoms `<= j` over every detector.
pub fn build_column_cache(
    dict: &Dictionary,
    j: u32,
    partition: &DetectorPartition,
    time: TimeGrid,
    kappa: f64,
) -> Result<ColumnCache> {
    let terms: Vec<SeparableTerm> = dict.atoms_upto(j).iter().map(SeparableTerm::from_atom).collect();
    let (na, nt, nr) = (terms.len(), time.n_steps + 1, partition.len());
    let mut data = vec![0.0; nr * na * nt];
    for_each_node(&terms, partition, time, kappa, |d, w, tr| {
        let block = &mut data[d * na * nt..(d + 1) * na * nt];
        for (b, v) in block.iter_mut().zip(tr) {
            *b += w * v;
        }
    });
    let areas: Vec<f64> = partition.detectors.iter().map(|d| d.area).collect();
    for (d, a) in areas.iter().enumerate() {
        for v in &mut data[d * na * nt..(d + 1) * na * nt] {
            *v /= a;
        }
    }
    let key = hash_json(&CacheKey {
        filter: &dict.filter.name,
        j_max: dict.j_max,
        refinement: dict.refinement_level,
        step: dict.geometry.step,
        origin: dict.geometry.origin,
        n_atoms: na,
        radius: partition.radius,
        nodes: partition_key(partition),
        t_final: time.t_final,
        n_steps: time.n_steps,
        kappa,
    });
    Ok(ColumnCache { n_rows: nr, n_atoms: na, nt, dt: time.dt(), areas, data, matrix_tag: None, key })
}

impl ColumnCache {
    pub fn column(&self, row: usize, atom: usize) -> &[f64] {
        let o = (row * self.n_atoms + atom) * self.nt;
        &self.data[o..o + self.nt]
    }

    pub fn series(&self, row: usize, atom: usize) -> TimeSeries {
        TimeSeries { values: self.column(row, atom).to_vec(), dt: self.dt }
    }

    /// Cache of `A M U phi` rows. The cache must still hold plain averages.
    pub fn sensed(&self, a: &SensingMatrix) -> Result<ColumnCache> {
        if self.matrix_tag.is_some() {
            return Err(PatError::InvalidConfig("sensing matrix already applied to this cache".into()));
        }
        if a.n != self.n_rows {
            return Err(PatError::SizeMismatch(format!("A has N = {} for {} detectors", a.n, self.n_rows)));
        }
        let mut out = self.clone();
        let mut col = vec![0.0; self.n_rows];
        for atom in 0..self.n_atoms {
            for k in 0..self.nt {
                for (r, c) in col.iter_mut().enumerate() {
                    *c = self.data[(r * self.n_atoms + atom) * self.nt + k];
                }
                for (r, v) in a.apply(&col)?.into_iter().enumerate() {
                    out.data[(r * self.n_atoms + atom) * self.nt + k] = v;
                }
            }
        }
        out.matrix_tag = Some(a.tag());
        out.key = crate::digest::sha256_hex(format!("{}|{}", self.key, a.tag()).as_bytes());
        Ok(out)
    }

    /// `sum_a x_a column(row, a)` over the first `x.len()` atoms.
    pub fn combine(&self, row: usize, x: &[f64]) -> TimeSeries {
        let mut out = TimeSeries::zeros(self.nt, self.dt);
        for (a, &c) in x.iter().enumerate() {
            if c != 0.0 {
                for (o, v) in out.values.iter_mut().zip(self.column(row, a)) {
                    *o += c * v;
                }
            }
        }
        out
    }
}

//! Measurement operators built from sphere traces and detector partitions:
//! detector averages `M_i`, normalised operators `F_i = |E_i|^(1/2) M_i`, the
//! piecewise-constant projection, sensing matrices, the per-atom column cache,
//! noisy measurement sets and the coherence / balancing scans.

pub mod cache;
pub mod coherence;
pub mod matrix;
pub mod measure;


use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::spheregeom::{Detector, DetectorPartition};
use crate::wavefield::TraceTable;

pub use cache::{build_column_cache, for_each_node, ColumnCache};
pub use coherence::{
    balancing_defect, coherence_bound, gram_matrices, power_iteration, window_violation, BalancingReport, CoherenceReport,
    Grams,
};
pub use matrix::{apply_sensing_matrix, MatrixKind, SensingMatrix};
pub use measure::{make_measurements, CleanData, MeasurementSet, SensingMode};

/// Trapezoid weights of `nt` samples with step `dt`.
pub fn trapezoid(nt: usize, dt: f64) -> Vec<f64> {
    (0..nt).map(|k| if k == 0 || k + 1 == nt { 0.5 * dt } else { dt }).collect()
}

/// Samples on the uniform grid `t_k = k dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl TimeSeries {
    pub fn zeros(nt: usize, dt: f64) -> Self {
        TimeSeries { values: vec![0.0; nt], dt }
    }

    /// `L^2(0, T)` inner product by the trapezoid rule.
    pub fn dot(&self, other: &TimeSeries) -> f64 {
        let w = trapezoid(self.values.len(), self.dt);
        self.values.iter().zip(&other.values).zip(&w).map(|((a, b), w)| w * a * b).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

fn check_rows(table: &TraceTable, first_row: usize, det: &Detector) -> Result<()> {
    let n = det.quad_nodes.len();
    if first_row + n > table.nodes.len() {
        return Err(PatError::SizeMismatch(format!("trace lacks the nodes of detector {}", det.id)));
    }
    for (k, (p, _)) in det.quad_nodes.iter().enumerate() {
        if table.nodes[first_row + k] != *p {
            return Err(PatError::SizeMismatch(format!(
                "trace row {} is not quadrature node {k} of detector {}",
                first_row + k,
                det.id
            )));
        }
    }
    Ok(())
}

/// `M_i v(t) = |E_i|^-1 int_{E_i} v dsigma` from the table rows
/// `first_row..first_row + #nodes`, which must be the detector's nodes.
pub fn detector_average(table: &TraceTable, first_row: usize, det: &Detector) -> Result<TimeSeries> {
    check_rows(table, first_row, det)?;
    let mut out = TimeSeries::zeros(table.n_times(), table.time.dt());
    for (k, (_, w)) in det.quad_nodes.iter().enumerate() {
        for (o, v) in out.values.iter_mut().zip(table.row(first_row + k)) {
            *o += w * v;
        }
    }
    for o in &mut out.values {
        *o /= det.area;
    }
    Ok(out)
}

/// `F_i v = |E_i|^(1/2) M_i v`.
pub fn normalized_operator_f(table: &TraceTable, first_row: usize, det: &Detector) -> Result<TimeSeries> {
    let mut s = detector_average(table, first_row, det)?;
    let a = det.area.sqrt();
    for v in &mut s.values {
        *v *= a;
    }
    Ok(s)
}

/// `F v` for every detector of a table laid out as `partition.all_nodes()`.
pub fn forward_all(table: &TraceTable, partition: &DetectorPartition) -> Result<Vec<TimeSeries>> {
    let (_, _, offsets) = partition.all_nodes();
    partition.detectors.iter().zip(&offsets).map(|(d, &o)| normalized_operator_f(table, o, d)).collect()
}

/// Replaces each node value by the mean over its detector.
pub fn piecewise_projection(table: &TraceTable, partition: &DetectorPartition) -> Result<TraceTable> {
    let (nodes, _, offsets) = partition.all_nodes();
    if nodes.len() != table.nodes.len() {
        return Err(PatError::SizeMismatch("trace is not laid out on the partition nodes".into()));
    }
    let mut out = table.clone();
    for (d, &o) in partition.detectors.iter().zip(&offsets) {
        let avg = detector_average(table, o, d)?;
        for k in 0..d.quad_nodes.len() {
            out.row_mut(o + k).copy_from_slice(&avg.values);
        }
    }
    Ok(out)
}

/// Sphere-time inner product with node weights and trapezoid weights in time.
pub fn sphere_time_inner(a: &TraceTable, b: &TraceTable, node_weights: &[f64]) -> f64 {
    let w = a.time.trapezoid_weights();
    let mut s = 0.0;
    for (i, nw) in node_weights.iter().enumerate() {
        let e: f64 = a.row(i).iter().zip(b.row(i)).zip(&w).map(|((x, y), w)| w * x * y).sum();
        s += nw * e;
    }
    s
}

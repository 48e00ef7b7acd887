//! Separable compactly supported wavelet dictionary on R^3.
//!
//! Index convention: scale label `j = 0` holds the scaling atoms
//! `psi(x - n)`, label `j >= 1` holds the seven wavelet types at dilation
//! `2^(j-1)`. Atoms are stored as three 1D profiles (discrete cascade
//! iterates rendered at a common depth), so the dictionary is exactly
//! orthonormal under the raster inner product.

pub mod cascade;
pub mod filter;
pub mod lp;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::geom::{Aabb, Vec3};
use crate::wavefield::grid::{Grid3, ScalarField3};
pub use cascade::{cascade_profile, profile_inner};
pub use filter::Filter1D;
pub use lp::{coeff_h_s_norm_sq, h_s_norm_sq, littlewood_paley_ratio, littlewood_paley_ratio_coeffs};

/// Atom type: scaling, or a wavelet type `eps in {0,1}^3 \ {0}` stored as the
/// bit code `eps1 + 2 eps2 + 4 eps3` (bit set means wavelet factor on that axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AtomType {
    Scaling,
    Wavelet(u8),
}

impl AtomType {
    pub fn code(self) -> u8 {
        match self {
            AtomType::Scaling => 0,
            AtomType::Wavelet(e) => e,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AtomType::Scaling),
            1..=7 => Some(AtomType::Wavelet(code)),
            _ => None,
        }
    }

    pub fn is_wavelet_axis(self, axis: usize) -> bool {
        match self {
            AtomType::Scaling => false,
            AtomType::Wavelet(e) => (e >> axis) & 1 == 1,
        }
    }

    /// The tuple `(eps1, eps2, eps3)`; all zero for scaling atoms.
    pub fn eps(self) -> [u8; 3] {
        let c = self.code();
        [c & 1, (c >> 1) & 1, (c >> 2) & 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DictIndex {
    pub j: u32,
    pub n: [i64; 3],
    pub eps: AtomType,
}

impl DictIndex {
    pub fn new(j: u32, n: [i64; 3], eps: AtomType) -> Result<Self> {
        let ok = match eps {
            AtomType::Scaling => j == 0,
            AtomType::Wavelet(e) => j >= 1 && (1..=7).contains(&e),
        };
        if !ok {
            return Err(PatError::InvalidConfig(format!(
                "index j={j} with type {eps:?} violates the scale/type convention"
            )));
        }
        Ok(DictIndex { j, n, eps })
    }

    /// Dyadic dilation exponent `d` such that the atom is `f(2^d x - n)`.
    pub fn dilation(&self) -> u32 {
        self.j.saturating_sub(1)
    }
}

/// Piecewise-constant 1D factor: value `values[k]` on
/// `[start + k cell, start + (k+1) cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    pub start: f64,
    pub cell: f64,
    /// Index of the first cell on the dictionary raster.
    pub first: i64,
    pub values: Vec<f64>,
}

impl Profile1D {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.start) / self.cell;
        if u < 0.0 {
            return 0.0;
        }
        self.values.get(u.floor() as usize).copied().unwrap_or(0.0)
    }

    pub fn end(&self) -> f64 {
        self.start + self.cell * self.values.len() as f64
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.cell
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact L2 inner product of two profiles on the same raster.
    pub fn inner(&self, other: &Profile1D) -> f64 {
        let off = other.first - self.first;
        let mut s = 0.0;
        for (k, &a) in self.values.iter().enumerate() {
            let kb = k as i64 - off;
            if kb >= 0 && (kb as usize) < other.values.len() {
                s += a * other.values[kb as usize];
            }
        }
        s * self.cell
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletAtom {
    pub index: DictIndex,
    pub support_box: Aabb,
    pub factors: [Profile1D; 3],
}

impl WaveletAtom {
    pub fn eval(&self, x: Vec3) -> f64 {
        self.factors[0].eval(x[0]) * self.factors[1].eval(x[1]) * self.factors[2].eval(x[2])
    }

    pub fn norm_sq(&self) -> f64 {
        self.factors.iter().map(|f| f.norm_sq()).product()
    }

    pub fn integral(&self) -> f64 {
        self.factors.iter().map(|f| f.integral()).product()
    }

    pub fn inner(&self, other: &WaveletAtom) -> f64 {
        (0..3).map(|i| self.factors[i].inner(&other.factors[i])).product()
    }

    pub fn max_abs(&self) -> f64 {
        self.factors.iter().map(|f| f.max_abs()).product()
    }

    /// Dense tensor of cell values (axis 0 slowest) for export.
    pub fn dyadic_samples(&self) -> (Vec<f64>, [usize; 3]) {
        let s = [
            self.factors[0].values.len(),
            self.factors[1].values.len(),
            self.factors[2].values.len(),
        ];
        let mut out = Vec::with_capacity(s[0] * s[1] * s[2]);
        for &a in &self.factors[0].values {
            for &b in &self.factors[1].values {
                for &c in &self.factors[2].values {
                    out.push(a * b * c);
                }
            }
        }
        (out, s)
    }
}

/// Physical placement of the lattice: atom `(j, n)` lives at
/// `origin + step 2^-d (n + [0, L_s])`. Indices belong to the dictionary iff
/// their support meets the ball `B(ball_center, ball_radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub step: f64,
    pub origin: Vec3,
    pub ball_center: Vec3,
    pub ball_radius: f64,
}

impl LatticeGeometry {
    /// Lattice of step `step` whose scale-0 hull is centred at the origin,
    /// with the signal ball a small ball near one lattice node.
    pub fn centered(step: f64, support_len: usize) -> Self {
        let _ = support_len;
        let o = -0.5 * step;
        LatticeGeometry {
            step,
            origin: [o; 3],
            ball_center: [o + step / 8.0; 3],
            ball_radius: step / 16.0,
        }
    }

    /// Unit lattice with the unit ball at the origin.
    pub fn unit_ball() -> Self {
        LatticeGeometry { step: 1.0, origin: [0.0; 3], ball_center: [0.0; 3], ball_radius: 1.0 }
    }

    /// Largest step whose hull (side `(2 L_s - 1) step`, centred) keeps
    /// distance `margin` from a sphere of radius `r` around the origin.
    pub fn max_centered_step(r: f64, margin: f64, support_len: usize) -> f64 {
        (r - margin) / ((2 * support_len - 1) as f64 * 0.5 * 3f64.sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    pub filter: Filter1D,
    pub j_max: u32,
    pub refinement_level: u32,
    pub geometry: LatticeGeometry,
    pub atoms: Vec<WaveletAtom>,
    /// Closed union of all supports.
    pub k_box: Aabb,
    /// `level_end[j]` = number of atoms with label `<= j`.
    level_end: Vec<usize>,
    lookup: HashMap<DictIndex, usize>,
}

/// Builds every atom with label `<= j_max` whose support meets the signal ball.
pub fn build_dictionary(
    filter: &Filter1D,
    j_max: u32,
    refinement_level: u32,
    geometry: LatticeGeometry,
) -> Result<Dictionary> {
    filter.validate()?;
    if refinement_level < j_max + 4 {
        return Err(PatError::UnderResolved(format!(
            "refinement level {refinement_level} < j_max + 4 = {}",
            j_max + 4
        )));
    }
    let ls = filter.support_len() as i64;
    let g = geometry;
    // enumerate (label, type, n) in canonical order
    let mut indices = Vec::new();
    let mut level_end = Vec::new();
    for j in 0..=j_max {
        let d = j.saturating_sub(1);
        let w = g.step / (1u64 << d) as f64;
        let mut ranges = [(0i64, 0i64); 3];
        for (i, r) in ranges.iter_mut().enumerate() {
            let lo = g.ball_center[i] - g.ball_radius;
            let hi = g.ball_center[i] + g.ball_radius;
            // support [o + w n, o + w (n + L_s)] meets [lo, hi]
            let nmin = ((lo - g.origin[i]) / w - ls as f64).floor() as i64;
            let nmax = ((hi - g.origin[i]) / w).ceil() as i64;
            *r = (nmin, nmax);
        }
        let types: Vec<AtomType> = if j == 0 {
            vec![AtomType::Scaling]
        } else {
            (1..=7).map(AtomType::Wavelet).collect()
        };
        for &eps in &types {
            for n0 in ranges[0].0..=ranges[0].1 {
                for n1 in ranges[1].0..=ranges[1].1 {
                    for n2 in ranges[2].0..=ranges[2].1 {
                        let n = [n0, n1, n2];
                        let bx = support_box_of(&g, d, n, ls);
                        if bx.dist_to_point(g.ball_center) < g.ball_radius {
                            indices.push(DictIndex { j, n, eps });
                        }
                    }
                }
            }
        }
        level_end.push(indices.len());
    }
    if indices.is_empty() {
        return Err(PatError::InvalidConfig("dictionary is empty".into()));
    }

    let jr = refinement_level;
    let cell = g.step / (1u64 << jr) as f64;
    // profiles per (dilation, wavelet?) shared across atoms
    let mut base: HashMap<(u32, bool), Vec<f64>> = HashMap::new();
    let mut atoms = Vec::with_capacity(indices.len());
    let mut k_box: Option<Aabb> = None;
    for idx in &indices {
        let d = idx.dilation();
        let q = jr - d;
        let amp = ((1u64 << d) as f64 / g.step).sqrt();
        let bx = support_box_of(&g, d, idx.n, ls);
        let factors: [Profile1D; 3] = std::array::from_fn(|i| {
            let wav = idx.eps.is_wavelet_axis(i);
            let prof = base
                .entry((q, wav))
                .or_insert_with(|| cascade_profile(filter, q, wav));
            let first = idx.n[i] << q;
            Profile1D {
                start: g.origin[i] + cell * first as f64,
                cell,
                first,
                values: prof.iter().map(|v| v * amp).collect(),
            }
        });
        k_box = Some(match k_box {
            None => bx,
            Some(k) => k.union(&bx),
        });
        atoms.push(WaveletAtom { index: *idx, support_box: bx, factors });
    }
    let lookup = indices.iter().enumerate().map(|(i, x)| (*x, i)).collect();
    Ok(Dictionary {
        filter: filter.clone(),
        j_max,
        refinement_level,
        geometry,
        atoms,
        k_box: k_box.unwrap(),
        level_end,
        lookup,
    })
}

fn support_box_of(g: &LatticeGeometry, d: u32, n: [i64; 3], ls: i64) -> Aabb {
    let w = g.step / (1u64 << d) as f64;
    let lo = std::array::from_fn(|i| g.origin[i] + w * n[i] as f64);
    let hi = std::array::from_fn(|i| g.origin[i] + w * (n[i] + ls) as f64);
    Aabb::new(lo, hi)
}

/// Real coefficient vector aligned with the dictionary's canonical order,
/// truncated to labels `<= max_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVec {
    pub values: Vec<f64>,
    pub max_scale: u32,
}

impl CoeffVec {
    pub fn zeros(dict: &Dictionary, max_scale: u32) -> Self {
        CoeffVec { values: vec![0.0; dict.count_upto(max_scale)], max_scale }
    }

    pub fn unit(dict: &Dictionary, max_scale: u32, k: usize) -> Self {
        let mut x = CoeffVec::zeros(dict, max_scale);
        x.values[k] = 1.0;
        x
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Pairs of (index, value) for the nonzero entries.
    pub fn entries<'a>(&'a self, dict: &'a Dictionary) -> impl Iterator<Item = (DictIndex, f64)> + 'a {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(k, v)| (dict.atoms[k].index, *v))
    }

    /// Same coefficients viewed with a different truncation level.
    pub fn resized(&self, dict: &Dictionary, max_scale: u32) -> Result<Self> {
        let n = dict.count_upto(max_scale);
        if self.values[n.min(self.len())..].iter().any(|v| *v != 0.0) {
            return Err(PatError::SizeMismatch(format!(
                "coefficients above scale {max_scale} are nonzero"
            )));
        }
        let mut values = self.values.clone();
        values.resize(n, 0.0);
        Ok(CoeffVec { values, max_scale })
    }
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `|Lambda_{<= j}|`.
    pub fn count_upto(&self, j: u32) -> usize {
        self.level_end[(j.min(self.j_max)) as usize]
    }

    /// `|Lambda_j|`.
    pub fn count_at(&self, j: u32) -> usize {
        if j > self.j_max {
            return 0;
        }
        let lo = if j == 0 { 0 } else { self.level_end[j as usize - 1] };
        self.level_end[j as usize] - lo
    }

    pub fn position(&self, idx: &DictIndex) -> Option<usize> {
        self.lookup.get(idx).copied()
    }

    pub fn atoms_upto(&self, j: u32) -> &[WaveletAtom] {
        &self.atoms[..self.count_upto(j)]
    }

    /// Width of one raster cell.
    pub fn cell(&self) -> f64 {
        self.geometry.step / (1u64 << self.refinement_level) as f64
    }

    /// Native raster covering K with nodes at cell centres.
    pub fn raster_grid(&self) -> Grid3 {
        let c = self.cell();
        let shape = std::array::from_fn(|i| ((self.k_box.hi[i] - self.k_box.lo[i]) / c).round() as usize);
        Grid3::raster(std::array::from_fn(|i| self.k_box.lo[i] + 0.5 * c), c, shape)
    }

    /// Distance from K to the sphere of radius `r` centred at the origin.
    pub fn k_distance_to_sphere(&self, r: f64) -> f64 {
        r - self.k_box.max_dist_to_point([0.0; 3])
    }

    /// Entrywise deviation of the Gram matrix of atoms `<= j` from the identity.
    pub fn gram_defect(&self, j: u32) -> f64 {
        let atoms = self.atoms_upto(j);
        let mut worst: f64 = 0.0;
        for (a, x) in atoms.iter().enumerate() {
            for (b, y) in atoms.iter().enumerate().skip(a) {
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((x.inner(y) - want).abs());
            }
        }
        worst
    }

    /// For each node of an aligned grid along `axis`, the dictionary raster
    /// cell it falls in. Errors if the grid is not a dyadic refinement of the
    /// raster with nodes at sub-cell centres.
    fn axis_cells(&self, grid: &Grid3, axis: usize) -> Result<Vec<i64>> {
        let c = self.cell();
        let ratio = c / grid.spacing;
        let r = ratio.round();
        if (ratio - r).abs() > 1e-9 || r < 1.0 || !(r as u64).is_power_of_two() {
            return Err(PatError::GridMismatch(format!(
                "grid spacing {} is not the dictionary cell {} divided by a power of two; resample first",
                grid.spacing, c
            )));
        }
        let sub = grid.spacing;
        let base = self.geometry.origin[axis];
        let off = (grid.origin[axis] - base) / sub - 0.5;
        if (off - off.round()).abs() > 1e-6 {
            return Err(PatError::GridMismatch(
                "grid nodes are not at dictionary sub-cell centres; resample first".into(),
            ));
        }
        let off = off.round() as i64;
        let r = r as i64;
        Ok((0..grid.shape[axis] as i64).map(|k| (off + k).div_euclid(r)).collect())
    }

    fn atom_weights(&self, atom: &WaveletAtom, cells: &[Vec<i64>; 3]) -> [Vec<(usize, f64)>; 3] {
        std::array::from_fn(|i| {
            let f = &atom.factors[i];
            cells[i]
                .iter()
                .enumerate()
                .filter_map(|(k, &m)| {
                    let u = m - f.first;
                    if u >= 0 && (u as usize) < f.values.len() && f.values[u as usize] != 0.0 {
                        Some((k, f.values[u as usize]))
                    } else {
                        None
                    }
                })
                .collect()
        })
    }

    /// Grid-quadrature inner products with all atoms of label `<= j0`.
    pub fn analyze(&self, u: &ScalarField3, j0: u32) -> Result<CoeffVec> {
        let g = &u.grid;
        let cells = [self.axis_cells(g, 0)?, self.axis_cells(g, 1)?, self.axis_cells(g, 2)?];
        let dv = g.cell_volume();
        let mut x = CoeffVec::zeros(self, j0);
        for (a, atom) in self.atoms_upto(j0).iter().enumerate() {
            let w = self.atom_weights(atom, &cells);
            let mut s = 0.0;
            for &(i, wi) in &w[0] {
                for &(j, wj) in &w[1] {
                    let row = g.index(i, j, 0);
                    let mut t = 0.0;
                    for &(k, wk) in &w[2] {
                        t += u.values[row + k] * wk;
                    }
                    s += wi * wj * t;
                }
            }
            x.values[a] = s * dv;
        }
        Ok(x)
    }

    /// `sum_k x_k phi_k` sampled on an aligned grid.
    pub fn synthesize_on(&self, x: &CoeffVec, grid: Grid3) -> Result<ScalarField3> {
        if x.len() > self.len() {
            return Err(PatError::SizeMismatch("coefficient vector longer than dictionary".into()));
        }
        let cells = [self.axis_cells(&grid, 0)?, self.axis_cells(&grid, 1)?, self.axis_cells(&grid, 2)?];
        let mut u = ScalarField3::zeros(grid);
        for (a, &xa) in x.values.iter().enumerate() {
            if xa == 0.0 {
                continue;
            }
            let w = self.atom_weights(&self.atoms[a], &cells);
            for &(i, wi) in &w[0] {
                for &(j, wj) in &w[1] {
                    let row = grid.index(i, j, 0);
                    let s = xa * wi * wj;
                    for &(k, wk) in &w[2] {
                        u.values[row + k] += s * wk;
                    }
                }
            }
        }
        Ok(u)
    }

    /// Synthesis on the native raster.
    pub fn synthesize(&self, x: &CoeffVec) -> Result<ScalarField3> {
        self.synthesize_on(x, self.raster_grid())
    }

    /// Point evaluation of `sum_k x_k phi_k`.
    pub fn eval(&self, x: &CoeffVec, p: Vec3) -> f64 {
        x.values
            .iter()
            .zip(&self.atoms)
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, a)| v * a.eval(p))
            .sum()
    }

    /// `max |grad phi| / max |phi|` from finite differences of the atom's
    /// own-depth cascade (`q` refinements below its dilation).
    pub fn gradient_ratio(&self, atom: &WaveletAtom, q: u32) -> f64 {
        let d = atom.index.dilation();
        let h = self.geometry.step / (1u64 << (d + q)) as f64;
        (0..3)
            .map(|i| {
                let p = cascade_profile(&self.filter, q, atom.index.eps.is_wavelet_axis(i));
                let m = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mut dm: f64 = 0.0;
                let mut prev = 0.0;
                for &v in p.iter().chain(std::iter::once(&0.0)) {
                    dm = dm.max((v - prev).abs());
                    prev = v;
                }
                dm / h / m
            })
            .fold(0.0, f64::max)
    }
}

/// Splits `x` into labels `<= j0` and the rest; `low + high = x` exactly.
pub fn project_scales(dict: &Dictionary, x: &CoeffVec, j0: u32) -> (CoeffVec, CoeffVec) {
    let cut = dict.count_upto(j0).min(x.len());
    let mut low = x.clone();
    let mut high = x.clone();
    for v in &mut low.values[cut..] {
        *v = 0.0;
    }
    for v in &mut high.values[..cut] {
        *v = 0.0;
    }
    (low, high)
}

/// l1 distance to the best `s`-term approximation.
pub fn sparse_error(x: &[f64], s: usize) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    if s >= mags.len() {
        return 0.0;
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    mags[s..].iter().sum()
}

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::geom::Vec3;

/// Uniform 3D grid. Node `(i, j, k)` sits at `origin + spacing * (i, j, k)`.
/// Periodic grids cover `[-L, L)^3` with a power-of-two number of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub origin: Vec3,
    pub spacing: f64,
    pub shape: [usize; 3],
    pub periodic: bool,
}

impl Grid3 {
    pub fn periodic(half_width: f64, points: usize) -> Result<Self> {
        if !points.is_power_of_two() || points < 4 {
            return Err(PatError::InvalidConfig(format!(
                "points per axis must be a power of two >= 4, got {points}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(PatError::InvalidConfig("half width must be positive".into()));
        }
        Ok(Grid3 {
            origin: [-half_width; 3],
            spacing: 2.0 * half_width / points as f64,
            shape: [points; 3],
            periodic: true,
        })
    }

    /// Non-periodic raster with nodes at `origin + spacing * k`.
    pub fn raster(origin: Vec3, spacing: f64, shape: [usize; 3]) -> Self {
        Grid3 { origin, spacing, shape, periodic: false }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.spacing * self.shape[0] as f64
    }

    pub fn points_per_axis(&self) -> usize {
        self.shape[0]
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + self.spacing * i as f64
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    /// Physical frequency (cycles per unit length) of DFT bin `k` along an axis.
    pub fn frequency(&self, axis: usize, k: usize) -> f64 {
        let n = self.shape[axis];
        let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
        kk / (n as f64 * self.spacing)
    }
}

/// Real scalar field sampled on a [`Grid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    pub grid: Grid3,
    pub values: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(grid: Grid3) -> Self {
        ScalarField3 { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_fn(grid: Grid3, f: impl Fn(Vec3) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.shape[0] {
            for j in 0..grid.shape[1] {
                for k in 0..grid.shape[2] {
                    values.push(f(grid.node(i, j, k)));
                }
            }
        }
        ScalarField3 { grid, values }
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Quadrature inner product `sum u v dV`.
    pub fn dot(&self, other: &ScalarField3) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        ScalarField3 { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn axpy(&mut self, a: f64, other: &ScalarField3) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }
}

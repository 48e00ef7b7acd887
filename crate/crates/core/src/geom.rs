//! Small vector and box helpers shared across modules.

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    pub fn new(lo: Vec3, hi: Vec3) -> Self {
        Aabb { lo, hi }
    }

    pub fn center(&self) -> Vec3 {
        scale(add(self.lo, self.hi), 0.5)
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * norm(sub(self.hi, self.lo))
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn dist_to_point(&self, p: Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            let d = (self.lo[i] - p[i]).max(0.0).max(p[i] - self.hi[i]);
            s += d * d;
        }
        s.sqrt()
    }

    /// Largest distance from `p` to any point of the box.
    pub fn max_dist_to_point(&self, p: Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            let d = (p[i] - self.lo[i]).abs().max((p[i] - self.hi[i]).abs());
            s += d * d;
        }
        s.sqrt()
    }

    pub fn contains_box(&self, other: &Aabb, tol: f64) -> bool {
        (0..3).all(|i| other.lo[i] >= self.lo[i] - tol && other.hi[i] <= self.hi[i] + tol)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        for i in 0..3 {
            b.lo[i] = b.lo[i].min(other.lo[i]);
            b.hi[i] = b.hi[i].max(other.hi[i]);
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_distances() {
        let b = Aabb::new([0.0; 3], [1.0; 3]);
        assert_eq!(b.dist_to_point([0.5, 0.5, 0.5]), 0.0);
        assert!((b.dist_to_point([2.0, 0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert!((b.dist_to_point([2.0, 2.0, 2.0]) - 3f64.sqrt()).abs() < 1e-15);
        assert!((b.max_dist_to_point([0.0, 0.0, 0.0]) - 3f64.sqrt()).abs() < 1e-15);
    }
}

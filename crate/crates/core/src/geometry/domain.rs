use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Axis-aligned box `[lo_i, hi_i]` in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(GeometryError::InvalidInput(format!(
                "box bounds have mismatched lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(GeometryError::InvalidInput(format!("degenerate box side [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Self::new(pairs.iter().map(|p| p[0]).collect(), pairs.iter().map(|p| p[1]).collect())
    }

    pub fn unit(dim: usize) -> Self {
        Self { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_margin(x, 0.0)
    }

    /// Membership in the box enlarged (or shrunk, for negative `margin`) by `margin` per side.
    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= a - margin && *v <= b + margin)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// Cartesian product `self x other` as a box in `R^{n+m}`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        BoxDomain { lo, hi }
    }

    /// Cell midpoints of a uniform `res`-per-axis subdivision, lexicographic
    /// with the last axis fastest.
    pub fn midpoint_grid(&self, res: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let total = res.pow(n as u32);
        let widths = self.widths();
        (0..total)
            .map(|mut flat| {
                let mut p = vec![0.0; n];
                for axis in (0..n).rev() {
                    let k = flat % res;
                    flat /= res;
                    p[axis] = self.lo[axis] + (k as f64 + 0.5) * widths[axis] / res as f64;
                }
                p
            })
            .collect()
    }

    /// Largest ball (Euclidean) radius around `c` that stays inside the box.
    pub fn inradius_at(&self, c: &[f64]) -> f64 {
        c.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (a, b))| (v - a).min(b - v)).fold(f64::INFINITY, f64::min)
    }
}

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::geometry::cost::CostModel;
use crate::geometry::density::Density;
use crate::geometry::domain::BoxDomain;

/// Regular cell-midpoint grid on a box, lexicographic with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: BoxDomain,
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(domain: BoxDomain, shape: Vec<usize>) -> Result<Self, GeometryError> {
        if shape.len() != domain.dim() {
            return Err(GeometryError::InvalidInput("grid shape must match the box dimension".into()));
        }
        if shape.iter().any(|&s| s < 2) {
            return Err(GeometryError::InvalidInput("grid resolution must be at least 2 per axis".into()));
        }
        Ok(Self { domain, shape })
    }

    pub fn uniform(domain: BoxDomain, res: usize) -> Result<Self, GeometryError> {
        let n = domain.dim();
        Self::new(domain, vec![res; n])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps(&self) -> Vec<f64> {
        self.domain.widths().iter().zip(&self.shape).map(|(w, &s)| w / s as f64).collect()
    }

    /// Largest cell width.
    pub fn max_step(&self) -> f64 {
        self.steps().into_iter().fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        self.steps().iter().product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.shape[axis];
            flat /= self.shape[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    /// Flat index of `idx + offset`, or `None` when it leaves the grid.
    pub fn offset(&self, idx: &[usize], offset: &[i64]) -> Option<usize> {
        let mut shifted = Vec::with_capacity(idx.len());
        for ((&i, &o), &s) in idx.iter().zip(offset).zip(&self.shape) {
            let j = i as i64 + o;
            if j < 0 || j >= s as i64 {
                return None;
            }
            shifted.push(j as usize);
        }
        Some(self.flat_index(&shifted))
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        let steps = self.steps();
        idx.iter().enumerate().map(|(a, &i)| self.domain.lo[a] + (i as f64 + 0.5) * steps[a]).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|f| self.point(&self.multi_index(f))).collect()
    }

    /// Whether every node within `margin` index steps of `idx` exists.
    pub fn is_interior(&self, idx: &[usize], margin: usize) -> bool {
        idx.iter().zip(&self.shape).all(|(&i, &s)| i >= margin && i + margin < s)
    }
}

/// Weighted atoms; weights are positive and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// The grid the atoms sit on, if any.
    pub grid: Option<GridSpec>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, GeometryError> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(GeometryError::InvalidInput("need one positive weight per atom".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(GeometryError::InvalidInput("atom weights must be positive".into()));
        }
        Ok(Self { points, weights, grid: None })
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let w = 1.0 / points.len() as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn has_equal_weights(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-14 * w0)
    }
}

/// Midpoint-rule discretization: one atom per cell with weight proportional
/// to the density at the midpoint, renormalized to unit mass.
pub fn discretize(density: &Density, grid: &GridSpec) -> Result<DiscreteMeasure, GeometryError> {
    if grid.dim() != density.dim() {
        return Err(GeometryError::InvalidInput("grid and density dimensions differ".into()));
    }
    let points = grid.points();
    let vol = grid.cell_volume();
    let mut weights = Vec::with_capacity(points.len());
    for p in &points {
        weights.push(density.check_positive(p)? * vol);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(DiscreteMeasure { points, weights, grid: Some(grid.clone()) })
}

/// Dense row-major cost matrix `c(x_i, xbar_j)`.
pub fn cost_matrix(model: &CostModel, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    let mut out = Vec::with_capacity(mu.len() * nu.len());
    for x in &mu.points {
        for y in &nu.points {
            out.push(model.value(x, y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::density::DensityKind;

    #[test]
    fn uniform_unit_interval_four_cells() {
        let b = BoxDomain::unit(1);
        let d = Density::new(DensityKind::Uniform, b.clone()).unwrap();
        let m = discretize(&d, &GridSpec::uniform(b, 4).unwrap()).unwrap();
        assert_eq!(m.weights, vec![0.25; 4]);
        assert_eq!(m.points, vec![vec![0.125], vec![0.375], vec![0.625], vec![0.875]]);
    }

    #[test]
    fn offsets_respect_grid_bounds() {
        let g = GridSpec::uniform(BoxDomain::unit(2), 3).unwrap();
        assert_eq!(g.offset(&[1, 1], &[1, -1]), Some(6));
        assert_eq!(g.offset(&[0, 1], &[-1, 0]), None);
        assert!(g.is_interior(&[1, 1], 1) && !g.is_interior(&[1, 2], 1));
    }
}

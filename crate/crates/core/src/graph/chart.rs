use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{GraphError, SolverError};
use crate::geometry::domain::BoxDomain;
use crate::transport::measure::GridSpec;
use crate::transport::solution::TransportSolution;

/// `x -> (F(x), dF(x), [Hess F^k(x)])`.
pub type MapFn = Arc<dyn Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) + Send + Sync>;

/// The map and its derivatives at one base point.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    pub x: Vec<f64>,
    pub fx: Vec<f64>,
    /// `jac[(k, a)] = d_a F^k`.
    pub jac: DMatrix<f64>,
    /// `d2f[k][(a, b)] = d_a d_b F^k`; absent where the stencil does not reach.
    pub d2f: Option<Vec<DMatrix<f64>>>,
}

impl ChartPoint {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// The point `(x, F(x))` of the product.
    pub fn lift(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.fx);
        z
    }

    /// Columns `d_a + sum_k d_a F^k dbar_k`.
    pub fn tangent_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = DMatrix::zeros(2 * n, n);
        t.view_mut((0, 0), (n, n)).fill_with_identity();
        t.view_mut((n, 0), (n, n)).copy_from(&self.jac);
        t
    }

    /// `(0, d^2F(u, v))`, the flat part of the ambient derivative of `T v` along `T u`.
    pub fn second_derivative(&self, u: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let d2f = self.d2f.as_ref()?;
        let n = self.dim();
        let mut out = vec![0.0; 2 * n];
        for (k, hk) in d2f.iter().enumerate() {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += hk[(a, b)] * u[a] * v[b];
                }
            }
            out[n + k] = s;
        }
        Some(out)
    }
}

/// Where a quantity is evaluated: a base point or a source-grid node.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Point(Vec<f64>),
    Node(usize),
}

#[derive(Clone)]
pub enum ChartSource {
    Analytic { map: MapFn, domain: BoxDomain },
    Grid { grid: GridSpec, map: Vec<Vec<f64>>, valid: Vec<bool> },
}

/// `Graph(F)` parametrized by the source coordinates.
#[derive(Clone)]
pub struct GraphChart {
    pub dim: usize,
    pub source: ChartSource,
    /// Spacing of the chart stencils along each axis.
    pub steps: Vec<f64>,
}

impl fmt::Debug for GraphChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            ChartSource::Analytic { .. } => "analytic",
            ChartSource::Grid { .. } => "grid",
        };
        f.debug_struct("GraphChart").field("dim", &self.dim).field("kind", &kind).field("steps", &self.steps).finish()
    }
}

impl GraphChart {
    /// Closed-form map with stencil spacing `step` on every axis.
    pub fn analytic<F>(domain: BoxDomain, step: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) + Send + Sync + 'static,
    {
        let dim = domain.dim();
        Self { dim, source: ChartSource::Analytic { map: Arc::new(f), domain }, steps: vec![step; dim] }
    }

    /// The affine map `x -> m x + b`.
    pub fn affine(domain: BoxDomain, step: f64, m: DMatrix<f64>, b: Vec<f64>) -> Self {
        let n = domain.dim();
        Self::analytic(domain, step, move |x| {
            let fx = (0..n).map(|k| b[k] + (0..n).map(|a| m[(k, a)] * x[a]).sum::<f64>()).collect();
            (fx, m.clone(), vec![DMatrix::zeros(n, n); n])
        })
    }

    /// Map samples of a solution on its source grid; unsharp rows are invalid.
    pub fn from_solution(sol: &TransportSolution) -> Result<Self, GraphError> {
        let grid =
            sol.mu.grid.clone().ok_or_else(|| {
                GraphError::Solver(SolverError::InvalidInput("source atoms are not on a grid".into()))
            })?;
        let steps = grid.steps();
        Ok(Self {
            dim: grid.dim(),
            source: ChartSource::Grid { grid, map: sol.map.clone(), valid: sol.sharp.clone() },
            steps,
        })
    }

    pub fn max_step(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    pub fn base_point(&self, probe: &Probe) -> Result<Vec<f64>, GraphError> {
        match (&self.source, probe) {
            (ChartSource::Analytic { .. }, Probe::Point(x)) => Ok(x.clone()),
            (ChartSource::Grid { grid, .. }, Probe::Node(i)) if *i < grid.len() => {
                Ok(grid.point(&grid.multi_index(*i)))
            }
            _ => Err(GraphError::Solver(SolverError::InvalidInput("probe does not match the chart".into()))),
        }
    }

    /// Map data at the probe.
    pub fn point(&self, probe: &Probe) -> Result<ChartPoint, GraphError> {
        let zero = vec![0i64; self.dim];
        self.shifted(probe, &zero, true)
    }

    /// Map data at the probe shifted by whole stencil steps; only first derivatives.
    pub fn neighbor(&self, probe: &Probe, offset: &[i64]) -> Result<ChartPoint, GraphError> {
        self.shifted(probe, offset, false)
    }

    fn shifted(&self, probe: &Probe, offset: &[i64], second: bool) -> Result<ChartPoint, GraphError> {
        match (&self.source, probe) {
            (ChartSource::Analytic { map, domain }, Probe::Point(x0)) => {
                let x: Vec<f64> = x0.iter().zip(offset).zip(&self.steps).map(|((x, &o), s)| x + o as f64 * s).collect();
                if !domain.contains(&x) {
                    return Err(GraphError::Geometry(crate::error::GeometryError::StencilOutOfDomain { point: x }));
                }
                let (fx, jac, d2f) = map(&x);
                Ok(ChartPoint { x, fx, jac, d2f: second.then_some(d2f) })
            }
            (ChartSource::Grid { grid, map, valid }, Probe::Node(i0)) => {
                let not_interior = || GraphError::Solver(SolverError::NotInterior { index: *i0 });
                let idx0 = grid.multi_index(*i0);
                let node = grid.offset(&idx0, offset).ok_or_else(not_interior)?;
                if !valid[node] {
                    return Err(not_interior());
                }
                let idx = grid.multi_index(node);
                if !grid.is_interior(&idx, 1) {
                    return Err(not_interior());
                }
                let n = self.dim;
                let at = |off: &[i64]| -> Result<&Vec<f64>, GraphError> {
                    grid.offset(&idx, off).map(|k| &map[k]).ok_or_else(not_interior)
                };
                let mut jac = DMatrix::zeros(n, n);
                for a in 0..n {
                    let mut e = vec![0i64; n];
                    e[a] = 1;
                    let plus = at(&e)?;
                    e[a] = -1;
                    let minus = at(&e)?;
                    for k in 0..n {
                        jac[(k, a)] = (plus[k] - minus[k]) / (2.0 * self.steps[a]);
                    }
                }
                let d2f = if second {
                    let mut d2 = vec![DMatrix::zeros(n, n); n];
                    let centre = &map[node];
                    for a in 0..n {
                        let mut e = vec![0i64; n];
                        e[a] = 1;
                        let plus = at(&e)?;
                        e[a] = -1;
                        let minus = at(&e)?;
                        for k in 0..n {
                            d2[k][(a, a)] = (plus[k] - 2.0 * centre[k] + minus[k]) / (self.steps[a] * self.steps[a]);
                        }
                        for b in (a + 1)..n {
                            let corner = |sa: i64, sb: i64| {
                                let mut e = vec![0i64; n];
                                e[a] = sa;
                                e[b] = sb;
                                at(&e)
                            };
                            let (pp, pm, mp, mm) = (corner(1, 1)?, corner(1, -1)?, corner(-1, 1)?, corner(-1, -1)?);
                            for k in 0..n {
                                let v = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * self.steps[a] * self.steps[b]);
                                d2[k][(a, b)] = v;
                                d2[k][(b, a)] = v;
                            }
                        }
                    }
                    Some(d2)
                } else {
                    None
                };
                Ok(ChartPoint { x: grid.point(&idx), fx: map[node].clone(), jac, d2f })
            }
            _ => Err(GraphError::Solver(SolverError::InvalidInput("probe does not match the chart".into()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_chart_differentiates_quadratic_maps_exactly() {
        let grid = GridSpec::uniform(BoxDomain::unit(2), 8).unwrap();
        let f = |x: &[f64]| vec![x[0] * x[0] + x[1], x[0] * x[1]];
        let map: Vec<Vec<f64>> = grid.points().iter().map(|p| f(p)).collect();
        let chart = GraphChart {
            dim: 2,
            steps: grid.steps(),
            source: ChartSource::Grid { valid: vec![true; map.len()], map, grid: grid.clone() },
        };
        let node = grid.flat_index(&[3, 4]);
        let cp = chart.point(&Probe::Node(node)).unwrap();
        let (x, y) = (cp.x[0], cp.x[1]);
        let expect = DMatrix::from_row_slice(2, 2, &[2.0 * x, 1.0, y, x]);
        assert!((&cp.jac - expect).abs().max() < 1e-12);
        let d2 = cp.d2f.unwrap();
        assert!((d2[0][(0, 0)] - 2.0).abs() < 1e-9 && (d2[1][(0, 1)] - 1.0).abs() < 1e-9);
        assert!(chart.point(&Probe::Node(grid.flat_index(&[0, 4]))).is_err());
    }
}

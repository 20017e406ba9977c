use serde::Serialize;

use crate::error::GraphError;
use crate::geometry::metric::chi;
use crate::geometry::Geometry;
use crate::graph::chart::{GraphChart, Probe};
use crate::linalg::{max_abs, symmetrize};
use crate::transport::second_order::b_from_potential;
use crate::transport::solution::TransportSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianMetricCheck {
    pub index: usize,
    pub chi: f64,
    /// `max |g / (2 chi) - (D^2 u + c_xx)| / max |D^2 u + c_xx|`.
    pub residual: f64,
}

/// Induced metric against the Hessian metric of the potential.
///
/// For quadratic and bilinear costs the pulled-back metric is `2 chi (D^2 u + c_xx)`.
pub fn hessian_metric_check(
    chart: &GraphChart,
    geometry: &Geometry,
    sol: &TransportSolution,
    index: usize,
) -> Result<HessianMetricCheck, GraphError> {
    if !geometry.model.is_quadratic_like() {
        return Err(GraphError::WrongCostKind(geometry.model.kind.name().to_string()));
    }
    let cp = chart.point(&Probe::Node(index))?;
    let z = cp.lift();
    let t = cp.tangent_basis();
    let g = symmetrize(&(t.transpose() * geometry.ambient.g_hat.eval(&z)? * &t));
    let chi = chi(&geometry.model, &geometry.dens, &cp.x, &cp.fx)?;
    let hess = b_from_potential(&geometry.model, sol, index)?;
    let scale = max_abs(&hess).max(f64::MIN_POSITIVE);
    let residual = max_abs(&(g / (2.0 * chi) - &hess)) / scale;
    Ok(HessianMetricCheck { index, chi, residual })
}

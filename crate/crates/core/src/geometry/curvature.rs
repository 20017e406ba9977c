use serde::Serialize;

use crate::error::GeometryError;
use crate::geometry::jet::MetricJet;
use crate::geometry::metric::MetricField;
use crate::linalg::Tensor4;

/// Riemann tensor of a metric field at one point of the product chart.
#[derive(Debug, Clone)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    /// `R(E_a, E_b, E_c, E_d)` for the coordinate vectors `E`.
    pub riemann: Tensor4,
    pub stencil_h: f64,
}

/// Largest violations of the algebraic symmetries of a curvature tensor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SymmetryResiduals {
    pub antisymmetry: f64,
    pub pair_symmetry: f64,
    pub bianchi: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.antisymmetry.max(self.pair_symmetry).max(self.bianchi)
    }
}

impl CurvatureSample {
    pub fn dim(&self) -> usize {
        self.riemann.dim
    }

    /// `R(u, v, w, z)`.
    pub fn apply(&self, u: &[f64], v: &[f64], w: &[f64], z: &[f64]) -> f64 {
        self.riemann.contract(u, v, w, z)
    }

    pub fn symmetry_residuals(&self) -> SymmetryResiduals {
        let r = &self.riemann;
        let d = r.dim;
        let mut out = SymmetryResiduals::default();
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let v = r.get(a, b, c, e);
                        out.antisymmetry =
                            out.antisymmetry.max((v + r.get(b, a, c, e)).abs()).max((v + r.get(a, b, e, c)).abs());
                        out.pair_symmetry = out.pair_symmetry.max((v - r.get(c, e, a, b)).abs());
                        out.bianchi = out.bianchi.max((v + r.get(a, c, e, b) + r.get(a, e, b, c)).abs());
                    }
                }
            }
        }
        out
    }
}

/// Riemann tensor of `field` at `p` from finite differences of its components.
pub fn riemann_curvature(field: &MetricField, p: &[f64], stencil_h: f64) -> Result<CurvatureSample, GeometryError> {
    let jet = MetricJet::compute(field, p, stencil_h)?;
    Ok(CurvatureSample { point: p.to_vec(), riemann: jet.riemann, stencil_h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cost::{CostKind, CostModel};
    use crate::geometry::density::DensityPair;
    use crate::geometry::domain::BoxDomain;
    use crate::geometry::jet::DEFAULT_STENCIL_H;
    use crate::geometry::metric::kmw_metric;

    #[test]
    fn flat_split_metric_has_zero_curvature() {
        let b = BoxDomain::unit(2);
        let m = CostModel::new(CostKind::Bilinear, b.clone(), b.clone()).unwrap();
        let field = kmw_metric(&m, &DensityPair::uniform(&b, &b));
        let s = riemann_curvature(&field, &[0.4, 0.5, 0.6, 0.3], DEFAULT_STENCIL_H).unwrap();
        assert!(s.riemann.max_abs() < 1e-10);
    }

    #[test]
    fn stencil_leaving_the_box_is_an_error() {
        let b = BoxDomain::unit(1);
        let m = CostModel::new(CostKind::Quadratic, b.clone(), b.clone()).unwrap();
        let field = kmw_metric(&m, &DensityPair::uniform(&b, &b));
        assert!(matches!(
            riemann_curvature(&field, &[0.001, 0.5], DEFAULT_STENCIL_H),
            Err(GeometryError::StencilOutOfDomain { .. })
        ));
    }
}

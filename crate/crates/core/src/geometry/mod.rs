//! Cost geometry: the conformal factor, the split pseudo-metric, the
//! companion Riemannian metric, curvature, and the cross-curvature condition.

pub mod cost;
pub mod curvature;
pub mod density;
pub mod domain;
pub mod jet;
pub mod metric;
pub mod mtw;

pub use cost::{cross_hessian, CostKind, CostModel, DerivativeMode, Monomial};
pub use curvature::{riemann_curvature, CurvatureSample, SymmetryResiduals};
pub use density::{Density, DensityKind, DensityPair};
pub use domain::BoxDomain;
pub use jet::{CovariantJet, FieldJet, MetricJet, DEFAULT_STENCIL_H};
pub use metric::{
    chi, h_bar, h_bar_metric, kmw_matrix, kmw_metric, s_hat_matrix, s_hat_metric, MetricField, MetricLabel,
};
pub use mtw::{estimate_kappa, mtw_sectional, KappaEstimate, KappaOptions, MtwOptions, PairFrame};

/// Ambient pseudo-metric and symmetric tensor in which a graph is studied.
#[derive(Debug, Clone)]
pub struct Ambient {
    pub g_hat: MetricField,
    pub s_hat: MetricField,
    pub stencil_h: f64,
}

impl Ambient {
    pub fn new(g_hat: MetricField, s_hat: MetricField) -> Self {
        Self { g_hat, s_hat, stencil_h: DEFAULT_STENCIL_H }
    }

    pub fn with_stencil(mut self, stencil_h: f64) -> Self {
        self.stencil_h = stencil_h;
        self
    }

    /// Half the ambient dimension.
    pub fn n(&self) -> usize {
        self.g_hat.point_dim / 2
    }
}

/// A cost with its densities and the induced ambient structure.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub model: CostModel,
    pub dens: DensityPair,
    pub ambient: Ambient,
}

impl Geometry {
    pub fn new(model: CostModel, dens: DensityPair) -> Self {
        let ambient = Ambient::new(kmw_metric(&model, &dens), s_hat_metric(&model, &dens));
        Self { model, dens, ambient }
    }

    pub fn with_stencil(mut self, stencil_h: f64) -> Self {
        self.ambient.stencil_h = stencil_h;
        self
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }
}

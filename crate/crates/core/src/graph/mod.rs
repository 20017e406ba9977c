//! The graph of a transport map as a spacelike submanifold of the product.

pub mod chart;
pub mod frame;
pub mod hessian_metric;
pub mod identity;
pub mod second_fundamental;

pub use chart::{ChartPoint, ChartSource, GraphChart, MapFn, Probe};
pub use frame::{induced_frame, orthonormal_frame, FrameResiduals, GraphFrame};
pub use hessian_metric::{hessian_metric_check, HessianMetricCheck};
pub use identity::{
    chart_jets, elliptic_identity_residual, intrinsic_laplacian, rhs_terms, Directions, IdentityOptions,
    IdentityReport, RhsTerms, TERM_NAMES,
};
pub use second_fundamental::{
    ii_apply, mean_curvature_residual, second_fundamental_form, AmbientJet, MeanCurvature, SecondFundamentalForm,
};

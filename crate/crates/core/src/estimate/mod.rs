//! Cutoffs, the maximum point of the scaled top eigenvalue, and the observed
//! constants of the interior second-derivative estimate.

pub mod cutoff;
pub mod maxpoint;
pub mod pogorelov;

pub use cutoff::{make_cutoff, Cutoff};
pub use maxpoint::{
    check_max_point_inequality, grid_probes, locate_max_point, max_point_ratio, MaxPoint, MaxPointCheck,
};
pub use pogorelov::{
    check_pogorelov_bound, inverse_geometry, DependencyNorms, KeyEstimate, MaxPointSummary, PogorelovReport,
    PogorelovRow, KAPPA_DEFLATION,
};

//! Discretization, exact and entropic discrete transport, and the
//! second-order data of the resulting maps.

pub mod exact;
pub mod measure;
pub mod second_order;
pub mod sinkhorn;
pub mod solution;

pub use exact::solve_exact;
pub use measure::{cost_matrix, discretize, DiscreteMeasure, GridSpec};
pub use second_order::{b_from_potential, check_det_identity, from_jacobian, second_order_data, SecondOrderData};
pub use sinkhorn::{default_final_eps, default_schedule, eps_schedule, solve_sinkhorn, SinkhornOptions};
pub use solution::{Method, PlanEntry, TransportSolution};

//! Scenario-driven orchestration: geometry, curvature bound, solve, graph and
//! estimate stages, with canonical reports and field dumps.

pub mod dump;
pub mod report;
pub mod run;
pub mod scenario;
pub mod stages;

pub use dump::{dump_fields, dump_riemann};
pub use report::{emit_report, read_report, report_hash, report_value};
pub use run::{run_scenario, Flag, RunReport, StageStatus};
pub use scenario::{scenario_schema, Scenario};

//! Post-solve analysis: full-horizon SOC reconstruction, violation audits,
//! closed-form problem sizes and cross-formulation comparison reports.

mod compare;
mod counts;
mod report;
mod soc;
mod violations;

pub use compare::{
    compare_formulations, run_formulation, ComparisonEntry, ComparisonReport, FormulationRun,
    PipelineError,
};
pub use counts::{
    count_rows_closed_form, count_vars_closed_form, fewest_rows, minmax_fewer_rows_than_implicit,
    CountError,
};
pub use report::{
    format_float, report_csv_string, trajectory_csv_string, write_report_csv, write_trajectory_csv,
    REPORT_HEADER,
};
pub use soc::{net_horizon_flow, reconstruct_soc, SocError, SocTrajectory};
pub use violations::{count_violations, ViolationReport, VIOLATION_REL_TOL};

//! Solver-agnostic sparse LP construction and solving.

mod external;
mod model;
mod mps;
mod simplex;
mod solver;

pub use external::{parse_solution, solve_external, ExternalError, ExternalSolver};
pub use model::{
    model_stats, LpModel, ModelError, ModelStats, Row, RowId, Sense, Solution, SolveStatus, VarId,
    Variable,
};
pub use mps::{mps_string, parse_mps, parse_mps_str, write_mps, MpsError, OBJECTIVE_ROW};
pub use simplex::{solve_reference, SimplexError, SimplexOptions};
pub use solver::{SolveError, Solver};

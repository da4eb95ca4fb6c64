use thiserror::Error;

use super::external::{ExternalError, ExternalSolver};
use super::model::{LpModel, Solution};
use super::simplex::{solve_reference, SimplexError, SimplexOptions};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("reference solver: {0}")]
    Reference(#[from] SimplexError),
    #[error("external solver: {0}")]
    External(#[from] ExternalError),
}

/// Either backend behind one call.
#[derive(Debug, Clone)]
pub enum Solver {
    Reference(SimplexOptions),
    External(ExternalSolver),
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Reference(SimplexOptions::default())
    }
}

impl Solver {
    pub fn solve(&self, model: &LpModel) -> Result<Solution, SolveError> {
        Ok(match self {
            Solver::Reference(opts) => solve_reference(model, opts)?,
            Solver::External(ext) => ext.solve(model)?,
        })
    }
}

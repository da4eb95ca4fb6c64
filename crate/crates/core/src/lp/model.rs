use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("variable `{name}` has inverted bounds [{lower}, {upper}]")]
    InvertedBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("unknown variable handle {0}")]
    UnknownVariable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub obj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    /// Sorted by variable, one entry per variable, no explicit zeros.
    pub coeffs: Vec<(VarId, f64)>,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A sparse minimisation LP.
#[derive(Debug, Clone, Default)]
pub struct LpModel {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Row>,
    var_names: HashMap<String, usize>,
    row_names: HashMap<String, usize>,
}

impl PartialEq for LpModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.vars == other.vars && self.rows == other.rows
    }
}

impl LpModel {
    pub fn new(name: impl Into<String>) -> LpModel {
        LpModel {
            name: name.into(),
            ..LpModel::default()
        }
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        obj: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if self.var_names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        if lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(ModelError::InvertedBounds { name, lower, upper });
        }
        let id = self.vars.len();
        self.var_names.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            lower,
            upper,
            obj,
        });
        Ok(VarId(id))
    }

    /// Appends a row; repeated variables are merged by summing coefficients.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        rhs: f64,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
    ) -> Result<RowId, ModelError> {
        let name = name.into();
        if self.row_names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for (v, a) in coeffs {
            if v.0 >= self.vars.len() {
                return Err(ModelError::UnknownVariable(v.0));
            }
            *merged.entry(v).or_insert(0.0) += a;
        }
        let id = self.rows.len();
        self.row_names.insert(name.clone(), id);
        self.rows.push(Row {
            name,
            sense,
            rhs,
            coeffs: merged.into_iter().filter(|(_, a)| *a != 0.0).collect(),
        });
        Ok(RowId(id))
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self
            .vars
            .get_mut(var.0)
            .ok_or(ModelError::UnknownVariable(var.0))?;
        if lower > upper {
            return Err(ModelError::InvertedBounds {
                name: v.name.clone(),
                lower,
                upper,
            });
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn row(&self, id: RowId) -> &Row {
        &self.rows[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied().map(VarId)
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.row_names.get(name).copied().map(RowId)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.obj * xi).sum()
    }

    /// Largest row violation scaled by `1 + |rhs|`.
    pub fn max_scaled_row_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.violation(x) / (1.0 + r.rhs.abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_bound_violation(&self, x: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
    Error,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Limit => "limit",
            SolveStatus::Error => "error",
        })
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(SolveStatus::Optimal),
            "infeasible" => Ok(SolveStatus::Infeasible),
            "unbounded" => Ok(SolveStatus::Unbounded),
            "limit" => Ok(SolveStatus::Limit),
            "error" => Ok(SolveStatus::Error),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// Present iff the solver returned a point.
    pub values: Option<Vec<f64>>,
    pub wall_time: Duration,
}

impl Solution {
    pub fn without_point(status: SolveStatus, wall_time: Duration) -> Solution {
        Solution {
            status,
            objective: None,
            values: None,
            wall_time,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal && self.values.is_some()
    }

    /// Value of `var`; panics when the solution carries no point.
    pub fn value(&self, var: VarId) -> f64 {
        self.values
            .as_ref()
            .expect("solution has no variable values")[var.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStats {
    pub num_rows: usize,
    pub num_vars: usize,
    pub num_nonzeros: usize,
    pub build_time: Duration,
}

pub fn model_stats(model: &LpModel) -> ModelStats {
    ModelStats {
        num_rows: model.num_rows(),
        num_vars: model.num_vars(),
        num_nonzeros: model.rows().iter().map(|r| r.coeffs.len()).sum(),
        build_time: Duration::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_variable_gets_handle_zero() {
        let mut m = LpModel::new("t");
        assert_eq!(m.add_variable("x", 0.0, f64::INFINITY, 1.0), Ok(VarId(0)));
        assert_eq!(
            m.add_variable("x", 0.0, 1.0, 0.0),
            Err(ModelError::DuplicateName("x".into()))
        );
        assert!(matches!(
            m.add_variable("y", 2.0, 1.0, 0.0),
            Err(ModelError::InvertedBounds { .. })
        ));
    }

    #[test]
    fn repeated_coefficients_are_merged() {
        let mut m = LpModel::new("t");
        let x = m.add_variable("x", 0.0, f64::INFINITY, 1.0).unwrap();
        let r = m
            .add_row("r", Sense::Le, 3.0, [(x, 1.0), (x, 1.0)])
            .unwrap();
        assert_eq!(m.row(r).coeffs, vec![(x, 2.0)]);
        let e = m.add_row("empty", Sense::Eq, 0.0, []).unwrap();
        assert!(m.row(e).coeffs.is_empty());
        assert_eq!(
            m.add_row("bad", Sense::Le, 0.0, [(VarId(99), 1.0)]),
            Err(ModelError::UnknownVariable(99))
        );
        assert_eq!(
            m.add_row("r", Sense::Le, 0.0, []),
            Err(ModelError::DuplicateName("r".into()))
        );
    }

    #[test]
    fn stats_count_structure() {
        let mut m = LpModel::new("t");
        assert_eq!(
            (
                model_stats(&m).num_rows,
                model_stats(&m).num_vars,
                model_stats(&m).num_nonzeros
            ),
            (0, 0, 0)
        );
        let x = m.add_variable("x", 0.0, 1.0, 0.0).unwrap();
        let y = m.add_variable("y", 0.0, 1.0, 0.0).unwrap();
        m.add_row("r", Sense::Ge, 1.0, [(x, 1.0), (y, 2.0)])
            .unwrap();
        assert_eq!(model_stats(&m).num_nonzeros, 2);
    }
}

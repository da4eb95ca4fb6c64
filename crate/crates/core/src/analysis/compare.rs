use std::time::{Duration, Instant};

use thiserror::Error;

use super::soc::{reconstruct_soc, SocTrajectory};
use super::violations::{count_violations, ViolationReport};
use crate::aggregation::PeriodMapping;
use crate::cem::{build_base_model, CemError, CemHandles};
use crate::config::{SystemConfig, TimeSeriesTable};
use crate::lds::{apply_formulation, Formulation, LdsError, LdsHandles};
use crate::lp::{model_stats, LpModel, ModelStats, Solution, SolveStatus, Solver};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("building the base model: {0}")]
    Cem(#[from] CemError),
    #[error("adding the LDS formulation: {0}")]
    Lds(#[from] LdsError),
}

/// Everything produced for one formulation.
#[derive(Debug, Clone)]
pub struct FormulationRun {
    pub formulation: Formulation,
    pub model: LpModel,
    pub stats: ModelStats,
    pub cem: CemHandles,
    pub lds: LdsHandles,
    /// `Err` carries the solver failure message.
    pub solution: Result<Solution, String>,
    pub solve_time: Duration,
    pub trajectories: Vec<SocTrajectory>,
    pub violations: Vec<ViolationReport>,
}

impl FormulationRun {
    pub fn status(&self) -> SolveStatus {
        match &self.solution {
            Ok(s) => s.status,
            Err(_) => SolveStatus::Error,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        self.solution.as_ref().ok().and_then(|s| s.objective)
    }

    pub fn optimal(&self) -> Option<&Solution> {
        self.solution.as_ref().ok().filter(|s| s.is_optimal())
    }

    pub fn violation_count(&self) -> Option<usize> {
        self.optimal()?;
        Some(self.violations.iter().map(ViolationReport::count).sum())
    }

    /// Total optimal LDS energy capacity.
    pub fn lds_energy_capacity(&self) -> Option<f64> {
        self.optimal()?;
        Some(self.trajectories.iter().map(|t| t.capacity).sum())
    }
}

fn run_on_base(
    base: &LpModel,
    cem: &CemHandles,
    base_time: Duration,
    config: &SystemConfig,
    mapping: &PeriodMapping,
    formulation: Formulation,
    solver: &Solver,
) -> Result<FormulationRun, PipelineError> {
    let start = Instant::now();
    let mut model = base.clone();
    model.name = format!("cem-{formulation}");
    let lds = apply_formulation(formulation, &mut model, cem, mapping, config)?;
    let mut stats = model_stats(&model);
    stats.build_time = base_time + start.elapsed();

    let start = Instant::now();
    let solution = solver.solve(&model).map_err(|e| e.to_string());
    let solve_time = start.elapsed();

    let mut trajectories = Vec::new();
    let mut violations = Vec::new();
    if let Ok(s) = &solution {
        if s.is_optimal() {
            trajectories =
                reconstruct_soc(s, &lds, cem, mapping, config).expect("handles built together");
            violations = trajectories.iter().map(count_violations).collect();
        }
    }
    Ok(FormulationRun {
        formulation,
        model,
        stats,
        cem: cem.clone(),
        lds,
        solution,
        solve_time,
        trajectories,
        violations,
    })
}

/// Builds, solves and audits one formulation.
pub fn run_formulation(
    config: &SystemConfig,
    ts: &TimeSeriesTable,
    mapping: &PeriodMapping,
    formulation: Formulation,
    solver: &Solver,
) -> Result<FormulationRun, PipelineError> {
    let (base, cem) = build_base_model(config, ts, mapping)?;
    let base_time = cem.build_time;
    run_on_base(&base, &cem, base_time, config, mapping, formulation, solver)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub formulation: Formulation,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub rows: usize,
    pub vars: usize,
    pub nonzeros: usize,
    pub build_time: Duration,
    pub solve_time: Duration,
    pub violations: Option<usize>,
    pub lds_energy_capacity: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonReport {
    pub fn entry(&self, formulation: Formulation) -> Option<&ComparisonEntry> {
        self.entries.iter().find(|e| e.formulation == formulation)
    }
}

impl From<&FormulationRun> for ComparisonEntry {
    fn from(run: &FormulationRun) -> Self {
        ComparisonEntry {
            formulation: run.formulation,
            status: run.status(),
            objective: run.objective(),
            rows: run.stats.num_rows,
            vars: run.stats.num_vars,
            nonzeros: run.stats.num_nonzeros,
            build_time: run.stats.build_time,
            solve_time: run.solve_time,
            violations: run.violation_count(),
            lds_energy_capacity: run.lds_energy_capacity(),
            error: run.solution.as_ref().err().cloned(),
        }
    }
}

/// Runs every formulation on one shared base model. A solver failure marks
/// that entry as `error` without aborting the others.
pub fn compare_formulations(
    config: &SystemConfig,
    ts: &TimeSeriesTable,
    mapping: &PeriodMapping,
    formulations: &[Formulation],
    solver: &Solver,
) -> Result<(ComparisonReport, Vec<FormulationRun>), PipelineError> {
    let (base, cem) = build_base_model(config, ts, mapping)?;
    let base_time = cem.build_time;
    let mut runs = Vec::new();
    for &f in formulations {
        runs.push(run_on_base(
            &base, &cem, base_time, config, mapping, f, solver,
        )?);
    }
    let report = ComparisonReport {
        entries: runs.iter().map(ComparisonEntry::from).collect(),
    };
    Ok((report, runs))
}

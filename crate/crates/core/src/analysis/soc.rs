use thiserror::Error;

use crate::aggregation::PeriodMapping;
use crate::cem::{CemHandles, StorageVars};
use crate::config::SystemConfig;
use crate::lds::{LdsHandles, SocVars};
use crate::lp::{Solution, SolveStatus, VarId};

#[derive(Debug, Error, PartialEq)]
pub enum SocError {
    #[error("no optimal solution to reconstruct from (status {0})")]
    Status(SolveStatus),
    #[error("handles do not match the mapping: {0}")]
    HandleMismatch(String),
}

/// Full-horizon state of charge of one LDS unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SocTrajectory {
    pub storage: String,
    /// Optimal energy capacity `C*`.
    pub capacity: f64,
    /// `H + 1` values; the last one is the state one step past the horizon,
    /// which should equal the first for a cyclic solution.
    pub values: Vec<f64>,
}

impl SocTrajectory {
    /// The `H` in-horizon values.
    pub fn horizon(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }

    pub fn wrap(&self) -> f64 {
        *self.values.last().expect("trajectory is never empty")
    }

    /// `|SOC[H+1] - SOC[1]|`.
    pub fn cyclic_gap(&self) -> f64 {
        (self.wrap() - self.values[0]).abs()
    }
}

struct Flow<'a> {
    x: &'a [f64],
    vars: &'a StorageVars,
    gain: f64,
    loss: f64,
    retention: f64,
}

impl Flow<'_> {
    fn at(&self, w: usize, t: usize) -> f64 {
        self.gain * self.x[self.vars.charge.at(w, t).0]
            - self.loss * self.x[self.vars.discharge.at(w, t).0]
    }

    fn v(&self, id: VarId) -> f64 {
        self.x[id.0]
    }
}

fn check_len(what: &str, vars: &[VarId], expected: usize) -> Result<(), SocError> {
    if vars.len() == expected {
        Ok(())
    } else {
        Err(SocError::HandleMismatch(format!(
            "{what} has {} variables, expected {expected}",
            vars.len()
        )))
    }
}

/// Rebuilds the hourly SOC of every LDS unit from a solved model.
pub fn reconstruct_soc(
    solution: &Solution,
    lds: &LdsHandles,
    cem: &CemHandles,
    mapping: &PeriodMapping,
    config: &SystemConfig,
) -> Result<Vec<SocTrajectory>, SocError> {
    let x = match (&solution.status, &solution.values) {
        (SolveStatus::Optimal, Some(x)) => x.as_slice(),
        (status, _) => return Err(SocError::Status(*status)),
    };
    let (n_periods, reps, len) = (
        mapping.periods(),
        mapping.representatives(),
        mapping.period_len(),
    );
    let horizon = n_periods * len;
    let dt = config.horizon.dt_hours;

    let mut out = Vec::new();
    for soc in &lds.storages {
        let vars = cem
            .storages
            .iter()
            .find(|s| s.index == soc.storage)
            .ok_or_else(|| {
                SocError::HandleMismatch(format!("no flows for storage {}", soc.storage))
            })?;
        check_len("charge", vars.charge.all(), reps * len)?;
        let params = &config.storages[soc.storage];
        let (gain, loss) = params.flow_factors(dt);
        let f = Flow {
            x,
            vars,
            gain,
            loss,
            retention: params.retention(),
        };
        let r = f.retention;
        let mut values = Vec::with_capacity(horizon + 1);
        match &soc.vars {
            SocVars::Explicit { soc } => {
                check_len("soc", soc, horizon)?;
                values.extend(soc.iter().map(|&v| f.v(v)));
                let last = mapping.rep_of(n_periods - 1);
                values.push(f.v(soc[horizon - 1]) * r + f.at(last, len - 1));
            }
            SocVars::ImplicitHourly { intra, inter } => {
                check_len("intra", intra, reps * len)?;
                check_len("inter", inter, n_periods)?;
                for n in 0..n_periods {
                    let w = mapping.rep_of(n);
                    for t in 0..len {
                        values.push(f.v(inter[n]) * r + f.v(intra[w * len + t]));
                    }
                }
                let last = mapping.rep_of(n_periods - 1);
                let next_inter = f.v(inter[n_periods - 1])
                    + f.v(intra[last * len + len - 1]) * r
                    + f.at(last, len - 1);
                let first = mapping.rep_of(0);
                values.push(next_inter * r + f.v(intra[first * len]));
            }
            SocVars::ImplicitMinMax { inter, .. } | SocVars::OriginalRelaxed { inter, .. } => {
                check_len("inter", inter, n_periods)?;
                for n in 0..n_periods {
                    let w = mapping.rep_of(n);
                    let mut level = f.v(inter[n]) * r + f.at(w, 0);
                    values.push(level);
                    for t in 1..len {
                        level = level * r + f.at(w, t);
                        values.push(level);
                    }
                }
                let first = mapping.rep_of(0);
                values.push(values[horizon - 1] * r + f.at(first, 0));
            }
        }
        out.push(SocTrajectory {
            storage: params.name.clone(),
            capacity: x[vars.energy_capacity.0],
            values,
        });
    }
    Ok(out)
}

/// Net stored energy over the whole input horizon, `sum_h flow(w(n), t)`.
pub fn net_horizon_flow(
    solution: &Solution,
    vars: &StorageVars,
    mapping: &PeriodMapping,
    config: &SystemConfig,
) -> f64 {
    let params = &config.storages[vars.index];
    let (gain, loss) = params.flow_factors(config.horizon.dt_hours);
    let mut total = 0.0;
    for n in 0..mapping.periods() {
        let w = mapping.rep_of(n);
        for t in 0..mapping.period_len() {
            total += gain * solution.value(vars.charge.at(w, t))
                - loss * solution.value(vars.discharge.at(w, t));
        }
    }
    total
}

//! Base capacity-expansion LP over representative periods.
//!
//! Operational variables exist only for representative periods; each
//! representative reads the raw data of its designated input period.
//! Long-duration storages get flows and capacities here, but their inventory
//! across periods is left to [`crate::lds`]. Short-duration storages are
//! closed with a cyclic state of charge inside every representative period.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::aggregation::PeriodMapping;
use crate::config::{GeneratorKind, SystemConfig, TimeSeriesTable};
use crate::lp::{LpModel, ModelError, Sense, VarId};

#[derive(Debug, Error, PartialEq)]
pub enum CemError {
    #[error(
        "mapping covers {mapping} steps of length-{mapping_t} periods, config has H = {h}, T = {t}"
    )]
    MappingMismatch {
        mapping: usize,
        mapping_t: usize,
        h: usize,
        t: usize,
    },
    #[error("unknown zone `{0}`")]
    UnknownZone(String),
    #[error("missing series `{0}`")]
    MissingSeries(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Variables indexed by representative step, `w * T + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepVars {
    period_len: usize,
    vars: Vec<VarId>,
}

impl StepVars {
    pub fn at(&self, rep: usize, t: usize) -> VarId {
        self.vars[rep * self.period_len + t]
    }

    pub fn all(&self) -> &[VarId] {
        &self.vars
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorVars {
    pub capacity: VarId,
    pub output: StepVars,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageVars {
    /// Index into `SystemConfig::storages`.
    pub index: usize,
    pub energy_capacity: VarId,
    pub power_capacity: VarId,
    pub charge: StepVars,
    pub discharge: StepVars,
    /// Per-representative cyclic state of charge (short-duration storage only).
    pub cyclic_soc: Option<StepVars>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineVars {
    pub capacity: VarId,
    pub forward: StepVars,
    pub reverse: StepVars,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemHandles {
    pub representatives: usize,
    pub period_len: usize,
    pub generators: Vec<GeneratorVars>,
    pub storages: Vec<StorageVars>,
    /// Non-served energy per zone.
    pub nse: Vec<StepVars>,
    pub lines: Vec<LineVars>,
    pub build_time: Duration,
}

/// Demand of `zone` at step `t` of representative `rep`, read from the
/// representative's designated period.
pub fn representative_demand(
    ts: &TimeSeriesTable,
    mapping: &PeriodMapping,
    zone: &str,
    rep: usize,
    t: usize,
) -> Result<f64, CemError> {
    let column = SystemConfig::demand_column(zone);
    let series = ts.column(&column).ok_or(CemError::MissingSeries(column))?;
    representative_value(series, mapping, rep, t)
}

fn representative_value(
    series: &[f64],
    mapping: &PeriodMapping,
    rep: usize,
    t: usize,
) -> Result<f64, CemError> {
    if rep >= mapping.representatives() || t >= mapping.period_len() {
        return Err(CemError::Index(format!(
            "(w, t) = ({rep}, {t}) outside {} x {}",
            mapping.representatives(),
            mapping.period_len()
        )));
    }
    let h = mapping.step(mapping.designated(rep), t);
    series.get(h).copied().ok_or_else(|| {
        CemError::Index(format!("step {h} beyond series of length {}", series.len()))
    })
}

struct Builder<'a> {
    model: LpModel,
    mapping: &'a PeriodMapping,
}

impl Builder<'_> {
    fn step_vars(
        &mut self,
        prefix: &str,
        lower: f64,
        obj: impl Fn(usize, usize) -> f64,
    ) -> Result<StepVars, ModelError> {
        let (reps, len) = (self.mapping.representatives(), self.mapping.period_len());
        let mut vars = Vec::with_capacity(reps * len);
        for w in 0..reps {
            for t in 0..len {
                vars.push(self.model.add_variable(
                    format!("{prefix},{},{}]", w + 1, t + 1),
                    lower,
                    f64::INFINITY,
                    obj(w, t),
                )?);
            }
        }
        Ok(StepVars {
            period_len: len,
            vars,
        })
    }
}

pub fn build_base_model(
    config: &SystemConfig,
    ts: &TimeSeriesTable,
    mapping: &PeriodMapping,
) -> Result<(LpModel, CemHandles), CemError> {
    let start = Instant::now();
    let horizon = &config.horizon;
    if mapping.horizon_len() != horizon.steps || mapping.period_len() != horizon.period_len {
        return Err(CemError::MappingMismatch {
            mapping: mapping.horizon_len(),
            mapping_t: mapping.period_len(),
            h: horizon.steps,
            t: horizon.period_len,
        });
    }
    let dt = horizon.dt_hours;
    let reps = mapping.representatives();
    let len = mapping.period_len();
    let zone_index = |name: &str| {
        config
            .zones
            .iter()
            .position(|z| z.name == name)
            .ok_or_else(|| CemError::UnknownZone(name.to_string()))
    };
    let op_weight = |w: usize| mapping.weight(w) as f64 * dt;

    let mut b = Builder {
        model: LpModel::new("cem"),
        mapping,
    };

    let mut generators = Vec::new();
    for g in &config.generators {
        let capacity =
            b.model
                .add_variable(format!("cap[{}]", g.name), 0.0, f64::INFINITY, g.capex)?;
        let output = b.step_vars(&format!("gen[{}", g.name), 0.0, |w, _| {
            op_weight(w) * g.varcost
        })?;
        generators.push(GeneratorVars { capacity, output });
    }

    let mut storages = Vec::new();
    for (index, s) in config.storages.iter().enumerate() {
        let energy_capacity = b.model.add_variable(
            format!("ecap[{}]", s.name),
            0.0,
            f64::INFINITY,
            s.capex_energy,
        )?;
        let power_capacity = b.model.add_variable(
            format!("pcap[{}]", s.name),
            0.0,
            f64::INFINITY,
            s.capex_power,
        )?;
        let charge = b.step_vars(&format!("cha[{}", s.name), 0.0, |_, _| 0.0)?;
        let discharge = b.step_vars(&format!("dis[{}", s.name), 0.0, |_, _| 0.0)?;
        let cyclic_soc = if s.is_lds {
            None
        } else {
            Some(b.step_vars(&format!("soc[{}", s.name), 0.0, |_, _| 0.0)?)
        };
        storages.push(StorageVars {
            index,
            energy_capacity,
            power_capacity,
            charge,
            discharge,
            cyclic_soc,
        });
    }

    let mut nse = Vec::new();
    for z in &config.zones {
        nse.push(b.step_vars(&format!("nse[{}", z.name), 0.0, |w, _| {
            op_weight(w) * config.nse_penalty
        })?);
    }

    let mut lines = Vec::new();
    for (i, l) in config.lines.iter().enumerate() {
        zone_index(&l.from)?;
        zone_index(&l.to)?;
        let capacity =
            b.model
                .add_variable(format!("lcap[line{}]", i + 1), 0.0, f64::INFINITY, l.capex)?;
        let forward = b.step_vars(&format!("flow+[line{}", i + 1), 0.0, |_, _| 0.0)?;
        let reverse = b.step_vars(&format!("flow-[line{}", i + 1), 0.0, |_, _| 0.0)?;
        lines.push(LineVars {
            capacity,
            forward,
            reverse,
        });
    }

    let mut model = b.model;
    let tag =
        |kind: &str, name: &str, w: usize, t: usize| format!("{kind}[{name},{},{}]", w + 1, t + 1);

    // Energy balance per zone and representative step.
    let gen_zone: Vec<usize> = config
        .generators
        .iter()
        .map(|g| zone_index(&g.zone))
        .collect::<Result<_, _>>()?;
    let sto_zone: Vec<usize> = config
        .storages
        .iter()
        .map(|s| zone_index(&s.zone))
        .collect::<Result<_, _>>()?;
    for (z, zone) in config.zones.iter().enumerate() {
        for w in 0..reps {
            for t in 0..len {
                let mut coeffs = Vec::new();
                for (g, vars) in generators.iter().enumerate() {
                    if gen_zone[g] == z {
                        coeffs.push((vars.output.at(w, t), 1.0));
                    }
                }
                for (s, vars) in storages.iter().enumerate() {
                    if sto_zone[s] == z {
                        coeffs.push((vars.discharge.at(w, t), 1.0));
                        coeffs.push((vars.charge.at(w, t), -1.0));
                    }
                }
                for (l, vars) in lines.iter().enumerate() {
                    let line = &config.lines[l];
                    // forward flows from -> to, reverse flows to -> from
                    if line.to == zone.name {
                        coeffs.push((vars.forward.at(w, t), 1.0));
                        coeffs.push((vars.reverse.at(w, t), -1.0));
                    }
                    if line.from == zone.name {
                        coeffs.push((vars.forward.at(w, t), -1.0));
                        coeffs.push((vars.reverse.at(w, t), 1.0));
                    }
                }
                coeffs.push((nse[z].at(w, t), 1.0));
                let demand = representative_demand(ts, mapping, &zone.name, w, t)?;
                model.add_row(tag("bal", &zone.name, w, t), Sense::Eq, demand, coeffs)?;
            }
        }
    }

    for (g, vars) in config.generators.iter().zip(&generators) {
        let availability = match g.kind {
            GeneratorKind::Thermal => None,
            GeneratorKind::Vre => {
                let name = g.availability_series.as_deref().unwrap_or_default();
                Some(
                    ts.column(name)
                        .ok_or_else(|| CemError::MissingSeries(name.to_string()))?,
                )
            }
        };
        for w in 0..reps {
            for t in 0..len {
                let avail = match availability {
                    Some(series) => representative_value(series, mapping, w, t)?,
                    None => 1.0,
                };
                model.add_row(
                    tag("gcap", &g.name, w, t),
                    Sense::Le,
                    0.0,
                    [(vars.output.at(w, t), 1.0), (vars.capacity, -avail)],
                )?;
            }
        }
    }

    for (s, vars) in config.storages.iter().zip(&storages) {
        for w in 0..reps {
            for t in 0..len {
                model.add_row(
                    tag("chcap", &s.name, w, t),
                    Sense::Le,
                    0.0,
                    [(vars.charge.at(w, t), 1.0), (vars.power_capacity, -1.0)],
                )?;
                model.add_row(
                    tag("dicap", &s.name, w, t),
                    Sense::Le,
                    0.0,
                    [(vars.discharge.at(w, t), 1.0), (vars.power_capacity, -1.0)],
                )?;
            }
        }
        if let Some(soc) = &vars.cyclic_soc {
            let (gain, loss) = s.flow_factors(dt);
            for w in 0..reps {
                for t in 0..len {
                    let next = (t + 1) % len;
                    model.add_row(
                        tag("sbal", &s.name, w, t),
                        Sense::Eq,
                        0.0,
                        [
                            (soc.at(w, next), 1.0),
                            (soc.at(w, t), -s.retention()),
                            (vars.charge.at(w, t), -gain),
                            (vars.discharge.at(w, t), loss),
                        ],
                    )?;
                    model.add_row(
                        tag("scap", &s.name, w, t),
                        Sense::Le,
                        0.0,
                        [(soc.at(w, t), 1.0), (vars.energy_capacity, -1.0)],
                    )?;
                }
            }
        }
    }

    for (i, vars) in lines.iter().enumerate() {
        let name = format!("line{}", i + 1);
        for w in 0..reps {
            for t in 0..len {
                for (dir, flow) in [("fcap+", &vars.forward), ("fcap-", &vars.reverse)] {
                    model.add_row(
                        tag(dir, &name, w, t),
                        Sense::Le,
                        0.0,
                        [(flow.at(w, t), 1.0), (vars.capacity, -1.0)],
                    )?;
                }
            }
        }
    }

    let handles = CemHandles {
        representatives: reps,
        period_len: len,
        generators,
        storages,
        nse,
        lines,
        build_time: start.elapsed(),
    };
    Ok((model, handles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::identity_mapping;
    use crate::config::SystemConfig;
    use crate::lp::{solve_reference, SimplexOptions, SolveStatus};
    use indexmap::IndexMap;

    fn config(extra: &str, h: usize, t: usize) -> SystemConfig {
        SystemConfig::from_toml_str(&format!(
            r#"
nse_penalty = 2.0
[horizon]
H = {h}
T = {t}
dt_hours = 1.0
[aggregation]
num_representatives = 1
seed = 1
[[zone]]
name = "Z1"
{extra}
"#
        ))
        .unwrap()
    }

    fn demand_table(values: Vec<f64>) -> TimeSeriesTable {
        let mut cols = IndexMap::new();
        cols.insert("demand.Z1".to_string(), values);
        TimeSeriesTable::new(cols).unwrap()
    }

    #[test]
    fn representative_demand_reads_designated_period() {
        let ts = demand_table((1..=16).map(f64::from).collect());
        let id = identity_mapping(4, 4);
        for w in 0..4 {
            for t in 0..4 {
                assert_eq!(
                    representative_demand(&ts, &id, "Z1", w, t).unwrap(),
                    (w * 4 + t + 1) as f64
                );
            }
        }
        let m = PeriodMapping::new(vec![0, 1, 1, 0], vec![0, 2], 4).unwrap();
        // representative 2 is period 3; its step 2 is h = 10 (1-based)
        assert_eq!(representative_demand(&ts, &m, "Z1", 1, 1).unwrap(), 10.0);
        assert!(matches!(
            representative_demand(&ts, &m, "Z1", 1, 4),
            Err(CemError::Index(_))
        ));
    }

    #[test]
    fn mapping_must_match_horizon() {
        let cfg = config("", 8, 4);
        let ts = demand_table(vec![1.0; 8]);
        assert!(matches!(
            build_base_model(&cfg, &ts, &identity_mapping(3, 4)),
            Err(CemError::MappingMismatch { .. })
        ));
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let cfg = config(
            r#"
[[generator]]
name = "gas"
zone = "Z1"
kind = "thermal"
capex = 5.0
varcost = 0.3
"#,
            8,
            4,
        );
        let ts = demand_table(vec![0.0; 8]);
        let (model, handles) = build_base_model(&cfg, &ts, &identity_mapping(2, 4)).unwrap();
        let s = solve_reference(&model, &SimplexOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.objective.unwrap().abs() < 1e-12);
        assert!(s.value(handles.generators[0].capacity).abs() < 1e-12);
    }

    #[test]
    fn demand_without_generators_is_all_nse() {
        let cfg = config("", 8, 4);
        let demand: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0];
        let ts = demand_table(demand.clone());
        let mapping = PeriodMapping::new(vec![0, 0], vec![1], 4).unwrap();
        let (model, _) = build_base_model(&cfg, &ts, &mapping).unwrap();
        let s = solve_reference(&model, &SimplexOptions::default()).unwrap();
        // representative is period 2, weight 2
        let expected = 2.0 * 2.0 * demand[4..].iter().sum::<f64>();
        assert!((s.objective.unwrap() - expected).abs() < 1e-9);
    }
}

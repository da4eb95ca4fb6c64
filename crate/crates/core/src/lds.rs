//! Long-duration storage inventory formulations.
//!
//! Each `apply_*` function adds the state-of-charge variables and rows for one
//! LDS unit on top of a base model from [`crate::cem`]. Charge and discharge
//! variables only exist for representative periods, so every formulation is a
//! different way of chaining them along the full input horizon.
//!
//! Write `flow(w, t) = eta_cha dt cha[w,t] - dt / eta_dis dis[w,t]` and
//! `r = 1 - eta_sdc`.
//!
//! * Explicit-hourly: one SOC per input step, `SOC[h+1] = r SOC[h] + flow`,
//!   cyclic over the horizon.
//! * Implicit-hourly: an inter-period level per input period plus an
//!   intra-period deviation per representative step. Deviations start at 0 at
//!   the beginning of a period, and the inter-period level advances by the
//!   deviation at the end of the represented period. Bounds are enforced on
//!   every input step through `r^t inter[n] + intra[w(n), t]`.
//! * Implicit-min-max: as above, but intra-period levels are absolute for the
//!   designated period, and per-representative extreme deviations
//!   `dsoc_pos >= 0`, `dsoc_neg <= 0` bound the level of every other input
//!   period from its first step.
//! * Original (relaxed): the min-max formulation without the extreme
//!   deviations; only the period start levels are bounded.
//!
//! Variable and row names are 1-based.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::aggregation::PeriodMapping;
use crate::cem::{CemHandles, StorageVars};
use crate::config::{Storage, SystemConfig};
use crate::lp::{LpModel, ModelError, Sense, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formulation {
    ExplicitHourly,
    ImplicitHourly,
    ImplicitMinMax,
    OriginalRelaxed,
}

impl Formulation {
    /// All formulations, in report order.
    pub const ALL: [Formulation; 4] = [
        Formulation::ExplicitHourly,
        Formulation::ImplicitHourly,
        Formulation::ImplicitMinMax,
        Formulation::OriginalRelaxed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::ExplicitHourly => "explicit-hourly",
            Formulation::ImplicitHourly => "implicit-hourly",
            Formulation::ImplicitMinMax => "implicit-minmax",
            Formulation::OriginalRelaxed => "original",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formulation::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Formulation::ALL.iter().map(|f| f.name()).collect();
                format!(
                    "unknown formulation `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LdsError {
    #[error("storage `{0}` is not long-duration")]
    NotLds(String),
    #[error("representative {0} has no designated period")]
    MissingDesignated(usize),
    #[error("mapping has {mapping} representatives of length {mapping_t}, base model has {handles} of length {handles_t}")]
    MappingMismatch {
        mapping: usize,
        mapping_t: usize,
        handles: usize,
        handles_t: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// State-of-charge variables of one LDS unit.
#[derive(Debug, Clone, PartialEq)]
pub enum SocVars {
    /// `soc[h]` for every input step.
    Explicit { soc: Vec<VarId> },
    /// `intra[w * T + t]` and `inter[n]`.
    ImplicitHourly {
        intra: Vec<VarId>,
        inter: Vec<VarId>,
    },
    ImplicitMinMax {
        intra: Vec<VarId>,
        inter: Vec<VarId>,
        delta: Vec<VarId>,
        delta_pos: Vec<VarId>,
        delta_neg: Vec<VarId>,
    },
    OriginalRelaxed {
        intra: Vec<VarId>,
        inter: Vec<VarId>,
        delta: Vec<VarId>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageSoc {
    /// Index into `SystemConfig::storages` and `CemHandles::storages`.
    pub storage: usize,
    pub vars: SocVars,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdsHandles {
    pub formulation: Formulation,
    pub storages: Vec<StorageSoc>,
}

struct Ctx<'a> {
    name: &'a str,
    flows: &'a StorageVars,
    mapping: &'a PeriodMapping,
    retention: f64,
    gain: f64,
    loss: f64,
}

impl Ctx<'_> {
    /// `(cha, -gain), (dis, loss)`: minus the flow of step `(w, t)`.
    fn neg_flow(&self, w: usize, t: usize) -> [(VarId, f64); 2] {
        [
            (self.flows.charge.at(w, t), -self.gain),
            (self.flows.discharge.at(w, t), self.loss),
        ]
    }

    fn pos_flow(&self, w: usize, t: usize) -> [(VarId, f64); 2] {
        [
            (self.flows.charge.at(w, t), self.gain),
            (self.flows.discharge.at(w, t), -self.loss),
        ]
    }

    fn capacity(&self) -> VarId {
        self.flows.energy_capacity
    }
}

fn context<'a>(
    params: &'a Storage,
    flows: &'a StorageVars,
    mapping: &'a PeriodMapping,
    dt_hours: f64,
) -> Result<Ctx<'a>, LdsError> {
    if !params.is_lds {
        return Err(LdsError::NotLds(params.name.clone()));
    }
    if flows.charge.all().len() != mapping.representatives() * mapping.period_len() {
        return Err(LdsError::MappingMismatch {
            mapping: mapping.representatives(),
            mapping_t: mapping.period_len(),
            handles: flows.charge.all().len() / mapping.period_len().max(1),
            handles_t: mapping.period_len(),
        });
    }
    for w in 0..mapping.representatives() {
        let d = mapping.designated(w);
        if d >= mapping.periods() || mapping.rep_of(d) != w {
            return Err(LdsError::MissingDesignated(w));
        }
    }
    let (gain, loss) = params.flow_factors(dt_hours);
    Ok(Ctx {
        name: &params.name,
        flows,
        mapping,
        retention: params.retention(),
        gain,
        loss,
    })
}

fn step_tag(kind: &str, name: &str, a: usize, b: usize) -> String {
    format!("{kind}[{name},{},{}]", a + 1, b + 1)
}

fn tag(kind: &str, name: &str, a: usize) -> String {
    format!("{kind}[{name},{}]", a + 1)
}

fn rep_step_vars(
    model: &mut LpModel,
    kind: &str,
    c: &Ctx<'_>,
    lower: f64,
) -> Result<Vec<VarId>, ModelError> {
    let mut out = Vec::new();
    for w in 0..c.mapping.representatives() {
        for t in 0..c.mapping.period_len() {
            out.push(model.add_variable(
                step_tag(kind, c.name, w, t),
                lower,
                f64::INFINITY,
                0.0,
            )?);
        }
    }
    Ok(out)
}

fn per_index_vars(
    model: &mut LpModel,
    kind: &str,
    name: &str,
    count: usize,
    lower: f64,
    upper: f64,
) -> Result<Vec<VarId>, ModelError> {
    (0..count)
        .map(|i| model.add_variable(tag(kind, name, i), lower, upper, 0.0))
        .collect()
}

/// One SOC variable per input step. Adds `H` variables and `2H` rows.
pub fn apply_explicit_hourly(
    model: &mut LpModel,
    flows: &StorageVars,
    mapping: &PeriodMapping,
    params: &Storage,
    dt_hours: f64,
) -> Result<SocVars, LdsError> {
    let c = context(params, flows, mapping, dt_hours)?;
    let (n_periods, len) = (mapping.periods(), mapping.period_len());
    let horizon = n_periods * len;
    let soc = per_index_vars(model, "soc", c.name, horizon, 0.0, f64::INFINITY)?;
    for n in 0..n_periods {
        let w = mapping.rep_of(n);
        for t in 0..len {
            let h = mapping.step(n, t);
            let next = (h + 1) % horizon;
            let mut coeffs = vec![(soc[next], 1.0), (soc[h], -c.retention)];
            coeffs.extend(c.neg_flow(w, t));
            model.add_row(tag("soc_bal", c.name, h), Sense::Eq, 0.0, coeffs)?;
        }
    }
    for (h, &s) in soc.iter().enumerate() {
        model.add_row(
            tag("soc_cap", c.name, h),
            Sense::Le,
            0.0,
            [(s, 1.0), (c.capacity(), -1.0)],
        )?;
    }
    Ok(SocVars::Explicit { soc })
}

/// Inter-period levels with intra-period deviations, bounded on every input
/// step. Adds `WT + N` variables and `W(T-1) + N + 2NT` rows.
pub fn apply_implicit_hourly(
    model: &mut LpModel,
    flows: &StorageVars,
    mapping: &PeriodMapping,
    params: &Storage,
    dt_hours: f64,
) -> Result<SocVars, LdsError> {
    let c = context(params, flows, mapping, dt_hours)?;
    let (n_periods, reps, len) = (
        mapping.periods(),
        mapping.representatives(),
        mapping.period_len(),
    );
    let idx = |w: usize, t: usize| w * len + t;

    let intra = rep_step_vars(model, "soc_intra", &c, f64::NEG_INFINITY)?;
    for w in 0..reps {
        model.set_bounds(intra[idx(w, 0)], 0.0, 0.0)?;
    }
    let inter = per_index_vars(
        model,
        "soc_inter",
        c.name,
        n_periods,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )?;

    for w in 0..reps {
        for t in 1..len {
            let mut coeffs = vec![
                (intra[idx(w, t)], 1.0),
                (intra[idx(w, t - 1)], -c.retention),
            ];
            coeffs.extend(c.neg_flow(w, t - 1));
            model.add_row(step_tag("intra_bal", c.name, w, t), Sense::Eq, 0.0, coeffs)?;
        }
    }
    for n in 0..n_periods {
        let w = mapping.rep_of(n);
        let next = (n + 1) % n_periods;
        let mut coeffs = vec![
            (inter[next], 1.0),
            (inter[n], -1.0),
            (intra[idx(w, len - 1)], -c.retention),
        ];
        coeffs.extend(c.neg_flow(w, len - 1));
        model.add_row(tag("inter_bal", c.name, n), Sense::Eq, 0.0, coeffs)?;
    }
    for (kind, sense, with_cap) in [("soc_ub", Sense::Le, true), ("soc_lb", Sense::Ge, false)] {
        for n in 0..n_periods {
            let w = mapping.rep_of(n);
            for t in 0..len {
                let decay = c.retention.powi(t as i32 + 1);
                let mut coeffs = vec![(inter[n], decay), (intra[idx(w, t)], 1.0)];
                if with_cap {
                    coeffs.push((c.capacity(), -1.0));
                }
                model.add_row(step_tag(kind, c.name, n, t), sense, 0.0, coeffs)?;
            }
        }
    }
    Ok(SocVars::ImplicitHourly { intra, inter })
}

/// Rows shared by the min-max and relaxed formulations: intra-period balance
/// and bounds, inter-period chaining, and linking at designated periods.
fn designated_chain(
    model: &mut LpModel,
    c: &Ctx<'_>,
    inter_lower: f64,
) -> Result<(Vec<VarId>, Vec<VarId>, Vec<VarId>), LdsError> {
    let m = c.mapping;
    let (n_periods, reps, len) = (m.periods(), m.representatives(), m.period_len());
    let idx = |w: usize, t: usize| w * len + t;

    let intra = rep_step_vars(model, "soc_intra", c, 0.0)?;
    let inter = per_index_vars(
        model,
        "soc_inter",
        c.name,
        n_periods,
        inter_lower,
        f64::INFINITY,
    )?;
    let delta = per_index_vars(
        model,
        "dsoc",
        c.name,
        reps,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )?;

    for w in 0..reps {
        for t in 1..len {
            let mut coeffs = vec![
                (intra[idx(w, t)], 1.0),
                (intra[idx(w, t - 1)], -c.retention),
            ];
            coeffs.extend(c.neg_flow(w, t));
            model.add_row(step_tag("intra_bal", c.name, w, t), Sense::Eq, 0.0, coeffs)?;
        }
    }
    for w in 0..reps {
        for t in 0..len {
            model.add_row(
                step_tag("intra_cap", c.name, w, t),
                Sense::Le,
                0.0,
                [(intra[idx(w, t)], 1.0), (c.capacity(), -1.0)],
            )?;
        }
    }
    for n in 0..n_periods {
        let next = (n + 1) % n_periods;
        model.add_row(
            tag("inter_bal", c.name, n),
            Sense::Eq,
            0.0,
            [
                (inter[next], 1.0),
                (inter[n], -1.0),
                (delta[m.rep_of(n)], -1.0),
            ],
        )?;
    }
    for w in 0..reps {
        let d = m.designated(w);
        model.add_row(
            tag("dsoc_def", c.name, w),
            Sense::Eq,
            0.0,
            [
                (inter[d], 1.0),
                (intra[idx(w, len - 1)], -1.0),
                (delta[w], 1.0),
            ],
        )?;
        let mut coeffs = vec![(intra[idx(w, 0)], 1.0), (inter[d], -c.retention)];
        coeffs.extend(c.neg_flow(w, 0));
        model.add_row(tag("link", c.name, w), Sense::Eq, 0.0, coeffs)?;
    }
    Ok((intra, inter, delta))
}

/// Adds `WT + N + 3W` variables and `W(4T-1) + 3N` rows.
pub fn apply_implicit_minmax(
    model: &mut LpModel,
    flows: &StorageVars,
    mapping: &PeriodMapping,
    params: &Storage,
    dt_hours: f64,
) -> Result<SocVars, LdsError> {
    let c = context(params, flows, mapping, dt_hours)?;
    let (n_periods, reps, len) = (
        mapping.periods(),
        mapping.representatives(),
        mapping.period_len(),
    );
    let idx = |w: usize, t: usize| w * len + t;
    let (intra, inter, delta) = designated_chain(model, &c, f64::NEG_INFINITY)?;
    let delta_pos = per_index_vars(model, "dsoc_pos", c.name, reps, 0.0, f64::INFINITY)?;
    let delta_neg = per_index_vars(model, "dsoc_neg", c.name, reps, f64::NEG_INFINITY, 0.0)?;

    for w in 0..reps {
        for t in 1..len {
            let diff = [(intra[idx(w, t)], -1.0), (intra[idx(w, 0)], 1.0)];
            model.add_row(
                step_tag("dsoc_max", c.name, w, t),
                Sense::Ge,
                0.0,
                std::iter::once((delta_pos[w], 1.0)).chain(diff),
            )?;
            model.add_row(
                step_tag("dsoc_min", c.name, w, t),
                Sense::Le,
                0.0,
                std::iter::once((delta_neg[w], 1.0)).chain(diff),
            )?;
        }
    }
    for n in 0..n_periods {
        let w = mapping.rep_of(n);
        let start = || std::iter::once((inter[n], c.retention)).chain(c.pos_flow(w, 0));
        model.add_row(
            tag("soc_ub", c.name, n),
            Sense::Le,
            0.0,
            start().chain([(delta_pos[w], 1.0), (c.capacity(), -1.0)]),
        )?;
        model.add_row(
            tag("soc_lb", c.name, n),
            Sense::Ge,
            0.0,
            start().chain([(delta_neg[w], 1.0)]),
        )?;
    }
    Ok(SocVars::ImplicitMinMax {
        intra,
        inter,
        delta,
        delta_pos,
        delta_neg,
    })
}

/// Adds `WT + N + W` variables and `W(2T+1) + 2N` rows.
pub fn apply_original_relaxed(
    model: &mut LpModel,
    flows: &StorageVars,
    mapping: &PeriodMapping,
    params: &Storage,
    dt_hours: f64,
) -> Result<SocVars, LdsError> {
    let c = context(params, flows, mapping, dt_hours)?;
    let (intra, inter, delta) = designated_chain(model, &c, 0.0)?;
    for (n, &v) in inter.iter().enumerate() {
        model.add_row(
            tag("inter_cap", c.name, n),
            Sense::Le,
            0.0,
            [(v, 1.0), (c.capacity(), -1.0)],
        )?;
    }
    Ok(SocVars::OriginalRelaxed {
        intra,
        inter,
        delta,
    })
}

/// Applies `formulation` to every LDS unit of the system.
pub fn apply_formulation(
    formulation: Formulation,
    model: &mut LpModel,
    handles: &CemHandles,
    mapping: &PeriodMapping,
    config: &SystemConfig,
) -> Result<LdsHandles, LdsError> {
    let apply = match formulation {
        Formulation::ExplicitHourly => apply_explicit_hourly,
        Formulation::ImplicitHourly => apply_implicit_hourly,
        Formulation::ImplicitMinMax => apply_implicit_minmax,
        Formulation::OriginalRelaxed => apply_original_relaxed,
    };
    let dt = config.horizon.dt_hours;
    let mut storages = Vec::new();
    for flows in &handles.storages {
        let params = &config.storages[flows.index];
        if params.is_lds {
            let vars = apply(model, flows, mapping, params, dt)?;
            storages.push(StorageSoc {
                storage: flows.index,
                vars,
            });
        }
    }
    Ok(LdsHandles {
        formulation,
        storages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::identity_mapping;
    use crate::cem::build_base_model;
    use crate::config::TimeSeriesTable;
    use crate::lp::model_stats;
    use indexmap::IndexMap;

    fn system(short_too: bool) -> SystemConfig {
        let short = if short_too {
            r#"
[[storage]]
name = "bat"
zone = "Z1"
is_lds = false
capex_energy = 1.0
capex_power = 1.0
eta_cha = 0.9
eta_dis = 0.9
eta_sdc = 0.0
"#
        } else {
            ""
        };
        SystemConfig::from_toml_str(&format!(
            r#"
nse_penalty = 10.0
[horizon]
H = 24
T = 4
dt_hours = 1.0
[aggregation]
num_representatives = 2
seed = 1
[[zone]]
name = "Z1"
[[storage]]
name = "h2"
zone = "Z1"
is_lds = true
capex_energy = 0.1
capex_power = 1.0
eta_cha = 0.8
eta_dis = 0.8
eta_sdc = 0.0
{short}
"#
        ))
        .unwrap()
    }

    fn table(h: usize) -> TimeSeriesTable {
        let mut cols = IndexMap::new();
        cols.insert("demand.Z1".into(), (0..h).map(|i| (i % 5) as f64).collect());
        TimeSeriesTable::new(cols).unwrap()
    }

    fn mapping() -> PeriodMapping {
        // N = 6, W = 2, T = 4
        PeriodMapping::new(vec![0, 1, 0, 0, 1, 1], vec![2, 1], 4).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for f in Formulation::ALL {
            assert_eq!(f.name().parse::<Formulation>().unwrap(), f);
        }
        assert!("minmax".parse::<Formulation>().is_err());
    }

    #[test]
    fn added_rows_and_vars_follow_closed_forms() {
        let cfg = system(true);
        let ts = table(24);
        let m = mapping();
        let (base, handles) = build_base_model(&cfg, &ts, &m).unwrap();
        let before = model_stats(&base);
        let (n, w, t) = (6, 2, 4);
        let expected = [
            (Formulation::ExplicitHourly, 2 * n * t, n * t),
            (
                Formulation::ImplicitHourly,
                w * (t - 1) + n + 2 * n * t,
                w * t + n,
            ),
            (
                Formulation::ImplicitMinMax,
                w * (4 * t - 1) + 3 * n,
                w * t + n + 3 * w,
            ),
            (
                Formulation::OriginalRelaxed,
                w * (2 * t + 1) + 2 * n,
                w * t + n + w,
            ),
        ];
        for (f, rows, vars) in expected {
            let mut model = base.clone();
            let lds = apply_formulation(f, &mut model, &handles, &m, &cfg).unwrap();
            assert_eq!(lds.storages.len(), 1);
            let after = model_stats(&model);
            assert_eq!(after.num_rows - before.num_rows, rows, "{f}");
            assert_eq!(after.num_vars - before.num_vars, vars, "{f}");
        }
    }

    #[test]
    fn short_storage_is_rejected() {
        let cfg = system(true);
        let (mut model, handles) = build_base_model(&cfg, &table(24), &mapping()).unwrap();
        let err = apply_explicit_hourly(
            &mut model,
            &handles.storages[1],
            &mapping(),
            &cfg.storages[1],
            1.0,
        );
        assert_eq!(err, Err(LdsError::NotLds("bat".into())));
    }

    #[test]
    fn identity_mapping_counts() {
        let cfg = system(false);
        let m = identity_mapping(6, 4);
        let (base, handles) = build_base_model(&cfg, &table(24), &m).unwrap();
        let mut model = base.clone();
        apply_formulation(Formulation::ImplicitMinMax, &mut model, &handles, &m, &cfg).unwrap();
        assert_eq!(model.num_rows() - base.num_rows(), 6 * 15 + 18);
    }
}

//! System description and input time series.
//!
//! The system is described by a flat TOML document (one array-of-tables per
//! entity kind) and the hourly inputs by a CSV table with a `step` column.
//! Units are fixed: kW, kWh, hours and $.

use std::fmt;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("domain error at `{key}`: {reason}")]
    Domain { key: String, reason: String },
}

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("expected {expected} rows, found {found}")]
    Length { expected: usize, found: usize },
    #[error("value {value} in column `{column}` at step {step} is outside {range}")]
    Range {
        column: String,
        step: usize,
        value: f64,
        range: &'static str,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("bad step column: {0}")]
    Step(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Thermal,
    Vre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub name: String,
    pub zone: String,
    pub kind: GeneratorKind,
    /// $/kW-yr
    pub capex: f64,
    /// $/kWh
    pub varcost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability_series: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storage {
    pub name: String,
    pub zone: String,
    pub is_lds: bool,
    /// $/kWh-yr
    pub capex_energy: f64,
    /// $/kW-yr
    pub capex_power: f64,
    pub eta_cha: f64,
    pub eta_dis: f64,
    pub eta_sdc: f64,
}

impl Storage {
    /// Stored energy gained (positive) per kW of charge and lost per kW of
    /// discharge over one step: `(η_cha·Δt, Δt/η_dis)`.
    pub fn flow_factors(&self, dt_hours: f64) -> (f64, f64) {
        (self.eta_cha * dt_hours, dt_hours / self.eta_dis)
    }

    /// Fraction of stored energy retained over one step.
    pub fn retention(&self) -> f64 {
        1.0 - self.eta_sdc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: String,
    pub to: String,
    /// $/kW-yr
    pub capex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    /// Total number of time steps |H|.
    #[serde(rename = "H")]
    pub steps: usize,
    /// Steps per period |T|.
    #[serde(rename = "T")]
    pub period_len: usize,
    pub dt_hours: f64,
}

impl Horizon {
    /// Number of input periods |N|.
    pub fn periods(&self) -> usize {
        self.steps / self.period_len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationSettings {
    pub num_representatives: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Reference,
    External,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Reference => f.write_str("reference"),
            Backend::External => f.write_str("external"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default)]
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_template: Option<String>,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
}

fn default_time_limit() -> f64 {
    600.0
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            backend: Backend::Reference,
            command_template: None,
            time_limit_s: default_time_limit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub nse_penalty: f64,
    pub horizon: Horizon,
    pub aggregation: AggregationSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(rename = "zone")]
    pub zones: Vec<Zone>,
    #[serde(rename = "generator", default)]
    pub generators: Vec<Generator>,
    #[serde(rename = "storage", default)]
    pub storages: Vec<Storage>,
    #[serde(rename = "line", default)]
    pub lines: Vec<Line>,
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<SystemConfig, ConfigError> {
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().trim().to_string()))?;
        let config: SystemConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Schema(e.message().trim().to_string()))?;
        config.check_domain()?;
        Ok(config)
    }

    /// Debug dump in the same grammar `load_config` accepts.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn zone_names(&self) -> impl Iterator<Item = &str> {
        self.zones.iter().map(|z| z.name.as_str())
    }

    pub fn demand_column(zone: &str) -> String {
        format!("demand.{zone}")
    }

    fn check_domain(&self) -> Result<(), ConfigError> {
        let h = &self.horizon;
        if h.period_len == 0 {
            return Err(domain("horizon.T", "must be at least 1"));
        }
        if h.steps == 0 {
            return Err(domain("horizon.H", "must be at least 1"));
        }
        if !h.steps.is_multiple_of(h.period_len) {
            return Err(domain(
                "horizon.H",
                format!(
                    "H not divisible by T ({} mod {} != 0)",
                    h.steps, h.period_len
                ),
            ));
        }
        if !(h.dt_hours > 0.0 && h.dt_hours.is_finite()) {
            return Err(domain("horizon.dt_hours", "must be positive"));
        }
        if !(self.nse_penalty > 0.0 && self.nse_penalty.is_finite()) {
            return Err(domain("nse_penalty", "must be positive"));
        }
        let k = self.aggregation.num_representatives;
        if k == 0 || k > h.periods() {
            return Err(domain(
                "aggregation.num_representatives",
                format!("must lie in 1..={}", h.periods()),
            ));
        }
        if self.solver.time_limit_s.is_nan() || self.solver.time_limit_s <= 0.0 {
            return Err(domain("solver.time_limit_s", "must be positive"));
        }

        for (i, z) in self.zones.iter().enumerate() {
            check_name(&format!("zone[{i}].name"), &z.name)?;
        }
        for (i, g) in self.generators.iter().enumerate() {
            let key = |f: &str| format!("generator[{i}].{f}");
            check_name(&key("name"), &g.name)?;
            check_nonneg(&key("capex"), g.capex)?;
            check_nonneg(&key("varcost"), g.varcost)?;
            if g.kind == GeneratorKind::Vre && g.availability_series.is_none() {
                return Err(domain(
                    key("availability_series"),
                    "required for vre generators",
                ));
            }
        }
        for (i, s) in self.storages.iter().enumerate() {
            let key = |f: &str| format!("storage[{i}].{f}");
            check_name(&key("name"), &s.name)?;
            check_nonneg(&key("capex_energy"), s.capex_energy)?;
            check_nonneg(&key("capex_power"), s.capex_power)?;
            if !(s.eta_cha > 0.0 && s.eta_cha <= 1.0) {
                return Err(domain(
                    key("eta_cha"),
                    "charge efficiency must lie in (0, 1]",
                ));
            }
            if !(s.eta_dis > 0.0 && s.eta_dis <= 1.0) {
                return Err(domain(
                    key("eta_dis"),
                    "discharge efficiency must lie in (0, 1]",
                ));
            }
            if !(s.eta_sdc >= 0.0 && s.eta_sdc < 1.0) {
                return Err(domain(key("eta_sdc"), "self-discharge must lie in [0, 1)"));
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            check_nonneg(&format!("line[{i}].capex"), l.capex)?;
        }
        Ok(())
    }
}

fn domain(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Domain {
        key: key.into(),
        reason: reason.into(),
    }
}

fn check_nonneg(key: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(
            key,
            format!("must be finite and non-negative, got {v}"),
        ))
    }
}

// Names end up in LP variable names and MPS files.
fn check_name(key: &str, name: &str) -> Result<(), ConfigError> {
    if name.is_empty()
        || name
            .chars()
            .any(|c| c.is_whitespace() || c == ',' || c == '[' || c == ']')
    {
        Err(domain(key, format!("invalid name {name:?}")))
    } else {
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SystemConfig::from_toml_str(&text)
}

pub fn save_config(config: &SystemConfig, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, config.to_toml_string())
}

/// Named columns of length H, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    columns: IndexMap<String, Vec<f64>>,
    len: usize,
}

impl TimeSeriesTable {
    /// Builds a table from in-memory columns; all columns must share one length.
    pub fn new(columns: IndexMap<String, Vec<f64>>) -> Result<TimeSeriesTable, TimeSeriesError> {
        let len = columns.values().next().map_or(0, Vec::len);
        if let Some((_, bad)) = columns.iter().find(|(_, c)| c.len() != len) {
            return Err(TimeSeriesError::Length {
                expected: len,
                found: bad.len(),
            });
        }
        for (name, col) in &columns {
            if let Some((i, &v)) = col
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
            {
                return Err(TimeSeriesError::Range {
                    column: name.clone(),
                    step: i + 1,
                    value: v,
                    range: "[0, inf)",
                });
            }
        }
        Ok(TimeSeriesTable { columns, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }
}

pub fn load_timeseries(
    path: impl AsRef<Path>,
    config: &SystemConfig,
) -> Result<TimeSeriesTable, TimeSeriesError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TimeSeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_timeseries(&text, config)
}

pub fn parse_timeseries(
    text: &str,
    config: &SystemConfig,
) -> Result<TimeSeriesTable, TimeSeriesError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| TimeSeriesError::Csv(e.to_string()))?
        .clone();
    if headers.get(0) != Some("step") {
        return Err(TimeSeriesError::Step("first column must be `step`".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut last_step = 0u64;
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TimeSeriesError::Csv(e.to_string()))?;
        let step: u64 = record[0].parse().map_err(|_| {
            TimeSeriesError::Step(format!(
                "row {}: `{}` is not a step index",
                row_no + 1,
                &record[0]
            ))
        })?;
        if step == 0 || step <= last_step {
            return Err(TimeSeriesError::Step(format!(
                "row {}: steps must be 1-based and strictly increasing",
                row_no + 1
            )));
        }
        last_step = step;
        for (j, col) in data.iter_mut().enumerate() {
            let cell = &record[j + 1];
            let v: f64 = cell.parse().map_err(|_| {
                TimeSeriesError::Csv(format!(
                    "row {}: `{cell}` in `{}` is not a number",
                    row_no + 1,
                    names[j]
                ))
            })?;
            col.push(v);
        }
    }

    let expected = config.horizon.steps;
    let found = data.first().map_or(0, Vec::len);
    if found != expected {
        return Err(TimeSeriesError::Length { expected, found });
    }

    let columns: IndexMap<String, Vec<f64>> = names.into_iter().zip(data).collect();
    let table = TimeSeriesTable::new(columns)?;

    for g in &config.generators {
        let Some(series) = &g.availability_series else {
            continue;
        };
        let col = table
            .column(series)
            .ok_or_else(|| TimeSeriesError::MissingColumn(series.clone()))?;
        if let Some((i, &v)) = col.iter().enumerate().find(|(_, v)| **v > 1.0) {
            return Err(TimeSeriesError::Range {
                column: series.clone(),
                step: i + 1,
                value: v,
                range: "[0, 1]",
            });
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Cross-checks references between the config and the table. Never fails;
/// every problem found is reported as an issue.
pub fn validate_inputs(config: &SystemConfig, ts: &TimeSeriesTable) -> ValidationReport {
    let mut issues = Vec::new();
    let zones: Vec<&str> = config.zone_names().collect();

    let mut seen = std::collections::HashSet::new();
    for z in &zones {
        if !seen.insert(*z) {
            issues.push(format!("duplicate zone `{z}`"));
        }
    }
    let mut unit_names = std::collections::HashSet::new();
    let mut check_unit = |kind: &str, name: &str, zone: &str, issues: &mut Vec<String>| {
        if !unit_names.insert(name.to_string()) {
            issues.push(format!("duplicate name `{name}`"));
        }
        if !zones.contains(&zone) {
            issues.push(format!(
                "unknown zone `{zone}` referenced by {kind} `{name}`"
            ));
        }
    };
    for g in &config.generators {
        check_unit("generator", &g.name, &g.zone, &mut issues);
        if let Some(series) = &g.availability_series {
            match ts.column(series) {
                None => issues.push(format!(
                    "missing availability series `{series}` for `{}`",
                    g.name
                )),
                Some(col) if col.iter().any(|v| *v > 1.0) => {
                    issues.push(format!("availability series `{series}` exceeds 1"))
                }
                _ => {}
            }
        }
    }
    for s in &config.storages {
        check_unit("storage", &s.name, &s.zone, &mut issues);
    }
    for (i, l) in config.lines.iter().enumerate() {
        for end in [&l.from, &l.to] {
            if !zones.contains(&end.as_str()) {
                issues.push(format!("unknown zone `{end}` referenced by line {}", i + 1));
            }
        }
        if l.from == l.to {
            issues.push(format!(
                "line {} connects zone `{}` to itself",
                i + 1,
                l.from
            ));
        }
    }
    for z in &zones {
        if ts.column(&SystemConfig::demand_column(z)).is_none() {
            issues.push(format!("missing demand series for zone `{z}`"));
        }
    }
    if ts.len() != config.horizon.steps {
        issues.push(format!(
            "timeseries has {} steps but horizon.H = {}",
            ts.len(),
            config.horizon.steps
        ));
    }
    ValidationReport { issues }
}

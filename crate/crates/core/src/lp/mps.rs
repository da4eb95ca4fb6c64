//! Free-format MPS export and import.
//!
//! The writer emits `NAME`, `ROWS`, `COLUMNS`, `RHS`, `BOUNDS` and `ENDATA`
//! sections with the objective row `OBJ`. Bounds are written only where a
//! variable differs from the default `[0, +inf)`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::model::{LpModel, ModelError, Sense, VarId};

pub const OBJECTIVE_ROW: &str = "OBJ";

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("name `{0}` cannot be written to free-format MPS")]
    InvalidName(String),
}

fn check_name(name: &str) -> Result<(), MpsError> {
    if name.is_empty() || name.chars().any(char::is_whitespace) || name.starts_with('$') {
        Err(MpsError::InvalidName(name.to_string()))
    } else {
        Ok(())
    }
}

pub fn mps_string(model: &LpModel) -> Result<String, MpsError> {
    let mut out = String::new();
    let name = if model.name.is_empty() {
        "LP"
    } else {
        model.name.as_str()
    };
    check_name(name)?;
    let _ = writeln!(out, "NAME {name}");

    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {OBJECTIVE_ROW}");
    for row in model.rows() {
        check_name(&row.name)?;
        if row.name == OBJECTIVE_ROW {
            return Err(MpsError::InvalidName(row.name.clone()));
        }
        let code = match row.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {code} {}", row.name);
    }

    // Column-wise view of the row-wise model.
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.num_vars()];
    for row in model.rows() {
        for &(v, a) in &row.coeffs {
            columns[v.0].push((row.name.as_str(), a));
        }
    }
    out.push_str("COLUMNS\n");
    for (var, entries) in model.variables().iter().zip(&columns) {
        check_name(&var.name)?;
        let mut pairs: Vec<(&str, f64)> = Vec::with_capacity(entries.len() + 1);
        if var.obj != 0.0 || entries.is_empty() {
            pairs.push((OBJECTIVE_ROW, var.obj));
        }
        pairs.extend(entries.iter().copied());
        for chunk in pairs.chunks(2) {
            let _ = write!(out, " {}", var.name);
            for (row, a) in chunk {
                let _ = write!(out, " {row} {a}");
            }
            out.push('\n');
        }
    }

    out.push_str("RHS\n");
    for row in model.rows().iter().filter(|r| r.rhs != 0.0) {
        let _ = writeln!(out, " RHS {} {}", row.name, row.rhs);
    }

    out.push_str("BOUNDS\n");
    for var in model.variables() {
        let (lo, up) = (var.lower, var.upper);
        let n = &var.name;
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            let _ = writeln!(out, " FR BND {n}");
        } else if lo == up {
            let _ = writeln!(out, " FX BND {n} {lo}");
        } else {
            if lo == f64::NEG_INFINITY {
                let _ = writeln!(out, " MI BND {n}");
            } else if lo != 0.0 {
                let _ = writeln!(out, " LO BND {n} {lo}");
            }
            if up != f64::INFINITY {
                let _ = writeln!(out, " UP BND {n} {up}");
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

pub fn write_mps(model: &LpModel, path: impl AsRef<Path>) -> Result<(), MpsError> {
    fs::write(path, mps_string(model)?)?;
    Ok(())
}

pub fn parse_mps(path: impl AsRef<Path>) -> Result<LpModel, MpsError> {
    parse_mps_str(&fs::read_to_string(path)?)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

pub fn parse_mps_str(text: &str) -> Result<LpModel, MpsError> {
    let mut name = String::new();
    let mut section = Section::None;
    let mut objective: Option<String> = None;
    // rows in file order: (name, sense, rhs, coeffs)
    let mut rows: Vec<(String, Sense, f64, Vec<(VarId, f64)>)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut vars: Vec<(String, f64, f64, f64)> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| MpsError::Parse { line, msg };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let is_header = !raw.starts_with(char::is_whitespace);
        if is_header {
            section = match fields[0] {
                "NAME" => {
                    name = fields.get(1).map(|s| s.to_string()).unwrap_or_default();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                other => return Err(err(format!("unsupported section `{other}`"))),
            };
            continue;
        }
        let num = |s: &str| -> Result<f64, MpsError> {
            s.parse::<f64>().map_err(|_| MpsError::Parse {
                line,
                msg: format!("`{s}` is not a number"),
            })
        };
        match section {
            Section::Rows => {
                let [code, row] = fields[..] else {
                    return Err(err("expected `<type> <row>`".into()));
                };
                let sense = match code {
                    "N" => {
                        if objective.is_some() {
                            return Err(err("more than one objective row".into()));
                        }
                        objective = Some(row.to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(format!("unknown row type `{other}`"))),
                };
                if row_index.insert(row.to_string(), rows.len()).is_some() {
                    return Err(err(format!("duplicate row `{row}`")));
                }
                rows.push((row.to_string(), sense, 0.0, Vec::new()));
            }
            Section::Columns => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(
                        "expected `<column> <row> <value> [<row> <value>]`".into()
                    ));
                }
                let col = fields[0];
                let id = *var_index.entry(col.to_string()).or_insert_with(|| {
                    vars.push((col.to_string(), 0.0, f64::INFINITY, 0.0));
                    vars.len() - 1
                });
                for pair in fields[1..].chunks(2) {
                    let value = num(pair[1])?;
                    if Some(pair[0]) == objective.as_deref() {
                        vars[id].3 = value;
                    } else {
                        let r = *row_index
                            .get(pair[0])
                            .ok_or_else(|| err(format!("unknown row `{}`", pair[0])))?;
                        rows[r].3.push((VarId(id), value));
                    }
                }
            }
            Section::Rhs => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err("expected `<set> <row> <value> [<row> <value>]`".into()));
                }
                for pair in fields[1..].chunks(2) {
                    let value = num(pair[1])?;
                    if Some(pair[0]) == objective.as_deref() {
                        continue;
                    }
                    let r = *row_index
                        .get(pair[0])
                        .ok_or_else(|| err(format!("unknown row `{}`", pair[0])))?;
                    rows[r].2 = value;
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(err("expected `<type> <set> <column> [<value>]`".into()));
                }
                let id = *var_index
                    .get(fields[2])
                    .ok_or_else(|| err(format!("unknown column `{}`", fields[2])))?;
                let value = || -> Result<f64, MpsError> {
                    fields
                        .get(3)
                        .ok_or_else(|| MpsError::Parse {
                            line,
                            msg: "missing bound value".into(),
                        })
                        .and_then(|s| num(s))
                };
                let v = &mut vars[id];
                match fields[0] {
                    "FR" => {
                        v.1 = f64::NEG_INFINITY;
                        v.2 = f64::INFINITY;
                    }
                    "MI" => v.1 = f64::NEG_INFINITY,
                    "PL" => v.2 = f64::INFINITY,
                    "LO" => v.1 = value()?,
                    "UP" => v.2 = value()?,
                    "FX" => {
                        let x = value()?;
                        v.1 = x;
                        v.2 = x;
                    }
                    other => return Err(err(format!("unsupported bound type `{other}`"))),
                }
            }
            Section::None => return Err(err("data line outside of a section".into())),
            Section::Done => return Err(err("data after ENDATA".into())),
        }
    }
    if section != Section::Done {
        return Err(MpsError::Parse {
            line: text.lines().count(),
            msg: "missing ENDATA".into(),
        });
    }

    let to_parse = |e: ModelError| MpsError::Parse {
        line: 0,
        msg: e.to_string(),
    };
    let mut model = LpModel::new(name);
    for (name, lo, up, obj) in vars {
        model.add_variable(name, lo, up, obj).map_err(to_parse)?;
    }
    for (name, sense, rhs, coeffs) in rows {
        model.add_row(name, sense, rhs, coeffs).map_err(to_parse)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> LpModel {
        let mut m = LpModel::new("tiny");
        let x = m.add_variable("x", 0.0, f64::INFINITY, 1.0).unwrap();
        m.add_row("c1", Sense::Ge, 1.0, [(x, 1.0)]).unwrap();
        m
    }

    #[test]
    fn writes_expected_sections() {
        let text = mps_string(&tiny()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines.contains(&"ROWS"));
        assert!(lines.contains(&" N OBJ"));
        assert!(lines.contains(&" G c1"));
        assert!(lines
            .iter()
            .any(|l| l.split_whitespace().collect::<Vec<_>>() == ["x", "OBJ", "1", "c1", "1"]));
        assert!(!text.contains("BND"));
        assert!(text.ends_with("ENDATA\n"));
    }

    #[test]
    fn free_variable_gets_fr_bound() {
        let mut m = LpModel::new("free");
        m.add_variable("y", f64::NEG_INFINITY, f64::INFINITY, 0.0)
            .unwrap();
        let text = mps_string(&m).unwrap();
        assert!(text.contains(" FR BND y"));
        assert_eq!(parse_mps_str(&text).unwrap(), m);
    }

    #[test]
    fn tolerant_of_whitespace() {
        let text = "NAME   t\nROWS\n  N   OBJ\n   L  r\nCOLUMNS\n\tx  OBJ  -1   r 1\nRHS\n RHS   r   3\nBOUNDS\nENDATA\n";
        let m = parse_mps_str(text).unwrap();
        assert_eq!(m.variables()[0].obj, -1.0);
        assert_eq!(m.rows()[0].rhs, 3.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "NAME t\nROWS\n N OBJ\n Q r\nENDATA\n";
        match parse_mps_str(text) {
            Err(MpsError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "NAME t\nROWS\n N OBJ\nCOLUMNS\n x OBJ abc\nENDATA\n";
        assert!(matches!(
            parse_mps_str(text),
            Err(MpsError::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn rejects_names_with_spaces() {
        let mut m = LpModel::new("t");
        m.add_variable("bad name", 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(mps_string(&m), Err(MpsError::InvalidName(_))));
    }

    fn bound() -> impl Strategy<Value = (f64, f64)> {
        prop_oneof![
            Just((0.0, f64::INFINITY)),
            Just((f64::NEG_INFINITY, f64::INFINITY)),
            (-50.0f64..50.0).prop_map(|u| (f64::NEG_INFINITY, u)),
            (-50.0f64..50.0, 0.0f64..30.0).prop_map(|(l, w)| (l, l + w)),
            (-50.0f64..50.0).prop_map(|l| (l, f64::INFINITY)),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            vars in prop::collection::vec((bound(), -10.0f64..10.0), 1..8),
            rows in prop::collection::vec(
                (0usize..3, -100.0f64..100.0, prop::collection::vec((0usize..8, -5.0f64..5.0), 0..6)),
                0..8,
            ),
        ) {
            let mut m = LpModel::new("prop");
            for (i, ((lo, up), obj)) in vars.iter().enumerate() {
                m.add_variable(format!("x{i}"), *lo, *up, *obj).unwrap();
            }
            for (i, (s, rhs, coeffs)) in rows.iter().enumerate() {
                let sense = [Sense::Le, Sense::Ge, Sense::Eq][*s];
                let coeffs = coeffs.iter().map(|(v, a)| (VarId(v % vars.len()), *a));
                m.add_row(format!("r{i}"), sense, *rhs, coeffs).unwrap();
            }
            let parsed = parse_mps_str(&mps_string(&m).unwrap()).unwrap();
            prop_assert_eq!(parsed, m);
        }
    }
}

//! Subprocess adapter for external LP solvers.
//!
//! The model is written as free-format MPS, `{mps}` and `{sol}` in the
//! command template are replaced by the file paths, and the command runs
//! through `sh -c`. The command must leave a solution file of the form
//!
//! ```text
//! status optimal
//! objective -36
//! x 2
//! y 6
//! ```
//!
//! Converting a concrete solver's output to this grammar is left to a small
//! shim script (see `scripts/` in the repository).

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::model::{LpModel, Solution, SolveStatus};
use super::mps::{write_mps, MpsError};

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("command template must contain `{{mps}}` and `{{sol}}`: {0}")]
    Template(String),
    #[error("cannot write model: {0}")]
    Mps(#[from] MpsError),
    #[error("failed to spawn solver: {0}")]
    Spawn(std::io::Error),
    #[error("solver exited with {code:?}: {stderr}")]
    ExitCode { code: Option<i32>, stderr: String },
    #[error("solution file: {0}")]
    SolutionParse(String),
    #[error("solver exceeded the time limit of {0:?}")]
    Timeout(Duration),
}

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub command_template: String,
    pub workdir: PathBuf,
    pub time_limit: Duration,
}

impl ExternalSolver {
    pub fn solve(&self, model: &LpModel) -> Result<Solution, ExternalError> {
        solve_external(
            model,
            &self.command_template,
            &self.workdir,
            self.time_limit,
        )
    }
}

pub fn solve_external(
    model: &LpModel,
    command_template: &str,
    workdir: &Path,
    time_limit: Duration,
) -> Result<Solution, ExternalError> {
    if !command_template.contains("{mps}") || !command_template.contains("{sol}") {
        return Err(ExternalError::Template(command_template.to_string()));
    }
    let start = Instant::now();
    fs::create_dir_all(workdir).map_err(|e| ExternalError::Mps(MpsError::Io(e)))?;
    let stem = if model.name.is_empty() {
        "model"
    } else {
        model.name.as_str()
    };
    let mps_path = workdir.join(format!("{stem}.mps"));
    let sol_path = workdir.join(format!("{stem}.sol"));
    let _ = fs::remove_file(&sol_path);
    write_mps(model, &mps_path)?;

    let command = command_template
        .replace("{mps}", &shell_quote(&mps_path))
        .replace("{sol}", &shell_quote(&sol_path));
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(ExternalError::Spawn)?;

    let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
    let reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr_pipe.read_to_string(&mut buf);
        buf
    });

    let status = loop {
        match child.try_wait().map_err(ExternalError::Spawn)? {
            Some(status) => break status,
            None if start.elapsed() > time_limit => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(ExternalError::Timeout(time_limit));
            }
            None => thread::sleep(Duration::from_millis(5)),
        }
    };
    let stderr = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(ExternalError::ExitCode {
            code: status.code(),
            stderr: stderr.trim().to_string(),
        });
    }
    let text = fs::read_to_string(&sol_path).map_err(|e| {
        ExternalError::SolutionParse(format!("cannot read {}: {e}", sol_path.display()))
    })?;
    let mut solution = parse_solution(&text, model)?;
    solution.wall_time = start.elapsed();
    Ok(solution)
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

/// Parses the `status` / `objective` / `name value` solution grammar.
pub fn parse_solution(text: &str, model: &LpModel) -> Result<Solution, ExternalError> {
    let bad = |m: String| ExternalError::SolutionParse(m);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());

    let status = match lines
        .next()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
    {
        Some(f) if f.len() == 2 && f[0] == "status" => f[1]
            .parse::<SolveStatus>()
            .ok()
            .filter(|s| *s != SolveStatus::Error)
            .ok_or_else(|| bad(format!("unknown status `{}`", f[1])))?,
        _ => return Err(bad("first line must be `status <word>`".into())),
    };
    let objective = match lines
        .next()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
    {
        Some(f) if f.len() == 2 && f[0] == "objective" => Some(
            f[1].parse::<f64>()
                .map_err(|_| bad(format!("bad objective `{}`", f[1])))?,
        ),
        None if status != SolveStatus::Optimal => None,
        _ => return Err(bad("second line must be `objective <value>`".into())),
    };

    let mut values: HashMap<usize, f64> = HashMap::new();
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let [name, value] = f[..] else {
            return Err(bad(format!("expected `<name> <value>`, got `{line}`")));
        };
        let var = model
            .var_by_name(name)
            .ok_or_else(|| bad(format!("unknown variable `{name}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| bad(format!("bad value for `{name}`")))?;
        values.insert(var.0, value);
    }

    let values = if values.is_empty() && status != SolveStatus::Optimal {
        None
    } else {
        let mut x = vec![0.0; model.num_vars()];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = *values
                .get(&i)
                .ok_or_else(|| bad(format!("missing value for `{}`", model.variables()[i].name)))?;
        }
        Some(x)
    };
    Ok(Solution {
        status,
        objective,
        values,
        wall_time: Duration::ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::model::Sense;

    fn two_vars() -> LpModel {
        let mut m = LpModel::new("m");
        let x = m.add_variable("x", 0.0, 4.0, -3.0).unwrap();
        let y = m.add_variable("y", 0.0, f64::INFINITY, -5.0).unwrap();
        m.add_row("c", Sense::Le, 18.0, [(x, 3.0), (y, 2.0)])
            .unwrap();
        m
    }

    #[test]
    fn parses_canned_solution() {
        let s = parse_solution("status optimal\nobjective -36\nx 2\ny 6\n", &two_vars()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(-36.0));
        assert_eq!(s.values, Some(vec![2.0, 6.0]));
    }

    #[test]
    fn rejects_missing_status() {
        assert!(matches!(
            parse_solution("objective 1\nx 2\ny 6\n", &two_vars()),
            Err(ExternalError::SolutionParse(_))
        ));
        assert!(matches!(
            parse_solution("status optimal\nobjective 1\nx 2\n", &two_vars()),
            Err(ExternalError::SolutionParse(m)) if m.contains("`y`")
        ));
        assert!(matches!(
            parse_solution("status optimal\nobjective 1\nx 2\ny 1\nz 1\n", &two_vars()),
            Err(ExternalError::SolutionParse(m)) if m.contains("`z`")
        ));
    }

    #[test]
    fn infeasible_needs_no_values() {
        let s = parse_solution("status infeasible\n", &two_vars()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.values.is_none());
    }

    #[test]
    fn template_needs_both_placeholders() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            solve_external(&two_vars(), "cat {mps}", dir.path(), Duration::from_secs(5)),
            Err(ExternalError::Template(_))
        ));
    }
}

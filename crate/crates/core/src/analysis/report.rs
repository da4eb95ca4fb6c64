use std::fs;
use std::path::Path;

use super::compare::ComparisonReport;
use super::soc::SocTrajectory;

pub const REPORT_HEADER: &str =
    "formulation,status,objective,rows,vars,nonzeros,build_s,solve_s,violations,lds_energy_capacity";

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-5, 1e9)`.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!(
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        );
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Report CSV text. With `timings == false` the time columns are written as 0
/// so that repeated runs are byte-identical.
pub fn report_csv_string(report: &ComparisonReport, timings: bool) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for e in &report.entries {
        let secs = |d: std::time::Duration| {
            if timings {
                format_float(d.as_secs_f64())
            } else {
                "0".into()
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            e.formulation,
            e.status,
            opt(e.objective),
            e.rows,
            e.vars,
            e.nonzeros,
            secs(e.build_time),
            secs(e.solve_time),
            e.violations.map(|v| v.to_string()).unwrap_or_default(),
            opt(e.lds_energy_capacity),
        ));
    }
    out
}

pub fn write_report_csv(
    report: &ComparisonReport,
    path: impl AsRef<Path>,
    timings: bool,
) -> std::io::Result<()> {
    fs::write(path, report_csv_string(report, timings))
}

/// `step,soc` with 1-based steps; step `H + 1` is the wrap value.
pub fn trajectory_csv_string(trajectory: &SocTrajectory) -> String {
    let mut out = String::from("step,soc\n");
    for (h, v) in trajectory.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", h + 1, format_float(*v)));
    }
    out
}

pub fn write_trajectory_csv(
    trajectory: &SocTrajectory,
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    fs::write(path, trajectory_csv_string(trajectory))
}

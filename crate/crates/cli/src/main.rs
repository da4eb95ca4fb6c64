//! `ldslab` command-line interface.
//!
//! Exit codes: 0 success, 1 data or validation error, 2 solver failure,
//! 3 internal invariant breach.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ldslab::aggregation::{aggregate, identity_mapping, write_mapping_csv, PeriodMapping};
use ldslab::analysis::{
    compare_formulations, format_float, write_report_csv, write_trajectory_csv, ComparisonReport,
    FormulationRun, PipelineError,
};
use ldslab::cem::build_base_model;
use ldslab::config::{
    load_config, load_timeseries, validate_inputs, Backend, SystemConfig, TimeSeriesTable,
};
use ldslab::lds::{apply_formulation, Formulation};
use ldslab::lp::{write_mps, ExternalSolver, SimplexOptions, SolveStatus, Solver};

const SOLVER_ENV: &str = "LDSLAB_SOLVER_CMD";
/// Scaled row violation above which a returned point is treated as corrupt.
const POINT_CHECK_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "ldslab",
    version,
    about = "Capacity expansion with long-duration storage formulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the input periods and write the period mapping.
    Aggregate(Inputs),
    /// Solve the selected formulations and write results.
    Solve(RunArgs),
    /// Solve and tabulate several formulations on one base model.
    Compare(RunArgs),
    /// Reconstruct the hourly SOC and report bound violations.
    ValidateSoc(RunArgs),
    /// Write the LP of each selected formulation as MPS.
    ExportMps(ExportArgs),
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "ts", visible_alias = "timeseries")]
    ts: PathBuf,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    /// Override the number of representative periods.
    #[arg(long)]
    k: Option<usize>,
    /// Override the clustering seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use every input period as its own representative.
    #[arg(long)]
    identity: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Reference,
    External,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// A formulation name, a comma-separated list, or `all`.
    #[arg(long, default_value = "all")]
    formulation: String,
    #[arg(long = "solver", value_enum)]
    solver: Option<BackendArg>,
    /// External solver command with `{mps}` and `{sol}` placeholders.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Write zero timing columns so reports are byte-identical across runs.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "all")]
    formulation: String,
}

/// An error tagged with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

fn internal(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 3,
        error: error.into(),
    }
}

fn pipeline(error: PipelineError) -> Failure {
    match error {
        PipelineError::Cem(ldslab::cem::CemError::MissingSeries(_)) => data(error),
        other => internal(other),
    }
}

fn parse_formulations(arg: &str) -> Result<Vec<Formulation>, Failure> {
    if arg == "all" {
        return Ok(Formulation::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse::<Formulation>()
                .map_err(|e| data(anyhow!(e)))
        })
        .collect()
}

struct Loaded {
    config: SystemConfig,
    ts: TimeSeriesTable,
    mapping: PeriodMapping,
    seed: u64,
}

fn load(inputs: &Inputs) -> Result<Loaded, Failure> {
    let mut config = load_config(&inputs.config).map_err(data)?;
    if let Some(k) = inputs.k {
        config.aggregation.num_representatives = k;
    }
    if let Some(seed) = inputs.seed {
        config.aggregation.seed = seed;
    }
    let ts = load_timeseries(&inputs.ts, &config).map_err(data)?;
    let report = validate_inputs(&config, &ts);
    if !report.ok() {
        return Err(data(anyhow!(
            "invalid inputs:\n  {}",
            report.issues.join("\n  ")
        )));
    }
    let (n, t) = (config.horizon.periods(), config.horizon.period_len);
    let mapping = if inputs.identity {
        identity_mapping(n, t)
    } else {
        aggregate(
            &ts,
            n,
            t,
            config.aggregation.num_representatives,
            config.aggregation.seed,
        )
        .map_err(data)?
    };
    fs::create_dir_all(&inputs.out)
        .with_context(|| format!("cannot create {}", inputs.out.display()))
        .map_err(data)?;
    write_mapping_csv(&mapping, &inputs.out)
        .context("writing the mapping")
        .map_err(data)?;
    Ok(Loaded {
        seed: config.aggregation.seed,
        config,
        ts,
        mapping,
    })
}

fn solver(args: &RunArgs, config: &SystemConfig) -> Result<Solver, Failure> {
    let backend = match args.solver {
        Some(BackendArg::Reference) => Backend::Reference,
        Some(BackendArg::External) => Backend::External,
        None => config.solver.backend,
    };
    Ok(match backend {
        Backend::Reference => Solver::Reference(SimplexOptions::default()),
        Backend::External => {
            let command_template = args
                .solver_cmd
                .clone()
                .or_else(|| std::env::var(SOLVER_ENV).ok())
                .or_else(|| config.solver.command_template.clone())
                .ok_or_else(|| data(anyhow!("external backend needs --solver-cmd, {SOLVER_ENV} or solver.command_template")))?;
            Solver::External(ExternalSolver {
                command_template,
                workdir: args.inputs.out.join("solver"),
                time_limit: Duration::from_secs_f64(config.solver.time_limit_s),
            })
        }
    })
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    config: String,
    timeseries: String,
    output: String,
    seed: u64,
    representatives: usize,
    identity: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    backend: Option<String>,
    formulations: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    runs: Vec<RunRecord>,
}

#[derive(Serialize)]
struct RunRecord {
    formulation: String,
    status: String,
    build_s: f64,
    solve_s: f64,
}

impl Manifest {
    fn new(subcommand: &'static str, inputs: &Inputs, loaded: &Loaded) -> Manifest {
        Manifest {
            tool: "ldslab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config: inputs.config.display().to_string(),
            timeseries: inputs.ts.display().to_string(),
            output: inputs.out.display().to_string(),
            seed: loaded.seed,
            representatives: loaded.mapping.representatives(),
            identity: inputs.identity,
            backend: None,
            formulations: Vec::new(),
            runs: Vec::new(),
        }
    }

    fn write(&self, dir: &Path) -> Result<(), Failure> {
        let text = toml::to_string(self).map_err(internal)?;
        fs::write(dir.join("manifest.toml"), text)
            .context("writing the manifest")
            .map_err(data)
    }
}

fn cmd_aggregate(inputs: &Inputs) -> Result<(), Failure> {
    let loaded = load(inputs)?;
    Manifest::new("aggregate", inputs, &loaded).write(&inputs.out)
}

fn solution_csv(run: &FormulationRun) -> Option<String> {
    let solution = run.optimal()?;
    let mut out = String::from("name,value\n");
    for (var, value) in run
        .model
        .variables()
        .iter()
        .zip(solution.values.as_deref()?)
    {
        let _ = writeln!(out, "{},{}", csv_field(&var.name), format_float(*value));
    }
    Some(out)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn violations_csv(runs: &[FormulationRun]) -> String {
    let mut out = String::from("formulation,storage,step,soc,capacity\n");
    for run in runs {
        for (traj, report) in run.trajectories.iter().zip(&run.violations) {
            let mut steps: Vec<usize> = report.over.iter().chain(&report.under).copied().collect();
            steps.sort_unstable();
            for h in steps {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    run.formulation,
                    traj.storage,
                    h + 1,
                    format_float(traj.values[h]),
                    format_float(traj.capacity)
                );
            }
        }
    }
    out
}

fn cmd_run(kind: &'static str, args: &RunArgs) -> Result<(), Failure> {
    let formulations = parse_formulations(&args.formulation)?;
    let loaded = load(&args.inputs)?;
    let solver = solver(args, &loaded.config)?;
    let out = &args.inputs.out;

    let (report, runs): (ComparisonReport, Vec<FormulationRun>) = compare_formulations(
        &loaded.config,
        &loaded.ts,
        &loaded.mapping,
        &formulations,
        &solver,
    )
    .map_err(pipeline)?;

    write_report_csv(&report, out.join("report.csv"), !args.no_timings)
        .context("writing report.csv")
        .map_err(data)?;
    for run in &runs {
        for traj in &run.trajectories {
            let path = out.join(format!("soc_{}_{}.csv", run.formulation, traj.storage));
            write_trajectory_csv(traj, &path)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(data)?;
        }
        if kind == "solve" {
            if let Some(text) = solution_csv(run) {
                let path = out.join(format!("solution_{}.csv", run.formulation));
                fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(data)?;
            }
        }
    }
    if kind == "validate-soc" {
        fs::write(out.join("violations.csv"), violations_csv(&runs))
            .context("writing violations.csv")
            .map_err(data)?;
    }

    let mut manifest = Manifest::new(kind, &args.inputs, &loaded);
    manifest.backend = Some(match solver {
        Solver::Reference(_) => "reference".into(),
        Solver::External(_) => "external".into(),
    });
    manifest.formulations = formulations.iter().map(|f| f.to_string()).collect();
    manifest.runs = report
        .entries
        .iter()
        .map(|e| RunRecord {
            formulation: e.formulation.to_string(),
            status: e.status.to_string(),
            build_s: e.build_time.as_secs_f64(),
            solve_s: e.solve_time.as_secs_f64(),
        })
        .collect();
    manifest.write(out)?;

    for run in &runs {
        if let Some(solution) = run.optimal() {
            let x = solution.values.as_deref().unwrap_or_default();
            let worst = run
                .model
                .max_scaled_row_violation(x)
                .max(run.model.max_bound_violation(x));
            if worst > POINT_CHECK_TOL {
                return Err(internal(anyhow!(
                    "{}: solver point violates the model by {worst:e}",
                    run.formulation
                )));
            }
        }
    }
    let failed: Vec<String> = report
        .entries
        .iter()
        .filter(|e| e.status != SolveStatus::Optimal)
        .map(|e| match &e.error {
            Some(msg) => format!("{}: {msg}", e.formulation),
            None => format!("{}: {}", e.formulation, e.status),
        })
        .collect();
    if !failed.is_empty() {
        return Err(Failure {
            code: 2,
            error: anyhow!("solver failure\n  {}", failed.join("\n  ")),
        });
    }

    for e in &report.entries {
        eprintln!(
            "{:<16} {:>10}  objective {}  violations {}",
            e.formulation,
            e.status,
            e.objective.map(format_float).unwrap_or_default(),
            e.violations.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    if kind == "validate-soc" {
        let total: usize = report.entries.iter().filter_map(|e| e.violations).sum();
        if total > 0 {
            return Err(data(anyhow!(
                "{total} SOC bound violations, see {}",
                out.join("violations.csv").display()
            )));
        }
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<(), Failure> {
    let formulations = parse_formulations(&args.formulation)?;
    let loaded = load(&args.inputs)?;
    let (base, cem) = build_base_model(&loaded.config, &loaded.ts, &loaded.mapping)
        .map_err(|e| pipeline(PipelineError::Cem(e)))?;
    for &f in &formulations {
        let mut model = base.clone();
        model.name = format!("cem-{f}");
        apply_formulation(f, &mut model, &cem, &loaded.mapping, &loaded.config)
            .map_err(|e| pipeline(PipelineError::Lds(e)))?;
        let path = args.inputs.out.join(format!("{f}.mps"));
        write_mps(&model, &path)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(data)?;
    }
    let mut manifest = Manifest::new("export-mps", &args.inputs, &loaded);
    manifest.formulations = formulations.iter().map(|f| f.to_string()).collect();
    manifest.write(&args.inputs.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Aggregate(inputs) => cmd_aggregate(inputs),
        Command::Solve(args) => cmd_run("solve", args),
        Command::Compare(args) => cmd_run("compare", args),
        Command::ValidateSoc(args) => cmd_run("validate-soc", args),
        Command::ExportMps(args) => cmd_export(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}

//! Command-line front end. Every command writes into
//! `<out>/<command>-<config hash>` and finishes with a `meta.toml` holding the
//! fully resolved settings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::baseline::{run_subgradient, solve_monolithic, uncoordinated_cost};
use crate::coordinator::{run as run_slr, ConvergenceTrace, TerminalStatus};
use crate::grid::{load_case, random_case, render, validate, CoordCase, GridError};
use crate::report::{
    config_hash, reference_solution_text, savings_csv, scale_case, scale_row, sha256_hex, trace_csv, trace_solution_text, ReportError, Settings,
};

/// Case path that selects a generated case instead of a file.
pub const RANDOM_CASE: &str = "@random";

#[derive(Debug, Parser)]
#[command(name = "tdcoord", version, about = "Coordinated transmission and distribution market clearing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Case file, or `@random` for a generated case.
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Setting override as `dotted.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check a case for structural problems.
    Validate(RunArgs),
    /// Solve the coupled problem monolithically.
    Solve(RunArgs),
    /// Coordinate transmission and distribution by surrogate Lagrangian relaxation.
    Coordinate(RunArgs),
    /// Coordinate by the classical subgradient method.
    Baseline(RunArgs),
    /// Replicate a template distribution system and tabulate savings.
    ScaleStudy(RunArgs),
    /// Summarize a case and compare coordinated with isolated operation.
    Report(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Solve(_) => "solve",
            Command::Coordinate(_) => "coordinate",
            Command::Baseline(_) => "baseline",
            Command::ScaleStudy(_) => "scale-study",
            Command::Report(_) => "report",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Validate(a) | Command::Solve(a) | Command::Coordinate(a) | Command::Baseline(a) | Command::ScaleStudy(a) | Command::Report(a) => a,
        }
    }
}

/// A failed command. `Domain` maps to exit status 1, `Environment` to 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Environment(_) => 2,
        }
    }
}

fn env(e: impl std::fmt::Display) -> CliError {
    CliError::Environment(e.to_string())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| env(format!("{}: {e}", path.display())))
}

/// Loaded inputs and the run directory of one command.
struct Run {
    command: &'static str,
    case_path: String,
    case_text: String,
    settings: Settings,
    dir: PathBuf,
    result: toml::Table,
}

impl Run {
    fn prepare(cmd: &Command) -> Result<Self, CliError> {
        let args = cmd.args();
        let mut settings = Settings::default();
        for s in &args.set {
            settings.apply(s).map_err(env)?;
        }
        let case_text = if args.case == RANDOM_CASE {
            render(&random_case(&settings.random, settings.seed))
        } else {
            fs::read_to_string(&args.case).map_err(|e| env(format!("{}: {e}", args.case)))?
        };
        let dir = args.out.join(format!("{}-{}", cmd.name(), config_hash(cmd.name(), &case_text, &settings)));
        fs::create_dir_all(&dir).map_err(|e| env(format!("{}: {e}", dir.display())))?;
        if args.case == RANDOM_CASE {
            write(&dir, "case.toml", &case_text)?;
        }
        Ok(Self { command: cmd.name(), case_path: args.case.clone(), case_text, settings, dir, result: toml::Table::new() })
    }

    /// Parses the case. Unparsable text is an input failure; a document that
    /// parses but is inconsistent is a finding.
    fn load(&self) -> Result<CoordCase, CliError> {
        load_case(&self.case_text).map_err(|e| match e {
            GridError::Parse(_) | GridError::Io(_) => env(e),
            other => CliError::Domain(other.to_string()),
        })
    }

    fn load_clean(&self) -> Result<CoordCase, CliError> {
        let case = self.load()?;
        let report = validate(&case);
        if !report.is_clean() {
            let text: Vec<String> = report.findings.iter().map(|f| f.to_string()).collect();
            write(&self.dir, "validation.txt", &(text.join("\n") + "\n"))?;
            return Err(CliError::Domain(format!("case has {} validation finding(s):\n{}", text.len(), text.join("\n"))));
        }
        Ok(case)
    }

    fn note(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.result.insert(key.to_string(), value.into());
    }

    fn write_meta(&self, outcome: &Result<(), CliError>) -> Result<(), CliError> {
        let mut meta = toml::Table::new();
        meta.insert("command".into(), self.command.into());
        meta.insert("case".into(), self.case_path.clone().into());
        meta.insert("case_sha256".into(), sha256_hex(&self.case_text).into());
        meta.insert("config_hash".into(), config_hash(self.command, &self.case_text, &self.settings).into());
        let settings = toml::Value::try_from(&self.settings).map_err(env)?;
        meta.insert("settings".into(), settings);
        let mut result = self.result.clone();
        let code = outcome.as_ref().err().map_or(0, CliError::exit_code);
        result.insert("exit_code".into(), i64::from(code).into());
        if let Err(e) = outcome {
            result.insert("error".into(), e.to_string().into());
        }
        meta.insert("result".into(), result.into());
        write(&self.dir, "meta.toml", &toml::to_string(&meta).map_err(env)?)
    }
}

/// Runs one command and returns its exit status.
pub fn execute(cmd: &Command) -> u8 {
    let mut run = match Run::prepare(cmd) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let outcome = match cmd {
        Command::Validate(_) => cmd_validate(&mut run),
        Command::Solve(_) => cmd_solve(&mut run),
        Command::Coordinate(_) => cmd_coordinate(&mut run, false),
        Command::Baseline(_) => cmd_coordinate(&mut run, true),
        Command::ScaleStudy(_) => cmd_scale_study(&mut run),
        Command::Report(_) => cmd_report(&mut run),
    };
    let meta = run.write_meta(&outcome);
    println!("{}", run.dir.display());
    match outcome.and(meta) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_validate(run: &mut Run) -> Result<(), CliError> {
    let findings: Vec<String> = match run.load() {
        Ok(case) => validate(&case).findings.iter().map(|f| f.to_string()).collect(),
        Err(CliError::Domain(msg)) => vec![msg],
        Err(e) => return Err(e),
    };
    run.note("findings", findings.len() as i64);
    if findings.is_empty() {
        write(&run.dir, "validation.txt", "clean\n")?;
        println!("clean");
        return Ok(());
    }
    write(&run.dir, "validation.txt", &(findings.join("\n") + "\n"))?;
    Err(CliError::Domain(findings.join("\n")))
}

fn cmd_solve(run: &mut Run) -> Result<(), CliError> {
    let case = run.load_clean()?;
    let r = solve_monolithic(&case, run.settings.slr.pricing, &run.settings.bnb).map_err(env)?;
    write(&run.dir, "solution.out", &reference_solution_text(&case, &r))?;
    run.note("welfare", r.welfare);
    run.note("nodes_explored", r.nodes_explored as i64);
    println!("welfare {}", r.welfare);
    Ok(())
}

fn trace_outcome(run: &mut Run, trace: &ConvergenceTrace) {
    let last = trace.records.last();
    run.note("terminal_status", format!("{:?}", trace.terminal_status));
    run.note("iterations", last.map_or(0, |r| r.k) as i64);
    if let Some(r) = last {
        run.note("final_direction_norm", r.direction_norm);
        run.note("final_lambda", toml::Value::try_from(&r.lambda).expect("floats serialize"));
    }
    if let Some(w) = trace.final_estimate.welfare {
        run.note("restored_welfare", w);
    }
}

fn cmd_coordinate(run: &mut Run, subgradient: bool) -> Result<(), CliError> {
    let case = run.load_clean()?;
    let (method, trace) = if subgradient {
        ("subgradient", run_subgradient(&case, &run.settings.slr, &run.settings.bnb))
    } else {
        ("slr", run_slr(&case, &run.settings.slr, &run.settings.bnb))
    };
    let trace = trace.map_err(env)?;
    write(&run.dir, "trace.csv", &trace_csv(&trace))?;
    write(&run.dir, "solution.out", &trace_solution_text(&case, method, &trace))?;
    trace_outcome(run, &trace);
    println!("{method}: {:?} after {} iterations", trace.terminal_status, trace.records.last().map_or(0, |r| r.k));
    // The classical method has no convergence claim; its trace is the product.
    if subgradient || matches!(trace.terminal_status, TerminalStatus::DirectionTol | TerminalStatus::MultiplierTol) {
        Ok(())
    } else {
        Err(CliError::Domain(format!("coordination did not converge: {:?}", trace.terminal_status)))
    }
}

fn cmd_scale_study(run: &mut Run) -> Result<(), CliError> {
    let case = run.load_clean()?;
    let template = match &run.settings.scale.template {
        Some(t) => t.clone(),
        None => case.distribution_systems.first().map(|d| d.id.clone()).ok_or_else(|| CliError::Domain("case has no distribution system to replicate".into()))?,
    };
    let n_list = run.settings.scale.n_list.clone();
    // Reject every infeasible N before spending time on the others.
    for &n in &n_list {
        scale_case(&case, &template, n).map_err(|e| match e {
            ReportError::TooManyHosts { .. } | ReportError::Grid(_) => CliError::Domain(e.to_string()),
            other => env(other),
        })?;
    }
    run.note("template", template.clone());
    let mut rows = Vec::new();
    let mut details = toml::Table::new();
    write(&run.dir, "savings.csv", &savings_csv(&rows))?;
    for &n in &n_list {
        let row = scale_row(&case, &template, n, &run.settings.slr, &run.settings.bnb).map_err(env)?;
        println!("N={n}: {:?}, welfare {:?} vs {}", row.terminal_status, row.coordinated_welfare, row.uncoordinated_welfare);
        details.insert(n.to_string(), toml::Value::try_from(&row).map_err(env)?);
        rows.push(row.savings);
        write(&run.dir, "savings.csv", &savings_csv(&rows))?;
        run.result.insert("rows".into(), details.clone().into());
    }
    Ok(())
}

fn cmd_report(run: &mut Run) -> Result<(), CliError> {
    let case = run.load_clean()?;
    let unit = case.power_unit();
    let mut out = String::new();
    let t = &case.transmission;
    let _ = writeln!(out, "base_mva {}", case.base_mva);
    let _ = writeln!(out, "transmission: {} buses, {} lines, {} generators", t.buses.len(), t.lines.len(), t.generators.len());
    for d in &case.distribution_systems {
        let host = case.link_for(&d.id).map_or("?", |l| l.transmission_bus.as_str());
        let _ = writeln!(
            out,
            "distribution {} at {host}: {} buses, {} generators, load {} MW",
            d.id,
            d.buses.len(),
            d.generators.len(),
            d.total_active_load() * unit
        );
    }
    let _ = writeln!(out, "total load {} MW", case.total_active_load() * unit);
    let mono = solve_monolithic(&case, run.settings.slr.pricing, &run.settings.bnb).map_err(env)?;
    let _ = writeln!(out, "coordinated welfare {}", mono.welfare);
    run.note("coordinated_welfare", mono.welfare);
    // Isolated operation may be infeasible when transmission capacity relies
    // on distribution exports; that is a result, not a failure.
    match uncoordinated_cost(&case, &run.settings.bnb) {
        Ok(unc) => {
            let _ = writeln!(out, "uncoordinated welfare {}", unc.costs.welfare);
            run.note("uncoordinated_welfare", unc.costs.welfare);
        }
        Err(e) => {
            let _ = writeln!(out, "uncoordinated operation infeasible: {e}");
            run.note("uncoordinated_error", e.to_string());
        }
    }
    for (d, lmp) in case.distribution_systems.iter().zip(&mono.lmps) {
        let _ = writeln!(out, "lmp {} {lmp}", d.id);
    }
    write(&run.dir, "report.txt", &out)?;
    print!("{out}");
    Ok(())
}

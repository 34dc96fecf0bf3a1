//! `mgsync` command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mgsync::analysis::{
    check_report, compare, condition_echo, grid_points, run_point, simulate, GridAxis, RunSummary,
};
use mgsync::output::{checks_json, events_json, summary_json, write_sweep_csv, write_trace_csv};
use mgsync::presets::Preset;
use mgsync::scenario::Scenario;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "mgsync", version, about = "Event-triggered secondary frequency control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv, events.json, checks.json and summary.json.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run even if the sampling condition fails.
        #[arg(long)]
        force: bool,
    },
    /// Compare the event-triggered run against a time-triggered baseline.
    Compare {
        #[command(flatten)]
        source: Source,
        /// Also write compare.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Report graph quantities and the sampling condition.
    Check {
        #[command(flatten)]
        source: Source,
    },
    /// Run a parameter grid and write one summary row per point.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Grid axis `name=v1,v2,...` over sigma_omega, sigma_p, h, c_omega, c_p.
        /// Repeat for a Cartesian product.
        #[arg(long)]
        grid: Vec<String>,
        /// Directory for sweep.csv; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled scenario.
    #[arg(long, value_parser = ["case1", "case2", "case3"])]
    preset: Option<String>,
}

enum Failure {
    Config(String),
    Condition(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Condition(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Condition(m) | Failure::Io(m) => m,
        }
    }
}

impl From<mgsync::Error> for Failure {
    fn from(e: mgsync::Error) -> Self {
        match e {
            mgsync::Error::NotStronglyConnected => {
                Failure::Condition(format!("precondition failed: {e}"))
            }
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load(source: &Source) -> Result<Scenario, Failure> {
    if let Some(name) = &source.preset {
        let preset: Preset = name.parse()?;
        return Ok(preset.scenario()?);
    }
    let path = source.config.as_ref().expect("clap enforces one source");
    let text = fs::read_to_string(path).map_err(io_failure(path))?;
    Scenario::from_toml(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn require_condition(scenario: &Scenario, force: bool) -> Result<(), Failure> {
    let echo = condition_echo(scenario)?;
    if echo.satisfied {
        return Ok(());
    }
    let msg = format!(
        "sampling condition violated: h/2 + sigma = {:.6} >= 1/lambda = {:.6} (h = {}, sigma = {}, lambda = {:.6})",
        echo.margin_lhs, echo.inv_lambda, echo.h, echo.sigma_omega, echo.lambda
    );
    if force {
        eprintln!("warning: {msg}; running anyway");
        Ok(())
    } else {
        Err(Failure::Condition(format!("{msg}; pass --force to run anyway")))
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(io_failure(path))
}

fn print_summary(s: &RunSummary) {
    let (a, b) = s.window;
    println!("condition      : {}", if s.condition.satisfied { "satisfied" } else { "violated" });
    println!(
        "events ({a}, {b}] : frequency {:?} total {}, power {:?} total {}",
        s.events.frequency.per_dg, s.events.frequency.total, s.events.power.per_dg, s.events.power.total
    );
    println!("reduction      : {:.1} % (frequency), {:.1} % (power)", s.communication_reduction, s.power_communication_reduction);
    match s.convergence_time {
        Some(t) => println!("convergence    : {t} s"),
        None => println!("convergence    : not within 1 mHz by the horizon"),
    }
    println!("terminal |Δf|  : {:.6e} Hz", s.terminal_max_frequency_error_hz);
    println!("sharing error  : {:.6e} rad/s", s.terminal_sharing_mismatch);
    println!("runtime        : {:.3} s", s.runtime_s);
}

fn cmd_simulate(source: &Source, out: &Path, force: bool) -> Result<(), Failure> {
    let scenario = load(source)?;
    require_condition(&scenario, force)?;
    let (log, summary) = simulate(&scenario)?;
    fs::create_dir_all(out).map_err(io_failure(out))?;
    let mut trace = Vec::new();
    write_trace_csv(&log, &mut trace).expect("in-memory write");
    write_file(&out.join("trace.csv"), &trace)?;
    write_file(&out.join("events.json"), events_json(&log).as_bytes())?;
    write_file(&out.join("checks.json"), checks_json(&log).as_bytes())?;
    write_file(&out.join("summary.json"), summary_json(&summary).as_bytes())?;
    print_summary(&summary);
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_compare(source: &Source, out: Option<&Path>, force: bool) -> Result<(), Failure> {
    let scenario = load(source)?;
    require_condition(&scenario, force)?;
    let report = compare(&scenario)?;
    println!("{report}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_failure(dir))?;
        let json = serde_json::to_string_pretty(&report).expect("report serialises");
        write_file(&dir.join("compare.json"), json.as_bytes())?;
    }
    Ok(())
}

fn cmd_check(source: &Source) -> Result<(), Failure> {
    let scenario = load(source)?;
    let report = check_report(&scenario)?;
    println!("{report}");
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Condition(format!(
            "sampling condition violated: h/2 + sigma = {:.6} >= 1/lambda = {:.6}",
            report.margin_lhs, report.inv_lambda
        )))
    }
}

fn cmd_sweep(source: &Source, grid: &[String], out: Option<&Path>) -> Result<(), Failure> {
    let scenario = load(source)?;
    let axes = grid
        .iter()
        .filter(|g| !g.trim().is_empty())
        .map(|g| g.parse::<GridAxis>())
        .collect::<Result<Vec<_>, _>>()?;
    let points = grid_points(&axes);
    let rows: Vec<_> = points.par_iter().map(|p| run_point(&scenario, p)).collect();
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).expect("in-memory write");
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_failure(dir))?;
            write_file(&dir.join("sweep.csv"), &csv)?;
            eprintln!("{} points, wrote {}", rows.len(), dir.join("sweep.csv").display());
        }
        None => io::stdout()
            .write_all(&csv)
            .map_err(|e| Failure::Io(format!("stdout: {e}")))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { source, out, force } => cmd_simulate(source, out, *force),
        Command::Compare { source, out, force } => cmd_compare(source, out.as_deref(), *force),
        Command::Check { source } => cmd_check(source),
        Command::Sweep { source, grid, out } => cmd_sweep(source, grid, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

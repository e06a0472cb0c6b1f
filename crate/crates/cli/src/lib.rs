//! `traffic` command line: run scenarios and analyses from JSON configs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use traffic_core::output::write_outputs;
use traffic_core::report::{stability_report, thresholds_report};
use traffic_core::{build_initial_state, simulate, Error, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COLLISION: i32 = 3;

pub const STABILITY_FILE: &str = "stability.json";
pub const EQUILIBRIUM_FILE: &str = "equilibrium.json";
pub const THRESHOLDS_FILE: &str = "thresholds.json";

#[derive(Debug, Parser)]
#[command(name = "traffic", version, about = "Multi-lane ring-road traffic simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write trajectory, lane-count and event CSVs.
    Simulate(SimulateArgs),
    /// Stable headway and vehicle-count ranges, mode growth rates, thresholds.
    Stability(AnalysisArgs),
    /// Steady state matching the scenario's initial condition.
    Equilibrium(AnalysisArgs),
    /// Lane-change thresholds around the scenario's steady state.
    Thresholds(AnalysisArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Output directory; defaults to `output.dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record every K-th step.
    #[arg(long, value_name = "K")]
    stride: Option<usize>,
    #[arg(long, overrides_with = "no_svg")]
    svg: bool,
    #[arg(long, overrides_with = "svg")]
    no_svg: bool,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    config: PathBuf,
    /// Directory for the JSON report; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, file: &str) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(file), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Collision { .. } => EXIT_COLLISION,
        _ => EXIT_FAILURE,
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut cfg = load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.integrator.seed = seed;
    }
    if let Some(stride) = args.stride {
        cfg.integrator.stride = stride;
    }
    cfg.validate()?;
    let dir = args
        .out
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output.dir".into()))?;
    let svg = if args.no_svg {
        false
    } else {
        args.svg || cfg.output.svg
    };
    let initial = build_initial_state(&cfg)?;
    match simulate(&initial, &cfg.model, &cfg.road, &cfg.integrator) {
        Ok(out) => {
            write_outputs(&out.trajectory, &dir, svg)?;
            println!(
                "t = {} s, vehicles per lane {:?}, {} lane changes",
                out.final_state.time(),
                out.final_state.lane_counts(),
                out.trajectory.events.len()
            );
            Ok(())
        }
        Err(aborted) => {
            // Keep what was recorded up to the failure.
            write_outputs(&aborted.partial, &dir, svg)?;
            Err(aborted.source)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Stability(a) => emit(&stability_report(&load(&a.config)?)?, a.out.as_deref(), STABILITY_FILE),
        Command::Equilibrium(a) => {
            emit(&load(&a.config)?.reference_equilibrium()?, a.out.as_deref(), EQUILIBRIUM_FILE)
        }
        Command::Thresholds(a) => emit(&thresholds_report(&load(&a.config)?)?, a.out.as_deref(), THRESHOLDS_FILE),
    }
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit status: 0 on success, 2 for usage errors, 3 when a
/// simulation stops on a collision, 1 for anything else.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("traffic: {e}");
            exit_code(&e)
        }
    }
}

//! Command-line interface of the `rtbdi` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::{Scenario, Simulation};
use crate::bdi::GoalPlanLibrary;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_GOAL_FAILED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable selecting the planner when `--planner` is absent.
pub const PLANNER_ENV: &str = "RTBDI_PLANNER";

#[derive(Debug, Parser)]
#[command(name = "rtbdi", version, about = "Real-time BDI agents in a grid world")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run a scenario to completion and print its log.
    Run {
        scenario: PathBuf,
        /// Write the run log here instead of standard output.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the schedule trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// `builtin` or `external:<command>`.
        #[arg(long)]
        planner: Option<String>,
        /// Exit with status 3 unless every goal is achieved.
        #[arg(long)]
        strict: bool,
        /// Directory receiving log, trace, report and library.
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// Library document whose plans are added to the scenario's.
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Serve a scenario over TCP (newline-delimited JSON, `/ws`, `/ui`).
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Directory with the browser UI bundle.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
    /// Write the goal-plan library learned in a run directory.
    ExportLibrary {
        run_dir: PathBuf,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Cmd::Run { scenario, log, trace, planner, strict, run_dir, library } => {
            let planner = planner.or_else(|| std::env::var(PLANNER_ENV).ok());
            run(&scenario, log, trace, planner, strict, run_dir, library)
        }
        Cmd::Serve { scenario, port, ui } => serve(&scenario, port, ui),
        Cmd::Validate { scenario } => match Scenario::load(&scenario).and_then(|s| s.validate()) {
            Ok(_) => {
                println!("{}: ok", scenario.display());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}: {e}", scenario.display());
                EXIT_INVALID
            }
        },
        Cmd::ExportLibrary { run_dir, out } => export_library(&run_dir, out.as_deref()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), i32> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("cannot write {}: {e}", path.display());
        EXIT_ERROR
    })
}

fn load_sim(path: &Path, planner: Option<&str>, library: Option<&Path>) -> Result<Simulation, i32> {
    let scenario = Scenario::load(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_INVALID
    })?;
    let extra = match library {
        None => None,
        Some(lib) => {
            let text = std::fs::read_to_string(lib).map_err(|e| {
                eprintln!("cannot read {}: {e}", lib.display());
                EXIT_ERROR
            })?;
            let model = scenario.build_model().map_err(|e| {
                eprintln!("{}: {e}", path.display());
                EXIT_INVALID
            })?;
            Some(GoalPlanLibrary::from_json(&text, &model).map_err(|e| {
                eprintln!("{}: {e}", lib.display());
                EXIT_INVALID
            })?)
        }
    };
    Simulation::with_options(scenario, planner, extra.as_ref()).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_INVALID
    })
}

fn run(
    path: &Path,
    log: Option<PathBuf>,
    trace: Option<PathBuf>,
    planner: Option<String>,
    strict: bool,
    run_dir: Option<PathBuf>,
    library: Option<PathBuf>,
) -> i32 {
    let mut sim = match load_sim(path, planner.as_deref(), library.as_deref()) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let report = sim.run_to_end();
    let text = sim.log_text();
    let result = (|| {
        match &log {
            Some(p) => write(p, &text)?,
            None => print!("{text}"),
        }
        if let Some(p) = &trace {
            write(p, &sim.trace_csv())?;
        }
        if let Some(dir) = &run_dir {
            std::fs::create_dir_all(dir).map_err(|e| {
                eprintln!("cannot create {}: {e}", dir.display());
                EXIT_ERROR
            })?;
            write(&dir.join("log.txt"), &text)?;
            write(&dir.join("trace.csv"), &sim.trace_csv())?;
            write(&dir.join("report.json"), &serde_json::to_string_pretty(&report).unwrap())?;
            write(&dir.join("library.json"), &sim.agent.library.to_json())?;
        }
        Ok(())
    })();
    if let Err(code) = result {
        return code;
    }
    eprintln!(
        "{}: {} ticks, {} cycles, goals achieved {}/{}, planner calls {}, library {} -> {}",
        report.scenario,
        report.ticks,
        report.cycles,
        report.achieved,
        report.goals.len(),
        report.planner_calls,
        report.library_size_start,
        report.library_size_end
    );
    for n in report.unschedulable() {
        eprintln!(
            "Unschedulable at {}: {} (violating tick {:?}, tasks {:?})",
            n.tick, n.detail, n.violating_tick, n.tasks
        );
    }
    if strict && !report.success() {
        return EXIT_GOAL_FAILED;
    }
    EXIT_OK
}

fn serve(path: &Path, port: u16, ui: Option<PathBuf>) -> i32 {
    let planner = std::env::var(PLANNER_ENV).ok();
    let sim = match load_sim(path, planner.as_deref(), None) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let listener = match std::net::TcpListener::bind(("0.0.0.0", port)) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot bind port {port}: {e}");
            return EXIT_ERROR;
        }
    };
    eprintln!("serving {} on port {port} (paused)", path.display());
    let stop = std::sync::Arc::new(std::sync::atomic::AtomicBool::new(false));
    match super::serve::serve(sim, listener, ui, stop) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            EXIT_ERROR
        }
    }
}

fn export_library(run_dir: &Path, out: Option<&Path>) -> i32 {
    let src = run_dir.join("library.json");
    let text = match std::fs::read_to_string(&src) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", src.display());
            return EXIT_ERROR;
        }
    };
    if let Err(e) = GoalPlanLibrary::plans_from_json(&text) {
        eprintln!("{}: {e}", src.display());
        return EXIT_INVALID;
    }
    match out {
        Some(p) => match write(p, &text) {
            Ok(()) => EXIT_OK,
            Err(c) => c,
        },
        None => {
            print!("{text}");
            EXIT_OK
        }
    }
}

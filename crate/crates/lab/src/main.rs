use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinflow_core::flow::{project_to_slice, FlowTrace, SliceOptions};
use spinflow_core::grid::{read_snapshot, write_snapshot, Snapshot};
use spinflow_core::spin::Configuration;
use spinflow_lab::experiment::analyze_trace;
use spinflow_lab::{check, parse_config, reconstruct_run, run_experiment, ExperimentError, Suite};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "spinflow", version, about = "Spinor flow experiments on the periodic cube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run { config: PathBuf },
    /// Run an invariant check suite: algebra, gradient, flows, decay or all.
    Check { suite: Suite },
    /// Fit decay laws to a trace file.
    Analyze {
        trace: PathBuf,
        /// Limit energy; estimated from the trace when omitted.
        #[arg(long)]
        e_limit: Option<f64>,
    },
    /// Move a configuration snapshot onto the slice through a reference.
    ProjectSlice {
        snapshot: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rebuild the gauged trajectory of a finished spinor run.
    Reconstruct { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type Outcome = Result<u8, (u8, String)>;

fn runtime(e: impl std::fmt::Display) -> (u8, String) {
    (EXIT_RUNTIME, e.to_string())
}

fn read_configuration(path: &Path) -> Result<Configuration, (u8, String)> {
    let file = File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    match read_snapshot(BufReader::new(file)).map_err(runtime)? {
        Snapshot::Configuration(c) => Ok(c),
        _ => Err(runtime(format!("{} does not hold a configuration", path.display()))),
    }
}

fn execute(command: Command) -> Outcome {
    match command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| (EXIT_CONFIG, format!("{}: {e}", config.display())))?;
            let cfg = parse_config(&text).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            let summary = match run_experiment(&cfg) {
                Ok(s) => s,
                Err(ExperimentError::Config(e)) => return Err((EXIT_CONFIG, e.to_string())),
                Err(e) => return Err(runtime(e)),
            };
            print!("{}", summary.report.render());
            println!("output {}", summary.dir.display());
            if let Some(checks) = &summary.checks {
                print!("{}", checks.render());
            }
            Ok(if summary.checks_passed() { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Check { suite } => {
            let report = check(suite);
            print!("{}", report.render());
            Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Analyze { trace, e_limit } => {
            let file = File::open(&trace).map_err(|e| runtime(format!("{}: {e}", trace.display())))?;
            let trace = FlowTrace::read(BufReader::new(file)).map_err(runtime)?;
            print!("{}", analyze_trace(&trace, e_limit).render());
            Ok(0)
        }
        Command::ProjectSlice { snapshot, reference, output } => {
            let target = read_configuration(&snapshot)?;
            let base = read_configuration(&reference)?;
            let p = project_to_slice(&target, &base, &SliceOptions::default()).map_err(runtime)?;
            for (i, r) in p.residuals.iter().enumerate() {
                println!("iteration {i} residual {r:.6e}");
            }
            println!("displacement_max {:.6e}", p.diffeo.displacement().max_norm());
            if let Some(path) = output {
                let file = File::create(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
                write_snapshot(BufWriter::new(file), &Snapshot::Configuration(p.config)).map_err(runtime)?;
                println!("output {}", path.display());
            }
            Ok(0)
        }
        Command::Reconstruct { run_dir } => {
            let report = reconstruct_run(&run_dir).map_err(runtime)?;
            print!("{}", report.render());
            Ok(0)
        }
    }
}

//! Batch front end for the delayed-LPV synthesis toolbox.
//!
//! Exit codes: 0 success, 1 malformed input or configuration, 2 LMI
//! infeasibility (or a failed validation), 3 solver breakdown, 4 scenario
//! class violation or zero-disturbance scenario. Errors are additionally
//! reported as JSON on stderr for harness automation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpvsyn::Error;

#[derive(Parser)]
#[command(name = "lpvsyn", about = "Delayed-LPV state-feedback synthesis toolbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the closed-loop L2 gain bound and recover a gain schedule.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        /// Result JSON path (defaults to the config's output directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Certify a fixed gain level instead of minimizing.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Check an analysis certificate for previously synthesized gains.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Synthesis result JSON from `synthesize`.
        #[arg(long)]
        gains: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a named scenario with the synthesized controller.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        gains: PathBuf,
        #[arg(long)]
        scenario: String,
        /// Output directory for trace CSV and summary JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize the benchmark comparison table across delay classes.
    ReproduceTable {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the multiplier factorizations and the hard IQC property.
    ValidateIqc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Randomized input/delay pairs per multiplier.
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

fn error_kind(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Infeasible(_) => ("infeasible", 2),
        Error::SolverFailure(_) => ("solver_failure", 3),
        Error::ScenarioViolation(_) => ("scenario_violation", 4),
        Error::ZeroDisturbance => ("zero_disturbance", 4),
        _ => ("invalid_input", 1),
    }
}

fn report_error(e: &Error) -> ExitCode {
    let (kind, code) = error_kind(e);
    eprintln!(
        "{}",
        serde_json::json!({ "kind": kind, "message": e.to_string() })
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synthesize { config, out, gamma } => {
            commands::cmd_synthesize(&config, out.as_deref(), gamma).map(|()| true)
        }
        Command::Analyze {
            config,
            gains,
            gamma,
            out,
        } => commands::cmd_analyze(&config, &gains, gamma, out.as_deref()).map(|()| true),
        Command::Simulate {
            config,
            gains,
            scenario,
            out,
        } => commands::cmd_simulate(&config, &gains, &scenario, out.as_deref()).map(|()| true),
        Command::ReproduceTable { config, out } => {
            commands::cmd_reproduce_table(&config, out.as_deref()).map(|()| true)
        }
        Command::ValidateIqc {
            config,
            seed,
            out,
            trials,
        } => commands::cmd_validate_iqc(&config, seed, out.as_deref(), trials),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!(
                "{}",
                serde_json::json!({ "kind": "validation_failed", "message": "validation checks failed; see report" })
            );
            ExitCode::from(2)
        }
        Err(e) => report_error(&e),
    }
}

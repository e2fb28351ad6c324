//! Batch experiment runner: JSON config in, report.json and CSV files out.
//!
//! Exit codes: 0 success, 2 invalid config or input, 3 failure during a run.

pub mod barcode;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{parse_config, ExperimentConfig, ExperimentKind, OUTPUT_ROOT_VAR};
pub use error::CliError;
pub use report::{run_experiment, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "mai", version, about = "Memory-amortized inference experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write report.json plus CSV metrics.
    Run {
        config: PathBuf,
        /// Overrides the config's output_dir and $MAI_OUTPUT_ROOT.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Compute the Vietoris–Rips barcode of a CSV point cloud.
    Barcode {
        cloud: PathBuf,
        #[arg(long)]
        max_filtration: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Reads, parses and preflights a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    experiments::preflight(&config).map_err(|e| match e {
        CliError::Runtime(m) => CliError::Validation(m),
        other => other,
    })?;
    Ok(config)
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Run { config, output_dir } => {
            let cfg = load_config(&config)?;
            let dir = cfg.resolve_output_dir(output_dir.as_deref());
            let summary = run_experiment(&cfg, &dir)?;
            Ok(format!(
                "{}: {} seed(s), wrote {} to {}",
                cfg.experiment.name(),
                cfg.seeds.len(),
                summary.files.join(", "),
                summary.output_dir.display()
            ))
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            Ok(format!(
                "ok: {} with {} seed(s)",
                cfg.experiment.name(),
                cfg.seeds.len()
            ))
        }
        Command::Barcode {
            cloud,
            max_filtration,
            out,
        } => {
            let value = barcode::export(&cloud, max_filtration, &out)?;
            let h1 = value["h1"].as_array().map_or(0, Vec::len);
            Ok(format!("wrote {} ({h1} H1 interval(s))", out.display()))
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(message) => {
            println!("{message}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

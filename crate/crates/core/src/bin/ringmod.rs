use std::path::PathBuf;
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};

use ringmod::config::RunConfig;
use ringmod::run::{execute, summary, write_outputs, RunOptions, EXIT_COMPUTATION, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "ringmod", version, about = "Moduli, capacities and distortion checks on ring domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the blocks of a JSON configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in acceptance configuration.
    Suite {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory for report.json, report.csv and metadata.json.
    #[arg(long, env = "RINGMOD_OUT", default_value = "ringmod-out")]
    out: PathBuf,
    /// Worker threads for independent blocks.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Relative quadrature tolerance used for every block.
    #[arg(long)]
    tol_override: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = SystemTime::now();
    let (config, common) = match cli.command {
        Command::Run { config, common } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            match RunConfig::from_json(&text) {
                Ok(c) => (c, common),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            }
        }
        Command::Suite { common } => (RunConfig::acceptance(), common),
    };
    if let Some(t) = common.tol_override {
        if !(t > 0.0 && t < 1.0) {
            eprintln!("error: --tol-override must lie in (0, 1)");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let options = RunOptions { parallel: common.parallel, tol_override: common.tol_override };
    let outcome = match execute(&config, &options) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_COMPUTATION as u8);
        }
    };
    print!("{}", summary(&outcome));
    if let Err(e) = write_outputs(&outcome, &common.out, started) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_COMPUTATION as u8);
    }
    let code = outcome.report.exit_code();
    let failing = outcome.report.records.iter().filter(|r| !r.expectation_met).count();
    println!("{} blocks, {failing} not as expected, reports in {}", outcome.report.records.len(), common.out.display());
    ExitCode::from(code as u8)
}

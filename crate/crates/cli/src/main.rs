use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gou_cli::{load_config, run, CliError, RunArgs};
use gou_core::{preset, PRESET_NAMES};

#[derive(Parser)]
#[command(name = "gou", version, about = "Monte Carlo verification of GOU processes, their duals and inverse flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured suites; exits 0 iff all of them pass.
    Run(RunArgs),
    /// Parse and validate a config without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the bundled model presets.
    ListPresets,
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => match run(&args) {
            Ok(r) => {
                for rec in &r.summary.results {
                    let status = serde_json::to_value(&rec.status).unwrap_or_default();
                    let status = status.as_str().unwrap_or("?");
                    match &rec.reason {
                        Some(reason) => println!("{status:<7} {:<13} {}: {reason}", rec.suite.name(), rec.model),
                        None => println!("{status:<7} {:<13} {}", rec.suite.name(), rec.model),
                    }
                }
                println!("summary: {}", r.out_dir.join("summary.json").display());
                if r.summary.pass { ExitCode::SUCCESS } else { ExitCode::from(1) }
            }
            Err(e) => report(&e),
        },
        Command::ValidateConfig { config } => match load_config(&config) {
            Ok(cfg) => {
                println!(
                    "ok: {} model(s), suite {}, seed {}, config hash {}",
                    cfg.models.len(),
                    cfg.suite,
                    cfg.seed,
                    cfg.hash()
                );
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
        Command::ListPresets => {
            for name in PRESET_NAMES {
                let p = preset(name).expect("bundled preset");
                println!("{name:<15} {}", p.summary);
            }
            ExitCode::SUCCESS
        }
    }
}

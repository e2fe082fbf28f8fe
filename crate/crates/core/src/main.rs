use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use impact_hedge::scenario::{builtin, builtins, run_scenario, validate, RunOptions, Scenario};
use impact_hedge::Error;

#[derive(Parser)]
#[command(name = "impact-hedge", version, about = "Optimal hedge tracking under temporary price impact")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV and JSON artifacts.
    Run {
        /// Scenario file, or the name of a built-in scenario.
        #[arg(long)]
        config: String,
        #[arg(long, env = "IMPACT_HEDGE_OUT", default_value = "out")]
        out_dir: PathBuf,
        /// Worker threads (all cores if absent). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Replaces the Monte Carlo and perturbation seeds.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        config: String,
    },
    /// Print the built-in scenarios.
    ListScenarios,
}

fn load(config: &str) -> Result<Scenario, Error> {
    let path = Path::new(config);
    if path.exists() {
        return Scenario::load(path);
    }
    builtin(config).ok_or_else(|| Error::Input(format!("no scenario file or built-in named `{config}`")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out_dir, threads, seed_override } => load(&config).and_then(|s| {
            let summary = run_scenario(&s, &out_dir, &RunOptions { threads, seed_override })?;
            for f in &summary.files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }),
        Command::Validate { config } => load(&config).and_then(|s| {
            let report = validate(&s);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }),
        Command::ListScenarios => {
            for s in builtins() {
                println!("{}\t{}", s.name, s.description.unwrap_or_default());
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}

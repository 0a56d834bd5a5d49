use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use clawdlab_sim::{run_scenario, run_sybil_experiment, Scenario};

#[derive(Parser)]
#[command(name = "sim", about = "Run ClawdLab scenarios on a virtual clock")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print (or write) its report.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare the scenario against runs with extra sybil agents.
    Sybil {
        scenario: PathBuf,
        #[arg(long)]
        sybils: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { scenario, seed, report } => {
            let s = Scenario::load(&scenario)?;
            let r = run_scenario(&s, seed)?;
            for a in &r.assertions {
                eprintln!(
                    "{} {} ({})",
                    if a.passed { "ok  " } else { "FAIL" },
                    a.assertion,
                    a.detail
                );
            }
            eprintln!(
                "events={} duration={}s state_hash={}",
                r.events, r.virtual_duration_seconds, r.final_state_hash
            );
            match report {
                Some(path) => {
                    std::fs::write(&path, r.to_json()).with_context(|| format!("writing {}", path.display()))?
                }
                None => println!("{}", r.to_json()),
            }
            Ok(r.passed())
        }
        Command::Sybil { scenario, sybils, seed } => {
            let s = Scenario::load(&scenario)?;
            let r = run_sybil_experiment(&s, sybils, seed)?;
            eprintln!(
                "k={} holds={} accepted_difference={:?} completed_literature {} -> {} flood_landed={}",
                r.sybils,
                r.holds,
                r.accepted_difference,
                r.baseline.completed_literature,
                r.workers.completed_literature,
                r.flooding.flood.landed,
            );
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(r.holds)
        }
    }
}

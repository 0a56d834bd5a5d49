use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use clawdlab::commons::parse_jsonl;
use clawdlab::engine::{canonical_json, sha256_hex};
use clawdlab::state::ProtocolState;
use clawdlab_server::ServerConfig;

#[derive(Parser)]
#[command(
    name = "clawdlab",
    version,
    about = "Coordination service for autonomous research labs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the configured store's full contents as JSON.
    Snapshot {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an activity log (JSONL) and print the resulting state hash.
    Replay { events: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { config } => {
            let config = ServerConfig::load(&config)?;
            tokio::runtime::Runtime::new()?.block_on(clawdlab_server::serve(config))
        }
        Command::Snapshot { config, out } => {
            let config = ServerConfig::load(&config)?;
            let snapshot = config.open_store()?.snapshot()?;
            let json = serde_json::to_string_pretty(&snapshot)?;
            match out {
                Some(path) => std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Replay { events } => {
            let text = std::fs::read_to_string(&events).with_context(|| format!("reading {}", events.display()))?;
            let log = parse_jsonl(&text)?;
            let state = ProtocolState::replay(&log)?;
            println!(
                "events={} state_hash={}",
                log.len(),
                sha256_hex(canonical_json(&state).as_bytes())
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

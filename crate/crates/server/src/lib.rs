//! HTTP/JSON front end for the coordination engine.

pub mod api;
pub mod config;
pub mod error;

use std::sync::Arc;
use std::time::Duration;

use clawdlab::Platform;

pub use api::router;
pub use config::{ServerConfig, StoreConfig};
pub use error::{ApiError, ErrorBody};

/// Periodically runs queued provider jobs and applies vote expiry.
pub fn spawn_worker(platform: Arc<Platform>, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let p = Arc::clone(&platform);
            let swept = tokio::task::spawn_blocking(move || {
                for r in p.run_queued_jobs() {
                    if let Err(e) = r {
                        tracing::debug!(error = %e, "queued job skipped");
                    }
                }
                p.sweep_expired_votes()
            })
            .await;
            match swept {
                Ok(Ok(tasks)) if !tasks.is_empty() => tracing::info!(count = tasks.len(), "expired votes"),
                Ok(Err(e)) => tracing::warn!(error = %e, "vote sweep failed"),
                Err(e) => tracing::error!(error = %e, "worker task panicked"),
                _ => {}
            }
        }
    })
}

/// Binds the configured address and serves until ctrl-c.
pub async fn serve(config: ServerConfig) -> anyhow::Result<()> {
    let platform = Arc::new(Platform::new(config.build_engine()?));
    let worker = spawn_worker(
        Arc::clone(&platform),
        Duration::from_millis(config.worker_interval_ms.max(10)),
    );
    let listener = tokio::net::TcpListener::bind(&config.listen_address).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, router(platform))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    worker.abort();
    Ok(())
}

use std::path::{Path, PathBuf};

use anyhow::Context;
use clawdlab::docstore::{FileBackedStore, InMemoryStore, StoreBackend};
use clawdlab::providers::{ProviderSet, ProvidersConfig};
use clawdlab::{Engine, EngineConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoreConfig {
    #[default]
    InMemory,
    FileBacked {
        path: PathBuf,
    },
}

/// The server's TOML file. Engine settings sit at the top level:
///
/// ```toml
/// listen_address = "127.0.0.1:8080"
/// heartbeat_ttl_seconds = 300
///
/// [store]
/// kind = "file_backed"
/// path = "/var/lib/clawdlab"
///
/// [providers.literature]
/// backend = "stub"
///
/// [[observers]]
/// id = "observer-1"
/// token = "change-me"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    #[serde(default = "default_listen_address")]
    pub listen_address: String,
    #[serde(default)]
    pub store: StoreConfig,
    #[serde(flatten)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub providers: ProvidersConfig,
    /// How often the background worker runs queued jobs and expires votes.
    #[serde(default = "default_worker_interval_ms")]
    pub worker_interval_ms: u64,
}

fn default_listen_address() -> String {
    "127.0.0.1:8080".into()
}

fn default_worker_interval_ms() -> u64 {
    1000
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen_address: default_listen_address(),
            store: StoreConfig::default(),
            engine: EngineConfig::default(),
            providers: ProvidersConfig::default(),
            worker_interval_ms: default_worker_interval_ms(),
        }
    }
}

impl ServerConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Self = toml::from_str(text)?;
        if config.engine.heartbeat_ttl_seconds == 0 || config.engine.vote_window_seconds == 0 {
            anyhow::bail!("heartbeat_ttl_seconds and vote_window_seconds must be positive");
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn open_store(&self) -> anyhow::Result<Box<dyn StoreBackend>> {
        Ok(match &self.store {
            StoreConfig::InMemory => Box::new(InMemoryStore::new()),
            StoreConfig::FileBacked { path } => {
                Box::new(FileBackedStore::open(path).with_context(|| format!("opening store {}", path.display()))?)
            }
        })
    }

    /// Engine with the configured store replayed and providers wired.
    pub fn build_engine(&self) -> anyhow::Result<Engine> {
        let providers = ProviderSet::from_config(&self.providers).context("configuring providers")?;
        Ok(Engine::builder()
            .config(self.engine.clone())
            .store(self.open_store()?)
            .providers(providers)
            .build()?)
    }
}

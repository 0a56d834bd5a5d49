//! The engine: protocol state, its event log, the agent registry and the
//! persistence backend, plus a thread-safe [`Platform`] wrapper.

use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::{Mutex, MutexGuard};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::{Clock, SystemClock};
use crate::commons::{ActivityEvent, EventBody};
use crate::dispatch::Registry;
use crate::docstore::{InMemoryStore, Snapshot, StoreBackend};
use crate::error::{Error, Result};
use crate::ids::{Actor, DocumentId, JobId, LabId, TaskId, Timestamp};
use crate::providers::{ProviderJob, ProviderSet};
use crate::state::ProtocolState;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Key-sorted, compact JSON. Used for request payloads and state hashes.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serializes to JSON");
    serde_json::to_string(&v).expect("JSON value prints")
}

/// A human observer account. Observers read everything and may post to
/// forum and discussion, but never touch the protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObserverConfig {
    pub id: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Upvotes a forum post needs before it can be claimed.
    pub claim_threshold: usize,
    pub vote_window_seconds: u64,
    pub heartbeat_ttl_seconds: u64,
    pub min_accepted_sources: usize,
    pub observers: Vec<ObserverConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            claim_threshold: 3,
            vote_window_seconds: 3600,
            heartbeat_ttl_seconds: 300,
            min_accepted_sources: 2,
            observers: Vec::new(),
        }
    }
}

pub struct Engine {
    pub(crate) config: EngineConfig,
    clock: Arc<dyn Clock>,
    pub(crate) state: ProtocolState,
    log: Vec<ActivityEvent>,
    pub(crate) registry: Registry,
    pub(crate) store: Box<dyn StoreBackend>,
    pub(crate) providers: Arc<ProviderSet>,
    /// Jobs handed to a worker, with their start time. Not persisted: a
    /// restart returns them to the queue.
    pub(crate) running_jobs: BTreeMap<JobId, Timestamp>,
    pub(crate) rng: ChaCha20Rng,
    /// SHA-256 of observer token -> observer id.
    pub(crate) observer_digests: BTreeMap<String, String>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("events", &self.log.len())
            .field("agents", &self.registry.agents.len())
            .finish_non_exhaustive()
    }
}

#[derive(Default)]
pub struct EngineBuilder {
    config: EngineConfig,
    clock: Option<Arc<dyn Clock>>,
    store: Option<Box<dyn StoreBackend>>,
    providers: Option<Arc<ProviderSet>>,
    seed: Option<u64>,
}

impl EngineBuilder {
    pub fn config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn store(mut self, store: Box<dyn StoreBackend>) -> Self {
        self.store = Some(store);
        self
    }

    pub fn providers(mut self, providers: ProviderSet) -> Self {
        self.providers = Some(Arc::new(providers));
        self
    }

    /// Seeds token generation. Without a seed tokens come from OS entropy.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Builds the engine, replaying whatever the store already holds.
    pub fn build(self) -> Result<Engine> {
        let store = self.store.unwrap_or_else(|| Box::new(InMemoryStore::new()));
        let snapshot = store.snapshot()?;
        let state = ProtocolState::replay(&snapshot.events)
            .map_err(|e| Error::Storage(format!("replaying stored log: {e}")))?;
        let rng = match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_seed(rand::random()),
        };
        let observer_digests = self
            .config
            .observers
            .iter()
            .map(|o| (sha256_hex(o.token.as_bytes()), o.id.clone()))
            .collect();
        Ok(Engine {
            config: self.config,
            clock: self.clock.unwrap_or_else(|| Arc::new(SystemClock)),
            state,
            log: snapshot.events,
            registry: snapshot.registry,
            store,
            providers: self.providers.unwrap_or_default(),
            running_jobs: BTreeMap::new(),
            rng,
            observer_digests,
        })
    }
}

impl Engine {
    pub fn builder() -> EngineBuilder {
        EngineBuilder::default()
    }

    /// In-memory engine with default config, stub providers and a system
    /// clock.
    pub fn in_memory() -> Self {
        Self::builder().build().expect("empty in-memory store replays")
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        Arc::clone(&self.clock)
    }

    pub fn state(&self) -> &ProtocolState {
        &self.state
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// The full activity log in id order.
    pub fn log(&self) -> &[ActivityEvent] {
        &self.log
    }

    /// Applies and persists one event. Callers validate first; a failure to
    /// apply means the engine itself is inconsistent.
    pub(crate) fn commit(&mut self, actor: Actor, lab_id: Option<LabId>, body: EventBody) -> Result<u64> {
        let event = ActivityEvent {
            event_id: self.state.last_event_id + 1,
            timestamp: self.now(),
            actor: actor.id,
            actor_kind: actor.kind,
            lab_id,
            body,
        };
        self.state
            .apply(&event)
            .map_err(|e| Error::Storage(format!("applying {}: {e}", event.kind().as_str())))?;
        self.store.append_event(&event)?;
        let id = event.event_id;
        self.log.push(event);
        Ok(id)
    }

    pub(crate) fn persist_registry(&mut self) -> Result<()> {
        self.store.save_registry(&self.registry)
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        self.store.snapshot()
    }

    /// SHA-256 of the canonical JSON of the protocol state.
    pub fn state_hash(&self) -> String {
        sha256_hex(canonical_json(&self.state).as_bytes())
    }

    /// Hash over protocol state, agent registry and stored blob ids.
    pub fn global_hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Global<'a> {
            state: String,
            registry: &'a Registry,
            blobs: Vec<DocumentId>,
        }
        let g = Global {
            state: self.state_hash(),
            registry: &self.registry,
            blobs: self.store.list_blobs()?,
        };
        Ok(sha256_hex(canonical_json(&g).as_bytes()))
    }
}

/// Shared handle used by the HTTP service and the simulator. One lock
/// guards the engine; provider backends run outside it.
pub struct Platform {
    engine: Mutex<Engine>,
    providers: Arc<ProviderSet>,
}

impl Platform {
    pub fn new(engine: Engine) -> Self {
        let providers = engine.providers();
        Self {
            engine: Mutex::new(engine),
            providers,
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock()
    }

    /// Runs one queued job: start under the lock, call the backend without
    /// it, record the outcome under the lock again.
    pub fn execute_job(&self, job_id: &JobId) -> Result<ProviderJob> {
        let ticket = self.lock().begin_job(job_id)?;
        let outcome = self.providers.run(&ticket);
        self.lock().finish_job(ticket, outcome)
    }

    /// Executes every job queued at call time.
    pub fn run_queued_jobs(&self) -> Vec<Result<ProviderJob>> {
        let queued = self.lock().queued_jobs();
        queued.iter().map(|id| self.execute_job(id)).collect()
    }

    /// Applies expiry to every lapsed vote; returns the tasks touched.
    pub fn sweep_expired_votes(&self) -> Result<Vec<TaskId>> {
        let mut engine = self.lock();
        let expired = engine.expired_votes();
        for id in &expired {
            engine.expire_vote(id)?;
        }
        Ok(expired)
    }
}

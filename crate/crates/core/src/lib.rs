//! Coordination engine for governed multi-agent research labs.
//!
//! Agents register, join labs under a PI, claim tasks their role card
//! allows, run literature and analysis jobs through a credential-isolating
//! proxy and vote results in or out. Every mutation is one entry in an
//! append-only activity log; protocol state is a fold over that log.

pub mod clock;
pub mod commons;
pub mod dispatch;
pub mod docstore;
pub mod domain;
pub mod engine;
pub mod error;
pub mod governance;
pub mod ids;
pub mod providers;
pub mod state;
pub mod tasklife;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use commons::{ActivityEvent, ActivityFilter, EventBody, EventKind};
pub use domain::{GovernanceModel, LabStateStatus, QuorumFraction, RoleArchetype, TaskStatus, TaskType, VoteValue};
pub use engine::{Engine, EngineBuilder, EngineConfig, Platform};
pub use error::{Error, Result};
pub use ids::{Actor, ActorId, ActorKind, AgentId, LabId, StateId, TaskId, Timestamp};

//! Identifier newtypes and timestamps.
//!
//! Identifiers are opaque strings. The engine mints them from per-kind
//! counters (`task-7`, `lab-2`, ...), which keeps every run reproducible
//! from its inputs.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Milliseconds since the Unix epoch (or since the start of a virtual clock).
pub type Timestamp = u64;

pub const MILLIS_PER_SECOND: u64 = 1_000;

macro_rules! define_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            pub fn from_seq(n: u64) -> Self {
                Self(format!("{}-{:06}", $prefix, n))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

define_id!(AgentId, "agent");
define_id!(LabId, "lab");
define_id!(StateId, "state");
define_id!(TaskId, "task");
define_id!(CritiqueId, "critique");
define_id!(JobId, "job");
define_id!(PostId, "post");
define_id!(CommentId, "comment");
define_id!(SuggestionId, "suggestion");
define_id!(MessageId, "msg");
define_id!(
    /// Hex-encoded SHA-256 of the document bytes.
    DocumentId,
    "doc"
);

/// Any principal that can author an event: an agent, a human observer, or
/// the platform itself (vote expiry, job workers).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorId(pub String);

impl ActorId {
    pub fn system() -> Self {
        Self("system".to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&AgentId> for ActorId {
    fn from(a: &AgentId) -> Self {
        Self(a.0.clone())
    }
}

impl From<AgentId> for ActorId {
    fn from(a: AgentId) -> Self {
        Self(a.0)
    }
}

impl From<&str> for ActorId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Agent,
    Human,
    System,
}

/// Monotone per-kind id counters. Part of the protocol state so that a
/// replayed log mints the same ids as the original run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdCounters {
    pub lab: u64,
    pub state: u64,
    pub task: u64,
    pub critique: u64,
    pub job: u64,
    pub post: u64,
    pub comment: u64,
    pub suggestion: u64,
    pub message: u64,
}

/// An authenticated principal as seen by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Actor {
    pub id: ActorId,
    pub kind: ActorKind,
}

impl Actor {
    pub fn agent(id: &AgentId) -> Self {
        Self {
            id: id.into(),
            kind: ActorKind::Agent,
        }
    }

    pub fn human(id: impl Into<String>) -> Self {
        Self {
            id: ActorId(id.into()),
            kind: ActorKind::Human,
        }
    }

    pub fn system() -> Self {
        Self {
            id: ActorId::system(),
            kind: ActorKind::System,
        }
    }

    pub fn is_human(&self) -> bool {
        self.kind == ActorKind::Human
    }

    /// The agent id behind this actor, if it is an agent.
    pub fn agent_id(&self) -> Option<AgentId> {
        (self.kind == ActorKind::Agent).then(|| AgentId(self.id.0.clone()))
    }
}

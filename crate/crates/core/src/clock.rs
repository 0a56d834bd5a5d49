use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::ids::{Timestamp, MILLIS_PER_SECOND};

/// Source of the current time for every module.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as Timestamp)
            .unwrap_or(0)
    }
}

/// Test-controlled clock. Clones share the same instant; time never moves
/// backward.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new(start: Timestamp) -> Self {
        Self {
            now: Arc::new(AtomicU64::new(start)),
        }
    }

    pub fn advance_millis(&self, dt: u64) -> Timestamp {
        self.now.fetch_add(dt, Ordering::SeqCst) + dt
    }

    pub fn advance_secs(&self, secs: u64) -> Timestamp {
        self.advance_millis(secs * MILLIS_PER_SECOND)
    }

    /// Moves the clock forward to `t`. Earlier instants are ignored.
    pub fn set(&self, t: Timestamp) -> Timestamp {
        self.now.fetch_max(t, Ordering::SeqCst).max(t)
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        self.now.load(Ordering::SeqCst)
    }
}

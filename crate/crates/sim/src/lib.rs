//! Deterministic simulator for ClawdLab.
//!
//! Scripted policy agents poll a fresh in-memory engine on a virtual
//! clock. A run is a pure function of the scenario file and the seed, so
//! reports can be compared byte for byte.

pub mod fuzz;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sybil;

pub use report::{AssertionOutcome, SimReport};
pub use runner::{run_scenario, simulate, SimRun, SybilKind, SybilPopulation};
pub use scenario::Scenario;
pub use sybil::{run_sybil_experiment, SybilReport};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    ScenarioParse(String),
    #[error("step budget of {budget} actions exhausted after {at_seconds} virtual seconds")]
    StepBudgetExceeded { budget: u64, at_seconds: u64 },
    #[error("engine: {0}")]
    Engine(#[from] clawdlab::Error),
}

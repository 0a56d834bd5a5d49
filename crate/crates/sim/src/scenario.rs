//! Declarative scenario files.
//!
//! A scenario is a TOML document naming the lab, the agents that take part
//! and when they come online, the scripted payloads each policy hands in,
//! and the assertions evaluated once the run settles. See
//! `scenarios/README.md` for the full schema.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use clawdlab::domain::{GovernanceModel, RoleArchetype, TaskType};
use clawdlab::providers::DatasetRef;
use serde::{Deserialize, Serialize};

use crate::SimError;

pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_step_budget")]
    pub step_budget: u64,
    /// Virtual time after which the run stops even if it has not settled.
    #[serde(default = "default_horizon")]
    pub horizon_seconds: u64,
    #[serde(default = "default_start")]
    pub start_millis: u64,
    /// The PI leaves a completed task alone this long so critics get a
    /// look before verification.
    #[serde(default = "default_review_delay")]
    pub review_delay_seconds: u64,
    /// Wave-two literature tasks are proposed once this many wave-one
    /// tasks have been completed.
    #[serde(default = "default_followup")]
    pub followup_after_completed: usize,
    pub lab: LabSpec,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub literature: Vec<LiteratureSpec>,
    #[serde(default)]
    pub analysis: Vec<AnalysisSpec>,
    #[serde(default)]
    pub synthesis: Option<SynthesisSpec>,
    #[serde(default)]
    pub critique: Option<CritiqueSpec>,
    #[serde(default)]
    pub sybil: SybilSpec,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

fn default_step_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

fn default_horizon() -> u64 {
    6 * 3600
}

fn default_start() -> u64 {
    1_700_000_000_000
}

fn default_review_delay() -> u64 {
    120
}

fn default_followup() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabSpec {
    pub name: String,
    #[serde(default = "default_governance")]
    pub governance: GovernanceModel,
    #[serde(default)]
    pub vote_window_seconds: Option<u64>,
    pub state: StateSpec,
}

fn default_governance() -> GovernanceModel {
    GovernanceModel::PiLed
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub title: String,
    pub hypothesis: String,
    #[serde(default)]
    pub objectives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub role: RoleArchetype,
    #[serde(default)]
    pub join_at_seconds: u64,
    /// Comes online once this many literature reviews are accepted;
    /// overrides `join_at_seconds`.
    #[serde(default)]
    pub join_after_accepted: Option<usize>,
    /// Hands in work without any provider evidence.
    #[serde(default)]
    pub sloppy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiteratureSpec {
    pub title: String,
    #[serde(default = "default_wave")]
    pub wave: u8,
    pub query: String,
    pub sources: BTreeSet<String>,
    #[serde(default = "default_limit")]
    pub limit: u32,
    pub summary: String,
    /// Entry identifiers placed in the result's `bibliography`.
    pub bibliography: Vec<String>,
}

fn default_wave() -> u8 {
    1
}

fn default_limit() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub title: String,
    pub summary: String,
    #[serde(default)]
    pub dataset_refs: Vec<DatasetRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub title: String,
    /// Accepted literature reviews the PI waits for before proposing.
    #[serde(default = "default_followup")]
    pub after_accepted: usize,
    pub summary: String,
    pub document_title: String,
    #[serde(default = "default_media_type")]
    pub document_media_type: String,
    pub document: String,
}

fn default_media_type() -> String {
    "text/markdown".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CritiqueSpec {
    /// Title of the literature task the critic objects to.
    pub target: String,
    pub issues: Vec<String>,
}

/// Payloads for sybil scouts doing real work, handed out round-robin.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SybilSpec {
    #[serde(default)]
    pub reviews: Vec<LiteratureSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    TaskCount {
        task_type: TaskType,
        equals: usize,
    },
    AcceptedCount {
        task_type: TaskType,
        at_least: usize,
    },
    /// The accepted synthesis cites at least this many accepted sources.
    SynthesisSources {
        at_least: usize,
    },
    DocumentCount {
        equals: usize,
    },
    /// From the agent coming online to its `task_completed` event.
    JoinToCompletion {
        agent: String,
        at_most_seconds: u64,
    },
    HumanActions {
        equals: usize,
    },
    NoUnverifiedAccepted {},
    /// Every accepted task shows verify, then a PI-opened vote, then the
    /// resolution, in that order.
    AuditTrail {},
    PollIntervals {
        min_seconds: u64,
        max_seconds: u64,
    },
    /// One `task_completed` event per task that ever reached completed.
    CompletedEventsMatch {},
}

impl Assertion {
    pub fn label(&self) -> String {
        match self {
            Assertion::TaskCount { task_type, equals } => format!("task_count {task_type} == {equals}"),
            Assertion::AcceptedCount { task_type, at_least } => {
                format!("accepted_count {task_type} >= {at_least}")
            }
            Assertion::SynthesisSources { at_least } => format!("synthesis_sources >= {at_least}"),
            Assertion::DocumentCount { equals } => format!("document_count == {equals}"),
            Assertion::JoinToCompletion { agent, at_most_seconds } => {
                format!("join_to_completion {agent} <= {at_most_seconds}s")
            }
            Assertion::HumanActions { equals } => format!("human_actions == {equals}"),
            Assertion::NoUnverifiedAccepted {} => "no_unverified_accepted".into(),
            Assertion::AuditTrail {} => "audit_trail".into(),
            Assertion::PollIntervals {
                min_seconds,
                max_seconds,
            } => {
                format!("poll_intervals in [{min_seconds}, {max_seconds}]s")
            }
            Assertion::CompletedEventsMatch {} => "completed_events_match".into(),
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| SimError::ScenarioParse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::ScenarioParse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The protein-annotation scenario shipped with the crate.
    pub fn protein() -> Self {
        Self::parse(PROTEIN).expect("shipped scenario is well-formed")
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::ScenarioParse(msg));
        if self.step_budget == 0 {
            return bad("step_budget must be positive".into());
        }
        let pis = self
            .agents
            .iter()
            .filter(|a| a.role == RoleArchetype::PrincipalInvestigator)
            .count();
        if pis != 1 {
            return bad(format!("expected exactly one principal_investigator, found {pis}"));
        }
        let pi = self
            .agents
            .iter()
            .find(|a| a.role == RoleArchetype::PrincipalInvestigator);
        if pi.is_some_and(|a| a.join_at_seconds != 0 || a.join_after_accepted.is_some()) {
            return bad("the principal investigator must be online from the start".into());
        }
        let mut names = BTreeSet::new();
        for a in &self.agents {
            if !names.insert(a.name.as_str()) {
                return bad(format!("duplicate agent name {}", a.name));
            }
        }
        let mut titles: BTreeMap<&str, ()> = BTreeMap::new();
        for l in self.literature.iter().chain(&self.sybil.reviews) {
            if titles.insert(l.title.as_str(), ()).is_some() {
                return bad(format!("duplicate literature title {}", l.title));
            }
            if !(1..=2).contains(&l.wave) {
                return bad(format!("{}: wave must be 1 or 2", l.title));
            }
            if l.bibliography.is_empty() {
                return bad(format!("{}: empty bibliography", l.title));
            }
        }
        for a in &self.analysis {
            if titles.insert(a.title.as_str(), ()).is_some() {
                return bad(format!("duplicate task title {}", a.title));
            }
        }
        let has = |role| self.agents.iter().any(|a| a.role == role);
        if has(RoleArchetype::Synthesizer) && self.synthesis.is_none() {
            return bad("a synthesizer needs a [synthesis] section".into());
        }
        if let Some(c) = &self.critique {
            if !self.literature.iter().any(|l| l.title == c.target) {
                return bad(format!("critique target {} is not a literature task", c.target));
            }
            if !has(RoleArchetype::Critic) {
                return bad("a [critique] section needs a critic".into());
            }
        }
        for a in &self.assertions {
            if let Assertion::JoinToCompletion { agent, .. } = a {
                if !names.contains(agent.as_str()) {
                    return bad(format!("assertion names unknown agent {agent}"));
                }
            }
        }
        Ok(())
    }

    pub fn literature_spec(&self, title: &str) -> Option<&LiteratureSpec> {
        self.literature.iter().find(|l| l.title == title)
    }

    pub fn analysis_spec(&self, title: &str) -> Option<&AnalysisSpec> {
        self.analysis.iter().find(|a| a.title == title)
    }
}

pub const PROTEIN: &str = include_str!("../scenarios/protein_annotation.toml");

//! Side-effect-free protocol rules: the closed enumerations, the
//! role/task-type permission matrix and the legal transition tables for
//! tasks and lab states.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleArchetype {
    PrincipalInvestigator,
    ResearchAnalyst,
    Scout,
    Critic,
    Synthesizer,
}

impl RoleArchetype {
    pub const ALL: [RoleArchetype; 5] = [
        RoleArchetype::PrincipalInvestigator,
        RoleArchetype::ResearchAnalyst,
        RoleArchetype::Scout,
        RoleArchetype::Critic,
        RoleArchetype::Synthesizer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleArchetype::PrincipalInvestigator => "principal_investigator",
            RoleArchetype::ResearchAnalyst => "research_analyst",
            RoleArchetype::Scout => "scout",
            RoleArchetype::Critic => "critic",
            RoleArchetype::Synthesizer => "synthesizer",
        }
    }
}

impl fmt::Display for RoleArchetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    LiteratureReview,
    Analysis,
    DeepResearch,
    Critique,
    Synthesis,
}

impl TaskType {
    pub const ALL: [TaskType; 5] = [
        TaskType::LiteratureReview,
        TaskType::Analysis,
        TaskType::DeepResearch,
        TaskType::Critique,
        TaskType::Synthesis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::LiteratureReview => "literature_review",
            TaskType::Analysis => "analysis",
            TaskType::DeepResearch => "deep_research",
            TaskType::Critique => "critique",
            TaskType::Synthesis => "synthesis",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Proposed,
    InProgress,
    Completed,
    CritiquePeriod,
    Voting,
    Accepted,
    Rejected,
    Superseded,
}

impl TaskStatus {
    pub const ALL: [TaskStatus; 8] = [
        TaskStatus::Proposed,
        TaskStatus::InProgress,
        TaskStatus::Completed,
        TaskStatus::CritiquePeriod,
        TaskStatus::Voting,
        TaskStatus::Accepted,
        TaskStatus::Rejected,
        TaskStatus::Superseded,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TaskStatus::Accepted | TaskStatus::Rejected | TaskStatus::Superseded
        )
    }

    /// Statuses in which a task carries a submitted result.
    pub fn has_result(self) -> bool {
        matches!(
            self,
            TaskStatus::Completed
                | TaskStatus::CritiquePeriod
                | TaskStatus::Voting
                | TaskStatus::Accepted
                | TaskStatus::Rejected
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Proposed => "proposed",
            TaskStatus::InProgress => "in_progress",
            TaskStatus::Completed => "completed",
            TaskStatus::CritiquePeriod => "critique_period",
            TaskStatus::Voting => "voting",
            TaskStatus::Accepted => "accepted",
            TaskStatus::Rejected => "rejected",
            TaskStatus::Superseded => "superseded",
        }
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabStateStatus {
    Draft,
    Active,
    Proven,
    Disproven,
    Pivoted,
    Inconclusive,
}

impl LabStateStatus {
    pub const ALL: [LabStateStatus; 6] = [
        LabStateStatus::Draft,
        LabStateStatus::Active,
        LabStateStatus::Proven,
        LabStateStatus::Disproven,
        LabStateStatus::Pivoted,
        LabStateStatus::Inconclusive,
    ];

    pub const CONCLUSIONS: [LabStateStatus; 4] = [
        LabStateStatus::Proven,
        LabStateStatus::Disproven,
        LabStateStatus::Pivoted,
        LabStateStatus::Inconclusive,
    ];

    pub fn is_conclusion(self) -> bool {
        Self::CONCLUSIONS.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabStateStatus::Draft => "draft",
            LabStateStatus::Active => "active",
            LabStateStatus::Proven => "proven",
            LabStateStatus::Disproven => "disproven",
            LabStateStatus::Pivoted => "pivoted",
            LabStateStatus::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for LabStateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exact rational in (0, 1], stored as `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u32, u32)", into = "(u32, u32)")]
pub struct QuorumFraction {
    numerator: u32,
    denominator: u32,
}

impl QuorumFraction {
    pub const HALF: QuorumFraction = QuorumFraction {
        numerator: 1,
        denominator: 2,
    };

    pub fn new(numerator: u32, denominator: u32) -> Result<Self, InvalidFraction> {
        if numerator == 0 || denominator == 0 || numerator > denominator {
            return Err(InvalidFraction { numerator, denominator });
        }
        Ok(Self { numerator, denominator })
    }

    pub fn numerator(self) -> u32 {
        self.numerator
    }

    pub fn denominator(self) -> u32 {
        self.denominator
    }

    /// `ceil(self * n)` in integer arithmetic.
    pub fn ceil_mul(self, n: u64) -> u64 {
        (u64::from(self.numerator) * n).div_ceil(u64::from(self.denominator))
    }
}

impl TryFrom<(u32, u32)> for QuorumFraction {
    type Error = InvalidFraction;

    fn try_from((n, d): (u32, u32)) -> Result<Self, Self::Error> {
        QuorumFraction::new(n, d)
    }
}

impl From<QuorumFraction> for (u32, u32) {
    fn from(q: QuorumFraction) -> Self {
        (q.numerator, q.denominator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("quorum fraction {numerator}/{denominator} is not in (0, 1]")]
pub struct InvalidFraction {
    pub numerator: u32,
    pub denominator: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GovernanceModel {
    PiLed,
    Democratic { quorum_fraction: QuorumFraction },
    Consensus,
}

impl GovernanceModel {
    pub const fn label(&self) -> &'static str {
        match self {
            GovernanceModel::PiLed => "pi_led",
            GovernanceModel::Democratic { .. } => "democratic",
            GovernanceModel::Consensus => "consensus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteValue {
    Approve,
    Reject,
    Abstain,
}

impl VoteValue {
    pub fn is_substantive(self) -> bool {
        matches!(self, VoteValue::Approve | VoteValue::Reject)
    }
}

/// The hard role restrictions. Only the PI may execute every task type.
pub fn can_execute(role: RoleArchetype, task_type: TaskType) -> bool {
    use RoleArchetype::*;
    use TaskType::*;
    match role {
        PrincipalInvestigator => true,
        ResearchAnalyst => matches!(task_type, Analysis | DeepResearch),
        Scout => task_type == LiteratureReview,
        Critic => task_type == Critique,
        Synthesizer => task_type == Synthesis,
    }
}

pub fn permitted_task_types(role: RoleArchetype) -> Vec<TaskType> {
    TaskType::ALL.into_iter().filter(|t| can_execute(role, *t)).collect()
}

pub fn task_transition_allowed(from: TaskStatus, to: TaskStatus) -> bool {
    use TaskStatus::*;
    if from.is_terminal() {
        return false;
    }
    match (from, to) {
        (_, Superseded) => true,
        (Proposed, InProgress) | (InProgress, Completed) => true,
        (Completed, CritiquePeriod | Voting) => true,
        (CritiquePeriod, Completed | Rejected) => true,
        // voting -> completed is the void path when the window lapses without quorum
        (Voting, Accepted | Rejected | Completed) => true,
        _ => false,
    }
}

pub fn state_transition_allowed(from: LabStateStatus, to: LabStateStatus) -> bool {
    use LabStateStatus::*;
    match from {
        Draft => to == Active,
        Active => to.is_conclusion(),
        _ => false,
    }
}

use thiserror::Error;

use crate::domain::{LabStateStatus, RoleArchetype, TaskStatus, TaskType};

/// Every failure a protocol operation can report. `code()` is the stable
/// machine string exposed on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid or missing credentials")]
    Unauthorized,
    #[error("human observers cannot perform this action")]
    HumanForbidden,
    #[error("agent {0} is not registered")]
    UnknownAgent(String),
    #[error("lab {0} does not exist")]
    UnknownLab(String),
    #[error("lab state {0} does not exist")]
    UnknownState(String),
    #[error("task {0} does not exist")]
    UnknownTask(String),
    #[error("critique {0} does not exist")]
    UnknownCritique(String),
    #[error("provider job {0} does not exist")]
    UnknownJob(String),
    #[error("forum post {0} does not exist")]
    UnknownPost(String),
    #[error("suggestion {0} does not exist")]
    UnknownSuggestion(String),
    #[error("discussion message {0} does not exist")]
    UnknownMessage(String),
    #[error("document {0} does not exist")]
    UnknownDocument(String),
    #[error("forum post already claimed")]
    PostAlreadyClaimed,
    #[error("forum post has {upvotes} upvotes, {required} required to claim")]
    InsufficientInterest { upvotes: usize, required: usize },
    #[error("only the lab's principal investigator may do this")]
    NotPI,
    #[error("agent is already a member of this lab")]
    AlreadyMember,
    #[error("actor is not a member of this lab")]
    NotMember,
    #[error("lab state cannot move from {from} to {to}")]
    IllegalStateTransition { from: LabStateStatus, to: LabStateStatus },
    #[error("lab has no active state")]
    NoActiveState,
    #[error("role {role} may not execute {task_type} tasks")]
    RoleForbidden { role: RoleArchetype, task_type: TaskType },
    #[error("task is already claimed")]
    AlreadyClaimed,
    #[error("agent has no fresh heartbeat")]
    StaleAgent,
    #[error("only the task's assignee may do this")]
    NotAssignee,
    #[error("task cannot move from {from} to {to}")]
    IllegalTransition { from: TaskStatus, to: TaskStatus },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("critique must list at least one issue")]
    EmptyIssues,
    #[error("critique is already closed")]
    CritiqueClosed,
    #[error("task has unresolved critiques")]
    UnresolvedCritique,
    #[error("task lacks a passing verification record")]
    VerificationMissingOrFailed,
    #[error("task is not open for voting")]
    VoteClosed,
    #[error("invalid literature query: {0}")]
    InvalidQuery(String),
    #[error("invalid analysis request: {0}")]
    InvalidRequest(String),
    #[error("provider job is not queued")]
    IllegalJobState,
    #[error("suggestion is no longer open")]
    SuggestionClosed,
    #[error("document content is empty")]
    EmptyContent,
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub const ALL_CODES: [&'static str; 39] = [
        "Unauthorized",
        "HumanForbidden",
        "UnknownAgent",
        "UnknownLab",
        "UnknownState",
        "UnknownTask",
        "UnknownCritique",
        "UnknownJob",
        "UnknownPost",
        "UnknownSuggestion",
        "UnknownMessage",
        "UnknownDocument",
        "PostAlreadyClaimed",
        "InsufficientInterest",
        "NotPI",
        "AlreadyMember",
        "NotMember",
        "IllegalStateTransition",
        "NoActiveState",
        "RoleForbidden",
        "AlreadyClaimed",
        "StaleAgent",
        "NotAssignee",
        "IllegalTransition",
        "DanglingReference",
        "EmptyIssues",
        "CritiqueClosed",
        "UnresolvedCritique",
        "VerificationMissingOrFailed",
        "VoteClosed",
        "InvalidQuery",
        "InvalidRequest",
        "IllegalJobState",
        "SuggestionClosed",
        "EmptyContent",
        "InvalidPayload",
        "Storage",
        // reserved for the service layer
        "NotFound",
        "Internal",
    ];

    pub fn code(&self) -> &'static str {
        match self {
            Error::Unauthorized => "Unauthorized",
            Error::HumanForbidden => "HumanForbidden",
            Error::UnknownAgent(_) => "UnknownAgent",
            Error::UnknownLab(_) => "UnknownLab",
            Error::UnknownState(_) => "UnknownState",
            Error::UnknownTask(_) => "UnknownTask",
            Error::UnknownCritique(_) => "UnknownCritique",
            Error::UnknownJob(_) => "UnknownJob",
            Error::UnknownPost(_) => "UnknownPost",
            Error::UnknownSuggestion(_) => "UnknownSuggestion",
            Error::UnknownMessage(_) => "UnknownMessage",
            Error::UnknownDocument(_) => "UnknownDocument",
            Error::PostAlreadyClaimed => "PostAlreadyClaimed",
            Error::InsufficientInterest { .. } => "InsufficientInterest",
            Error::NotPI => "NotPI",
            Error::AlreadyMember => "AlreadyMember",
            Error::NotMember => "NotMember",
            Error::IllegalStateTransition { .. } => "IllegalStateTransition",
            Error::NoActiveState => "NoActiveState",
            Error::RoleForbidden { .. } => "RoleForbidden",
            Error::AlreadyClaimed => "AlreadyClaimed",
            Error::StaleAgent => "StaleAgent",
            Error::NotAssignee => "NotAssignee",
            Error::IllegalTransition { .. } => "IllegalTransition",
            Error::DanglingReference(_) => "DanglingReference",
            Error::EmptyIssues => "EmptyIssues",
            Error::CritiqueClosed => "CritiqueClosed",
            Error::UnresolvedCritique => "UnresolvedCritique",
            Error::VerificationMissingOrFailed => "VerificationMissingOrFailed",
            Error::VoteClosed => "VoteClosed",
            Error::InvalidQuery(_) => "InvalidQuery",
            Error::InvalidRequest(_) => "InvalidRequest",
            Error::IllegalJobState => "IllegalJobState",
            Error::SuggestionClosed => "SuggestionClosed",
            Error::EmptyContent => "EmptyContent",
            Error::InvalidPayload(_) => "InvalidPayload",
            Error::Storage(_) => "Storage",
        }
    }

    /// HTTP status for the wire mapping: 401 auth, 403 role or principal
    /// kind, 404 unknown ids, 409 illegal transitions, 422 bad payloads.
    pub fn http_status(&self) -> u16 {
        match self {
            Error::Unauthorized => 401,
            Error::HumanForbidden
            | Error::NotPI
            | Error::NotMember
            | Error::RoleForbidden { .. }
            | Error::NotAssignee
            | Error::StaleAgent => 403,
            Error::UnknownAgent(_)
            | Error::UnknownLab(_)
            | Error::UnknownState(_)
            | Error::UnknownTask(_)
            | Error::UnknownCritique(_)
            | Error::UnknownJob(_)
            | Error::UnknownPost(_)
            | Error::UnknownSuggestion(_)
            | Error::UnknownMessage(_)
            | Error::UnknownDocument(_) => 404,
            Error::PostAlreadyClaimed
            | Error::InsufficientInterest { .. }
            | Error::AlreadyMember
            | Error::IllegalStateTransition { .. }
            | Error::NoActiveState
            | Error::AlreadyClaimed
            | Error::IllegalTransition { .. }
            | Error::CritiqueClosed
            | Error::UnresolvedCritique
            | Error::VerificationMissingOrFailed
            | Error::VoteClosed
            | Error::IllegalJobState
            | Error::SuggestionClosed => 409,
            Error::DanglingReference(_)
            | Error::EmptyIssues
            | Error::InvalidQuery(_)
            | Error::InvalidRequest(_)
            | Error::EmptyContent
            | Error::InvalidPayload(_) => 422,
            Error::Storage(_) => 500,
        }
    }
}

//! The wire error codes are frozen: this compares every code and its HTTP
//! status with `tests/fixtures/error_codes.txt`.

use std::collections::BTreeSet;

use clawdlab::domain::{LabStateStatus, RoleArchetype, TaskStatus, TaskType};
use clawdlab::Error;
use clawdlab_server::ApiError;

fn samples() -> Vec<Error> {
    let s = || "x".to_string();
    vec![
        Error::Unauthorized,
        Error::HumanForbidden,
        Error::UnknownAgent(s()),
        Error::UnknownLab(s()),
        Error::UnknownState(s()),
        Error::UnknownTask(s()),
        Error::UnknownCritique(s()),
        Error::UnknownJob(s()),
        Error::UnknownPost(s()),
        Error::UnknownSuggestion(s()),
        Error::UnknownMessage(s()),
        Error::UnknownDocument(s()),
        Error::PostAlreadyClaimed,
        Error::InsufficientInterest {
            upvotes: 2,
            required: 3,
        },
        Error::NotPI,
        Error::AlreadyMember,
        Error::NotMember,
        Error::IllegalStateTransition {
            from: LabStateStatus::Draft,
            to: LabStateStatus::Proven,
        },
        Error::NoActiveState,
        Error::RoleForbidden {
            role: RoleArchetype::Scout,
            task_type: TaskType::Analysis,
        },
        Error::AlreadyClaimed,
        Error::StaleAgent,
        Error::NotAssignee,
        Error::IllegalTransition {
            from: TaskStatus::Proposed,
            to: TaskStatus::Accepted,
        },
        Error::DanglingReference(s()),
        Error::EmptyIssues,
        Error::CritiqueClosed,
        Error::UnresolvedCritique,
        Error::VerificationMissingOrFailed,
        Error::VoteClosed,
        Error::InvalidQuery(s()),
        Error::InvalidRequest(s()),
        Error::IllegalJobState,
        Error::SuggestionClosed,
        Error::EmptyContent,
        Error::InvalidPayload(s()),
        Error::Storage(s()),
    ]
}

#[test]
fn error_codes_match_snapshot() {
    let mut lines: Vec<String> = samples()
        .into_iter()
        .map(|e| {
            let api = ApiError::from(e);
            format!("{} {}", api.code, api.status.as_u16())
        })
        .collect();
    for extra in [ApiError::not_found("x"), ApiError::internal("x")] {
        lines.push(format!("{} {}", extra.code, extra.status.as_u16()));
    }
    let table = lines.join("\n") + "\n";
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/error_codes.txt");
    if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
        std::fs::write(path, &table).unwrap();
    }
    assert_eq!(table, std::fs::read_to_string(path).unwrap());

    let listed: BTreeSet<&str> = Error::ALL_CODES.into_iter().collect();
    let produced: BTreeSet<&str> = lines.iter().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(listed, produced);
    assert_eq!(listed.len(), Error::ALL_CODES.len(), "codes are unique");
}

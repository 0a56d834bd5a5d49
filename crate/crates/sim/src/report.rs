use std::collections::{BTreeMap, BTreeSet};

use clawdlab::domain::{TaskStatus, TaskType};
use clawdlab::ids::{ActorId, AgentId, LabId, TaskId, MILLIS_PER_SECOND};
use clawdlab::{ActorKind, Engine, EventBody, EventKind};
use serde::{Deserialize, Serialize};

use crate::runner::SybilPopulation;
use crate::scenario::{Assertion, Scenario};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    /// Agent actions, successful or not. This is what the step budget caps.
    pub steps: u64,
    pub reads: u64,
    /// Successful protocol mutations, including the system's own (job
    /// completion, vote resolution and expiry).
    pub mutations: u64,
    /// Registrations and heartbeats; these touch the agent registry, not
    /// the activity log.
    pub registry_ops: u64,
    /// Refused actions by error code.
    pub rejected: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloodCounts {
    /// Ballots and vote openings sybil voters aimed at completed tasks.
    pub attempts: u64,
    /// How many of those the service accepted.
    pub landed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub assertion: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub sybils: Option<SybilPopulation>,
    pub final_state_hash: String,
    /// True when the run stopped because nothing was left to move, false
    /// when it hit the horizon.
    pub settled: bool,
    pub virtual_duration_seconds: u64,
    pub wakes: u64,
    pub events: u64,
    pub event_counts: BTreeMap<String, u64>,
    pub actions: ActionCounts,
    pub flood: FloodCounts,
    /// Smallest and largest gap between two wake-ups of the same agent.
    pub poll_interval_seconds: Option<(u64, u64)>,
    pub online_at_seconds: BTreeMap<String, u64>,
    pub accepted_tasks: Vec<TaskId>,
    pub unverified_accepted: Vec<TaskId>,
    /// Literature reviews that reached completed at some point.
    pub completed_literature: usize,
    pub assertions: Vec<AssertionOutcome>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub(crate) struct Inputs<'a> {
    pub scenario: &'a Scenario,
    pub seed: u64,
    pub sybils: Option<SybilPopulation>,
    pub engine: &'a Engine,
    pub lab: Option<&'a LabId>,
    pub agents: &'a BTreeMap<String, AgentId>,
    pub online_at_seconds: BTreeMap<String, u64>,
    pub intervals_ms: &'a [u64],
    pub counts: ActionCounts,
    pub flood: FloodCounts,
    pub wakes: u64,
    pub settled: bool,
    pub duration_ms: u64,
}

pub(crate) fn build(i: Inputs<'_>) -> SimReport {
    let engine = i.engine;
    let log = engine.log();
    let mut event_counts = BTreeMap::new();
    for e in log {
        *event_counts.entry(e.kind().as_str().to_owned()).or_default() += 1;
    }
    let tasks: Vec<_> = match i.lab {
        Some(lab) => engine.tasks_in_lab(lab).cloned().collect(),
        None => Vec::new(),
    };
    let accepted_tasks: Vec<TaskId> = tasks
        .iter()
        .filter(|t| t.status == TaskStatus::Accepted)
        .map(|t| t.task_id.clone())
        .collect();
    let unverified_accepted = accepted_tasks
        .iter()
        .filter(|id| !engine.verification(id).is_some_and(|v| v.passed_overall))
        .cloned()
        .collect();
    let completed_literature = tasks
        .iter()
        .filter(|t| t.task_type == TaskType::LiteratureReview && reached_completed(t))
        .count();
    let poll_interval_seconds = match (i.intervals_ms.iter().min(), i.intervals_ms.iter().max()) {
        (Some(lo), Some(hi)) => Some((lo / MILLIS_PER_SECOND, hi / MILLIS_PER_SECOND)),
        _ => None,
    };
    let mut report = SimReport {
        scenario: i.scenario.name.clone(),
        seed: i.seed,
        sybils: i.sybils,
        final_state_hash: engine.state_hash(),
        settled: i.settled,
        virtual_duration_seconds: i.duration_ms / MILLIS_PER_SECOND,
        wakes: i.wakes,
        events: log.len() as u64,
        event_counts,
        actions: i.counts.clone(),
        flood: i.flood,
        poll_interval_seconds,
        online_at_seconds: i.online_at_seconds.clone(),
        accepted_tasks,
        unverified_accepted,
        completed_literature,
        assertions: Vec::new(),
    };
    report.assertions = i
        .scenario
        .assertions
        .iter()
        .map(|a| {
            let (passed, detail) = evaluate(a, &i, &report);
            AssertionOutcome {
                assertion: a.label(),
                passed,
                detail,
            }
        })
        .collect();
    report
}

fn reached_completed(t: &clawdlab::tasklife::Task) -> bool {
    t.history.iter().any(|h| h.to == TaskStatus::Completed)
}

fn evaluate(a: &Assertion, i: &Inputs<'_>, r: &SimReport) -> (bool, String) {
    let engine = i.engine;
    let log = engine.log();
    let Some(lab) = i.lab else {
        return (false, "no lab was created".into());
    };
    let tasks: Vec<_> = engine.tasks_in_lab(lab).collect();
    match a {
        Assertion::TaskCount { task_type, equals } => {
            let n = tasks.iter().filter(|t| t.task_type == *task_type).count();
            (n == *equals, format!("{n}"))
        }
        Assertion::AcceptedCount { task_type, at_least } => {
            let n = tasks
                .iter()
                .filter(|t| t.task_type == *task_type && t.status == TaskStatus::Accepted)
                .count();
            (n >= *at_least, format!("{n}"))
        }
        Assertion::SynthesisSources { at_least } => {
            let best = tasks
                .iter()
                .filter(|t| t.task_type == TaskType::Synthesis && t.status == TaskStatus::Accepted)
                .filter_map(|t| t.result.as_ref())
                .map(|res| {
                    res.source_task_ids
                        .iter()
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .filter(|id| engine.task(id).is_ok_and(|s| s.status == TaskStatus::Accepted))
                        .count()
                })
                .max();
            match best {
                Some(n) => (n >= *at_least, format!("{n} accepted sources")),
                None => (false, "no accepted synthesis".into()),
            }
        }
        Assertion::DocumentCount { equals } => {
            let n = engine.list_documents(lab).map_or(0, |d| d.len());
            (n == *equals, format!("{n}"))
        }
        Assertion::JoinToCompletion { agent, at_most_seconds } => {
            let (Some(id), Some(online)) = (i.agents.get(agent), i.online_at_seconds.get(agent)) else {
                return (false, format!("{agent} never came online"));
            };
            let actor = ActorId::from(id);
            let Some(done) = log
                .iter()
                .find(|e| e.kind() == EventKind::TaskCompleted && e.actor == actor)
            else {
                return (false, format!("{agent} completed nothing"));
            };
            let span = (done.timestamp - i.scenario.start_millis) / MILLIS_PER_SECOND - online;
            (span <= *at_most_seconds, format!("{span}s"))
        }
        Assertion::HumanActions { equals } => {
            let n = log.iter().filter(|e| e.actor_kind == ActorKind::Human).count();
            (n == *equals, format!("{n}"))
        }
        Assertion::NoUnverifiedAccepted {} => {
            (r.unverified_accepted.is_empty(), format!("{:?}", r.unverified_accepted))
        }
        Assertion::AuditTrail {} => {
            let pi = engine.lab(lab).map(|l| ActorId::from(&l.pi_agent_id)).ok();
            let broken: Vec<&TaskId> = r
                .accepted_tasks
                .iter()
                .filter(|id| !audit_order_holds(log, id, pi.as_ref()))
                .collect();
            (
                broken.is_empty(),
                format!("{} accepted, broken: {broken:?}", r.accepted_tasks.len()),
            )
        }
        Assertion::PollIntervals {
            min_seconds,
            max_seconds,
        } => {
            let lo = min_seconds * MILLIS_PER_SECOND;
            let hi = max_seconds * MILLIS_PER_SECOND;
            let ok = i.intervals_ms.iter().all(|d| (lo..=hi).contains(d));
            (
                ok,
                format!(
                    "{} intervals, range {:?}",
                    i.intervals_ms.len(),
                    r.poll_interval_seconds
                ),
            )
        }
        Assertion::CompletedEventsMatch {} => {
            let events = log
                .iter()
                .filter(|e| e.kind() == EventKind::TaskCompleted && e.lab_id.as_ref() == Some(lab))
                .count();
            let completed = tasks.iter().filter(|t| reached_completed(t)).count();
            (events == completed, format!("{events} events, {completed} tasks"))
        }
    }
}

/// A passing verification, then a vote opened by the PI, then the
/// accepting resolution, all for the same task and in log order.
fn audit_order_holds(log: &[clawdlab::ActivityEvent], task: &TaskId, pi: Option<&ActorId>) -> bool {
    let mut stage = 0;
    for e in log.iter().filter(|e| e.body.task_id() == Some(task)) {
        match (&e.body, stage) {
            (EventBody::TaskVerified { record }, _) if record.passed_overall => stage = 1,
            (EventBody::VoteInitiated { .. }, 1) if Some(&e.actor) == pi => stage = 2,
            (
                EventBody::VoteResolved {
                    to: TaskStatus::Accepted,
                    ..
                },
                2,
            ) => return true,
            _ => {}
        }
    }
    false
}

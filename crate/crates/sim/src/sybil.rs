//! One operator, many agents: does it buy anything besides throughput?
//!
//! The base scenario is run three times: as scripted, with `k` extra
//! scouts that approve everything in sight, and with `k` extra scouts that
//! do honest stub-backed literature work.

use std::collections::BTreeSet;

use clawdlab::domain::TaskStatus;
use clawdlab::ids::TaskId;
use clawdlab::Engine;
use serde::{Deserialize, Serialize};

use crate::report::SimReport;
use crate::runner::{simulate, SybilKind, SybilPopulation};
use crate::scenario::Scenario;
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SybilReport {
    pub sybils: usize,
    pub seed: u64,
    pub baseline: SimReport,
    pub flooding: SimReport,
    pub workers: SimReport,
    /// Tasks accepted in exactly one of the baseline and flooding runs.
    pub accepted_difference: Vec<TaskId>,
    /// Tasks in the flooding run that failed verification yet reached
    /// voting at some point.
    pub failed_verification_voted: Vec<TaskId>,
    pub holds: bool,
}

pub fn run_sybil_experiment(scenario: &Scenario, sybils: usize, seed: u64) -> Result<SybilReport, SimError> {
    let base = simulate(scenario, seed, None)?;
    let (flooding, failed_verification_voted) = if sybils == 0 {
        (base.report.clone(), failed_but_voted(&base.engine))
    } else {
        let run = simulate(
            scenario,
            seed,
            Some(SybilPopulation {
                kind: SybilKind::Voter,
                count: sybils,
            }),
        )?;
        let voted = failed_but_voted(&run.engine);
        (run.report, voted)
    };
    let workers = if sybils == 0 {
        base.report.clone()
    } else {
        simulate(
            scenario,
            seed,
            Some(SybilPopulation {
                kind: SybilKind::Worker,
                count: sybils,
            }),
        )?
        .report
    };
    let baseline = base.report;

    let a: BTreeSet<&TaskId> = baseline.accepted_tasks.iter().collect();
    let b: BTreeSet<&TaskId> = flooding.accepted_tasks.iter().collect();
    let accepted_difference: Vec<TaskId> = a.symmetric_difference(&b).map(|t| (*t).clone()).collect();

    let holds = [&baseline, &flooding, &workers]
        .iter()
        .all(|r| r.unverified_accepted.is_empty())
        && accepted_difference.is_empty()
        && failed_verification_voted.is_empty()
        && flooding.flood.landed == 0
        && workers.completed_literature >= baseline.completed_literature;
    Ok(SybilReport {
        sybils,
        seed,
        baseline,
        flooding,
        workers,
        accepted_difference,
        failed_verification_voted,
        holds,
    })
}

fn failed_but_voted(engine: &Engine) -> Vec<TaskId> {
    engine
        .state()
        .tasks
        .values()
        .filter(|t| engine.verification(&t.task_id).is_some_and(|v| !v.passed_overall))
        .filter(|t| t.history.iter().any(|h| h.to == TaskStatus::Voting))
        .map(|t| t.task_id.clone())
        .collect()
}

//! Seeded random operation sequences over labs, lab states and tasks.
//!
//! Operations are drawn with no regard for whether they make sense, so
//! most are refused. The driver records what it observed (every lab-state
//! status change, every task history edge, the number of active states
//! per lab after each step) and leaves judging it to the caller.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use clawdlab::docstore::InMemoryStore;
use clawdlab::domain::{
    GovernanceModel, LabStateStatus, QuorumFraction, RoleArchetype, TaskStatus, TaskType, VoteValue,
};
use clawdlab::governance::NewLab;
use clawdlab::ids::{AgentId, CritiqueId, DocumentId, JobId, LabId, StateId, TaskId};
use clawdlab::providers::{LiteratureQuery, ProviderSet};
use clawdlab::state::ProtocolState;
use clawdlab::tasklife::{CritiqueDisposition, TaskResult};
use clawdlab::{Engine, EngineConfig, VirtualClock};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::SimError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FuzzTrace {
    pub seed: u64,
    pub steps: usize,
    pub accepted_ops: usize,
    pub events: usize,
    /// Status of each lab state when first seen.
    pub state_entries: BTreeSet<LabStateStatus>,
    pub state_edges: BTreeSet<(LabStateStatus, LabStateStatus)>,
    /// First status in each task history.
    pub task_entries: BTreeSet<TaskStatus>,
    pub task_edges: BTreeSet<(TaskStatus, TaskStatus)>,
    /// Most active states any one lab had after any step.
    pub max_active_states: usize,
    pub accepted_without_passing_verification: usize,
    /// Folding the log from scratch gives the live state.
    pub replay_matches: bool,
}

struct World {
    engine: Engine,
    clock: VirtualClock,
    agents: Vec<AgentId>,
    labs: Vec<(LabId, AgentId)>,
    jobs: BTreeMap<LabId, JobId>,
    docs: Vec<(LabId, DocumentId)>,
}

pub fn fuzz_sequence(seed: u64, steps: usize) -> Result<FuzzTrace, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = FuzzTrace {
        seed,
        steps,
        ..FuzzTrace::default()
    };
    let mut seen = BTreeMap::new();
    let mut w = setup(seed, &mut rng, &mut trace, &mut seen)?;
    for _ in 0..steps {
        let before = w.engine.log().len();
        step(&mut w, &mut rng);
        if w.engine.log().len() > before {
            trace.accepted_ops += 1;
        }
        seen = observe_states(&w.engine, &seen, &mut trace);
    }
    for task in w.engine.state().tasks.values() {
        if let Some(first) = task.history.first() {
            trace.task_entries.insert(first.to);
        }
        for pair in task.history.windows(2) {
            trace.task_edges.insert((pair[0].to, pair[1].to));
        }
        if task.status == TaskStatus::Accepted
            && !w.engine.verification(&task.task_id).is_some_and(|v| v.passed_overall)
        {
            trace.accepted_without_passing_verification += 1;
        }
    }
    trace.events = w.engine.log().len();
    trace.replay_matches = ProtocolState::replay(w.engine.log()).is_ok_and(|s| s == *w.engine.state());
    Ok(trace)
}

fn setup(
    seed: u64,
    rng: &mut ChaCha8Rng,
    trace: &mut FuzzTrace,
    seen: &mut BTreeMap<StateId, LabStateStatus>,
) -> Result<World, SimError> {
    let clock = VirtualClock::new(1_700_000_000_000);
    let mut engine = Engine::builder()
        .config(EngineConfig::default())
        .clock(Arc::new(clock.clone()))
        .store(Box::new(InMemoryStore::new()))
        .providers(ProviderSet::stub())
        .seed(seed)
        .build()?;
    let mut agents = Vec::new();
    for name in ["pi-a", "pi-b", "scout", "critic", "analyst", "synth", "outsider"] {
        let id = engine.register_agent(name, "")?.agent.agent_id;
        engine.heartbeat(&id)?;
        agents.push(id);
    }
    let governance = [
        GovernanceModel::PiLed,
        GovernanceModel::Consensus,
        GovernanceModel::Democratic {
            quorum_fraction: QuorumFraction::new(2, 3).expect("valid fraction"),
        },
    ];
    let roles = [
        (2, RoleArchetype::Scout),
        (3, RoleArchetype::Critic),
        (4, RoleArchetype::ResearchAnalyst),
        (5, RoleArchetype::Synthesizer),
    ];
    let mut labs = Vec::new();
    let mut jobs = BTreeMap::new();
    for pi in [0, 1] {
        let mut new = NewLab::pi_led(format!("lab-{pi}"));
        new.governance = *governance.choose(rng).expect("non-empty");
        new.vote_window_seconds = Some(rng.random_range(60..=600));
        let pi_id = agents[pi].clone();
        let lab = engine.create_lab(&pi_id, new)?.lab_id;
        for (i, role) in roles {
            if pi == 0 || rng.random_bool(0.5) {
                engine.add_member(&lab, &agents[i], role, &pi_id)?;
            }
        }
        if !engine.lab(&lab)?.is_member(&agents[2]) {
            engine.add_member(&lab, &agents[2], RoleArchetype::Scout, &pi_id)?;
        }
        let state = engine.create_state(&lab, "opening", "h", vec![], &pi_id)?.state_id;
        *seen = observe_states(&engine, seen, trace);
        engine.activate_state(&state, &pi_id)?;
        *seen = observe_states(&engine, seen, trace);
        let query = LiteratureQuery {
            research_question: "protein annotation".into(),
            source_databases: ["pubmed".to_string()].into(),
            result_limit: 3,
        };
        let job = engine.submit_literature_job(&agents[2], &lab, query)?.job_id;
        engine.execute_job(&job)?;
        jobs.insert(lab.clone(), job);
        labs.push((lab, pi_id));
    }
    Ok(World {
        engine,
        clock,
        agents,
        labs,
        jobs,
        docs: Vec::new(),
    })
}

fn observe_states(
    engine: &Engine,
    prev: &BTreeMap<StateId, LabStateStatus>,
    trace: &mut FuzzTrace,
) -> BTreeMap<StateId, LabStateStatus> {
    let now: BTreeMap<StateId, LabStateStatus> = engine
        .state()
        .states
        .iter()
        .map(|(id, s)| (id.clone(), s.status))
        .collect();
    let mut active: BTreeMap<&LabId, usize> = BTreeMap::new();
    for s in engine.state().states.values() {
        if s.status == LabStateStatus::Active {
            *active.entry(&s.lab_id).or_default() += 1;
        }
    }
    trace.max_active_states = trace.max_active_states.max(active.values().copied().max().unwrap_or(0));
    for (id, status) in &now {
        match prev.get(id) {
            None => {
                trace.state_entries.insert(*status);
            }
            Some(old) if old != status => {
                trace.state_edges.insert((*old, *status));
            }
            Some(_) => {}
        }
    }
    now
}

fn step(w: &mut World, rng: &mut ChaCha8Rng) {
    let (lab, pi) = w.labs.choose(rng).expect("two labs").clone();
    // half the time act as the lab's PI so privileged operations get through
    let actor = if rng.random_bool(0.5) {
        pi.clone()
    } else {
        w.agents.choose(rng).expect("agents").clone()
    };
    let tasks: Vec<TaskId> = w.engine.state().tasks.keys().cloned().collect();
    let states: Vec<StateId> = w.engine.state().states.keys().cloned().collect();
    let critiques: Vec<CritiqueId> = w.engine.state().critiques.keys().cloned().collect();
    let task = tasks.choose(rng).cloned();
    let e = &mut w.engine;
    // results are ignored: refusals are the common case
    match rng.random_range(0..15) {
        0 => {
            let _ = e.create_state(&lab, "next", "h", vec!["o".into()], &actor);
        }
        1 => {
            if let Some(s) = states.choose(rng) {
                let _ = e.activate_state(s, &actor);
            }
        }
        2 => {
            if let Some(s) = states.choose(rng) {
                let to = *LabStateStatus::ALL.choose(rng).expect("statuses");
                let _ = e.conclude_state(s, to, &actor);
            }
        }
        3 | 4 => {
            let t = *TaskType::ALL.choose(rng).expect("types");
            let _ = e.propose_task(&lab, t, "task", "", &actor);
        }
        5 => {
            if let Some(t) = &task {
                let who = e.task(t).ok().map(|t| t.lab_id.clone());
                let claimant =
                    match who.and_then(|l| e.lab(&l).ok().map(|l| l.members.keys().cloned().collect::<Vec<_>>())) {
                        Some(members) if rng.random_bool(0.8) => members.choose(rng).cloned().unwrap_or(actor.clone()),
                        _ => actor.clone(),
                    };
                let _ = e.claim_task(t, &claimant);
            }
        }
        6 => {
            if let Some(t) = &task {
                let Ok(current) = e.task(t) else { return };
                let assignee = current.assignee.clone().unwrap_or(actor.clone());
                let task_lab = current.lab_id.clone();
                let result = random_result(rng, &w.jobs, &w.docs, &task_lab, &tasks);
                let who = if rng.random_bool(0.85) { assignee } else { actor };
                let _ = e.complete_task(t, &who, result);
            }
        }
        7 => {
            if let Some(t) = &task {
                let _ = e.file_critique(t, &actor, vec!["thin".into()], None);
            }
        }
        8 => {
            if let Some(c) = critiques.choose(rng) {
                let d = if rng.random_bool(0.5) {
                    CritiqueDisposition::Upheld
                } else {
                    CritiqueDisposition::Dismissed
                };
                let _ = e.resolve_critique(c, &actor, d, None);
            }
        }
        9 => {
            if let Some(t) = &task {
                let _ = e.verify_task(t, &actor);
            }
        }
        10 => {
            if let Some(t) = &task {
                let _ = e.initiate_vote(t, &actor, None);
            }
        }
        11 | 12 => {
            if let Some(t) = &task {
                let v = *[
                    VoteValue::Approve,
                    VoteValue::Approve,
                    VoteValue::Reject,
                    VoteValue::Abstain,
                ]
                .choose(rng)
                .expect("values");
                let _ = e.cast_vote(t, &actor, v);
            }
        }
        13 => {
            if let (Some(t), Some(s)) = (&task, tasks.choose(rng)) {
                let _ = e.supersede_task(t, &actor, s);
            }
        }
        _ => {
            if rng.random_bool(0.3) {
                if let Ok(d) = e.upload_document(&lab, &actor, "notes", b"# notes\n", "text/markdown") {
                    w.docs.push((lab.clone(), d.document_id));
                }
            }
            w.clock.advance_secs(rng.random_range(0..=400));
            for a in &w.agents {
                if rng.random_bool(0.7) {
                    let _ = e.heartbeat(a);
                }
            }
            for t in e.expired_votes() {
                let _ = e.expire_vote(&t);
            }
        }
    }
}

fn random_result(
    rng: &mut ChaCha8Rng,
    jobs: &BTreeMap<LabId, JobId>,
    docs: &[(LabId, DocumentId)],
    lab: &LabId,
    tasks: &[TaskId],
) -> TaskResult {
    let mut result = TaskResult {
        summary: "result".into(),
        ..TaskResult::default()
    };
    if rng.random_bool(0.7) {
        result.provider_job_ids.push(jobs[lab].clone());
        result
            .structured_payload
            .insert("bibliography".into(), json!([{ "id": "pubmed:36671220" }]));
    }
    if rng.random_bool(0.3) {
        result.source_task_ids = tasks.choose_multiple(rng, 3).cloned().collect();
        result.document_ids = docs.iter().filter(|(l, _)| l == lab).map(|(_, d)| d.clone()).collect();
    }
    result
}

//! The discrete-event loop and the scripted policies.
//!
//! Every agent owns a ChaCha stream derived from the run seed and its
//! position in the roster, so adding sybils never perturbs the jitter of
//! the scripted agents. Wake-ups sit in a min-heap keyed by
//! `(virtual time, insertion sequence)`; ties therefore resolve in
//! scheduling order and the whole run is a pure function of
//! `(scenario, seed)`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use clawdlab::dispatch::WorkBundle;
use clawdlab::docstore::InMemoryStore;
use clawdlab::domain::{RoleArchetype, TaskStatus, TaskType, VoteValue};
use clawdlab::governance::NewLab;
use clawdlab::ids::{AgentId, JobId, LabId, TaskId, Timestamp, MILLIS_PER_SECOND};
use clawdlab::providers::{AnalysisRequest, JobStatus, LiteratureQuery, ProviderSet};
use clawdlab::tasklife::{CritiqueDisposition, Task, TaskResult};
use clawdlab::{Clock, Engine, EngineConfig, VirtualClock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::report::{self, ActionCounts, FloodCounts, SimReport};
use crate::scenario::{AgentSpec, AnalysisSpec, LiteratureSpec, Scenario};
use crate::SimError;

pub const POLL_MIN_SECONDS: u64 = 45;
pub const POLL_MAX_SECONDS: u64 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SybilKind {
    /// Joins as a scout and approves everything it can, including tasks
    /// that never passed verification.
    Voter,
    /// Joins as a scout and does real stub-backed literature work.
    Worker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SybilPopulation {
    pub kind: SybilKind,
    pub count: usize,
}

#[derive(Debug, Clone)]
enum Behaviour {
    Scripted {
        sloppy: bool,
        join_after_accepted: Option<usize>,
    },
    Sybil {
        kind: SybilKind,
        index: usize,
    },
}

#[derive(Debug, Clone)]
enum Pending {
    Literature(LiteratureSpec),
    Analysis(AnalysisSpec),
}

#[derive(Debug, Default)]
struct Memory {
    job: Option<(TaskId, JobId, Pending)>,
    voted: BTreeSet<TaskId>,
    critique_done: bool,
    proposed: bool,
}

#[derive(Debug, Default)]
struct PiMemory {
    wave_two: bool,
    synthesis: bool,
    /// Tasks whose latest verification failed; left alone afterwards.
    failed: BTreeSet<TaskId>,
}

struct Member {
    name: String,
    role: RoleArchetype,
    behaviour: Behaviour,
    rng: ChaCha8Rng,
    id: Option<AgentId>,
    scheduled: bool,
    online_at: Option<Timestamp>,
    last_wake: Option<Timestamp>,
    mem: Memory,
}

#[derive(Clone, Copy)]
enum Call {
    Read,
    Mutation,
    Registry,
    /// Harness-side work standing in for the service's background worker;
    /// not an agent action, so it does not count against the budget.
    System,
}

/// A finished run: the report plus the engine it ran against, for callers
/// that want to inspect or persist the final state.
pub struct SimRun {
    pub report: SimReport,
    pub engine: Engine,
    pub agents: BTreeMap<String, AgentId>,
}

pub struct Simulation<'a> {
    scenario: &'a Scenario,
    seed: u64,
    sybils: Option<SybilPopulation>,
    engine: Engine,
    clock: VirtualClock,
    members: Vec<Member>,
    queue: BinaryHeap<Reverse<(Timestamp, u64, usize)>>,
    seq: u64,
    lab: Option<LabId>,
    pi_id: Option<AgentId>,
    applicants: Vec<(AgentId, RoleArchetype)>,
    pi: PiMemory,
    counts: ActionCounts,
    flood: FloodCounts,
    intervals_ms: Vec<u64>,
    wakes: u64,
}

/// Runs the scenario with its scripted cast only.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<SimReport, SimError> {
    Ok(simulate(scenario, seed, None)?.report)
}

pub fn simulate(scenario: &Scenario, seed: u64, sybils: Option<SybilPopulation>) -> Result<SimRun, SimError> {
    Simulation::new(scenario, seed, sybils)?.run()
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64, sybils: Option<SybilPopulation>) -> Result<Self, SimError> {
        let sybils = sybils.filter(|s| s.count > 0);
        if sybils.is_some_and(|s| s.kind == SybilKind::Worker) && scenario.sybil.reviews.is_empty() {
            return Err(SimError::ScenarioParse(
                "sybil workers need at least one [[sybil.reviews]] entry".into(),
            ));
        }
        let clock = VirtualClock::new(scenario.start_millis);
        let engine = Engine::builder()
            .config(EngineConfig::default())
            .clock(Arc::new(clock.clone()))
            .store(Box::new(InMemoryStore::new()))
            .providers(ProviderSet::stub())
            .seed(seed)
            .build()?;
        let stream = |i: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            rng
        };
        let mut members: Vec<Member> = scenario
            .agents
            .iter()
            .enumerate()
            .map(|(i, a): (usize, &AgentSpec)| Member {
                name: a.name.clone(),
                role: a.role,
                behaviour: Behaviour::Scripted {
                    sloppy: a.sloppy,
                    join_after_accepted: a.join_after_accepted,
                },
                rng: stream(i),
                id: None,
                scheduled: false,
                online_at: None,
                last_wake: None,
                mem: Memory::default(),
            })
            .collect();
        if let Some(s) = sybils {
            let base = members.len();
            let prefix = match s.kind {
                SybilKind::Voter => "sybil-voter",
                SybilKind::Worker => "sybil-worker",
            };
            for index in 0..s.count {
                members.push(Member {
                    name: format!("{prefix}-{index:03}"),
                    role: RoleArchetype::Scout,
                    behaviour: Behaviour::Sybil { kind: s.kind, index },
                    rng: stream(base + index),
                    id: None,
                    scheduled: false,
                    online_at: None,
                    last_wake: None,
                    mem: Memory::default(),
                });
            }
        }
        let mut sim = Self {
            scenario,
            seed,
            sybils,
            engine,
            clock,
            members,
            queue: BinaryHeap::new(),
            seq: 0,
            lab: None,
            pi_id: None,
            applicants: Vec::new(),
            pi: PiMemory::default(),
            counts: ActionCounts::default(),
            flood: FloodCounts::default(),
            intervals_ms: Vec::new(),
            wakes: 0,
        };
        let start = scenario.start_millis;
        for i in 0..sim.members.len() {
            let at = match (&sim.members[i].behaviour, scenario.agents.get(i)) {
                (
                    Behaviour::Scripted {
                        join_after_accepted: Some(_),
                        ..
                    },
                    _,
                ) => continue,
                (Behaviour::Scripted { .. }, Some(spec)) => start + spec.join_at_seconds * MILLIS_PER_SECOND,
                _ => start,
            };
            sim.schedule(i, at);
        }
        Ok(sim)
    }

    fn schedule(&mut self, idx: usize, at: Timestamp) {
        self.seq += 1;
        self.members[idx].scheduled = true;
        self.queue.push(Reverse((at, self.seq, idx)));
    }

    pub fn run(mut self) -> Result<SimRun, SimError> {
        let horizon = self.scenario.start_millis + self.scenario.horizon_seconds * MILLIS_PER_SECOND;
        let mut settled = false;
        while let Some(Reverse((at, _, idx))) = self.queue.pop() {
            if at > horizon {
                break;
            }
            self.clock.set(at);
            self.sweep_votes();
            self.wake(idx)?;
            self.run_jobs();
            if self.counts.steps > self.scenario.step_budget {
                return Err(SimError::StepBudgetExceeded {
                    budget: self.scenario.step_budget,
                    at_seconds: (self.clock.now() - self.scenario.start_millis) / MILLIS_PER_SECOND,
                });
            }
            self.check_joins();
            if self.settled() {
                settled = true;
                break;
            }
        }
        let agents = self
            .members
            .iter()
            .filter_map(|m| m.id.clone().map(|id| (m.name.clone(), id)))
            .collect();
        let online = self
            .members
            .iter()
            .filter_map(|m| {
                m.online_at
                    .map(|t| (m.name.clone(), (t - self.scenario.start_millis) / MILLIS_PER_SECOND))
            })
            .collect();
        let report = report::build(report::Inputs {
            scenario: self.scenario,
            seed: self.seed,
            sybils: self.sybils,
            engine: &self.engine,
            lab: self.lab.as_ref(),
            agents: &agents,
            online_at_seconds: online,
            intervals_ms: &self.intervals_ms,
            counts: self.counts,
            flood: self.flood,
            wakes: self.wakes,
            settled,
            duration_ms: self.clock.now() - self.scenario.start_millis,
        });
        Ok(SimRun {
            report,
            engine: self.engine,
            agents,
        })
    }

    // -- plumbing ----------------------------------------------------------

    fn call<T>(&mut self, kind: Call, f: impl FnOnce(&mut Engine) -> clawdlab::Result<T>) -> Option<T> {
        if !matches!(kind, Call::System) {
            self.counts.steps += 1;
        }
        match f(&mut self.engine) {
            Ok(v) => {
                match kind {
                    Call::Read => self.counts.reads += 1,
                    Call::Mutation | Call::System => self.counts.mutations += 1,
                    Call::Registry => self.counts.registry_ops += 1,
                }
                Some(v)
            }
            Err(e) => {
                *self.counts.rejected.entry(e.code().to_owned()).or_default() += 1;
                None
            }
        }
    }

    /// A call the scripted world cannot do without; failure is a harness bug.
    fn must<T>(&mut self, kind: Call, f: impl FnOnce(&mut Engine) -> clawdlab::Result<T>) -> Result<T, SimError> {
        if !matches!(kind, Call::System) {
            self.counts.steps += 1;
        }
        let v = f(&mut self.engine)?;
        match kind {
            Call::Read => self.counts.reads += 1,
            Call::Mutation | Call::System => self.counts.mutations += 1,
            Call::Registry => self.counts.registry_ops += 1,
        }
        Ok(v)
    }

    fn sweep_votes(&mut self) {
        for task_id in self.engine.expired_votes() {
            self.call(Call::System, |e| e.expire_vote(&task_id));
        }
    }

    fn run_jobs(&mut self) {
        for job_id in self.engine.queued_jobs() {
            self.call(Call::System, |e| e.execute_job(&job_id));
        }
    }

    fn lab_tasks(&mut self) -> Vec<Task> {
        let Some(lab) = self.lab.clone() else {
            return Vec::new();
        };
        self.call(Call::Read, |e| Ok(e.tasks_in_lab(&lab).cloned().collect()))
            .unwrap_or_default()
    }

    fn accepted_reviews(&self) -> usize {
        self.lab.as_ref().map_or(0, |lab| {
            self.engine
                .tasks_in_lab(lab)
                .filter(|t| t.task_type == TaskType::LiteratureReview && t.status == TaskStatus::Accepted)
                .count()
        })
    }

    fn check_joins(&mut self) {
        let accepted = self.accepted_reviews();
        let now = self.clock.now();
        for i in 0..self.members.len() {
            let due = matches!(
                self.members[i].behaviour,
                Behaviour::Scripted { join_after_accepted: Some(n), .. } if accepted >= n
            );
            if due && !self.members[i].scheduled {
                self.schedule(i, now);
            }
        }
    }

    /// Everything that can still move has moved: the synthesis (if any) is
    /// accepted and every other task is terminal or failed verification.
    fn settled(&self) -> bool {
        let Some(lab) = &self.lab else {
            return false;
        };
        if self.members.iter().any(|m| !m.scheduled) {
            return false;
        }
        let tasks: Vec<&Task> = self.engine.tasks_in_lab(lab).collect();
        if tasks.is_empty() || !self.pi.wave_two && self.scenario.literature.iter().any(|l| l.wave == 2) {
            return false;
        }
        let waiting_workers = self.members.iter().any(|m| {
            matches!(
                m.behaviour,
                Behaviour::Sybil {
                    kind: SybilKind::Worker,
                    ..
                }
            ) && !m.mem.proposed
        });
        if waiting_workers {
            return false;
        }
        if self.scenario.synthesis.is_some()
            && !tasks
                .iter()
                .any(|t| t.task_type == TaskType::Synthesis && t.status == TaskStatus::Accepted)
        {
            return false;
        }
        tasks.iter().all(|t| {
            t.status.is_terminal() || (t.status == TaskStatus::Completed && self.pi.failed.contains(&t.task_id))
        })
    }

    // -- one wake-up -------------------------------------------------------

    fn wake(&mut self, idx: usize) -> Result<(), SimError> {
        let now = self.clock.now();
        self.wakes += 1;
        if let Some(prev) = self.members[idx].last_wake {
            self.intervals_ms.push(now - prev);
        }
        self.members[idx].last_wake = Some(now);

        let agent = match self.members[idx].id.clone() {
            Some(a) => a,
            None => {
                let name = self.members[idx].name.clone();
                let role = self.members[idx].role;
                let soul = format!("# {name}\n\nScripted {role} policy.\n");
                let reg = self.must(Call::Registry, |e| e.register_agent(&name, &soul))?;
                let id = reg.agent.agent_id;
                self.members[idx].id = Some(id.clone());
                self.members[idx].online_at = Some(now);
                if role == RoleArchetype::PrincipalInvestigator {
                    self.pi_id = Some(id.clone());
                } else {
                    self.applicants.push((id.clone(), role));
                }
                id
            }
        };
        self.must(Call::Registry, |e| e.heartbeat(&agent))?;
        let bundle = self.must(Call::Read, |e| e.poll_work(&agent))?;

        match (self.members[idx].role, self.members[idx].behaviour.clone()) {
            (RoleArchetype::PrincipalInvestigator, _) => self.pi_wake(&agent, &bundle)?,
            (
                _,
                Behaviour::Sybil {
                    kind: SybilKind::Voter, ..
                },
            ) => self.voter_wake(idx, &agent, &bundle),
            (
                _,
                Behaviour::Sybil {
                    kind: SybilKind::Worker,
                    index,
                },
            ) => self.worker_wake(idx, &agent, &bundle, index),
            (RoleArchetype::Scout, _) => self.scout_wake(idx, &agent, &bundle),
            (RoleArchetype::Critic, _) => self.critic_wake(idx, &agent, &bundle),
            (RoleArchetype::ResearchAnalyst, Behaviour::Scripted { sloppy, .. }) => {
                self.analyst_wake(idx, &agent, &bundle, sloppy)
            }
            (RoleArchetype::Synthesizer, _) => self.synthesizer_wake(idx, &agent, &bundle),
        }

        let jitter = self.members[idx].rng.random_range(POLL_MIN_SECONDS..=POLL_MAX_SECONDS);
        self.schedule(idx, now + jitter * MILLIS_PER_SECOND);
        Ok(())
    }

    fn vote_on_open(&mut self, idx: usize, agent: &AgentId, bundle: &WorkBundle) {
        for t in &bundle.open_votes {
            if self.members[idx].mem.voted.insert(t.task_id.clone()) {
                self.ballot(agent, &t.task_id);
            }
        }
    }

    fn ballot(&mut self, agent: &AgentId, task_id: &TaskId) -> bool {
        match self.call(Call::Mutation, |e| e.cast_vote(task_id, agent, VoteValue::Approve)) {
            Some(receipt) => {
                // the deciding ballot also commits the system's resolution
                if receipt.resolved.is_some() {
                    self.counts.mutations += 1;
                }
                true
            }
            None => false,
        }
    }

    // -- principal investigator -------------------------------------------

    fn pi_wake(&mut self, pi: &AgentId, bundle: &WorkBundle) -> Result<(), SimError> {
        let sc = self.scenario;
        let lab = match self.lab.clone() {
            Some(lab) => lab,
            None => return self.pi_setup(pi),
        };
        for (agent, role) in std::mem::take(&mut self.applicants) {
            self.call(Call::Mutation, |e| e.add_member(&lab, &agent, role, pi));
        }
        for c in &bundle.open_critiques_to_resolve {
            let note = Some("addressed: figures are attributed per source in the summary".to_owned());
            self.call(Call::Mutation, |e| {
                e.resolve_critique(&c.critique_id, pi, CritiqueDisposition::Dismissed, note)
            });
        }
        let now = self.clock.now();
        let delay = sc.review_delay_seconds * MILLIS_PER_SECOND;
        for s in &bundle.pending_reviews {
            if s.status != TaskStatus::Completed || self.pi.failed.contains(&s.task_id) {
                continue;
            }
            let Some(task) = self.call(Call::Read, |e| e.task(&s.task_id).cloned()) else {
                continue;
            };
            let completed_at = task
                .history
                .iter()
                .rev()
                .find(|h| h.to == TaskStatus::Completed)
                .map_or(now, |h| h.at);
            if now < completed_at + delay {
                continue;
            }
            let Some(record) = self.call(Call::Mutation, |e| e.verify_task(&s.task_id, pi)) else {
                continue;
            };
            if record.passed_overall {
                self.call(Call::Mutation, |e| e.initiate_vote(&s.task_id, pi, None));
            } else {
                self.pi.failed.insert(s.task_id.clone());
            }
        }
        let pi_idx = self
            .members
            .iter()
            .position(|m| m.role == RoleArchetype::PrincipalInvestigator)
            .expect("validated: one PI");
        self.vote_on_open(pi_idx, pi, bundle);

        let tasks = self.lab_tasks();
        let wave_one_done = tasks
            .iter()
            .filter(|t| t.status.has_result() && sc.literature_spec(&t.title).is_some_and(|l| l.wave == 1))
            .count();
        if !self.pi.wave_two && wave_one_done >= sc.followup_after_completed {
            self.pi.wave_two = true;
            for l in sc.literature.iter().filter(|l| l.wave == 2) {
                self.propose_review(&lab, pi, l);
            }
        }
        if let Some(syn) = &sc.synthesis {
            if !self.pi.synthesis && self.accepted_reviews() >= syn.after_accepted {
                self.pi.synthesis = true;
                self.call(Call::Mutation, |e| {
                    e.propose_task(&lab, TaskType::Synthesis, &syn.title, &syn.summary, pi)
                });
            }
        }
        Ok(())
    }

    fn pi_setup(&mut self, pi: &AgentId) -> Result<(), SimError> {
        let sc = self.scenario;
        let new = NewLab {
            name: sc.lab.name.clone(),
            governance: sc.lab.governance,
            source_post: None,
            criteria: None,
            vote_window_seconds: sc.lab.vote_window_seconds,
        };
        let lab = self.must(Call::Mutation, |e| e.create_lab(pi, new))?.lab_id;
        let st = &sc.lab.state;
        let state = self
            .must(Call::Mutation, |e| {
                e.create_state(&lab, &st.title, &st.hypothesis, st.objectives.clone(), pi)
            })?
            .state_id;
        self.must(Call::Mutation, |e| e.activate_state(&state, pi))?;
        self.lab = Some(lab.clone());
        for l in sc.literature.iter().filter(|l| l.wave == 1) {
            self.propose_review(&lab, pi, l);
        }
        if sc.literature.iter().all(|l| l.wave == 1) {
            self.pi.wave_two = true;
        }
        for a in &sc.analysis {
            self.call(Call::Mutation, |e| {
                e.propose_task(&lab, TaskType::Analysis, &a.title, &a.summary, pi)
            });
        }
        Ok(())
    }

    fn propose_review(&mut self, lab: &LabId, agent: &AgentId, l: &LiteratureSpec) -> Option<TaskId> {
        let description = format!("Query: {}", l.query);
        self.call(Call::Mutation, |e| {
            e.propose_task(lab, TaskType::LiteratureReview, &l.title, &description, agent)
        })
        .map(|t| t.task_id)
    }

    // -- workers -----------------------------------------------------------

    /// Follows up on an in-flight provider job. Returns true while the
    /// agent is still busy with it.
    fn follow_up_job(&mut self, idx: usize, agent: &AgentId) -> bool {
        let Some((task_id, job_id, pending)) = self.members[idx].mem.job.clone() else {
            return false;
        };
        let Some(job) = self.call(Call::Read, |e| e.job(&job_id)) else {
            return true;
        };
        match job.status {
            JobStatus::Succeeded => {
                let result = match &pending {
                    Pending::Literature(l) => review_result(l, &job_id),
                    Pending::Analysis(a) => TaskResult {
                        summary: a.summary.clone(),
                        provider_job_ids: vec![job_id.clone()],
                        ..TaskResult::default()
                    },
                };
                self.call(Call::Mutation, |e| e.complete_task(&task_id, agent, result));
                self.members[idx].mem.job = None;
            }
            JobStatus::Failed => {
                self.members[idx].mem.job = None;
                self.submit(idx, agent, task_id, pending);
            }
            _ => {}
        }
        true
    }

    fn submit(&mut self, idx: usize, agent: &AgentId, task_id: TaskId, pending: Pending) {
        let Some(lab) = self.lab.clone() else {
            return;
        };
        let job = match &pending {
            Pending::Literature(l) => {
                let query = LiteratureQuery {
                    research_question: l.query.clone(),
                    source_databases: l.sources.clone(),
                    result_limit: l.limit,
                };
                self.call(Call::Mutation, |e| e.submit_literature_job(agent, &lab, query))
            }
            Pending::Analysis(a) => {
                let request = AnalysisRequest {
                    task_description: a.summary.clone(),
                    dataset_refs: a.dataset_refs.clone(),
                    parameters: BTreeMap::new(),
                };
                self.call(Call::Mutation, |e| e.submit_analysis_job(agent, &lab, request))
            }
        };
        if let Some(job) = job {
            self.members[idx].mem.job = Some((task_id, job.job_id, pending));
        }
    }

    fn scout_wake(&mut self, idx: usize, agent: &AgentId, bundle: &WorkBundle) {
        self.vote_on_open(idx, agent, bundle);
        if self.follow_up_job(idx, agent) {
            return;
        }
        let sc = self.scenario;
        for s in &bundle.claimable_tasks {
            if s.task_type != TaskType::LiteratureReview {
                continue;
            }
            let Some(spec) = sc.literature_spec(&s.title) else {
                continue;
            };
            if self.call(Call::Mutation, |e| e.claim_task(&s.task_id, agent)).is_some() {
                self.submit(idx, agent, s.task_id.clone(), Pending::Literature(spec.clone()));
                return;
            }
        }
    }

    fn critic_wake(&mut self, idx: usize, agent: &AgentId, bundle: &WorkBundle) {
        self.vote_on_open(idx, agent, bundle);
        let Some(spec) = &self.scenario.critique else {
            return;
        };
        if self.members[idx].mem.critique_done {
            return;
        }
        let tasks = self.lab_tasks();
        let Some(target) = tasks.iter().find(|t| t.title == spec.target) else {
            return;
        };
        match target.status {
            TaskStatus::Completed => {
                let filed = self.call(Call::Mutation, |e| {
                    e.file_critique(&target.task_id, agent, spec.issues.clone(), None)
                });
                self.members[idx].mem.critique_done = filed.is_some();
            }
            s if s.has_result() || s.is_terminal() => self.members[idx].mem.critique_done = true,
            _ => {}
        }
    }

    fn analyst_wake(&mut self, idx: usize, agent: &AgentId, bundle: &WorkBundle, sloppy: bool) {
        self.vote_on_open(idx, agent, bundle);
        if self.follow_up_job(idx, agent) {
            return;
        }
        let sc = self.scenario;
        for s in &bundle.claimable_tasks {
            if s.task_type != TaskType::Analysis {
                continue;
            }
            let Some(spec) = sc.analysis_spec(&s.title) else {
                continue;
            };
            if self.call(Call::Mutation, |e| e.claim_task(&s.task_id, agent)).is_none() {
                continue;
            }
            if sloppy {
                let result = TaskResult {
                    summary: spec.summary.clone(),
                    ..TaskResult::default()
                };
                self.call(Call::Mutation, |e| e.complete_task(&s.task_id, agent, result));
            } else {
                self.submit(idx, agent, s.task_id.clone(), Pending::Analysis(spec.clone()));
            }
            return;
        }
    }

    fn synthesizer_wake(&mut self, idx: usize, agent: &AgentId, bundle: &WorkBundle) {
        self.vote_on_open(idx, agent, bundle);
        let Some(spec) = &self.scenario.synthesis else {
            return;
        };
        let Some(lab) = self.lab.clone() else {
            return;
        };
        let Some(s) = bundle
            .claimable_tasks
            .iter()
            .find(|s| s.task_type == TaskType::Synthesis && s.title == spec.title)
        else {
            return;
        };
        if self.call(Call::Mutation, |e| e.claim_task(&s.task_id, agent)).is_none() {
            return;
        }
        let Some(doc) = self.call(Call::Mutation, |e| {
            e.upload_document(
                &lab,
                agent,
                &spec.document_title,
                spec.document.as_bytes(),
                &spec.document_media_type,
            )
        }) else {
            return;
        };
        let sources = self
            .lab_tasks()
            .into_iter()
            .filter(|t| t.task_type == TaskType::LiteratureReview && t.status == TaskStatus::Accepted)
            .map(|t| t.task_id)
            .collect();
        let result = TaskResult {
            summary: spec.summary.clone(),
            document_ids: vec![doc.document_id],
            source_task_ids: sources,
            ..TaskResult::default()
        };
        self.call(Call::Mutation, |e| e.complete_task(&s.task_id, agent, result));
    }

    // -- sybils ------------------------------------------------------------

    fn voter_wake(&mut self, idx: usize, agent: &AgentId, bundle: &WorkBundle) {
        self.vote_on_open(idx, agent, bundle);
        // push approval at everything completed, verified or not
        let targets: Vec<TaskId> = self
            .lab_tasks()
            .into_iter()
            .filter(|t| t.status == TaskStatus::Completed)
            .map(|t| t.task_id)
            .collect();
        for task_id in targets {
            self.flood.attempts += 2;
            if self.ballot(agent, &task_id) {
                self.flood.landed += 1;
            }
            if self
                .call(Call::Mutation, |e| e.initiate_vote(&task_id, agent, None))
                .is_some()
            {
                self.flood.landed += 1;
            }
        }
    }

    fn worker_wake(&mut self, idx: usize, agent: &AgentId, bundle: &WorkBundle, index: usize) {
        self.vote_on_open(idx, agent, bundle);
        if self.follow_up_job(idx, agent) || self.members[idx].mem.proposed {
            return;
        }
        let (Some(lab), false) = (self.lab.clone(), bundle.memberships.is_empty()) else {
            return;
        };
        let reviews = &self.scenario.sybil.reviews;
        let mut spec = reviews[index % reviews.len()].clone();
        spec.title = format!("{} #{}", spec.title, index + 1);
        let Some(task_id) = self.propose_review(&lab, agent, &spec) else {
            return;
        };
        self.members[idx].mem.proposed = true;
        if self.call(Call::Mutation, |e| e.claim_task(&task_id, agent)).is_some() {
            self.submit(idx, agent, task_id, Pending::Literature(spec));
        }
    }
}

fn review_result(l: &LiteratureSpec, job: &JobId) -> TaskResult {
    let entries: Vec<Value> = l.bibliography.iter().map(|id| json!({ "id": id })).collect();
    let mut result = TaskResult {
        summary: l.summary.clone(),
        provider_job_ids: vec![job.clone()],
        ..TaskResult::default()
    };
    result
        .structured_payload
        .insert("bibliography".into(), Value::Array(entries));
    result
}

#![allow(dead_code)]

use std::sync::Arc;

use clawdlab::commons::DiscussionScope;
use clawdlab::docstore::{InMemoryStore, StoreBackend};
use clawdlab::domain::{GovernanceModel, RoleArchetype, TaskType, VoteValue};
use clawdlab::governance::NewLab;
use clawdlab::ids::{AgentId, LabId, StateId, TaskId};
use clawdlab::providers::{LiteratureQuery, ProviderJob};
use clawdlab::tasklife::TaskResult;
use clawdlab::{Actor, Engine, EngineConfig, VirtualClock};
use serde_json::json;

pub const T0: u64 = 1_700_000_000_000;

pub struct Fixture {
    pub engine: Engine,
    pub clock: VirtualClock,
}

impl Fixture {
    pub fn new() -> Self {
        Self::with_config(EngineConfig::default())
    }

    pub fn with_config(config: EngineConfig) -> Self {
        Self::with_store(config, Box::new(InMemoryStore::new()))
    }

    pub fn with_store(config: EngineConfig, store: Box<dyn StoreBackend>) -> Self {
        let clock = VirtualClock::new(T0);
        let engine = Engine::builder()
            .config(config)
            .clock(Arc::new(clock.clone()))
            .store(store)
            .seed(7)
            .build()
            .unwrap();
        Self { engine, clock }
    }

    /// Registers an agent and gives it a fresh heartbeat.
    pub fn agent(&mut self, name: &str) -> AgentId {
        let reg = self.engine.register_agent(name, "# soul\nplain").unwrap();
        self.engine.heartbeat(&reg.agent.agent_id).unwrap();
        reg.agent.agent_id
    }

    pub fn lab(&mut self, pi: &AgentId, governance: GovernanceModel) -> LabId {
        let mut new = NewLab::pi_led("Protein Annotation Sanity Checker");
        new.governance = governance;
        self.engine.create_lab(pi, new).unwrap().lab_id
    }

    pub fn active_state(&mut self, lab: &LabId, pi: &AgentId) -> StateId {
        let s = self
            .engine
            .create_state(lab, "Baseline", "Annotations drift", vec!["audit".into()], pi)
            .unwrap();
        self.engine.activate_state(&s.state_id, pi).unwrap();
        s.state_id
    }

    pub fn heartbeat_all(&mut self, agents: &[&AgentId]) {
        for a in agents {
            self.engine.heartbeat(a).unwrap();
        }
    }

    /// A literature job run to completion on the stub backend.
    pub fn literature_job(&mut self, agent: &AgentId, lab: &LabId, question: &str) -> ProviderJob {
        let job = self
            .engine
            .submit_literature_job(
                agent,
                lab,
                LiteratureQuery {
                    research_question: question.into(),
                    source_databases: ["arxiv".to_string(), "pubmed".to_string()].into(),
                    result_limit: 10,
                },
            )
            .unwrap();
        self.engine.execute_job(&job.job_id).unwrap()
    }

    /// Proposes, claims and completes a literature review with real evidence.
    pub fn completed_review(&mut self, lab: &LabId, pi: &AgentId, scout: &AgentId) -> TaskId {
        let task = self
            .engine
            .propose_task(lab, TaskType::LiteratureReview, "Review", "", pi)
            .unwrap();
        self.engine.claim_task(&task.task_id, scout).unwrap();
        let job = self.literature_job(scout, lab, "protein domain misannotation");
        self.engine
            .complete_task(&task.task_id, scout, review_result(&job))
            .unwrap();
        task.task_id
    }

    /// Lab with a PI and the given extra members, an active state.
    pub fn staffed_lab(&mut self, roles: &[RoleArchetype]) -> (LabId, AgentId, Vec<AgentId>) {
        let pi = self.agent("pi");
        let lab = self.lab(&pi, GovernanceModel::PiLed);
        self.active_state(&lab, &pi);
        let members = roles
            .iter()
            .enumerate()
            .map(|(i, role)| {
                let a = self.agent(&format!("member-{i}"));
                self.engine.add_member(&lab, &a, *role, &pi).unwrap();
                a
            })
            .collect();
        (lab, pi, members)
    }
}

pub fn review_result(job: &ProviderJob) -> TaskResult {
    let mut r = TaskResult {
        summary: "Annotated bibliography".into(),
        provider_job_ids: vec![job.job_id.clone()],
        ..TaskResult::default()
    };
    r.structured_payload.insert(
        "bibliography".into(),
        json!([{"id": "pubmed:33810244"}, {"id": "arxiv:2101.00417"}]),
    );
    r
}

/// Drives one lab through most event kinds: forum claim, suggestions,
/// discussion, documents, critique, verification, a resolved vote, an
/// expired vote and a supersession.
pub fn busy_history(f: &mut Fixture) -> LabId {
    let poster = Actor::human("observer-1");
    let post = f
        .engine
        .create_post(&poster, "Check PTM annotations", "Are they stale?")
        .unwrap();
    let pi = f.agent("pi");
    let voters: Vec<AgentId> = (0..3).map(|i| f.agent(&format!("fan-{i}"))).collect();
    for v in &voters {
        f.engine.upvote_post(&post.post_id, &Actor::agent(v)).unwrap();
    }
    f.engine.comment_on_post(&post.post_id, &poster, "following").unwrap();
    let mut new = NewLab::pi_led("Protein Annotation Sanity Checker");
    new.source_post = Some(post.post_id.clone());
    let lab = f.engine.create_lab(&pi, new).unwrap().lab_id;
    f.active_state(&lab, &pi);
    let scout = f.agent("scout");
    let critic = f.agent("critic");
    f.engine.add_member(&lab, &scout, RoleArchetype::Scout, &pi).unwrap();
    f.engine.add_member(&lab, &critic, RoleArchetype::Critic, &pi).unwrap();

    let s1 = f.engine.post_suggestion(&lab, &poster, "look at kinases").unwrap();
    let s2 = f.engine.post_suggestion(&lab, &poster, "off topic").unwrap();
    f.engine
        .convert_suggestion(&s1.suggestion_id, &pi, TaskType::LiteratureReview, None)
        .unwrap();
    f.engine
        .decline_suggestion(&s2.suggestion_id, &pi, Some("out of scope".into()))
        .unwrap();
    let m = f
        .engine
        .post_message(&lab, &Actor::agent(&scout), DiscussionScope::Lab, "starting", None)
        .unwrap();
    f.engine
        .post_message(&lab, &poster, DiscussionScope::Lab, "thanks", Some(m.message_id))
        .unwrap();
    f.engine
        .upload_document(&lab, &scout, "notes", b"# Evidence\n", "text/markdown")
        .unwrap();

    // critiqued, dismissed, verified, accepted
    let t1 = f.completed_review(&lab, &pi, &scout);
    let c = f.engine.file_critique(&t1, &critic, vec!["thin".into()], None).unwrap();
    f.engine
        .resolve_critique(
            &c.critique_id,
            &pi,
            clawdlab::tasklife::CritiqueDisposition::Dismissed,
            None,
        )
        .unwrap();
    f.engine.verify_task(&t1, &pi).unwrap();
    f.engine.initiate_vote(&t1, &pi, None).unwrap();
    f.engine.cast_vote(&t1, &pi, VoteValue::Approve).unwrap();
    f.engine.cast_vote(&t1, &scout, VoteValue::Approve).unwrap();

    // vote left to lapse, then the task is superseded
    let t2 = f.completed_review(&lab, &pi, &scout);
    f.engine.verify_task(&t2, &pi).unwrap();
    f.engine.initiate_vote(&t2, &pi, Some(60)).unwrap();
    f.engine.cast_vote(&t2, &critic, VoteValue::Approve).unwrap();
    f.clock.advance_secs(61);
    f.heartbeat_all(&[&pi, &scout, &critic]);
    for t in f.engine.expired_votes() {
        f.engine.expire_vote(&t).unwrap();
    }
    let t3 = f.completed_review(&lab, &pi, &scout);
    f.engine.supersede_task(&t2, &pi, &t3).unwrap();
    lab
}

//! Agent registration, heartbeat liveness, the pull endpoint and per-agent
//! protocol documents.
//!
//! The platform never schedules agents. Each agent polls on its own cadence
//! and decides what to do with the bundle it receives.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::commons::{Suggestion, SuggestionStatus};
use crate::domain::{can_execute, permitted_task_types, GovernanceModel, RoleArchetype, TaskStatus, TaskType};
use crate::engine::{sha256_hex, Engine};
use crate::error::{Error, Result};
use crate::governance::{consensus_needed, MIN_SUBSTANTIVE_VOTES};
use crate::ids::{Actor, AgentId, LabId, Timestamp, MILLIS_PER_SECOND};
use crate::tasklife::{Critique, CritiqueStatus, DoneCriteria, TaskSummary};

pub const HEARTBEAT_CADENCE_SECONDS: u64 = 300;
pub const POLL_INTERVAL_SECONDS: (u64, u64) = (45, 90);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: AgentId,
    pub display_name: String,
    pub soul_document: String,
    pub last_heartbeat: Option<Timestamp>,
    pub heartbeat_count: u64,
    pub registered_at: Timestamp,
}

/// Registered agents. Tokens are kept only as SHA-256 digests.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub agents: BTreeMap<AgentId, AgentRecord>,
    pub token_digests: BTreeMap<String, AgentId>,
    pub next_agent: u64,
}

impl Registry {
    pub fn agent_for_token(&self, token: &str) -> Option<&AgentId> {
        self.token_digests.get(&sha256_hex(token.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub agent: AgentRecord,
    /// Returned exactly once; the platform keeps only its digest.
    pub auth_token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub lab_id: LabId,
    pub role: RoleArchetype,
}

/// Everything an agent may act on right now. Computing it changes nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkBundle {
    pub agent_id: AgentId,
    pub polled_at: Timestamp,
    pub memberships: Vec<Membership>,
    pub claimable_tasks: Vec<TaskSummary>,
    pub assigned_tasks: Vec<TaskSummary>,
    pub open_votes: Vec<TaskSummary>,
    /// PI only: completed tasks waiting for verification or a vote.
    pub pending_reviews: Vec<TaskSummary>,
    /// PI only.
    pub open_critiques_to_resolve: Vec<Critique>,
    /// PI only.
    pub suggestions_pending: Vec<Suggestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoneCheck {
    pub check: String,
    pub requirement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCard {
    pub role: RoleArchetype,
    pub permitted_task_types: Vec<TaskType>,
    pub hard_bans: Vec<TaskType>,
    pub escalation_triggers: Vec<String>,
    pub definition_of_done: BTreeMap<TaskType, Vec<DoneCheck>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolDocument {
    pub agent_id: AgentId,
    pub lab_id: LabId,
    pub role_card: RoleCard,
    pub governance: GovernanceModel,
    pub heartbeat_cadence_seconds: u64,
    pub poll_interval_seconds: (u64, u64),
    pub provider_norms: String,
    pub rendered: String,
}

pub fn escalation_triggers(role: RoleArchetype) -> Vec<String> {
    let lines: &[&str] = match role {
        RoleArchetype::PrincipalInvestigator => &[
            "open a vote only after a passing verification record exists",
            "resolve every open critique before moving a task to voting",
            "supersede tasks that later work has made obsolete",
            "conclude the active state when its objectives are settled",
        ],
        RoleArchetype::ResearchAnalyst => &[
            "stop and report when a dataset checksum does not match",
            "attach every provider job id to the task result",
        ],
        RoleArchetype::Scout => &[
            "post conflicting findings to the lab discussion",
            "attach at least one bibliography entry per completed review",
        ],
        RoleArchetype::Critic => &[
            "file critique when evidence is missing",
            "propose an alternative task when the method is unsound",
        ],
        RoleArchetype::Synthesizer => &[
            "wait for enough accepted source tasks before synthesising",
            "upload the synthesis to the lab document store before completing",
        ],
    };
    lines.iter().map(|s| (*s).to_owned()).collect()
}

const PROVIDER_NORMS: &str = "Reach external tools only through the platform proxy \
(POST /providers/literature/jobs, POST /providers/analysis/jobs). Provider credentials \
stay on the server and are never issued to agents. Every job is recorded with its \
request, normalised result and error state; cite job ids in task results. Dataset \
references must carry a SHA-256 checksum, which the proxy re-verifies before analysis.";

fn governance_text(g: &GovernanceModel) -> String {
    match g {
        GovernanceModel::PiLed => format!(
            "pi_led: only the principal investigator opens votes; a vote resolves once \
max({MIN_SUBSTANTIVE_VOTES}, ceil(1/2 x active members)) substantive ballots are cast, \
and a strict majority decides"
        ),
        GovernanceModel::Democratic { quorum_fraction } => format!(
            "democratic: a vote resolves once max({MIN_SUBSTANTIVE_VOTES}, ceil({}/{} x active members)) \
substantive ballots are cast, and a strict majority decides",
            quorum_fraction.numerator(),
            quorum_fraction.denominator()
        ),
        GovernanceModel::Consensus => format!(
            "consensus: a vote is accepted only when every active member (at least {}) approves; \
any rejection rejects",
            consensus_needed(0)
        ),
    }
}

fn type_list(types: &[TaskType]) -> String {
    if types.is_empty() {
        "(none)".to_owned()
    } else {
        types.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
    }
}

pub fn role_card(role: RoleArchetype, criteria: &DoneCriteria) -> RoleCard {
    let permitted = permitted_task_types(role);
    let hard_bans = TaskType::ALL.into_iter().filter(|t| !can_execute(role, *t)).collect();
    let definition_of_done = permitted
        .iter()
        .map(|t| {
            let checks = criteria
                .checks_for(*t)
                .into_iter()
                .map(|(check, requirement)| DoneCheck {
                    check: check.to_owned(),
                    requirement,
                })
                .collect();
            (*t, checks)
        })
        .collect();
    RoleCard {
        role,
        permitted_task_types: permitted,
        hard_bans,
        escalation_triggers: escalation_triggers(role),
        definition_of_done,
    }
}

fn render(doc: &ProtocolDocument, lab_name: &str) -> String {
    let card = &doc.role_card;
    let mut s = String::new();
    let _ = writeln!(s, "# Protocol for {} in {} ({})", doc.agent_id, lab_name, doc.lab_id);
    let _ = writeln!(s);
    let _ = writeln!(s, "## Role card: {}", card.role);
    let _ = writeln!(s);
    let _ = writeln!(s, "- permitted task types: {}", type_list(&card.permitted_task_types));
    let _ = writeln!(s, "- hard bans: {}", type_list(&card.hard_bans));
    let _ = writeln!(s);
    let _ = writeln!(s, "### Escalation triggers");
    let _ = writeln!(s);
    for t in &card.escalation_triggers {
        let _ = writeln!(s, "- {t}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "### Definition of done");
    for (task_type, checks) in &card.definition_of_done {
        let _ = writeln!(s);
        let _ = writeln!(s, "{task_type}:");
        for c in checks {
            let _ = writeln!(s, "- `{}`: {}", c.check, c.requirement);
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "## Governance");
    let _ = writeln!(s);
    let _ = writeln!(s, "{}", governance_text(&doc.governance));
    let _ = writeln!(s);
    let _ = writeln!(s, "## Cadence");
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "- heartbeat: at least every {} seconds",
        doc.heartbeat_cadence_seconds
    );
    let _ = writeln!(
        s,
        "- poll for work every {} to {} seconds",
        doc.poll_interval_seconds.0, doc.poll_interval_seconds.1
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "## Provider norms");
    let _ = writeln!(s);
    let _ = writeln!(s, "{}", doc.provider_norms);
    s
}

impl Engine {
    pub fn register_agent(&mut self, display_name: &str, soul_document: &str) -> Result<Registration> {
        if display_name.trim().is_empty() {
            return Err(Error::InvalidPayload("display name is empty".into()));
        }
        let mut raw = [0u8; 32];
        self.rng.fill_bytes(&mut raw);
        let token = hex::encode(raw);
        self.registry.next_agent += 1;
        let agent_id = AgentId::from_seq(self.registry.next_agent);
        let record = AgentRecord {
            agent_id: agent_id.clone(),
            display_name: display_name.to_owned(),
            soul_document: soul_document.to_owned(),
            last_heartbeat: None,
            heartbeat_count: 0,
            registered_at: self.now(),
        };
        self.registry.agents.insert(agent_id.clone(), record.clone());
        self.registry
            .token_digests
            .insert(sha256_hex(token.as_bytes()), agent_id);
        self.persist_registry()?;
        Ok(Registration {
            agent: record,
            auth_token: token,
        })
    }

    pub fn agent(&self, agent: &AgentId) -> Result<&AgentRecord> {
        self.registry
            .agents
            .get(agent)
            .ok_or_else(|| Error::UnknownAgent(agent.to_string()))
    }

    pub(crate) fn require_agent(&self, agent: &AgentId) -> Result<&AgentRecord> {
        self.agent(agent)
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentRecord> {
        self.registry.agents.values()
    }

    /// Resolves a bearer token to an agent or a configured human observer.
    pub fn authenticate(&self, token: &str) -> Result<Actor> {
        if let Some(agent) = self.registry.agent_for_token(token) {
            return Ok(Actor::agent(agent));
        }
        let digest = sha256_hex(token.as_bytes());
        self.observer_digests
            .get(&digest)
            .map(|id| Actor::human(id.clone()))
            .ok_or(Error::Unauthorized)
    }

    /// Authenticates `token` and checks that it belongs to `agent`.
    pub fn authenticate_agent(&self, agent: &AgentId, token: &str) -> Result<()> {
        match self.registry.agent_for_token(token) {
            Some(a) if a == agent => Ok(()),
            _ => Err(Error::Unauthorized),
        }
    }

    pub fn heartbeat(&mut self, agent: &AgentId) -> Result<AgentRecord> {
        let now = self.now();
        let record = self.registry.agents.get_mut(agent).ok_or(Error::Unauthorized)?;
        record.last_heartbeat = Some(now);
        record.heartbeat_count += 1;
        let out = record.clone();
        self.persist_registry()?;
        Ok(out)
    }

    /// Liveness at an explicit instant; the boundary is inclusive.
    pub fn is_active_at(&self, agent: &AgentId, now: Timestamp) -> bool {
        let ttl = self.config.heartbeat_ttl_seconds * MILLIS_PER_SECOND;
        self.registry
            .agents
            .get(agent)
            .and_then(|a| a.last_heartbeat)
            .is_some_and(|hb| now.saturating_sub(hb) <= ttl && hb <= now)
    }

    pub fn is_active(&self, agent: &AgentId) -> bool {
        self.is_active_at(agent, self.now())
    }

    pub fn active_members_at(&self, lab_id: &LabId, now: Timestamp) -> usize {
        self.state.labs.get(lab_id).map_or(0, |lab| {
            lab.members.keys().filter(|a| self.is_active_at(a, now)).count()
        })
    }

    pub fn active_members(&self, lab_id: &LabId) -> usize {
        self.active_members_at(lab_id, self.now())
    }

    pub fn poll_work(&self, agent: &AgentId) -> Result<WorkBundle> {
        self.require_agent(agent)?;
        if !self.is_active(agent) {
            return Err(Error::StaleAgent);
        }
        let mut bundle = WorkBundle {
            agent_id: agent.clone(),
            polled_at: self.now(),
            memberships: Vec::new(),
            claimable_tasks: Vec::new(),
            assigned_tasks: Vec::new(),
            open_votes: Vec::new(),
            pending_reviews: Vec::new(),
            open_critiques_to_resolve: Vec::new(),
            suggestions_pending: Vec::new(),
        };
        for lab in self.state.labs.values() {
            let Some(role) = lab.role_of(agent) else {
                continue;
            };
            bundle.memberships.push(Membership {
                lab_id: lab.lab_id.clone(),
                role,
            });
            let active_state = self.state.active_state(&lab.lab_id).map(|s| &s.state_id);
            let is_pi = lab.is_pi(agent);
            for task in self.tasks_in_lab(&lab.lab_id) {
                match task.status {
                    TaskStatus::Proposed
                        if can_execute(role, task.task_type) && Some(&task.lab_state_id) == active_state =>
                    {
                        bundle.claimable_tasks.push(task.summary())
                    }
                    TaskStatus::InProgress if task.assignee.as_ref() == Some(agent) => {
                        bundle.assigned_tasks.push(task.summary())
                    }
                    TaskStatus::Voting
                        if task
                            .vote
                            .as_ref()
                            .is_some_and(|v| v.is_open() && !v.ballots.contains_key(agent)) =>
                    {
                        bundle.open_votes.push(task.summary())
                    }
                    TaskStatus::Completed if is_pi => bundle.pending_reviews.push(task.summary()),
                    _ => {}
                }
            }
            if is_pi {
                bundle.open_critiques_to_resolve.extend(
                    self.state
                        .critiques
                        .values()
                        .filter(|c| c.lab_id == lab.lab_id && c.status == CritiqueStatus::Open)
                        .cloned(),
                );
                bundle.suggestions_pending.extend(
                    self.state
                        .suggestions
                        .values()
                        .filter(|s| s.lab_id == lab.lab_id && s.status == SuggestionStatus::Open)
                        .cloned(),
                );
            }
        }
        Ok(bundle)
    }

    /// Deterministic in (agent, role, lab configuration).
    pub fn render_protocol_document(&self, agent: &AgentId, lab_id: &LabId) -> Result<ProtocolDocument> {
        let lab = self.lab(lab_id)?;
        let role = lab.role_of(agent).ok_or(Error::NotMember)?;
        let mut doc = ProtocolDocument {
            agent_id: agent.clone(),
            lab_id: lab_id.clone(),
            role_card: role_card(role, &lab.criteria),
            governance: lab.governance,
            heartbeat_cadence_seconds: self.config.heartbeat_ttl_seconds,
            poll_interval_seconds: POLL_INTERVAL_SECONDS,
            provider_norms: PROVIDER_NORMS.to_owned(),
            rendered: String::new(),
        };
        doc.rendered = render(&doc, &lab.name);
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_card_partitions_task_types() {
        for role in RoleArchetype::ALL {
            let card = role_card(role, &DoneCriteria::default());
            assert_eq!(card.permitted_task_types.len() + card.hard_bans.len(), 5);
            for t in &card.permitted_task_types {
                assert!(!card.hard_bans.contains(t));
            }
        }
        let scout = role_card(RoleArchetype::Scout, &DoneCriteria::default());
        assert_eq!(scout.permitted_task_types, vec![TaskType::LiteratureReview]);
        let pi = role_card(RoleArchetype::PrincipalInvestigator, &DoneCriteria::default());
        assert!(pi.hard_bans.is_empty());
    }
}

//! Labs, membership, versioned lab states and the vote evaluation engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::commons::EventBody;
use crate::domain::{
    state_transition_allowed, GovernanceModel, LabStateStatus, QuorumFraction, RoleArchetype, VoteValue,
};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::ids::{Actor, AgentId, LabId, PostId, StateId, TaskId, Timestamp};
use crate::tasklife::DoneCriteria;

/// Smallest number of substantive ballots that can ever resolve a vote.
pub const MIN_SUBSTANTIVE_VOTES: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lab {
    pub lab_id: LabId,
    pub name: String,
    pub governance: GovernanceModel,
    pub pi_agent_id: AgentId,
    /// Member -> role card held in this lab.
    pub members: BTreeMap<AgentId, RoleArchetype>,
    pub source_forum_post_id: Option<PostId>,
    pub criteria: DoneCriteria,
    pub vote_window_seconds: u64,
    pub created_at: Timestamp,
}

impl Lab {
    pub fn is_member(&self, agent: &AgentId) -> bool {
        self.members.contains_key(agent)
    }

    pub fn role_of(&self, agent: &AgentId) -> Option<RoleArchetype> {
        self.members.get(agent).copied()
    }

    pub fn is_pi(&self, agent: &AgentId) -> bool {
        &self.pi_agent_id == agent
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabState {
    pub state_id: StateId,
    pub lab_id: LabId,
    pub title: String,
    pub hypothesis: String,
    pub objectives: Vec<String>,
    pub status: LabStateStatus,
    pub version: u32,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GovernanceOutcome {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteOutcome {
    Pending,
    Accepted,
    Rejected,
    Voided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub task_id: TaskId,
    pub initiated_by: AgentId,
    pub opened_at: Timestamp,
    pub window_seconds: u64,
    pub ballots: BTreeMap<AgentId, VoteValue>,
    pub outcome: VoteOutcome,
    pub closed_at: Option<Timestamp>,
}

impl VoteRecord {
    pub fn is_open(&self) -> bool {
        self.outcome == VoteOutcome::Pending
    }

    pub fn deadline(&self) -> Timestamp {
        self.opened_at + self.window_seconds * crate::ids::MILLIS_PER_SECOND
    }
}

/// Ballot counts, abstentions kept apart from substantive votes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub approve: u64,
    pub reject: u64,
    pub abstain: u64,
}

impl Tally {
    pub fn of<'a>(ballots: impl IntoIterator<Item = &'a VoteValue>) -> Self {
        ballots.into_iter().fold(Tally::default(), |mut t, v| {
            match v {
                VoteValue::Approve => t.approve += 1,
                VoteValue::Reject => t.reject += 1,
                VoteValue::Abstain => t.abstain += 1,
            }
            t
        })
    }

    pub fn substantive(&self) -> u64 {
        self.approve + self.reject
    }
}

/// Substantive ballots required before a majority model may resolve:
/// `max(2, ceil(q * active))`. `None` for consensus, which needs every
/// active member instead.
pub fn quorum_needed(governance: &GovernanceModel, active_member_count: u64) -> Option<u64> {
    let fraction = match governance {
        GovernanceModel::PiLed => QuorumFraction::HALF,
        GovernanceModel::Democratic { quorum_fraction } => *quorum_fraction,
        GovernanceModel::Consensus => return None,
    };
    Some(MIN_SUBSTANTIVE_VOTES.max(fraction.ceil_mul(active_member_count)))
}

/// Approvals a consensus vote needs: all active members, and never fewer
/// than two.
pub fn consensus_needed(active_member_count: u64) -> u64 {
    MIN_SUBSTANTIVE_VOTES.max(active_member_count)
}

pub fn evaluate_vote(
    ballots: &BTreeMap<AgentId, VoteValue>,
    active_member_count: u64,
    governance: &GovernanceModel,
) -> GovernanceOutcome {
    evaluate_tally(Tally::of(ballots.values()), active_member_count, governance)
}

pub fn evaluate_tally(tally: Tally, active_member_count: u64, governance: &GovernanceModel) -> GovernanceOutcome {
    match quorum_needed(governance, active_member_count) {
        Some(needed) => {
            if tally.substantive() < needed {
                GovernanceOutcome::Pending
            } else if tally.approve > tally.reject {
                GovernanceOutcome::Accepted
            } else if tally.reject > tally.approve {
                GovernanceOutcome::Rejected
            } else {
                // ties wait for the window to lapse
                GovernanceOutcome::Pending
            }
        }
        None => {
            if tally.reject > 0 {
                GovernanceOutcome::Rejected
            } else if tally.approve >= consensus_needed(active_member_count) {
                GovernanceOutcome::Accepted
            } else {
                GovernanceOutcome::Pending
            }
        }
    }
}

/// Resolution once the vote window has lapsed: a quorate tie rejects, a
/// vote without quorum is voided.
pub fn evaluate_at_expiry(
    ballots: &BTreeMap<AgentId, VoteValue>,
    active_member_count: u64,
    governance: &GovernanceModel,
) -> VoteOutcome {
    let tally = Tally::of(ballots.values());
    match evaluate_tally(tally, active_member_count, governance) {
        GovernanceOutcome::Accepted => VoteOutcome::Accepted,
        GovernanceOutcome::Rejected => VoteOutcome::Rejected,
        GovernanceOutcome::Pending => match quorum_needed(governance, active_member_count) {
            Some(needed) if tally.substantive() >= needed => VoteOutcome::Rejected,
            _ => VoteOutcome::Voided,
        },
    }
}

/// Parameters for a new lab.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewLab {
    pub name: String,
    pub governance: GovernanceModel,
    #[serde(default)]
    pub source_post: Option<PostId>,
    #[serde(default)]
    pub criteria: Option<DoneCriteria>,
    #[serde(default)]
    pub vote_window_seconds: Option<u64>,
}

impl NewLab {
    pub fn pi_led(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            governance: GovernanceModel::PiLed,
            source_post: None,
            criteria: None,
            vote_window_seconds: None,
        }
    }
}

impl Engine {
    pub fn create_lab(&mut self, pi: &AgentId, new: NewLab) -> Result<Lab> {
        self.require_agent(pi)?;
        if new.name.trim().is_empty() {
            return Err(Error::InvalidPayload("lab name is empty".into()));
        }
        if new.vote_window_seconds == Some(0) {
            return Err(Error::InvalidPayload("vote window must be positive".into()));
        }
        if let Some(post_id) = &new.source_post {
            self.check_post_claimable_for_lab(post_id, &Actor::agent(pi))?;
        }
        let now = self.now();
        let lab = Lab {
            lab_id: self.state.next_lab_id(),
            name: new.name,
            governance: new.governance,
            pi_agent_id: pi.clone(),
            members: BTreeMap::from([(pi.clone(), RoleArchetype::PrincipalInvestigator)]),
            source_forum_post_id: new.source_post,
            criteria: new.criteria.unwrap_or_else(|| DoneCriteria::from_config(&self.config)),
            vote_window_seconds: new.vote_window_seconds.unwrap_or(self.config.vote_window_seconds),
            created_at: now,
        };
        let lab_id = lab.lab_id.clone();
        self.commit(Actor::agent(pi), Some(lab_id.clone()), EventBody::LabCreated { lab })?;
        Ok(self.state.labs[&lab_id].clone())
    }

    pub fn add_member(&mut self, lab_id: &LabId, agent: &AgentId, role: RoleArchetype, actor: &AgentId) -> Result<Lab> {
        let lab = self.lab(lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        self.require_agent(agent)?;
        if lab.is_member(agent) {
            return Err(Error::AlreadyMember);
        }
        if role == RoleArchetype::PrincipalInvestigator {
            return Err(Error::InvalidPayload(
                "a lab has exactly one principal investigator".into(),
            ));
        }
        self.commit(
            Actor::agent(actor),
            Some(lab_id.clone()),
            EventBody::MemberAdded {
                agent_id: agent.clone(),
                role,
            },
        )?;
        Ok(self.state.labs[lab_id].clone())
    }

    pub fn create_state(
        &mut self,
        lab_id: &LabId,
        title: &str,
        hypothesis: &str,
        objectives: Vec<String>,
        actor: &AgentId,
    ) -> Result<LabState> {
        let lab = self.lab(lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        let version = self
            .state
            .states
            .values()
            .filter(|s| &s.lab_id == lab_id)
            .map(|s| s.version)
            .max()
            .unwrap_or(0)
            + 1;
        let now = self.now();
        let state = LabState {
            state_id: self.state.next_state_id(),
            lab_id: lab_id.clone(),
            title: title.to_owned(),
            hypothesis: hypothesis.to_owned(),
            objectives,
            status: LabStateStatus::Draft,
            version,
            created_at: now,
            updated_at: now,
        };
        let id = state.state_id.clone();
        self.commit(
            Actor::agent(actor),
            Some(lab_id.clone()),
            EventBody::StateCreated { state },
        )?;
        Ok(self.state.states[&id].clone())
    }

    /// Activates a draft state. Any currently active state of the same lab
    /// is concluded as pivoted in the same step.
    pub fn activate_state(&mut self, state_id: &StateId, actor: &AgentId) -> Result<Vec<LabState>> {
        let target = self.lab_state(state_id)?;
        let lab = self.lab(&target.lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        if !state_transition_allowed(target.status, LabStateStatus::Active) {
            return Err(Error::IllegalStateTransition {
                from: target.status,
                to: LabStateStatus::Active,
            });
        }
        let lab_id = target.lab_id.clone();
        let pivoted = self.state.active_state(&lab_id).map(|s| s.state_id.clone());
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::StateActivated {
                state_id: state_id.clone(),
                pivoted: pivoted.clone(),
            },
        )?;
        let mut out = vec![self.state.states[state_id].clone()];
        if let Some(p) = pivoted {
            out.push(self.state.states[&p].clone());
        }
        Ok(out)
    }

    pub fn conclude_state(
        &mut self,
        state_id: &StateId,
        conclusion: LabStateStatus,
        actor: &AgentId,
    ) -> Result<LabState> {
        let target = self.lab_state(state_id)?;
        let lab = self.lab(&target.lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        if !conclusion.is_conclusion() || !state_transition_allowed(target.status, conclusion) {
            return Err(Error::IllegalStateTransition {
                from: target.status,
                to: conclusion,
            });
        }
        let from = target.status;
        let lab_id = target.lab_id.clone();
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::StateConcluded {
                state_id: state_id.clone(),
                from,
                to: conclusion,
            },
        )?;
        Ok(self.state.states[state_id].clone())
    }

    pub fn lab(&self, lab_id: &LabId) -> Result<&Lab> {
        self.state
            .labs
            .get(lab_id)
            .ok_or_else(|| Error::UnknownLab(lab_id.to_string()))
    }

    pub fn lab_state(&self, state_id: &StateId) -> Result<&LabState> {
        self.state
            .states
            .get(state_id)
            .ok_or_else(|| Error::UnknownState(state_id.to_string()))
    }

    pub fn lab_states(&self, lab_id: &LabId) -> Vec<LabState> {
        self.state
            .states
            .values()
            .filter(|s| &s.lab_id == lab_id)
            .cloned()
            .collect()
    }

    pub fn labs(&self) -> impl Iterator<Item = &Lab> {
        self.state.labs.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ballots(values: &[VoteValue]) -> BTreeMap<AgentId, VoteValue> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (AgentId::from_seq(i as u64 + 1), *v))
            .collect()
    }

    use VoteValue::{Abstain, Approve, Reject};

    #[test]
    fn two_approvals_one_reject_of_four_accepts() {
        let b = ballots(&[Approve, Approve, Reject]);
        assert_eq!(
            evaluate_vote(&b, 4, &GovernanceModel::PiLed),
            GovernanceOutcome::Accepted
        );
    }

    #[test]
    fn single_substantive_vote_is_never_enough() {
        let b = ballots(&[Approve]);
        assert_eq!(
            evaluate_vote(&b, 2, &GovernanceModel::PiLed),
            GovernanceOutcome::Pending
        );
        assert_eq!(
            evaluate_vote(&b, 1, &GovernanceModel::PiLed),
            GovernanceOutcome::Pending
        );
    }

    #[test]
    fn tie_stays_pending_until_expiry_then_rejects() {
        let b = ballots(&[Approve, Reject]);
        assert_eq!(
            evaluate_vote(&b, 2, &GovernanceModel::PiLed),
            GovernanceOutcome::Pending
        );
        assert_eq!(
            evaluate_at_expiry(&b, 2, &GovernanceModel::PiLed),
            VoteOutcome::Rejected
        );
    }

    #[test]
    fn expiry_without_quorum_voids() {
        let b = ballots(&[Approve]);
        assert_eq!(evaluate_at_expiry(&b, 4, &GovernanceModel::PiLed), VoteOutcome::Voided);
        let b = ballots(&[Approve, Approve, Reject]);
        assert_eq!(
            evaluate_at_expiry(&b, 4, &GovernanceModel::PiLed),
            VoteOutcome::Accepted
        );
    }

    #[test]
    fn abstain_alone_is_pending() {
        let b = ballots(&[Abstain]);
        assert_eq!(
            evaluate_vote(&b, 2, &GovernanceModel::PiLed),
            GovernanceOutcome::Pending
        );
    }

    #[test]
    fn consensus_requires_every_active_member() {
        let g = GovernanceModel::Consensus;
        assert_eq!(
            evaluate_vote(&ballots(&[Approve, Approve, Abstain]), 3, &g),
            GovernanceOutcome::Pending
        );
        assert_eq!(
            evaluate_vote(&ballots(&[Approve, Approve, Approve]), 3, &g),
            GovernanceOutcome::Accepted
        );
        assert_eq!(
            evaluate_vote(&ballots(&[Approve, Approve, Reject]), 3, &g),
            GovernanceOutcome::Rejected
        );
        assert_eq!(evaluate_vote(&ballots(&[Approve]), 1, &g), GovernanceOutcome::Pending);
    }

    #[test]
    fn democratic_uses_its_fraction() {
        let g = GovernanceModel::Democratic {
            quorum_fraction: QuorumFraction::new(3, 4).unwrap(),
        };
        assert_eq!(quorum_needed(&g, 4), Some(3));
        assert_eq!(quorum_needed(&g, 1), Some(2));
        assert_eq!(
            evaluate_vote(&ballots(&[Approve, Approve]), 4, &g),
            GovernanceOutcome::Pending
        );
        assert_eq!(
            evaluate_vote(&ballots(&[Approve, Approve, Reject]), 4, &g),
            GovernanceOutcome::Accepted
        );
    }
}

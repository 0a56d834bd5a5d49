//! Protocol state as a pure fold over the activity log.
//!
//! Every mutation the engine performs is expressed as one [`ActivityEvent`]
//! and applied here; nothing else writes to [`ProtocolState`]. Replaying a
//! log therefore rebuilds the exact state that produced it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::commons::{
    ActivityEvent, DiscussionMessage, EventBody, ForumComment, ForumPost, Suggestion, SuggestionStatus,
};
use crate::docstore::DocumentRecord;
use crate::domain::{LabStateStatus, TaskStatus};
use crate::error::{Error, Result};
use crate::governance::{Lab, LabState, VoteOutcome};
use crate::ids::{
    Actor, ActorId, AgentId, CommentId, CritiqueId, DocumentId, IdCounters, JobId, LabId, MessageId, PostId, StateId,
    SuggestionId, TaskId, Timestamp,
};
use crate::providers::ProviderJob;
use crate::tasklife::{Critique, StatusChange, Task, VerificationRecord};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolState {
    pub counters: IdCounters,
    pub labs: BTreeMap<LabId, Lab>,
    pub states: BTreeMap<StateId, LabState>,
    pub tasks: BTreeMap<TaskId, Task>,
    pub critiques: BTreeMap<CritiqueId, Critique>,
    /// Latest verification record per task.
    pub verifications: BTreeMap<TaskId, VerificationRecord>,
    pub jobs: BTreeMap<JobId, ProviderJob>,
    pub posts: BTreeMap<PostId, ForumPost>,
    pub comments: BTreeMap<CommentId, ForumComment>,
    pub suggestions: BTreeMap<SuggestionId, Suggestion>,
    pub messages: BTreeMap<MessageId, DiscussionMessage>,
    pub documents: BTreeMap<LabId, BTreeMap<DocumentId, DocumentRecord>>,
    pub last_event_id: u64,
}

fn missing(what: &str, id: &dyn std::fmt::Display) -> Error {
    Error::InvalidPayload(format!("event references unknown {what} {id}"))
}

fn set_status(task: &mut Task, to: TaskStatus, at: Timestamp, by: &ActorId) {
    if task.status == to && !task.history.is_empty() {
        return;
    }
    task.history.push(StatusChange {
        from: (!task.history.is_empty()).then_some(task.status),
        to,
        at,
        by: by.clone(),
    });
    task.status = to;
}

impl ProtocolState {
    pub fn next_lab_id(&self) -> LabId {
        LabId::from_seq(self.counters.lab + 1)
    }

    pub fn next_state_id(&self) -> StateId {
        StateId::from_seq(self.counters.state + 1)
    }

    pub fn next_task_id(&self) -> TaskId {
        TaskId::from_seq(self.counters.task + 1)
    }

    pub fn next_critique_id(&self) -> CritiqueId {
        CritiqueId::from_seq(self.counters.critique + 1)
    }

    pub fn next_job_id(&self) -> JobId {
        JobId::from_seq(self.counters.job + 1)
    }

    pub fn next_post_id(&self) -> PostId {
        PostId::from_seq(self.counters.post + 1)
    }

    pub fn next_comment_id(&self) -> CommentId {
        CommentId::from_seq(self.counters.comment + 1)
    }

    pub fn next_suggestion_id(&self) -> SuggestionId {
        SuggestionId::from_seq(self.counters.suggestion + 1)
    }

    pub fn next_message_id(&self) -> MessageId {
        MessageId::from_seq(self.counters.message + 1)
    }

    pub fn active_state(&self, lab_id: &LabId) -> Option<&LabState> {
        self.states
            .values()
            .find(|s| &s.lab_id == lab_id && s.status == LabStateStatus::Active)
    }

    pub fn document(&self, lab_id: &LabId, id: &DocumentId) -> Option<&DocumentRecord> {
        self.documents.get(lab_id).and_then(|m| m.get(id))
    }

    pub fn all_documents(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.documents.values().flat_map(|m| m.values())
    }

    /// Rebuilds state from a full log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a ActivityEvent>) -> Result<Self> {
        let mut state = Self::default();
        for e in events {
            state.apply(e)?;
        }
        Ok(state)
    }

    fn task_mut(&mut self, id: &TaskId) -> Result<&mut Task> {
        self.tasks.get_mut(id).ok_or_else(|| missing("task", id))
    }

    fn insert_task(&mut self, mut task: Task, at: Timestamp, by: &ActorId) {
        self.counters.task += 1;
        task.history.clear();
        set_status(&mut task, TaskStatus::Proposed, at, by);
        self.tasks.insert(task.task_id.clone(), task);
    }

    /// Applies one event. Events must arrive in id order.
    pub fn apply(&mut self, event: &ActivityEvent) -> Result<()> {
        if event.event_id != self.last_event_id + 1 {
            return Err(Error::InvalidPayload(format!(
                "event {} out of order after {}",
                event.event_id, self.last_event_id
            )));
        }
        let at = event.timestamp;
        let by = &event.actor;
        let actor = Actor {
            id: event.actor.clone(),
            kind: event.actor_kind,
        };
        match &event.body {
            EventBody::LabCreated { lab } => {
                self.counters.lab += 1;
                if let Some(post_id) = &lab.source_forum_post_id {
                    let post = self.posts.get_mut(post_id).ok_or_else(|| missing("post", post_id))?;
                    post.claimed_by_lab = Some(lab.lab_id.clone());
                    if post.claimed_by.is_none() {
                        post.claimed_by = Some(actor);
                    }
                }
                self.labs.insert(lab.lab_id.clone(), lab.clone());
            }
            EventBody::MemberAdded { agent_id, role } => {
                let lab_id = event.lab_id.as_ref().ok_or_else(|| missing("lab", &"-"))?;
                let lab = self.labs.get_mut(lab_id).ok_or_else(|| missing("lab", lab_id))?;
                lab.members.insert(agent_id.clone(), *role);
            }
            EventBody::StateCreated { state } => {
                self.counters.state += 1;
                self.states.insert(state.state_id.clone(), state.clone());
            }
            EventBody::StateActivated { state_id, pivoted } => {
                if let Some(p) = pivoted {
                    let old = self.states.get_mut(p).ok_or_else(|| missing("state", p))?;
                    old.status = LabStateStatus::Pivoted;
                    old.updated_at = at;
                }
                let s = self
                    .states
                    .get_mut(state_id)
                    .ok_or_else(|| missing("state", state_id))?;
                s.status = LabStateStatus::Active;
                s.updated_at = at;
            }
            EventBody::StateConcluded { state_id, to, .. } => {
                let s = self
                    .states
                    .get_mut(state_id)
                    .ok_or_else(|| missing("state", state_id))?;
                s.status = *to;
                s.updated_at = at;
            }
            EventBody::TaskProposed { task } => self.insert_task(task.clone(), at, by),
            EventBody::TaskClaimed { task_id, to, .. } => {
                let t = self.task_mut(task_id)?;
                t.assignee = Some(AgentId(by.0.clone()));
                set_status(t, *to, at, by);
            }
            EventBody::TaskCompleted {
                task_id, to, result, ..
            } => {
                let t = self.task_mut(task_id)?;
                t.result = Some(result.clone());
                set_status(t, *to, at, by);
            }
            EventBody::TaskCritiqued { critique, to, .. } => {
                self.counters.critique += 1;
                let t = self.task_mut(&critique.task_id)?;
                t.critique_ids.push(critique.critique_id.clone());
                set_status(t, *to, at, by);
                self.critiques.insert(critique.critique_id.clone(), critique.clone());
            }
            EventBody::CritiqueResolved {
                critique_id,
                status,
                note,
                task_to,
                alternative_task,
                ..
            } => {
                let c = self
                    .critiques
                    .get_mut(critique_id)
                    .ok_or_else(|| missing("critique", critique_id))?;
                c.status = *status;
                c.resolution_note = note.clone();
                c.resolved_at = Some(at);
                c.alternative_task_id = alternative_task.as_ref().map(|t| t.task_id.clone());
                let task_id = c.task_id.clone();
                if let Some(to) = task_to {
                    set_status(self.task_mut(&task_id)?, *to, at, by);
                }
                if let Some(alt) = alternative_task {
                    self.insert_task(alt.clone(), at, by);
                }
            }
            EventBody::TaskVerified { record } => {
                self.task_mut(&record.task_id)?;
                self.verifications.insert(record.task_id.clone(), record.clone());
            }
            EventBody::VoteInitiated { vote, to, .. } => {
                let t = self.task_mut(&vote.task_id)?;
                t.vote = Some(vote.clone());
                set_status(t, *to, at, by);
            }
            EventBody::BallotCast { task_id, value } => {
                let t = self.task_mut(task_id)?;
                let vote = t.vote.as_mut().ok_or_else(|| missing("vote on", task_id))?;
                vote.ballots.insert(AgentId(by.0.clone()), *value);
            }
            EventBody::VoteResolved {
                task_id, outcome, to, ..
            } => {
                let t = self.task_mut(task_id)?;
                let vote = t.vote.as_mut().ok_or_else(|| missing("vote on", task_id))?;
                vote.outcome = *outcome;
                vote.closed_at = Some(at);
                set_status(t, *to, at, by);
            }
            EventBody::VoteVoided { task_id, to, .. } => {
                let t = self.task_mut(task_id)?;
                let mut vote = t.vote.take().ok_or_else(|| missing("vote on", task_id))?;
                vote.outcome = VoteOutcome::Voided;
                vote.closed_at = Some(at);
                t.past_votes.push(vote);
                set_status(t, *to, at, by);
            }
            EventBody::TaskSuperseded {
                task_id, successor, to, ..
            } => {
                let t = self.task_mut(task_id)?;
                if let Some(mut vote) = t.vote.take() {
                    if vote.is_open() {
                        vote.outcome = VoteOutcome::Voided;
                        vote.closed_at = Some(at);
                        t.past_votes.push(vote);
                    } else {
                        t.vote = Some(vote);
                    }
                }
                t.superseded_by = Some(successor.clone());
                set_status(t, *to, at, by);
            }
            EventBody::JobSubmitted { job } => {
                self.counters.job += 1;
                self.jobs.insert(job.job_id.clone(), job.clone());
            }
            EventBody::JobFinished {
                job_id,
                status,
                normalised_result,
                error,
                started_at,
            } => {
                let j = self.jobs.get_mut(job_id).ok_or_else(|| missing("job", job_id))?;
                j.status = *status;
                j.normalised_result = normalised_result.clone();
                j.error = error.clone();
                j.started_at = Some(*started_at);
                j.finished_at = Some(at);
            }
            EventBody::PostCreated { post } => {
                self.counters.post += 1;
                self.posts.insert(post.post_id.clone(), post.clone());
            }
            EventBody::PostUpvoted { post_id } => {
                let p = self.posts.get_mut(post_id).ok_or_else(|| missing("post", post_id))?;
                p.upvotes.insert(by.clone());
            }
            EventBody::PostCommented { comment } => {
                self.counters.comment += 1;
                self.comments.insert(comment.comment_id.clone(), comment.clone());
            }
            EventBody::PostClaimed { post_id } => {
                let p = self.posts.get_mut(post_id).ok_or_else(|| missing("post", post_id))?;
                p.claimed_by = Some(actor);
            }
            EventBody::SuggestionPosted { suggestion } => {
                self.counters.suggestion += 1;
                self.suggestions
                    .insert(suggestion.suggestion_id.clone(), suggestion.clone());
            }
            EventBody::SuggestionConverted { suggestion_id, task } => {
                let s = self
                    .suggestions
                    .get_mut(suggestion_id)
                    .ok_or_else(|| missing("suggestion", suggestion_id))?;
                s.status = SuggestionStatus::Converted;
                s.converted_task_id = Some(task.task_id.clone());
                self.insert_task(task.clone(), at, by);
            }
            EventBody::SuggestionDeclined { suggestion_id, .. } => {
                let s = self
                    .suggestions
                    .get_mut(suggestion_id)
                    .ok_or_else(|| missing("suggestion", suggestion_id))?;
                s.status = SuggestionStatus::Declined;
            }
            EventBody::DocumentUploaded { record } => {
                self.documents
                    .entry(record.lab_id.clone())
                    .or_default()
                    .insert(record.document_id.clone(), record.clone());
            }
            EventBody::MessagePosted { message } => {
                self.counters.message += 1;
                self.messages.insert(message.message_id.clone(), message.clone());
            }
        }
        self.last_event_id = event.event_id;
        Ok(())
    }
}

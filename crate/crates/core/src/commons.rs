//! Public forum, lab-scoped suggestions, threaded discussion and the
//! append-only activity log.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::docstore::DocumentRecord;
use crate::domain::{LabStateStatus, RoleArchetype, TaskStatus, TaskType, VoteValue};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::governance::{Lab, LabState, VoteOutcome, VoteRecord};
use crate::ids::{
    Actor, ActorId, ActorKind, AgentId, CommentId, CritiqueId, JobId, LabId, MessageId, PostId, StateId, SuggestionId,
    TaskId, Timestamp,
};
use crate::providers::{JobError, JobStatus, NormalisedResult, ProviderJob};
use crate::tasklife::{Critique, CritiqueStatus, Task, TaskResult, VerificationRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForumPost {
    pub post_id: PostId,
    pub author: ActorId,
    pub author_kind: ActorKind,
    pub title: String,
    pub body: String,
    pub upvotes: BTreeSet<ActorId>,
    /// Actor that took the post out of the unclaimed pool.
    pub claimed_by: Option<Actor>,
    pub claimed_by_lab: Option<LabId>,
    pub created_at: Timestamp,
}

impl ForumPost {
    pub fn is_unclaimed(&self) -> bool {
        self.claimed_by.is_none() && self.claimed_by_lab.is_none()
    }
}

/// Forum comments are flat, unlike lab discussion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForumComment {
    pub comment_id: CommentId,
    pub post_id: PostId,
    pub author: ActorId,
    pub author_kind: ActorKind,
    pub body: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionStatus {
    Open,
    Converted,
    Declined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub suggestion_id: SuggestionId,
    pub lab_id: LabId,
    pub author: ActorId,
    pub author_kind: ActorKind,
    pub body: String,
    pub status: SuggestionStatus,
    pub converted_task_id: Option<TaskId>,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "scope", content = "task_id", rename_all = "snake_case")]
pub enum DiscussionScope {
    Lab,
    Task(TaskId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscussionMessage {
    pub message_id: MessageId,
    pub lab_id: LabId,
    pub scope: DiscussionScope,
    pub author: ActorId,
    pub author_kind: ActorKind,
    pub body: String,
    pub parent: Option<MessageId>,
    pub created_at: Timestamp,
}

/// One audited mutation. The body is serialized as `kind` + `payload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub event_id: u64,
    pub timestamp: Timestamp,
    pub actor: ActorId,
    pub actor_kind: ActorKind,
    pub lab_id: Option<LabId>,
    #[serde(flatten)]
    pub body: EventBody,
}

impl ActivityEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

macro_rules! event_kinds {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum EventKind {
            $($variant),*
        }

        impl EventKind {
            pub const ALL: &'static [EventKind] = &[$(EventKind::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(EventKind::$variant => $name),*
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($name => Some(EventKind::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

event_kinds! {
    LabCreated => "lab_created",
    MemberAdded => "member_added",
    StateCreated => "state_created",
    StateActivated => "state_activated",
    StateConcluded => "state_concluded",
    TaskProposed => "task_proposed",
    TaskClaimed => "task_claimed",
    TaskCompleted => "task_completed",
    TaskCritiqued => "task_critiqued",
    CritiqueResolved => "critique_resolved",
    TaskVerified => "task_verified",
    VoteInitiated => "vote_initiated",
    BallotCast => "ballot_cast",
    VoteResolved => "vote_resolved",
    VoteVoided => "vote_voided",
    TaskSuperseded => "task_superseded",
    JobSubmitted => "job_submitted",
    JobFinished => "job_finished",
    PostCreated => "post_created",
    PostUpvoted => "post_upvoted",
    PostCommented => "post_commented",
    PostClaimed => "post_claimed",
    SuggestionPosted => "suggestion_posted",
    SuggestionConverted => "suggestion_converted",
    SuggestionDeclined => "suggestion_declined",
    DocumentUploaded => "document_uploaded",
    MessagePosted => "message_posted",
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    LabCreated {
        lab: Lab,
    },
    MemberAdded {
        agent_id: AgentId,
        role: RoleArchetype,
    },
    StateCreated {
        state: LabState,
    },
    StateActivated {
        state_id: StateId,
        /// Previously active state, concluded as pivoted.
        pivoted: Option<StateId>,
    },
    StateConcluded {
        state_id: StateId,
        from: LabStateStatus,
        to: LabStateStatus,
    },
    TaskProposed {
        task: Task,
    },
    TaskClaimed {
        task_id: TaskId,
        from: TaskStatus,
        to: TaskStatus,
    },
    TaskCompleted {
        task_id: TaskId,
        from: TaskStatus,
        to: TaskStatus,
        result: TaskResult,
    },
    TaskCritiqued {
        critique: Critique,
        from: TaskStatus,
        to: TaskStatus,
    },
    CritiqueResolved {
        critique_id: CritiqueId,
        status: CritiqueStatus,
        note: Option<String>,
        task_from: TaskStatus,
        task_to: Option<TaskStatus>,
        alternative_task: Option<Task>,
    },
    TaskVerified {
        record: VerificationRecord,
    },
    VoteInitiated {
        vote: VoteRecord,
        from: TaskStatus,
        to: TaskStatus,
    },
    BallotCast {
        task_id: TaskId,
        value: VoteValue,
    },
    VoteResolved {
        task_id: TaskId,
        outcome: VoteOutcome,
        active_members: usize,
        from: TaskStatus,
        to: TaskStatus,
    },
    VoteVoided {
        task_id: TaskId,
        active_members: usize,
        from: TaskStatus,
        to: TaskStatus,
    },
    TaskSuperseded {
        task_id: TaskId,
        successor: TaskId,
        from: TaskStatus,
        to: TaskStatus,
    },
    JobSubmitted {
        job: ProviderJob,
    },
    JobFinished {
        job_id: JobId,
        status: JobStatus,
        normalised_result: Option<NormalisedResult>,
        error: Option<JobError>,
        started_at: Timestamp,
    },
    PostCreated {
        post: ForumPost,
    },
    PostUpvoted {
        post_id: PostId,
    },
    PostCommented {
        comment: ForumComment,
    },
    PostClaimed {
        post_id: PostId,
    },
    SuggestionPosted {
        suggestion: Suggestion,
    },
    SuggestionConverted {
        suggestion_id: SuggestionId,
        task: Task,
    },
    SuggestionDeclined {
        suggestion_id: SuggestionId,
        note: Option<String>,
    },
    DocumentUploaded {
        record: DocumentRecord,
    },
    MessagePosted {
        message: DiscussionMessage,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::LabCreated { .. } => EventKind::LabCreated,
            EventBody::MemberAdded { .. } => EventKind::MemberAdded,
            EventBody::StateCreated { .. } => EventKind::StateCreated,
            EventBody::StateActivated { .. } => EventKind::StateActivated,
            EventBody::StateConcluded { .. } => EventKind::StateConcluded,
            EventBody::TaskProposed { .. } => EventKind::TaskProposed,
            EventBody::TaskClaimed { .. } => EventKind::TaskClaimed,
            EventBody::TaskCompleted { .. } => EventKind::TaskCompleted,
            EventBody::TaskCritiqued { .. } => EventKind::TaskCritiqued,
            EventBody::CritiqueResolved { .. } => EventKind::CritiqueResolved,
            EventBody::TaskVerified { .. } => EventKind::TaskVerified,
            EventBody::VoteInitiated { .. } => EventKind::VoteInitiated,
            EventBody::BallotCast { .. } => EventKind::BallotCast,
            EventBody::VoteResolved { .. } => EventKind::VoteResolved,
            EventBody::VoteVoided { .. } => EventKind::VoteVoided,
            EventBody::TaskSuperseded { .. } => EventKind::TaskSuperseded,
            EventBody::JobSubmitted { .. } => EventKind::JobSubmitted,
            EventBody::JobFinished { .. } => EventKind::JobFinished,
            EventBody::PostCreated { .. } => EventKind::PostCreated,
            EventBody::PostUpvoted { .. } => EventKind::PostUpvoted,
            EventBody::PostCommented { .. } => EventKind::PostCommented,
            EventBody::PostClaimed { .. } => EventKind::PostClaimed,
            EventBody::SuggestionPosted { .. } => EventKind::SuggestionPosted,
            EventBody::SuggestionConverted { .. } => EventKind::SuggestionConverted,
            EventBody::SuggestionDeclined { .. } => EventKind::SuggestionDeclined,
            EventBody::DocumentUploaded { .. } => EventKind::DocumentUploaded,
            EventBody::MessagePosted { .. } => EventKind::MessagePosted,
        }
    }

    /// The task this event concerns, if any.
    pub fn task_id(&self) -> Option<&TaskId> {
        match self {
            EventBody::TaskProposed { task } => Some(&task.task_id),
            EventBody::TaskClaimed { task_id, .. }
            | EventBody::TaskCompleted { task_id, .. }
            | EventBody::BallotCast { task_id, .. }
            | EventBody::VoteResolved { task_id, .. }
            | EventBody::VoteVoided { task_id, .. }
            | EventBody::TaskSuperseded { task_id, .. } => Some(task_id),
            EventBody::TaskCritiqued { critique, .. } => Some(&critique.task_id),
            EventBody::TaskVerified { record } => Some(&record.task_id),
            EventBody::VoteInitiated { vote, .. } => Some(&vote.task_id),
            EventBody::SuggestionConverted { task, .. } => Some(&task.task_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityFilter {
    #[serde(default)]
    pub kind: Option<EventKind>,
    #[serde(default)]
    pub actor: Option<ActorId>,
    #[serde(default)]
    pub task_id: Option<TaskId>,
    /// Only events with a strictly greater id.
    #[serde(default)]
    pub after: Option<u64>,
    #[serde(default)]
    pub limit: Option<usize>,
}

impl ActivityFilter {
    pub fn kind(kind: EventKind) -> Self {
        Self {
            kind: Some(kind),
            ..Self::default()
        }
    }

    pub fn matches(&self, e: &ActivityEvent) -> bool {
        self.kind.is_none_or(|k| e.kind() == k)
            && self.actor.as_ref().is_none_or(|a| &e.actor == a)
            && self.task_id.as_ref().is_none_or(|t| e.body.task_id() == Some(t))
            && self.after.is_none_or(|after| e.event_id > after)
    }
}

/// Line-delimited export of an event list, one event per line.
pub fn export_jsonl<'a>(events: impl IntoIterator<Item = &'a ActivityEvent>) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<ActivityEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| Error::InvalidPayload(format!("line {}: {e}", i + 1))))
        .collect()
}

impl Engine {
    pub fn create_post(&mut self, actor: &Actor, title: &str, body: &str) -> Result<ForumPost> {
        if title.trim().is_empty() {
            return Err(Error::InvalidPayload("post title is empty".into()));
        }
        let post = ForumPost {
            post_id: self.state.next_post_id(),
            author: actor.id.clone(),
            author_kind: actor.kind,
            title: title.to_owned(),
            body: body.to_owned(),
            upvotes: BTreeSet::new(),
            claimed_by: None,
            claimed_by_lab: None,
            created_at: self.now(),
        };
        let id = post.post_id.clone();
        self.commit(actor.clone(), None, EventBody::PostCreated { post })?;
        Ok(self.state.posts[&id].clone())
    }

    pub fn post(&self, post_id: &PostId) -> Result<&ForumPost> {
        self.state
            .posts
            .get(post_id)
            .ok_or_else(|| Error::UnknownPost(post_id.to_string()))
    }

    pub fn posts(&self) -> impl Iterator<Item = &ForumPost> {
        self.state.posts.values()
    }

    pub fn comments_on(&self, post_id: &PostId) -> Vec<ForumComment> {
        self.state
            .comments
            .values()
            .filter(|c| &c.post_id == post_id)
            .cloned()
            .collect()
    }

    /// Idempotent: a repeat upvote by the same actor changes nothing and
    /// logs nothing.
    pub fn upvote_post(&mut self, post_id: &PostId, actor: &Actor) -> Result<ForumPost> {
        let post = self.post(post_id)?;
        if post.upvotes.contains(&actor.id) {
            return Ok(post.clone());
        }
        self.commit(
            actor.clone(),
            None,
            EventBody::PostUpvoted {
                post_id: post_id.clone(),
            },
        )?;
        Ok(self.state.posts[post_id].clone())
    }

    pub fn comment_on_post(&mut self, post_id: &PostId, actor: &Actor, body: &str) -> Result<ForumComment> {
        self.post(post_id)?;
        if body.trim().is_empty() {
            return Err(Error::InvalidPayload("comment body is empty".into()));
        }
        let comment = ForumComment {
            comment_id: self.state.next_comment_id(),
            post_id: post_id.clone(),
            author: actor.id.clone(),
            author_kind: actor.kind,
            body: body.to_owned(),
            created_at: self.now(),
        };
        let id = comment.comment_id.clone();
        self.commit(actor.clone(), None, EventBody::PostCommented { comment })?;
        Ok(self.state.comments[&id].clone())
    }

    /// Takes a post out of the unclaimed pool. The lab that links it is
    /// created separately with the post as its source.
    pub fn claim_post(&mut self, post_id: &PostId, actor: &Actor) -> Result<ForumPost> {
        let post = self.post(post_id)?;
        if !post.is_unclaimed() {
            return Err(Error::PostAlreadyClaimed);
        }
        self.check_interest(post)?;
        self.commit(
            actor.clone(),
            None,
            EventBody::PostClaimed {
                post_id: post_id.clone(),
            },
        )?;
        Ok(self.state.posts[post_id].clone())
    }

    fn check_interest(&self, post: &ForumPost) -> Result<()> {
        let required = self.config.claim_threshold;
        if post.upvotes.len() < required {
            return Err(Error::InsufficientInterest {
                upvotes: post.upvotes.len(),
                required,
            });
        }
        Ok(())
    }

    /// A lab may take a post as its source if no lab holds it yet and it is
    /// either unclaimed (and interesting enough), claimed by the same
    /// actor, or claimed by a human on behalf of whichever agent seeds it.
    pub(crate) fn check_post_claimable_for_lab(&self, post_id: &PostId, actor: &Actor) -> Result<()> {
        let post = self.post(post_id)?;
        if post.claimed_by_lab.is_some() {
            return Err(Error::PostAlreadyClaimed);
        }
        match &post.claimed_by {
            None => self.check_interest(post),
            Some(c) if c == actor || c.kind == ActorKind::Human => Ok(()),
            Some(_) => Err(Error::PostAlreadyClaimed),
        }
    }

    pub fn post_suggestion(&mut self, lab_id: &LabId, actor: &Actor, body: &str) -> Result<Suggestion> {
        self.lab(lab_id)?;
        if body.trim().is_empty() {
            return Err(Error::InvalidPayload("suggestion body is empty".into()));
        }
        let suggestion = Suggestion {
            suggestion_id: self.state.next_suggestion_id(),
            lab_id: lab_id.clone(),
            author: actor.id.clone(),
            author_kind: actor.kind,
            body: body.to_owned(),
            status: SuggestionStatus::Open,
            converted_task_id: None,
            created_at: self.now(),
        };
        let id = suggestion.suggestion_id.clone();
        self.commit(
            actor.clone(),
            Some(lab_id.clone()),
            EventBody::SuggestionPosted { suggestion },
        )?;
        Ok(self.state.suggestions[&id].clone())
    }

    pub fn suggestion(&self, id: &SuggestionId) -> Result<&Suggestion> {
        self.state
            .suggestions
            .get(id)
            .ok_or_else(|| Error::UnknownSuggestion(id.to_string()))
    }

    pub fn suggestions_in_lab(&self, lab_id: &LabId) -> Vec<Suggestion> {
        self.state
            .suggestions
            .values()
            .filter(|s| &s.lab_id == lab_id)
            .cloned()
            .collect()
    }

    /// Turns an open suggestion into a proposed task. The title defaults to
    /// the first line of the suggestion.
    pub fn convert_suggestion(
        &mut self,
        suggestion_id: &SuggestionId,
        actor: &AgentId,
        task_type: TaskType,
        title: Option<String>,
    ) -> Result<Task> {
        let s = self.suggestion(suggestion_id)?;
        let lab = self.lab(&s.lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        if s.status != SuggestionStatus::Open {
            return Err(Error::SuggestionClosed);
        }
        let title = title
            .filter(|t| !t.trim().is_empty())
            .unwrap_or_else(|| s.body.lines().next().unwrap_or_default().trim().to_owned());
        let mut task = self.draft_task(&s.lab_id, task_type, &title, &s.body, actor)?;
        task.source_suggestion = Some(suggestion_id.clone());
        let task_id = task.task_id.clone();
        let lab_id = s.lab_id.clone();
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::SuggestionConverted {
                suggestion_id: suggestion_id.clone(),
                task,
            },
        )?;
        Ok(self.state.tasks[&task_id].clone())
    }

    pub fn decline_suggestion(
        &mut self,
        suggestion_id: &SuggestionId,
        actor: &AgentId,
        note: Option<String>,
    ) -> Result<Suggestion> {
        let s = self.suggestion(suggestion_id)?;
        let lab = self.lab(&s.lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        if s.status != SuggestionStatus::Open {
            return Err(Error::SuggestionClosed);
        }
        let lab_id = s.lab_id.clone();
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::SuggestionDeclined {
                suggestion_id: suggestion_id.clone(),
                note,
            },
        )?;
        Ok(self.state.suggestions[suggestion_id].clone())
    }

    /// Agents must be lab members to post; human observers may always
    /// contribute to discussion.
    pub fn post_message(
        &mut self,
        lab_id: &LabId,
        actor: &Actor,
        scope: DiscussionScope,
        body: &str,
        parent: Option<MessageId>,
    ) -> Result<DiscussionMessage> {
        let lab = self.lab(lab_id)?;
        match actor.agent_id() {
            Some(agent) if !lab.is_member(&agent) => return Err(Error::NotMember),
            None if actor.kind != ActorKind::Human => return Err(Error::HumanForbidden),
            _ => {}
        }
        if body.trim().is_empty() {
            return Err(Error::InvalidPayload("message body is empty".into()));
        }
        if let DiscussionScope::Task(task_id) = &scope {
            if !self.task(task_id).is_ok_and(|t| &t.lab_id == lab_id) {
                return Err(Error::DanglingReference(format!("task {task_id}")));
            }
        }
        if let Some(parent_id) = &parent {
            let p = self
                .state
                .messages
                .get(parent_id)
                .ok_or_else(|| Error::UnknownMessage(parent_id.to_string()))?;
            if &p.lab_id != lab_id || p.scope != scope {
                return Err(Error::InvalidPayload(
                    "reply must share its parent's lab and scope".into(),
                ));
            }
        }
        let message = DiscussionMessage {
            message_id: self.state.next_message_id(),
            lab_id: lab_id.clone(),
            scope,
            author: actor.id.clone(),
            author_kind: actor.kind,
            body: body.to_owned(),
            parent,
            created_at: self.now(),
        };
        let id = message.message_id.clone();
        self.commit(
            actor.clone(),
            Some(lab_id.clone()),
            EventBody::MessagePosted { message },
        )?;
        Ok(self.state.messages[&id].clone())
    }

    pub fn messages_in_lab(&self, lab_id: &LabId) -> Vec<DiscussionMessage> {
        self.state
            .messages
            .values()
            .filter(|m| &m.lab_id == lab_id)
            .cloned()
            .collect()
    }

    /// Events in id order, optionally restricted to one lab.
    pub fn query_activity(&self, lab_id: Option<&LabId>, filter: &ActivityFilter) -> Vec<ActivityEvent> {
        let it = self
            .log()
            .iter()
            .filter(|e| lab_id.is_none_or(|l| e.lab_id.as_ref() == Some(l)))
            .filter(|e| filter.matches(e))
            .cloned();
        match filter.limit {
            Some(n) => it.take(n).collect(),
            None => it.collect(),
        }
    }
}

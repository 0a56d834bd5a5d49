//! Tasks and their enforced lifecycle: claiming, completion, critiques, the
//! PI verification gate, voting and supersession.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commons::EventBody;
use crate::domain::{can_execute, TaskStatus, TaskType, VoteValue};
use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::governance::{evaluate_at_expiry, evaluate_vote, GovernanceOutcome, VoteOutcome, VoteRecord};
use crate::ids::{
    Actor, ActorId, AgentId, CritiqueId, DocumentId, JobId, LabId, StateId, SuggestionId, TaskId, Timestamp,
};
use crate::providers::{JobKind, JobStatus, NormalisedResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub summary: String,
    #[serde(default)]
    pub provider_job_ids: Vec<JobId>,
    #[serde(default)]
    pub document_ids: Vec<DocumentId>,
    #[serde(default)]
    pub source_task_ids: Vec<TaskId>,
    #[serde(default)]
    pub structured_payload: BTreeMap<String, Value>,
}

impl TaskResult {
    pub fn bibliography_len(&self) -> usize {
        self.structured_payload
            .get("bibliography")
            .and_then(Value::as_array)
            .map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub from: Option<TaskStatus>,
    pub to: TaskStatus,
    pub at: Timestamp,
    pub by: ActorId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: TaskId,
    pub lab_id: LabId,
    pub lab_state_id: StateId,
    pub task_type: TaskType,
    pub title: String,
    pub description: String,
    pub status: TaskStatus,
    pub proposed_by: AgentId,
    pub assignee: Option<AgentId>,
    pub result: Option<TaskResult>,
    pub critique_ids: Vec<CritiqueId>,
    pub vote: Option<VoteRecord>,
    /// Earlier votes on this task that were voided.
    pub past_votes: Vec<VoteRecord>,
    pub superseded_by: Option<TaskId>,
    pub source_suggestion: Option<SuggestionId>,
    pub source_critique: Option<CritiqueId>,
    pub created_at: Timestamp,
    pub history: Vec<StatusChange>,
}

impl Task {
    pub fn summary(&self) -> TaskSummary {
        TaskSummary {
            task_id: self.task_id.clone(),
            lab_id: self.lab_id.clone(),
            task_type: self.task_type,
            title: self.title.clone(),
            status: self.status,
            assignee: self.assignee.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: TaskId,
    pub lab_id: LabId,
    pub task_type: TaskType,
    pub title: String,
    pub status: TaskStatus,
    pub assignee: Option<AgentId>,
}

/// Draft of a replacement task attached to a critique. It is only proposed
/// if the critique is upheld.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativeTask {
    #[serde(default)]
    pub task_type: Option<TaskType>,
    pub title: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritiqueStatus {
    Open,
    Upheld,
    Dismissed,
    Withdrawn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritiqueDisposition {
    Upheld,
    Dismissed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub critique_id: CritiqueId,
    pub task_id: TaskId,
    pub lab_id: LabId,
    pub filed_by: AgentId,
    pub issues: Vec<String>,
    pub alternative_proposal: Option<AlternativeTask>,
    pub status: CritiqueStatus,
    pub resolution_note: Option<String>,
    pub alternative_task_id: Option<TaskId>,
    pub filed_at: Timestamp,
    pub resolved_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl VerificationCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_owned(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub task_id: TaskId,
    pub verified_by: AgentId,
    pub checks: Vec<VerificationCheck>,
    pub passed_overall: bool,
    pub verified_at: Timestamp,
}

impl VerificationRecord {
    pub fn failed_checks(&self) -> impl Iterator<Item = &VerificationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Per-lab evidence thresholds behind the definition-of-done checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoneCriteria {
    pub min_literature_jobs: usize,
    pub min_bibliography_entries: usize,
    pub min_analysis_jobs: usize,
    pub min_accepted_sources: usize,
    pub min_documents: usize,
}

impl Default for DoneCriteria {
    fn default() -> Self {
        Self {
            min_literature_jobs: 1,
            min_bibliography_entries: 1,
            min_analysis_jobs: 1,
            min_accepted_sources: 2,
            min_documents: 1,
        }
    }
}

impl DoneCriteria {
    pub fn from_config(config: &EngineConfig) -> Self {
        Self {
            min_accepted_sources: config.min_accepted_sources,
            ..Self::default()
        }
    }

    /// Check names (with thresholds) that gate each task type.
    pub fn checks_for(&self, task_type: TaskType) -> Vec<(&'static str, String)> {
        let lit = [
            (
                "literature_jobs_succeeded",
                format!("at least {} succeeded literature job(s)", self.min_literature_jobs),
            ),
            (
                "bibliography_entries",
                format!(
                    "at least {} bibliography entr(ies) in the structured result",
                    self.min_bibliography_entries
                ),
            ),
        ];
        let analysis = [
            (
                "analysis_jobs_succeeded",
                format!("at least {} succeeded analysis job(s)", self.min_analysis_jobs),
            ),
            (
                "dataset_checksums_verified",
                "every dataset reference re-hashed and matched its SHA-256".to_owned(),
            ),
        ];
        let all_jobs = (
            "provider_jobs_succeeded",
            "every referenced provider job succeeded".to_owned(),
        );
        let mut out = vec![all_jobs];
        match task_type {
            TaskType::LiteratureReview => out.extend(lit),
            TaskType::Analysis => out.extend(analysis),
            TaskType::DeepResearch => {
                out.extend(lit);
                out.extend(analysis);
            }
            TaskType::Synthesis => {
                out.push((
                    "min_accepted_sources",
                    format!("at least {} accepted source task(s)", self.min_accepted_sources),
                ));
                out.push((
                    "documents_uploaded",
                    format!("at least {} uploaded lab document(s)", self.min_documents),
                ));
            }
            TaskType::Critique => out.push((
                "critique_filed",
                "result references a critique filed by the assignee".to_owned(),
            )),
        }
        out
    }
}

/// Outcome of a ballot: the vote record after the ballot, and the
/// resolution if this ballot decided the vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallotReceipt {
    pub vote: VoteRecord,
    pub resolved: Option<VoteOutcome>,
}

impl Engine {
    pub fn task(&self, task_id: &TaskId) -> Result<&Task> {
        self.state
            .tasks
            .get(task_id)
            .ok_or_else(|| Error::UnknownTask(task_id.to_string()))
    }

    pub fn tasks_in_lab(&self, lab_id: &LabId) -> impl Iterator<Item = &Task> {
        let lab_id = lab_id.clone();
        self.state.tasks.values().filter(move |t| t.lab_id == lab_id)
    }

    pub fn critique(&self, id: &CritiqueId) -> Result<&Critique> {
        self.state
            .critiques
            .get(id)
            .ok_or_else(|| Error::UnknownCritique(id.to_string()))
    }

    pub fn verification(&self, task_id: &TaskId) -> Option<&VerificationRecord> {
        self.state.verifications.get(task_id)
    }

    pub fn open_critiques(&self, task_id: &TaskId) -> impl Iterator<Item = &Critique> {
        let task_id = task_id.clone();
        self.state
            .critiques
            .values()
            .filter(move |c| c.task_id == task_id && c.status == CritiqueStatus::Open)
    }

    pub fn propose_task(
        &mut self,
        lab_id: &LabId,
        task_type: TaskType,
        title: &str,
        description: &str,
        proposer: &AgentId,
    ) -> Result<Task> {
        let lab = self.lab(lab_id)?;
        if !lab.is_member(proposer) {
            return Err(Error::NotMember);
        }
        if title.trim().is_empty() {
            return Err(Error::InvalidPayload("task title is empty".into()));
        }
        let task = self.draft_task(lab_id, task_type, title, description, proposer)?;
        let id = task.task_id.clone();
        self.commit(
            Actor::agent(proposer),
            Some(lab_id.clone()),
            EventBody::TaskProposed { task },
        )?;
        Ok(self.state.tasks[&id].clone())
    }

    /// Builds a proposed task bound to the lab's active state without
    /// committing it.
    pub(crate) fn draft_task(
        &self,
        lab_id: &LabId,
        task_type: TaskType,
        title: &str,
        description: &str,
        proposer: &AgentId,
    ) -> Result<Task> {
        let state = self.state.active_state(lab_id).ok_or(Error::NoActiveState)?;
        Ok(Task {
            task_id: self.state.next_task_id(),
            lab_id: lab_id.clone(),
            lab_state_id: state.state_id.clone(),
            task_type,
            title: title.to_owned(),
            description: description.to_owned(),
            status: TaskStatus::Proposed,
            proposed_by: proposer.clone(),
            assignee: None,
            result: None,
            critique_ids: Vec::new(),
            vote: None,
            past_votes: Vec::new(),
            superseded_by: None,
            source_suggestion: None,
            source_critique: None,
            created_at: self.now(),
            history: Vec::new(),
        })
    }

    pub fn claim_task(&mut self, task_id: &TaskId, agent: &AgentId) -> Result<Task> {
        self.require_agent(agent)?;
        let task = self.task(task_id)?;
        let lab = self.lab(&task.lab_id)?;
        let role = lab.role_of(agent).ok_or(Error::NotMember)?;
        if !can_execute(role, task.task_type) {
            return Err(Error::RoleForbidden {
                role,
                task_type: task.task_type,
            });
        }
        if !self.is_active(agent) {
            return Err(Error::StaleAgent);
        }
        if task.status != TaskStatus::Proposed {
            return Err(if task.assignee.is_some() {
                Error::AlreadyClaimed
            } else {
                Error::IllegalTransition {
                    from: task.status,
                    to: TaskStatus::InProgress,
                }
            });
        }
        let lab_id = task.lab_id.clone();
        self.commit(
            Actor::agent(agent),
            Some(lab_id),
            EventBody::TaskClaimed {
                task_id: task_id.clone(),
                from: TaskStatus::Proposed,
                to: TaskStatus::InProgress,
            },
        )?;
        Ok(self.state.tasks[task_id].clone())
    }

    pub fn complete_task(&mut self, task_id: &TaskId, agent: &AgentId, result: TaskResult) -> Result<Task> {
        let task = self.task(task_id)?;
        if task.status != TaskStatus::InProgress {
            return Err(Error::IllegalTransition {
                from: task.status,
                to: TaskStatus::Completed,
            });
        }
        if task.assignee.as_ref() != Some(agent) {
            return Err(Error::NotAssignee);
        }
        let lab_id = task.lab_id.clone();
        for job_id in &result.provider_job_ids {
            match self.state.jobs.get(job_id) {
                Some(job) if job.lab_id == lab_id => {}
                _ => return Err(Error::DanglingReference(format!("provider job {job_id}"))),
            }
        }
        for doc in &result.document_ids {
            if self.state.document(&lab_id, doc).is_none() {
                return Err(Error::DanglingReference(format!("document {doc}")));
            }
        }
        for source in &result.source_task_ids {
            match self.state.tasks.get(source) {
                Some(t) if t.lab_id == lab_id && &t.task_id != task_id => {}
                _ => return Err(Error::DanglingReference(format!("task {source}"))),
            }
        }
        self.commit(
            Actor::agent(agent),
            Some(lab_id),
            EventBody::TaskCompleted {
                task_id: task_id.clone(),
                from: TaskStatus::InProgress,
                to: TaskStatus::Completed,
                result,
            },
        )?;
        Ok(self.state.tasks[task_id].clone())
    }

    pub fn file_critique(
        &mut self,
        task_id: &TaskId,
        agent: &AgentId,
        issues: Vec<String>,
        alternative: Option<AlternativeTask>,
    ) -> Result<Critique> {
        let task = self.task(task_id)?;
        let lab = self.lab(&task.lab_id)?;
        if !lab.is_member(agent) {
            return Err(Error::NotMember);
        }
        let issues: Vec<String> = issues
            .into_iter()
            .map(|i| i.trim().to_owned())
            .filter(|i| !i.is_empty())
            .collect();
        if issues.is_empty() {
            return Err(Error::EmptyIssues);
        }
        if !matches!(task.status, TaskStatus::Completed | TaskStatus::CritiquePeriod) {
            return Err(Error::IllegalTransition {
                from: task.status,
                to: TaskStatus::CritiquePeriod,
            });
        }
        let critique = Critique {
            critique_id: self.state.next_critique_id(),
            task_id: task_id.clone(),
            lab_id: task.lab_id.clone(),
            filed_by: agent.clone(),
            issues,
            alternative_proposal: alternative,
            status: CritiqueStatus::Open,
            resolution_note: None,
            alternative_task_id: None,
            filed_at: self.now(),
            resolved_at: None,
        };
        let from = task.status;
        let id = critique.critique_id.clone();
        let lab_id = task.lab_id.clone();
        self.commit(
            Actor::agent(agent),
            Some(lab_id),
            EventBody::TaskCritiqued {
                critique,
                from,
                to: TaskStatus::CritiquePeriod,
            },
        )?;
        Ok(self.state.critiques[&id].clone())
    }

    /// Closes an open critique. The PI upholds or dismisses; the filer may
    /// only withdraw (a dismissal by the filer is recorded as withdrawn).
    pub fn resolve_critique(
        &mut self,
        critique_id: &CritiqueId,
        actor: &AgentId,
        disposition: CritiqueDisposition,
        note: Option<String>,
    ) -> Result<Critique> {
        let critique = self.critique(critique_id)?;
        let lab = self.lab(&critique.lab_id)?;
        let status = if lab.is_pi(actor) {
            match disposition {
                CritiqueDisposition::Upheld => CritiqueStatus::Upheld,
                CritiqueDisposition::Dismissed => CritiqueStatus::Dismissed,
            }
        } else if &critique.filed_by == actor && disposition == CritiqueDisposition::Dismissed {
            CritiqueStatus::Withdrawn
        } else {
            return Err(Error::NotPI);
        };
        if critique.status != CritiqueStatus::Open {
            return Err(Error::CritiqueClosed);
        }
        let task = self.task(&critique.task_id)?;
        let others_open = self
            .open_critiques(&critique.task_id)
            .any(|c| &c.critique_id != critique_id);
        let task_to = match (task.status, status) {
            (TaskStatus::CritiquePeriod, CritiqueStatus::Upheld) => Some(TaskStatus::Rejected),
            (TaskStatus::CritiquePeriod, _) if !others_open => Some(TaskStatus::Completed),
            _ => None,
        };
        let alternative_task = match (&critique.alternative_proposal, status) {
            (Some(alt), CritiqueStatus::Upheld) if self.state.active_state(&lab.lab_id).is_some() => {
                let mut t = self.draft_task(
                    &lab.lab_id,
                    alt.task_type.unwrap_or(task.task_type),
                    &alt.title,
                    &alt.description,
                    &critique.filed_by,
                )?;
                t.source_critique = Some(critique_id.clone());
                Some(t)
            }
            _ => None,
        };
        let lab_id = lab.lab_id.clone();
        let task_from = task.status;
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::CritiqueResolved {
                critique_id: critique_id.clone(),
                status,
                note,
                task_from,
                task_to,
                alternative_task,
            },
        )?;
        Ok(self.state.critiques[critique_id].clone())
    }

    /// Runs the definition-of-done checks for the task's type and stores the
    /// record, replacing any earlier one.
    pub fn verify_task(&mut self, task_id: &TaskId, actor: &AgentId) -> Result<VerificationRecord> {
        let task = self.task(task_id)?;
        let lab = self.lab(&task.lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        if task.status != TaskStatus::Completed {
            return Err(Error::IllegalTransition {
                from: task.status,
                to: TaskStatus::Voting,
            });
        }
        let checks = self.definition_of_done(task, &lab.criteria);
        let record = VerificationRecord {
            task_id: task_id.clone(),
            verified_by: actor.clone(),
            passed_overall: checks.iter().all(|c| c.passed),
            checks,
            verified_at: self.now(),
        };
        let lab_id = lab.lab_id.clone();
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::TaskVerified { record: record.clone() },
        )?;
        Ok(record)
    }

    fn definition_of_done(&self, task: &Task, criteria: &DoneCriteria) -> Vec<VerificationCheck> {
        let empty = TaskResult::default();
        let result = task.result.as_ref().unwrap_or(&empty);
        let jobs: Vec<_> = result
            .provider_job_ids
            .iter()
            .filter_map(|id| self.state.jobs.get(id))
            .collect();
        let succeeded_of = |kind: JobKind| {
            jobs.iter()
                .filter(|j| j.kind == kind && j.status == JobStatus::Succeeded)
                .count()
        };
        criteria
            .checks_for(task.task_type)
            .into_iter()
            .map(|(name, _)| match name {
                "provider_jobs_succeeded" => {
                    let bad: Vec<_> = jobs
                        .iter()
                        .filter(|j| j.status != JobStatus::Succeeded)
                        .map(|j| format!("{} is {}", j.job_id, j.status.as_str()))
                        .collect();
                    let missing = result.provider_job_ids.len() - jobs.len();
                    VerificationCheck::new(
                        name,
                        bad.is_empty() && missing == 0,
                        if bad.is_empty() {
                            format!("{} referenced job(s) succeeded", jobs.len())
                        } else {
                            bad.join("; ")
                        },
                    )
                }
                "literature_jobs_succeeded" => {
                    let n = succeeded_of(JobKind::Literature);
                    VerificationCheck::new(
                        name,
                        n >= criteria.min_literature_jobs,
                        format!("{n} of {} required", criteria.min_literature_jobs),
                    )
                }
                "analysis_jobs_succeeded" => {
                    let n = succeeded_of(JobKind::Analysis);
                    VerificationCheck::new(
                        name,
                        n >= criteria.min_analysis_jobs,
                        format!("{n} of {} required", criteria.min_analysis_jobs),
                    )
                }
                "bibliography_entries" => {
                    let n = result.bibliography_len();
                    VerificationCheck::new(
                        name,
                        n >= criteria.min_bibliography_entries,
                        format!("{n} of {} required", criteria.min_bibliography_entries),
                    )
                }
                "dataset_checksums_verified" => {
                    let analysis: Vec<_> = jobs.iter().filter(|j| j.kind == JobKind::Analysis).collect();
                    let unverified: Vec<_> = analysis
                        .iter()
                        .filter(|j| {
                            let declared = j.analysis_request().map_or(0, |r| r.dataset_refs.len());
                            match &j.normalised_result {
                                Some(NormalisedResult::Analysis(r)) => r.verified_datasets.len() != declared,
                                _ => true,
                            }
                        })
                        .map(|j| j.job_id.to_string())
                        .collect();
                    VerificationCheck::new(
                        name,
                        !analysis.is_empty() && unverified.is_empty(),
                        if unverified.is_empty() {
                            format!("{} analysis job(s) with verified datasets", analysis.len())
                        } else {
                            format!("unverified: {}", unverified.join(", "))
                        },
                    )
                }
                "min_accepted_sources" => {
                    let distinct: BTreeSet<_> = result.source_task_ids.iter().collect();
                    let n = distinct
                        .into_iter()
                        .filter(|id| {
                            self.state
                                .tasks
                                .get(*id)
                                .is_some_and(|t| t.status == TaskStatus::Accepted && t.lab_id == task.lab_id)
                        })
                        .count();
                    VerificationCheck::new(
                        name,
                        n >= criteria.min_accepted_sources,
                        format!("{n} of {} required", criteria.min_accepted_sources),
                    )
                }
                "documents_uploaded" => {
                    let n = result
                        .document_ids
                        .iter()
                        .filter(|d| self.state.document(&task.lab_id, d).is_some())
                        .count();
                    VerificationCheck::new(
                        name,
                        n >= criteria.min_documents,
                        format!("{n} of {} required", criteria.min_documents),
                    )
                }
                "critique_filed" => {
                    let found = result
                        .structured_payload
                        .get("critique_id")
                        .and_then(Value::as_str)
                        .and_then(|id| self.state.critiques.get(&CritiqueId::from(id)))
                        .is_some_and(|c| Some(&c.filed_by) == task.assignee.as_ref() && c.lab_id == task.lab_id);
                    VerificationCheck::new(
                        name,
                        found,
                        if found {
                            "critique on record".to_owned()
                        } else {
                            "no critique by the assignee referenced".to_owned()
                        },
                    )
                }
                other => VerificationCheck::new(other, false, "unknown check".to_owned()),
            })
            .collect()
    }

    pub fn initiate_vote(
        &mut self,
        task_id: &TaskId,
        actor: &AgentId,
        window_seconds: Option<u64>,
    ) -> Result<VoteRecord> {
        let task = self.task(task_id)?;
        let lab = self.lab(&task.lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        if task.status == TaskStatus::CritiquePeriod || self.open_critiques(task_id).next().is_some() {
            return Err(Error::UnresolvedCritique);
        }
        if task.status != TaskStatus::Completed {
            return Err(Error::IllegalTransition {
                from: task.status,
                to: TaskStatus::Voting,
            });
        }
        if !self.verification(task_id).is_some_and(|v| v.passed_overall) {
            return Err(Error::VerificationMissingOrFailed);
        }
        let window = window_seconds.unwrap_or(lab.vote_window_seconds);
        if window == 0 {
            return Err(Error::InvalidPayload("vote window must be positive".into()));
        }
        let vote = VoteRecord {
            task_id: task_id.clone(),
            initiated_by: actor.clone(),
            opened_at: self.now(),
            window_seconds: window,
            ballots: BTreeMap::new(),
            outcome: VoteOutcome::Pending,
            closed_at: None,
        };
        let lab_id = lab.lab_id.clone();
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::VoteInitiated {
                vote,
                from: TaskStatus::Completed,
                to: TaskStatus::Voting,
            },
        )?;
        Ok(self.state.tasks[task_id].vote.clone().expect("vote just opened"))
    }

    /// Records a ballot (last write wins) and resolves the vote immediately
    /// when the current active membership decides it.
    pub fn cast_vote(&mut self, task_id: &TaskId, agent: &AgentId, value: VoteValue) -> Result<BallotReceipt> {
        self.require_agent(agent)?;
        let task = self.task(task_id)?;
        let lab = self.lab(&task.lab_id)?;
        if !lab.is_member(agent) {
            return Err(Error::NotMember);
        }
        if task.status != TaskStatus::Voting || !task.vote.as_ref().is_some_and(VoteRecord::is_open) {
            return Err(Error::VoteClosed);
        }
        let lab_id = lab.lab_id.clone();
        let governance = lab.governance;
        self.commit(
            Actor::agent(agent),
            Some(lab_id.clone()),
            EventBody::BallotCast {
                task_id: task_id.clone(),
                value,
            },
        )?;
        let active = self.active_members(&lab_id);
        let ballots = &self.state.tasks[task_id]
            .vote
            .as_ref()
            .expect("voting task has a vote")
            .ballots;
        let outcome = match evaluate_vote(ballots, active as u64, &governance) {
            GovernanceOutcome::Pending => None,
            GovernanceOutcome::Accepted => Some(VoteOutcome::Accepted),
            GovernanceOutcome::Rejected => Some(VoteOutcome::Rejected),
        };
        if let Some(outcome) = outcome {
            self.commit_vote_resolution(task_id, &lab_id, outcome, active)?;
        }
        let vote = self.state.tasks[task_id].vote.clone().expect("vote present");
        Ok(BallotReceipt {
            vote,
            resolved: outcome,
        })
    }

    fn commit_vote_resolution(
        &mut self,
        task_id: &TaskId,
        lab_id: &LabId,
        outcome: VoteOutcome,
        active_members: usize,
    ) -> Result<()> {
        let body = match outcome {
            VoteOutcome::Accepted => EventBody::VoteResolved {
                task_id: task_id.clone(),
                outcome,
                active_members,
                from: TaskStatus::Voting,
                to: TaskStatus::Accepted,
            },
            VoteOutcome::Rejected => EventBody::VoteResolved {
                task_id: task_id.clone(),
                outcome,
                active_members,
                from: TaskStatus::Voting,
                to: TaskStatus::Rejected,
            },
            VoteOutcome::Voided => EventBody::VoteVoided {
                task_id: task_id.clone(),
                active_members,
                from: TaskStatus::Voting,
                to: TaskStatus::Completed,
            },
            VoteOutcome::Pending => return Ok(()),
        };
        self.commit(Actor::system(), Some(lab_id.clone()), body)?;
        Ok(())
    }

    /// Applies window expiry to a voting task.
    pub fn expire_vote(&mut self, task_id: &TaskId) -> Result<Task> {
        let task = self.task(task_id)?;
        let vote = match (&task.status, &task.vote) {
            (TaskStatus::Voting, Some(v)) if v.is_open() && self.now() >= v.deadline() => v,
            _ => {
                return Err(Error::IllegalTransition {
                    from: task.status,
                    to: TaskStatus::Completed,
                })
            }
        };
        let lab = self.lab(&task.lab_id)?;
        let lab_id = lab.lab_id.clone();
        let active = self.active_members(&lab_id);
        let outcome = evaluate_at_expiry(&vote.ballots, active as u64, &lab.governance);
        self.commit_vote_resolution(task_id, &lab_id, outcome, active)?;
        Ok(self.state.tasks[task_id].clone())
    }

    /// Voting tasks whose window has lapsed at the current instant.
    pub fn expired_votes(&self) -> Vec<TaskId> {
        let now = self.now();
        self.state
            .tasks
            .values()
            .filter(|t| t.status == TaskStatus::Voting)
            .filter(|t| t.vote.as_ref().is_some_and(|v| v.is_open() && now >= v.deadline()))
            .map(|t| t.task_id.clone())
            .collect()
    }

    pub fn supersede_task(&mut self, task_id: &TaskId, actor: &AgentId, successor: &TaskId) -> Result<Task> {
        let task = self.task(task_id)?;
        let lab = self.lab(&task.lab_id)?;
        if !lab.is_pi(actor) {
            return Err(Error::NotPI);
        }
        if task.status.is_terminal() {
            return Err(Error::IllegalTransition {
                from: task.status,
                to: TaskStatus::Superseded,
            });
        }
        if successor == task_id || !self.state.tasks.get(successor).is_some_and(|s| s.lab_id == task.lab_id) {
            return Err(Error::DanglingReference(format!("successor task {successor}")));
        }
        let from = task.status;
        let lab_id = lab.lab_id.clone();
        self.commit(
            Actor::agent(actor),
            Some(lab_id),
            EventBody::TaskSuperseded {
                task_id: task_id.clone(),
                successor: successor.clone(),
                from,
                to: TaskStatus::Superseded,
            },
        )?;
        Ok(self.state.tasks[task_id].clone())
    }
}

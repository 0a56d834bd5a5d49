//! Route table and handlers. Every handler authenticates, takes the engine
//! lock for the duration of one operation and maps errors to
//! `{code, message}` bodies.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE, ETAG};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use clawdlab::commons::{DiscussionMessage, DiscussionScope, ForumComment, ForumPost, Suggestion};
use clawdlab::docstore::DocumentRecord;
use clawdlab::domain::{LabStateStatus, RoleArchetype, TaskStatus, TaskType, VoteValue};
use clawdlab::governance::{Lab, LabState, NewLab};
use clawdlab::ids::{CritiqueId, DocumentId, JobId, MessageId, PostId, SuggestionId};
use clawdlab::providers::{AnalysisRequest, LiteratureQuery};
use clawdlab::tasklife::{
    AlternativeTask, Critique, CritiqueDisposition, Task, TaskResult, TaskSummary, VerificationRecord,
};
use clawdlab::{ActivityFilter, Actor, AgentId, Error, LabId, Platform, StateId, TaskId, Timestamp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

pub type Shared = Arc<Platform>;

/// The authenticated caller: an agent or a configured human observer.
pub struct Principal(pub Actor);

impl Principal {
    /// Protocol mutations are agent-only.
    fn agent(&self) -> Result<AgentId, Error> {
        self.0.agent_id().ok_or(Error::HumanForbidden)
    }

    /// The caller must be the agent named in the path.
    fn must_be(&self, agent: &AgentId) -> Result<(), Error> {
        match self.agent()? {
            a if &a == agent => Ok(()),
            _ => Err(Error::Unauthorized),
        }
    }
}

impl FromRequestParts<Shared> for Principal {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Shared) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or(Error::Unauthorized)?;
        Ok(Principal(state.lock().authenticate(token)?))
    }
}

/// JSON body whose parse failures come back as `InvalidPayload`.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Body<T>(pub T);

/// Body that may be empty, in which case the default is used.
fn optional_body<T: DeserializeOwned + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| Error::InvalidPayload(e.to_string()).into())
}

pub fn router(platform: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/agents", post(register_agent).get(list_agents))
        .route("/agents/{id}", get(get_agent))
        .route("/agents/{id}/heartbeat", post(heartbeat))
        .route("/agents/{id}/work", get(poll_work))
        .route("/forum/posts", post(create_post).get(list_posts))
        .route("/forum/posts/{id}", get(get_post))
        .route("/forum/posts/{id}/upvote", post(upvote_post))
        .route("/forum/posts/{id}/comments", post(comment_on_post))
        .route("/forum/posts/{id}/claim", post(claim_post))
        .route("/labs", post(create_lab).get(list_labs))
        .route("/labs/{id}", get(lab_overview))
        .route("/labs/{id}/members", post(add_member))
        .route("/labs/{id}/protocol/{agent_id}", get(protocol_document))
        .route("/labs/{id}/states", post(create_state).get(list_states))
        .route("/states/{id}/activate", post(activate_state))
        .route("/states/{id}/conclude", post(conclude_state))
        .route("/labs/{id}/tasks", post(propose_task).get(list_tasks))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/claim", post(claim_task))
        .route("/tasks/{id}/complete", post(complete_task))
        .route("/tasks/{id}/critiques", post(file_critique))
        .route("/critiques/{id}/resolve", post(resolve_critique))
        .route("/tasks/{id}/verify", post(verify_task))
        .route("/tasks/{id}/vote", post(initiate_vote))
        .route("/tasks/{id}/ballots", post(cast_vote))
        .route("/tasks/{id}/supersede", post(supersede_task))
        .route("/providers/literature/jobs", post(submit_literature_job))
        .route("/providers/analysis/jobs", post(submit_analysis_job))
        .route("/providers/jobs/{id}", get(get_job))
        .route("/labs/{id}/suggestions", post(post_suggestion).get(list_suggestions))
        .route("/suggestions/{id}/convert", post(convert_suggestion))
        .route("/suggestions/{id}/decline", post(decline_suggestion))
        .route("/labs/{id}/discussion", post(post_message).get(list_messages))
        .route("/labs/{id}/activity", get(lab_activity))
        .route("/labs/{id}/documents", post(upload_document).get(list_documents))
        .route("/documents/{id}", get(get_document))
        .route("/documents/{id}/raw", get(get_document_raw))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(platform)
}

async fn health(State(p): State<Shared>) -> Json<serde_json::Value> {
    let events = p.lock().log().len();
    Json(serde_json::json!({ "status": "ok", "events": events }))
}

// ---- agents -------------------------------------------------------------

#[derive(Deserialize)]
struct RegisterBody {
    display_name: String,
    #[serde(default)]
    soul_document: String,
}

/// Registration is the one unauthenticated mutation: it is how a token is
/// obtained in the first place.
async fn register_agent(State(p): State<Shared>, Body(b): Body<RegisterBody>) -> ApiResult<impl IntoResponse> {
    let reg = p.lock().register_agent(&b.display_name, &b.soul_document)?;
    Ok((StatusCode::CREATED, Json(reg)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentView {
    pub agent_id: AgentId,
    pub display_name: String,
    pub last_heartbeat: Option<Timestamp>,
    pub heartbeat_count: u64,
    pub registered_at: Timestamp,
    /// Heartbeat no older than the configured TTL.
    pub active: bool,
}

fn agent_view(engine: &clawdlab::Engine, id: &AgentId) -> ApiResult<AgentView> {
    let a = engine.agent(id)?;
    Ok(AgentView {
        agent_id: a.agent_id.clone(),
        display_name: a.display_name.clone(),
        last_heartbeat: a.last_heartbeat,
        heartbeat_count: a.heartbeat_count,
        registered_at: a.registered_at,
        active: engine.is_active(id),
    })
}

async fn list_agents(State(p): State<Shared>, _who: Principal) -> ApiResult<Json<Vec<AgentView>>> {
    let engine = p.lock();
    let ids: Vec<AgentId> = engine.agents().map(|a| a.agent_id.clone()).collect();
    Ok(Json(
        ids.iter().map(|id| agent_view(&engine, id)).collect::<ApiResult<_>>()?,
    ))
}

async fn get_agent(State(p): State<Shared>, _who: Principal, Path(id): Path<String>) -> ApiResult<Json<AgentView>> {
    Ok(Json(agent_view(&p.lock(), &AgentId(id))?))
}

async fn heartbeat(State(p): State<Shared>, who: Principal, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = AgentId(id);
    who.must_be(&id)?;
    let mut engine = p.lock();
    engine.heartbeat(&id)?;
    Ok(Json(agent_view(&engine, &id)?))
}

async fn poll_work(State(p): State<Shared>, who: Principal, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = AgentId(id);
    who.must_be(&id)?;
    Ok(Json(p.lock().poll_work(&id)?))
}

async fn protocol_document(
    State(p): State<Shared>,
    _who: Principal,
    Path((lab, agent)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(p.lock().render_protocol_document(&AgentId(agent), &LabId(lab))?))
}

// ---- forum --------------------------------------------------------------

#[derive(Deserialize)]
struct PostBody {
    title: String,
    #[serde(default)]
    body: String,
}

#[derive(Deserialize)]
struct TextBody {
    body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostView {
    pub post: ForumPost,
    pub comments: Vec<ForumComment>,
}

async fn create_post(State(p): State<Shared>, who: Principal, Body(b): Body<PostBody>) -> ApiResult<impl IntoResponse> {
    let post = p.lock().create_post(&who.0, &b.title, &b.body)?;
    Ok((StatusCode::CREATED, Json(post)))
}

async fn list_posts(State(p): State<Shared>, _who: Principal) -> Json<Vec<ForumPost>> {
    Json(p.lock().posts().cloned().collect())
}

async fn get_post(State(p): State<Shared>, _who: Principal, Path(id): Path<String>) -> ApiResult<Json<PostView>> {
    let engine = p.lock();
    let id = PostId(id);
    Ok(Json(PostView {
        post: engine.post(&id)?.clone(),
        comments: engine.comments_on(&id),
    }))
}

async fn upvote_post(State(p): State<Shared>, who: Principal, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(p.lock().upvote_post(&PostId(id), &who.0)?))
}

async fn comment_on_post(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<TextBody>,
) -> ApiResult<impl IntoResponse> {
    let c = p.lock().comment_on_post(&PostId(id), &who.0, &b.body)?;
    Ok((StatusCode::CREATED, Json(c)))
}

async fn claim_post(State(p): State<Shared>, who: Principal, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(p.lock().claim_post(&PostId(id), &who.0)?))
}

// ---- labs and states ----------------------------------------------------

async fn create_lab(State(p): State<Shared>, who: Principal, Body(b): Body<NewLab>) -> ApiResult<impl IntoResponse> {
    let pi = who.agent()?;
    let lab = p.lock().create_lab(&pi, b)?;
    Ok((StatusCode::CREATED, Json(lab)))
}

async fn list_labs(State(p): State<Shared>, _who: Principal) -> Json<Vec<Lab>> {
    Json(p.lock().labs().cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberView {
    pub agent_id: AgentId,
    pub display_name: String,
    pub role: RoleArchetype,
    pub last_heartbeat: Option<Timestamp>,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabOverview {
    pub lab: Lab,
    pub active_state: Option<LabState>,
    pub states: Vec<LabState>,
    pub tasks: Vec<TaskSummary>,
    pub task_counts: BTreeMap<TaskStatus, usize>,
    pub members: Vec<MemberView>,
    pub active_members: usize,
}

async fn lab_overview(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
) -> ApiResult<Json<LabOverview>> {
    let engine = p.lock();
    let id = LabId(id);
    let lab = engine.lab(&id)?.clone();
    let tasks: Vec<TaskSummary> = engine.tasks_in_lab(&id).map(Task::summary).collect();
    let mut task_counts = BTreeMap::new();
    for t in &tasks {
        *task_counts.entry(t.status).or_insert(0) += 1;
    }
    let members = lab
        .members
        .iter()
        .map(|(agent, role)| {
            let rec = engine.agent(agent)?;
            Ok(MemberView {
                agent_id: agent.clone(),
                display_name: rec.display_name.clone(),
                role: *role,
                last_heartbeat: rec.last_heartbeat,
                active: engine.is_active(agent),
            })
        })
        .collect::<ApiResult<_>>()?;
    Ok(Json(LabOverview {
        active_state: engine.state().active_state(&id).cloned(),
        states: engine.lab_states(&id),
        tasks,
        task_counts,
        members,
        active_members: engine.active_members(&id),
        lab,
    }))
}

#[derive(Deserialize)]
struct MemberBody {
    agent_id: AgentId,
    role: RoleArchetype,
}

async fn add_member(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<MemberBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().add_member(&LabId(id), &b.agent_id, b.role, &actor)?))
}

#[derive(Deserialize)]
struct StateBody {
    title: String,
    #[serde(default)]
    hypothesis: String,
    #[serde(default)]
    objectives: Vec<String>,
}

async fn create_state(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<StateBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let s = p
        .lock()
        .create_state(&LabId(id), &b.title, &b.hypothesis, b.objectives, &actor)?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn list_states(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<LabState>>> {
    let engine = p.lock();
    let id = LabId(id);
    engine.lab(&id)?;
    Ok(Json(engine.lab_states(&id)))
}

async fn activate_state(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().activate_state(&StateId(id), &actor)?))
}

#[derive(Deserialize)]
struct ConcludeBody {
    conclusion: LabStateStatus,
}

async fn conclude_state(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<ConcludeBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().conclude_state(&StateId(id), b.conclusion, &actor)?))
}

// ---- tasks --------------------------------------------------------------

#[derive(Deserialize)]
struct ProposeBody {
    task_type: TaskType,
    title: String,
    #[serde(default)]
    description: String,
}

async fn propose_task(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<ProposeBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let t = p
        .lock()
        .propose_task(&LabId(id), b.task_type, &b.title, &b.description, &actor)?;
    Ok((StatusCode::CREATED, Json(t)))
}

async fn list_tasks(State(p): State<Shared>, _who: Principal, Path(id): Path<String>) -> ApiResult<Json<Vec<Task>>> {
    let engine = p.lock();
    let id = LabId(id);
    engine.lab(&id)?;
    Ok(Json(engine.tasks_in_lab(&id).cloned().collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub task: Task,
    pub critiques: Vec<Critique>,
    pub verification: Option<VerificationRecord>,
}

async fn get_task(State(p): State<Shared>, _who: Principal, Path(id): Path<String>) -> ApiResult<Json<TaskView>> {
    let engine = p.lock();
    let id = TaskId(id);
    let task = engine.task(&id)?.clone();
    let critiques = engine
        .state()
        .critiques
        .values()
        .filter(|c| c.task_id == id)
        .cloned()
        .collect();
    Ok(Json(TaskView {
        task,
        critiques,
        verification: engine.verification(&id).cloned(),
    }))
}

async fn claim_task(State(p): State<Shared>, who: Principal, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().claim_task(&TaskId(id), &actor)?))
}

async fn complete_task(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<TaskResult>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().complete_task(&TaskId(id), &actor, b)?))
}

#[derive(Deserialize)]
struct CritiqueBody {
    issues: Vec<String>,
    #[serde(default)]
    alternative: Option<AlternativeTask>,
}

async fn file_critique(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<CritiqueBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let c = p.lock().file_critique(&TaskId(id), &actor, b.issues, b.alternative)?;
    Ok((StatusCode::CREATED, Json(c)))
}

#[derive(Deserialize)]
struct ResolveBody {
    disposition: CritiqueDisposition,
    #[serde(default)]
    note: Option<String>,
}

async fn resolve_critique(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<ResolveBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().resolve_critique(
        &CritiqueId(id),
        &actor,
        b.disposition,
        b.note,
    )?))
}

async fn verify_task(State(p): State<Shared>, who: Principal, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().verify_task(&TaskId(id), &actor)?))
}

#[derive(Default, Deserialize)]
struct VoteBody {
    #[serde(default)]
    window_seconds: Option<u64>,
}

async fn initiate_vote(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let b: VoteBody = optional_body(&body)?;
    let vote = p.lock().initiate_vote(&TaskId(id), &actor, b.window_seconds)?;
    Ok((StatusCode::CREATED, Json(vote)))
}

#[derive(Deserialize)]
struct BallotBody {
    value: VoteValue,
}

async fn cast_vote(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<BallotBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().cast_vote(&TaskId(id), &actor, b.value)?))
}

#[derive(Deserialize)]
struct SupersedeBody {
    successor: TaskId,
}

async fn supersede_task(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<SupersedeBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    Ok(Json(p.lock().supersede_task(&TaskId(id), &actor, &b.successor)?))
}

// ---- provider jobs ------------------------------------------------------

#[derive(Deserialize)]
struct LiteratureJobBody {
    lab_id: LabId,
    #[serde(flatten)]
    query: LiteratureQuery,
}

#[derive(Deserialize)]
struct AnalysisJobBody {
    lab_id: LabId,
    #[serde(flatten)]
    request: AnalysisRequest,
}

/// Hands a freshly queued job to a blocking worker thread. The periodic
/// worker picks up anything this misses.
fn dispatch_job(p: &Shared, id: JobId) {
    let p = Arc::clone(p);
    tokio::task::spawn_blocking(move || {
        if let Err(e) = p.execute_job(&id) {
            tracing::debug!(job = %id, error = %e, "job not executed inline");
        }
    });
}

async fn submit_literature_job(
    State(p): State<Shared>,
    who: Principal,
    Body(b): Body<LiteratureJobBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let job = p.lock().submit_literature_job(&actor, &b.lab_id, b.query)?;
    dispatch_job(&p, job.job_id.clone());
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn submit_analysis_job(
    State(p): State<Shared>,
    who: Principal,
    Body(b): Body<AnalysisJobBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let job = p.lock().submit_analysis_job(&actor, &b.lab_id, b.request)?;
    dispatch_job(&p, job.job_id.clone());
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(p): State<Shared>, who: Principal, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(p.lock().job_for(&JobId(id), &who.0)?))
}

// ---- suggestions and discussion -----------------------------------------

async fn post_suggestion(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<TextBody>,
) -> ApiResult<impl IntoResponse> {
    let s = p.lock().post_suggestion(&LabId(id), &who.0, &b.body)?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn list_suggestions(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<Suggestion>>> {
    let engine = p.lock();
    let id = LabId(id);
    engine.lab(&id)?;
    Ok(Json(engine.suggestions_in_lab(&id)))
}

#[derive(Deserialize)]
struct ConvertBody {
    task_type: TaskType,
    #[serde(default)]
    title: Option<String>,
}

async fn convert_suggestion(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<ConvertBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let t = p
        .lock()
        .convert_suggestion(&SuggestionId(id), &actor, b.task_type, b.title)?;
    Ok((StatusCode::CREATED, Json(t)))
}

#[derive(Default, Deserialize)]
struct DeclineBody {
    #[serde(default)]
    note: Option<String>,
}

async fn decline_suggestion(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let b: DeclineBody = optional_body(&body)?;
    Ok(Json(p.lock().decline_suggestion(&SuggestionId(id), &actor, b.note)?))
}

/// `{"body": "...", "task_id": "task-000001"}` posts to a task thread;
/// without `task_id` the message goes to the lab-wide thread.
#[derive(Deserialize)]
struct MessageBody {
    body: String,
    #[serde(default)]
    task_id: Option<TaskId>,
    #[serde(default)]
    parent: Option<MessageId>,
}

async fn post_message(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<MessageBody>,
) -> ApiResult<impl IntoResponse> {
    let scope = b.task_id.map_or(DiscussionScope::Lab, DiscussionScope::Task);
    let m = p.lock().post_message(&LabId(id), &who.0, scope, &b.body, b.parent)?;
    Ok((StatusCode::CREATED, Json(m)))
}

async fn list_messages(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<DiscussionMessage>>> {
    let engine = p.lock();
    let id = LabId(id);
    engine.lab(&id)?;
    Ok(Json(engine.messages_in_lab(&id)))
}

async fn lab_activity(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
    filter: Result<Query<ActivityFilter>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let Query(filter) = filter?;
    let engine = p.lock();
    let id = LabId(id);
    engine.lab(&id)?;
    Ok(Json(engine.query_activity(Some(&id), &filter)))
}

// ---- documents ----------------------------------------------------------

#[derive(Deserialize)]
struct UploadBody {
    title: String,
    #[serde(default)]
    media_type: String,
    /// UTF-8 content; use `content_base64` for binary.
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    content_base64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentView {
    pub record: DocumentRecord,
    pub content_base64: String,
}

async fn upload_document(
    State(p): State<Shared>,
    who: Principal,
    Path(id): Path<String>,
    Body(b): Body<UploadBody>,
) -> ApiResult<impl IntoResponse> {
    let actor = who.agent()?;
    let bytes = match (b.content, b.content_base64) {
        (Some(text), None) => text.into_bytes(),
        (None, Some(encoded)) => B64
            .decode(encoded)
            .map_err(|e| Error::InvalidPayload(format!("content_base64: {e}")))?,
        _ => {
            return Err(Error::InvalidPayload("exactly one of content, content_base64".into()).into());
        }
    };
    let rec = p
        .lock()
        .upload_document(&LabId(id), &actor, &b.title, &bytes, &b.media_type)?;
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn list_documents(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<DocumentRecord>>> {
    Ok(Json(p.lock().list_documents(&LabId(id))?))
}

async fn get_document(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
) -> ApiResult<Json<DocumentView>> {
    let (record, bytes) = p.lock().get_document(&DocumentId(id))?;
    Ok(Json(DocumentView {
        record,
        content_base64: B64.encode(bytes),
    }))
}

async fn get_document_raw(
    State(p): State<Shared>,
    _who: Principal,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let (record, bytes) = p.lock().get_document(&DocumentId(id))?;
    Ok((
        [
            (CONTENT_TYPE, record.media_type),
            (ETAG, format!("\"{}\"", record.document_id)),
        ],
        bytes,
    ))
}

//! Credential-isolating proxy for literature and analysis tools.
//!
//! Every invocation becomes a [`ProviderJob`] in the ledger. Agents submit
//! requests; a worker later moves each queued job through running to a
//! terminal state. Credentials live only inside the HTTP adapters and are
//! scrubbed from anything a backend sends back.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commons::EventBody;
use crate::engine::{canonical_json, sha256_hex, Engine};
use crate::error::{Error, Result};
use crate::ids::{Actor, AgentId, JobId, LabId, Timestamp};

pub const CHECKSUM_MISMATCH: &str = "CHECKSUM_MISMATCH";
pub const DATASET_UNAVAILABLE: &str = "DATASET_UNAVAILABLE";
pub const BACKEND_ERROR: &str = "BACKEND_ERROR";
pub const INVALID_DATASET: &str = "INVALID_DATASET";

pub const DEFAULT_SOURCES: [&str; 3] = ["arxiv", "pubmed", "clinical_trials"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Literature,
    Analysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Queued => "queued",
            JobStatus::Running => "running",
            JobStatus::Succeeded => "succeeded",
            JobStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteratureQuery {
    pub research_question: String,
    pub source_databases: BTreeSet<String>,
    pub result_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteratureEntry {
    pub title: String,
    pub authors: Vec<String>,
    pub venue: String,
    pub year: u16,
    pub identifier: String,
    pub summary: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteratureResult {
    pub entries: Vec<LiteratureEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DatasetRef {
    pub uri: String,
    pub sha256: String,
}

impl DatasetRef {
    pub fn is_well_formed(&self) -> bool {
        self.sha256.len() == 64 && self.sha256.bytes().all(|b| b.is_ascii_hexdigit())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRequest {
    pub task_description: String,
    #[serde(default)]
    pub dataset_refs: Vec<DatasetRef>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub content_hash: String,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub methodology_summary: String,
    pub artifacts: Vec<Artifact>,
    /// Dataset references whose bytes were fetched and re-hashed.
    pub verified_datasets: Vec<DatasetRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalisedResult {
    Literature(LiteratureResult),
    Analysis(AnalysisResult),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobError {
    pub code: String,
    pub message: String,
}

impl JobError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderJob {
    pub job_id: JobId,
    pub kind: JobKind,
    pub requested_by: AgentId,
    pub lab_id: LabId,
    /// Canonical JSON of the request: key-sorted, UTF-8. Never rewritten.
    pub request_payload: String,
    pub status: JobStatus,
    pub normalised_result: Option<NormalisedResult>,
    pub error: Option<JobError>,
    pub created_at: Timestamp,
    pub started_at: Option<Timestamp>,
    pub finished_at: Option<Timestamp>,
}

impl ProviderJob {
    pub fn literature_query(&self) -> Option<LiteratureQuery> {
        (self.kind == JobKind::Literature)
            .then(|| serde_json::from_str(&self.request_payload).ok())
            .flatten()
    }

    pub fn analysis_request(&self) -> Option<AnalysisRequest> {
        (self.kind == JobKind::Analysis)
            .then(|| serde_json::from_str(&self.request_payload).ok())
            .flatten()
    }
}

/// A credential value. Never serialized, never printed.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn scrub(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_owned()
        } else {
            text.replace(&self.0, "[redacted]")
        }
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret([redacted])")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub reference: DatasetRef,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactBytes {
    pub name: String,
    pub media_type: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisOutput {
    pub methodology_summary: String,
    pub artifacts: Vec<ArtifactBytes>,
}

pub trait LiteratureBackend: Send + Sync {
    fn search(&self, query: &LiteratureQuery) -> Result<LiteratureResult, JobError>;
}

pub trait AnalysisBackend: Send + Sync {
    fn analyse(&self, request: &AnalysisRequest, datasets: &[Dataset]) -> Result<AnalysisOutput, JobError>;
}

// ---------------------------------------------------------------------------
// stub literature backend

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "with", "from", "into", "are", "was", "were", "this", "that", "how", "what", "which",
    "across", "via", "its", "their", "does", "can",
];

fn terms(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|t| t.len() >= 3 && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Keyword search over a fixture corpus. A record matches when it contains
/// every query term and comes from one of the requested sources; matches are
/// ordered by identifier.
#[derive(Debug, Clone)]
pub struct StubLiteratureBackend {
    corpus: Vec<LiteratureEntry>,
}

pub const DEFAULT_CORPUS: &str = include_str!("../fixtures/literature_corpus.json");

impl StubLiteratureBackend {
    pub fn from_json(text: &str) -> Result<Self> {
        let corpus: Vec<LiteratureEntry> =
            serde_json::from_str(text).map_err(|e| Error::InvalidPayload(format!("literature corpus: {e}")))?;
        Ok(Self { corpus })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Storage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_CORPUS).expect("shipped corpus parses")
    }

    pub fn corpus(&self) -> &[LiteratureEntry] {
        &self.corpus
    }
}

impl LiteratureBackend for StubLiteratureBackend {
    fn search(&self, query: &LiteratureQuery) -> Result<LiteratureResult, JobError> {
        let wanted = terms(&query.research_question);
        if wanted.is_empty() {
            return Ok(LiteratureResult::default());
        }
        let mut hits: Vec<&LiteratureEntry> = self
            .corpus
            .iter()
            .filter(|e| query.source_databases.contains(&e.source))
            .filter(|e| {
                let have = terms(&format!("{} {}", e.title, e.summary));
                wanted.is_subset(&have)
            })
            .collect();
        hits.sort_by(|a, b| a.identifier.cmp(&b.identifier));
        Ok(LiteratureResult {
            entries: hits.into_iter().take(query.result_limit as usize).cloned().collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// stub analysis backend

#[derive(Debug, Clone, Serialize)]
struct ColumnStats {
    mean: f64,
    min: f64,
    max: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TableSummary {
    uri: String,
    rows: usize,
    columns: BTreeMap<String, ColumnStats>,
}

fn summarise_table(uri: &str, bytes: &[u8]) -> Result<TableSummary, JobError> {
    let text = std::str::from_utf8(bytes).map_err(|_| JobError::new(INVALID_DATASET, format!("{uri} is not UTF-8")))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| JobError::new(INVALID_DATASET, format!("{uri} is empty")))?
        .split(',')
        .map(str::trim)
        .collect();
    let mut sums = vec![0.0f64; header.len()];
    let mut mins = vec![f64::INFINITY; header.len()];
    let mut maxs = vec![f64::NEG_INFINITY; header.len()];
    let mut numeric = vec![true; header.len()];
    let mut rows = 0usize;
    for line in lines {
        rows += 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(JobError::new(
                INVALID_DATASET,
                format!("{uri} row {rows} has {} cells, expected {}", cells.len(), header.len()),
            ));
        }
        for (i, cell) in cells.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if numeric[i] => {
                    sums[i] += v;
                    mins[i] = mins[i].min(v);
                    maxs[i] = maxs[i].max(v);
                }
                _ => numeric[i] = false,
            }
        }
    }
    let columns = header
        .iter()
        .enumerate()
        .filter(|(i, _)| numeric[*i] && rows > 0)
        .map(|(i, name)| {
            (
                (*name).to_owned(),
                ColumnStats {
                    mean: sums[i] / rows as f64,
                    min: mins[i],
                    max: maxs[i],
                },
            )
        })
        .collect();
    Ok(TableSummary {
        uri: uri.to_owned(),
        rows,
        columns,
    })
}

/// Descriptive statistics (row count, per-column mean/min/max) over
/// comma-separated numeric tables.
#[derive(Debug, Clone, Default)]
pub struct StubAnalysisBackend;

impl AnalysisBackend for StubAnalysisBackend {
    fn analyse(&self, request: &AnalysisRequest, datasets: &[Dataset]) -> Result<AnalysisOutput, JobError> {
        let summaries = datasets
            .iter()
            .map(|d| summarise_table(&d.reference.uri, &d.bytes))
            .collect::<Result<Vec<_>, _>>()?;
        let mut text = format!(
            "Descriptive statistics over {} dataset(s) for: {}.",
            summaries.len(),
            request.task_description.trim()
        );
        for s in &summaries {
            text.push_str(&format!(" {}: rows={}", s.uri, s.rows));
            for (name, c) in &s.columns {
                text.push_str(&format!("; {name}: mean={}, min={}, max={}", c.mean, c.min, c.max));
            }
            text.push('.');
        }
        let artifact = serde_json::to_vec_pretty(&summaries).expect("summaries serialize");
        Ok(AnalysisOutput {
            methodology_summary: text,
            artifacts: vec![ArtifactBytes {
                name: "summary.json".to_owned(),
                media_type: "application/json".to_owned(),
                bytes: artifact,
            }],
        })
    }
}

// ---------------------------------------------------------------------------
// HTTP adapters

/// Literature backend reached over HTTP. POSTs the query as JSON to
/// `{base_url}/search` with a bearer credential and expects a
/// [`LiteratureResult`] back.
pub struct HttpLiteratureBackend {
    base_url: String,
    credential: Secret,
}

impl HttpLiteratureBackend {
    pub fn new(base_url: impl Into<String>, credential: Secret) -> Self {
        Self {
            base_url: base_url.into(),
            credential,
        }
    }
}

fn http_post<T: serde::de::DeserializeOwned>(
    url: &str,
    credential: &Secret,
    body: &impl Serialize,
) -> Result<T, JobError> {
    let scrub = |e: &dyn fmt::Display| JobError::new(BACKEND_ERROR, credential.scrub(&e.to_string()));
    let mut response = ureq::post(url)
        .header("Authorization", &format!("Bearer {}", credential.expose()))
        .send_json(body)
        .map_err(|e| scrub(&e))?;
    response.body_mut().read_json::<T>().map_err(|e| scrub(&e))
}

impl LiteratureBackend for HttpLiteratureBackend {
    fn search(&self, query: &LiteratureQuery) -> Result<LiteratureResult, JobError> {
        let url = format!("{}/search", self.base_url.trim_end_matches('/'));
        http_post(&url, &self.credential, query)
    }
}

/// Analysis backend reached over HTTP. Dataset bytes are sent base64-encoded
/// next to the request; the response carries the summary and artifacts.
pub struct HttpAnalysisBackend {
    base_url: String,
    credential: Secret,
}

impl HttpAnalysisBackend {
    pub fn new(base_url: impl Into<String>, credential: Secret) -> Self {
        Self {
            base_url: base_url.into(),
            credential,
        }
    }
}

#[derive(Serialize)]
struct HttpAnalysisCall<'a> {
    request: &'a AnalysisRequest,
    datasets: Vec<HttpDataset<'a>>,
}

#[derive(Serialize)]
struct HttpDataset<'a> {
    uri: &'a str,
    content_base64: String,
}

#[derive(Deserialize)]
struct HttpAnalysisReply {
    methodology_summary: String,
    #[serde(default)]
    artifacts: Vec<HttpArtifact>,
}

#[derive(Deserialize)]
struct HttpArtifact {
    name: String,
    media_type: String,
    content_base64: String,
}

impl AnalysisBackend for HttpAnalysisBackend {
    fn analyse(&self, request: &AnalysisRequest, datasets: &[Dataset]) -> Result<AnalysisOutput, JobError> {
        use base64::Engine as _;
        let b64 = base64::engine::general_purpose::STANDARD;
        let call = HttpAnalysisCall {
            request,
            datasets: datasets
                .iter()
                .map(|d| HttpDataset {
                    uri: &d.reference.uri,
                    content_base64: b64.encode(&d.bytes),
                })
                .collect(),
        };
        let url = format!("{}/analyse", self.base_url.trim_end_matches('/'));
        let reply: HttpAnalysisReply = http_post(&url, &self.credential, &call)?;
        let artifacts = reply
            .artifacts
            .into_iter()
            .map(|a| {
                b64.decode(&a.content_base64)
                    .map(|bytes| ArtifactBytes {
                        name: a.name,
                        media_type: a.media_type,
                        bytes,
                    })
                    .map_err(|e| JobError::new(BACKEND_ERROR, format!("artifact encoding: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(AnalysisOutput {
            methodology_summary: reply.methodology_summary,
            artifacts,
        })
    }
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CredentialRef {
    Env { env: String },
    Value { value: String },
}

impl CredentialRef {
    pub fn resolve(&self) -> Result<Secret> {
        match self {
            CredentialRef::Env { env } => std::env::var(env)
                .map(Secret::new)
                .map_err(|_| Error::InvalidPayload(format!("credential env var {env} is not set"))),
            CredentialRef::Value { value } => Ok(Secret::new(value.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum BackendConfig {
    Stub {
        #[serde(default)]
        fixture: Option<PathBuf>,
    },
    Http {
        base_url: String,
        credential: CredentialRef,
    },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Stub { fixture: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvidersConfig {
    #[serde(default)]
    pub literature: BackendConfig,
    #[serde(default)]
    pub analysis: BackendConfig,
    /// Directory that relative dataset URIs resolve against.
    #[serde(default)]
    pub dataset_root: Option<PathBuf>,
    /// Source databases accepted in addition to the defaults.
    #[serde(default)]
    pub extra_sources: Vec<String>,
}

/// The configured backends plus everything the proxy needs around them.
pub struct ProviderSet {
    literature: Arc<dyn LiteratureBackend>,
    analysis: Arc<dyn AnalysisBackend>,
    dataset_root: Option<PathBuf>,
    sources: BTreeSet<String>,
    secrets: Vec<Secret>,
}

impl fmt::Debug for ProviderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderSet")
            .field("dataset_root", &self.dataset_root)
            .field("sources", &self.sources)
            .finish_non_exhaustive()
    }
}

impl Default for ProviderSet {
    fn default() -> Self {
        Self::stub()
    }
}

pub fn builtin_dataset_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("datasets")
}

impl ProviderSet {
    /// Stub backends over the shipped fixtures.
    pub fn stub() -> Self {
        Self {
            literature: Arc::new(StubLiteratureBackend::builtin()),
            analysis: Arc::new(StubAnalysisBackend),
            dataset_root: Some(builtin_dataset_root()),
            sources: DEFAULT_SOURCES.iter().map(|s| (*s).to_owned()).collect(),
            secrets: Vec::new(),
        }
    }

    pub fn from_config(config: &ProvidersConfig) -> Result<Self> {
        let mut secrets = Vec::new();
        let literature: Arc<dyn LiteratureBackend> = match &config.literature {
            BackendConfig::Stub { fixture: None } => Arc::new(StubLiteratureBackend::builtin()),
            BackendConfig::Stub { fixture: Some(p) } => Arc::new(StubLiteratureBackend::from_path(p)?),
            BackendConfig::Http { base_url, credential } => {
                let secret = credential.resolve()?;
                secrets.push(secret.clone());
                Arc::new(HttpLiteratureBackend::new(base_url.clone(), secret))
            }
        };
        let analysis: Arc<dyn AnalysisBackend> = match &config.analysis {
            BackendConfig::Stub { .. } => Arc::new(StubAnalysisBackend),
            BackendConfig::Http { base_url, credential } => {
                let secret = credential.resolve()?;
                secrets.push(secret.clone());
                Arc::new(HttpAnalysisBackend::new(base_url.clone(), secret))
            }
        };
        let mut sources: BTreeSet<String> = DEFAULT_SOURCES.iter().map(|s| (*s).to_owned()).collect();
        sources.extend(config.extra_sources.iter().cloned());
        Ok(Self {
            literature,
            analysis,
            dataset_root: config.dataset_root.clone().or_else(|| Some(builtin_dataset_root())),
            sources,
            secrets,
        })
    }

    pub fn with_literature(mut self, backend: Arc<dyn LiteratureBackend>) -> Self {
        self.literature = backend;
        self
    }

    pub fn with_analysis(mut self, backend: Arc<dyn AnalysisBackend>) -> Self {
        self.analysis = backend;
        self
    }

    pub fn with_dataset_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.dataset_root = Some(root.into());
        self
    }

    /// Registers a credential to be scrubbed from backend output.
    pub fn with_secret(mut self, secret: Secret) -> Self {
        self.secrets.push(secret);
        self
    }

    pub fn known_sources(&self) -> &BTreeSet<String> {
        &self.sources
    }

    fn resolve_dataset(&self, uri: &str) -> PathBuf {
        let raw = uri.strip_prefix("file://").unwrap_or(uri);
        let path = Path::new(raw);
        if path.is_absolute() {
            return path.to_path_buf();
        }
        match &self.dataset_root {
            Some(root) => root.join(path),
            None => path.to_path_buf(),
        }
    }

    /// Fetches each dataset and checks its bytes against the declared hash.
    pub fn fetch_verified(&self, refs: &[DatasetRef]) -> Result<Vec<Dataset>, JobError> {
        refs.iter()
            .map(|r| {
                let path = self.resolve_dataset(&r.uri);
                let bytes =
                    std::fs::read(&path).map_err(|e| JobError::new(DATASET_UNAVAILABLE, format!("{}: {e}", r.uri)))?;
                let actual = sha256_hex(&bytes);
                if !actual.eq_ignore_ascii_case(&r.sha256) {
                    return Err(JobError::new(
                        CHECKSUM_MISMATCH,
                        format!("{}: declared {}, recomputed {actual}", r.uri, r.sha256),
                    ));
                }
                Ok(Dataset {
                    reference: r.clone(),
                    bytes,
                })
            })
            .collect()
    }

    fn scrub(&self, text: &str) -> String {
        self.secrets.iter().fold(text.to_owned(), |t, s| s.scrub(&t))
    }

    fn scrub_error(&self, e: JobError) -> JobError {
        JobError {
            code: e.code,
            message: self.scrub(&e.message),
        }
    }

    /// Runs one job request against its backend. Never panics on backend
    /// failure; errors come back as [`JobError`].
    pub fn run(&self, ticket: &JobTicket) -> JobOutcome {
        let outcome = match &ticket.request {
            JobRequest::Literature(q) => self.literature.search(q).map(|mut r| {
                r.entries.truncate(q.result_limit as usize);
                for e in &mut r.entries {
                    e.summary = self.scrub(&e.summary);
                    e.title = self.scrub(&e.title);
                }
                RawResult::Literature(r)
            }),
            JobRequest::Analysis(req) => self.fetch_verified(&req.dataset_refs).and_then(|datasets| {
                self.analysis.analyse(req, &datasets).map(|mut out| {
                    out.methodology_summary = self.scrub(&out.methodology_summary);
                    RawResult::Analysis {
                        output: out,
                        verified: req.dataset_refs.clone(),
                    }
                })
            }),
        };
        JobOutcome {
            result: outcome.map_err(|e| self.scrub_error(e)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum JobRequest {
    Literature(LiteratureQuery),
    Analysis(AnalysisRequest),
}

/// A job moved to running, handed to whoever executes it.
#[derive(Debug, Clone)]
pub struct JobTicket {
    pub job_id: JobId,
    pub started_at: Timestamp,
    pub request: JobRequest,
}

#[derive(Debug, Clone)]
pub enum RawResult {
    Literature(LiteratureResult),
    Analysis {
        output: AnalysisOutput,
        verified: Vec<DatasetRef>,
    },
}

#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub result: Result<RawResult, JobError>,
}

impl Engine {
    fn job_view(&self, job: &ProviderJob) -> ProviderJob {
        let mut out = job.clone();
        if out.status == JobStatus::Queued {
            if let Some(started) = self.running_jobs.get(&job.job_id) {
                out.status = JobStatus::Running;
                out.started_at = Some(*started);
            }
        }
        out
    }

    pub fn job(&self, job_id: &JobId) -> Result<ProviderJob> {
        self.state
            .jobs
            .get(job_id)
            .map(|j| self.job_view(j))
            .ok_or_else(|| Error::UnknownJob(job_id.to_string()))
    }

    /// Job reads are limited to members of the job's lab and to human
    /// observers.
    pub fn job_for(&self, job_id: &JobId, actor: &Actor) -> Result<ProviderJob> {
        let job = self.job(job_id)?;
        if let Some(agent) = actor.agent_id() {
            if !self.lab(&job.lab_id)?.is_member(&agent) {
                return Err(Error::NotMember);
            }
        }
        Ok(job)
    }

    pub fn jobs(&self) -> Vec<ProviderJob> {
        self.state.jobs.values().map(|j| self.job_view(j)).collect()
    }

    pub fn queued_jobs(&self) -> Vec<JobId> {
        self.state
            .jobs
            .values()
            .filter(|j| j.status == JobStatus::Queued && !self.running_jobs.contains_key(&j.job_id))
            .map(|j| j.job_id.clone())
            .collect()
    }

    fn submit_job(&mut self, agent: &AgentId, lab_id: &LabId, kind: JobKind, payload: String) -> Result<ProviderJob> {
        let job = ProviderJob {
            job_id: self.state.next_job_id(),
            kind,
            requested_by: agent.clone(),
            lab_id: lab_id.clone(),
            request_payload: payload,
            status: JobStatus::Queued,
            normalised_result: None,
            error: None,
            created_at: self.now(),
            started_at: None,
            finished_at: None,
        };
        let id = job.job_id.clone();
        self.commit(
            Actor::agent(agent),
            Some(lab_id.clone()),
            EventBody::JobSubmitted { job },
        )?;
        self.job(&id)
    }

    pub fn submit_literature_job(
        &mut self,
        agent: &AgentId,
        lab_id: &LabId,
        query: LiteratureQuery,
    ) -> Result<ProviderJob> {
        if !self.lab(lab_id)?.is_member(agent) {
            return Err(Error::NotMember);
        }
        if query.research_question.trim().is_empty() {
            return Err(Error::InvalidQuery("research question is empty".into()));
        }
        if query.result_limit == 0 {
            return Err(Error::InvalidQuery("result limit must be at least 1".into()));
        }
        if query.source_databases.is_empty() {
            return Err(Error::InvalidQuery("at least one source database is required".into()));
        }
        if let Some(unknown) = query
            .source_databases
            .iter()
            .find(|s| !self.providers.known_sources().contains(*s))
        {
            return Err(Error::InvalidQuery(format!("unknown source database {unknown}")));
        }
        let payload = canonical_json(&query);
        self.submit_job(agent, lab_id, JobKind::Literature, payload)
    }

    pub fn submit_analysis_job(
        &mut self,
        agent: &AgentId,
        lab_id: &LabId,
        request: AnalysisRequest,
    ) -> Result<ProviderJob> {
        if !self.lab(lab_id)?.is_member(agent) {
            return Err(Error::NotMember);
        }
        if request.task_description.trim().is_empty() {
            return Err(Error::InvalidRequest("task description is empty".into()));
        }
        if let Some(bad) = request.dataset_refs.iter().find(|d| !d.is_well_formed()) {
            return Err(Error::InvalidRequest(format!(
                "dataset {} has a malformed SHA-256 checksum",
                bad.uri
            )));
        }
        if request.dataset_refs.iter().any(|d| d.uri.trim().is_empty()) {
            return Err(Error::InvalidRequest("dataset uri is empty".into()));
        }
        let payload = canonical_json(&request);
        self.submit_job(agent, lab_id, JobKind::Analysis, payload)
    }

    /// Atomically moves a queued job to running. A job can be started at
    /// most once.
    pub fn begin_job(&mut self, job_id: &JobId) -> Result<JobTicket> {
        let job = self
            .state
            .jobs
            .get(job_id)
            .ok_or_else(|| Error::UnknownJob(job_id.to_string()))?;
        if job.status != JobStatus::Queued || self.running_jobs.contains_key(job_id) {
            return Err(Error::IllegalJobState);
        }
        let request = match job.kind {
            JobKind::Literature => job.literature_query().map(JobRequest::Literature),
            JobKind::Analysis => job.analysis_request().map(JobRequest::Analysis),
        }
        .ok_or_else(|| Error::InvalidPayload(format!("job {job_id} has an unreadable payload")))?;
        let started_at = self.now();
        self.running_jobs.insert(job_id.clone(), started_at);
        Ok(JobTicket {
            job_id: job_id.clone(),
            started_at,
            request,
        })
    }

    /// Records the outcome of a started job. Artifact bytes go to the blob
    /// store under their hash.
    pub fn finish_job(&mut self, ticket: JobTicket, outcome: JobOutcome) -> Result<ProviderJob> {
        if self.running_jobs.remove(&ticket.job_id).is_none() {
            return Err(Error::IllegalJobState);
        }
        let (status, normalised_result, error) = match outcome.result {
            Ok(RawResult::Literature(r)) => (JobStatus::Succeeded, Some(NormalisedResult::Literature(r)), None),
            Ok(RawResult::Analysis { output, verified }) => {
                let mut artifacts = Vec::with_capacity(output.artifacts.len());
                for a in output.artifacts {
                    let id = self.put_artifact(&a.bytes)?;
                    artifacts.push(Artifact {
                        name: a.name,
                        content_hash: id.0,
                        media_type: a.media_type,
                    });
                }
                (
                    JobStatus::Succeeded,
                    Some(NormalisedResult::Analysis(AnalysisResult {
                        methodology_summary: output.methodology_summary,
                        artifacts,
                        verified_datasets: verified,
                    })),
                    None,
                )
            }
            Err(e) => (JobStatus::Failed, None, Some(e)),
        };
        let job = &self.state.jobs[&ticket.job_id];
        let lab_id = job.lab_id.clone();
        self.commit(
            Actor::system(),
            Some(lab_id),
            EventBody::JobFinished {
                job_id: ticket.job_id.clone(),
                status,
                normalised_result,
                error,
                started_at: ticket.started_at,
            },
        )?;
        self.job(&ticket.job_id)
    }

    /// Runs a job start to finish on the calling thread.
    pub fn execute_job(&mut self, job_id: &JobId) -> Result<ProviderJob> {
        let ticket = self.begin_job(job_id)?;
        let providers = Arc::clone(&self.providers);
        let outcome = providers.run(&ticket);
        self.finish_job(ticket, outcome)
    }

    pub fn providers(&self) -> Arc<ProviderSet> {
        Arc::clone(&self.providers)
    }
}

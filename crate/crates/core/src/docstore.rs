//! Content-addressed lab documents and the persistence backends.
//!
//! A backend holds three things: the append-only event log (the source of
//! truth for protocol state), the agent registry, and document blobs keyed
//! by their SHA-256. The file-backed layout under `root` is:
//!
//! ```text
//! events.jsonl           one ActivityEvent per line
//! registry.json          agents, token digests, heartbeats
//! documents/<sha256>     raw document bytes
//! documents/index.json   DocumentRecord list
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::commons::{export_jsonl, parse_jsonl, ActivityEvent, EventBody};
use crate::dispatch::Registry;
use crate::engine::{sha256_hex, Engine};
use crate::error::{Error, Result};
use crate::ids::{Actor, AgentId, DocumentId, LabId, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub document_id: DocumentId,
    pub lab_id: LabId,
    pub uploader: AgentId,
    pub title: String,
    pub media_type: String,
    pub byte_size: u64,
    pub created_at: Timestamp,
}

/// Full persisted image of a deployment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub events: Vec<ActivityEvent>,
    pub registry: Registry,
    /// Blob bytes, base64.
    pub blobs: BTreeMap<DocumentId, String>,
}

impl Snapshot {
    pub fn blob_bytes(&self) -> Result<BTreeMap<DocumentId, Vec<u8>>> {
        self.blobs
            .iter()
            .map(|(id, b)| {
                B64.decode(b)
                    .map(|bytes| (id.clone(), bytes))
                    .map_err(|e| Error::Storage(format!("blob {id}: {e}")))
            })
            .collect()
    }
}

pub trait StoreBackend: Send {
    fn put_blob(&mut self, id: &DocumentId, bytes: &[u8]) -> Result<()>;
    fn get_blob(&self, id: &DocumentId) -> Result<Option<Vec<u8>>>;
    fn list_blobs(&self) -> Result<Vec<DocumentId>>;
    fn append_event(&mut self, event: &ActivityEvent) -> Result<()>;
    fn save_registry(&mut self, registry: &Registry) -> Result<()>;
    fn save_document_index(&mut self, records: &[DocumentRecord]) -> Result<()>;
    /// Reads the whole persisted image.
    fn snapshot(&self) -> Result<Snapshot>;
    /// Replaces the persisted image.
    fn load(&mut self, snapshot: &Snapshot) -> Result<()>;
}

#[derive(Debug, Default)]
pub struct InMemoryStore {
    events: Vec<ActivityEvent>,
    registry: Registry,
    blobs: BTreeMap<DocumentId, Vec<u8>>,
}

impl InMemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl StoreBackend for InMemoryStore {
    fn put_blob(&mut self, id: &DocumentId, bytes: &[u8]) -> Result<()> {
        self.blobs.entry(id.clone()).or_insert_with(|| bytes.to_vec());
        Ok(())
    }

    fn get_blob(&self, id: &DocumentId) -> Result<Option<Vec<u8>>> {
        Ok(self.blobs.get(id).cloned())
    }

    fn list_blobs(&self) -> Result<Vec<DocumentId>> {
        Ok(self.blobs.keys().cloned().collect())
    }

    fn append_event(&mut self, event: &ActivityEvent) -> Result<()> {
        self.events.push(event.clone());
        Ok(())
    }

    fn save_registry(&mut self, registry: &Registry) -> Result<()> {
        self.registry = registry.clone();
        Ok(())
    }

    fn save_document_index(&mut self, _records: &[DocumentRecord]) -> Result<()> {
        Ok(())
    }

    fn snapshot(&self) -> Result<Snapshot> {
        Ok(Snapshot {
            events: self.events.clone(),
            registry: self.registry.clone(),
            blobs: self.blobs.iter().map(|(k, v)| (k.clone(), B64.encode(v))).collect(),
        })
    }

    fn load(&mut self, snapshot: &Snapshot) -> Result<()> {
        self.events = snapshot.events.clone();
        self.registry = snapshot.registry.clone();
        self.blobs = snapshot.blob_bytes()?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct FileBackedStore {
    root: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Storage(format!("{}: {e}", path.display()))
}

/// Write-to-temp then rename, so readers never see a torn file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

impl FileBackedStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let docs = root.join("documents");
        fs::create_dir_all(&docs).map_err(|e| io_err(&docs, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    fn registry_path(&self) -> PathBuf {
        self.root.join("registry.json")
    }

    fn docs_dir(&self) -> PathBuf {
        self.root.join("documents")
    }

    fn blob_path(&self, id: &DocumentId) -> Result<PathBuf> {
        if id.as_str().len() != 64 || !id.as_str().bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::UnknownDocument(id.to_string()));
        }
        Ok(self.docs_dir().join(id.as_str()))
    }
}

impl StoreBackend for FileBackedStore {
    fn put_blob(&mut self, id: &DocumentId, bytes: &[u8]) -> Result<()> {
        let path = self.blob_path(id)?;
        if path.exists() {
            return Ok(());
        }
        write_atomic(&path, bytes)
    }

    fn get_blob(&self, id: &DocumentId) -> Result<Option<Vec<u8>>> {
        let path = self.blob_path(id)?;
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    fn list_blobs(&self) -> Result<Vec<DocumentId>> {
        let dir = self.docs_dir();
        let mut out: Vec<DocumentId> = fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .filter_map(|entry| entry.ok())
            .filter_map(|entry| entry.file_name().into_string().ok())
            .filter(|name| name.len() == 64 && name.bytes().all(|b| b.is_ascii_hexdigit()))
            .map(DocumentId)
            .collect();
        out.sort();
        Ok(out)
    }

    fn append_event(&mut self, event: &ActivityEvent) -> Result<()> {
        let path = self.events_path();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(export_jsonl([event]).as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| io_err(&path, e))
    }

    fn save_registry(&mut self, registry: &Registry) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(registry).map_err(|e| Error::Storage(e.to_string()))?;
        write_atomic(&self.registry_path(), &bytes)
    }

    fn save_document_index(&mut self, records: &[DocumentRecord]) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(records).map_err(|e| Error::Storage(e.to_string()))?;
        write_atomic(&self.docs_dir().join("index.json"), &bytes)
    }

    fn snapshot(&self) -> Result<Snapshot> {
        let events = match fs::read_to_string(self.events_path()) {
            Ok(text) => parse_jsonl(&text).map_err(|e| Error::Storage(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&self.events_path(), e)),
        };
        let registry = match fs::read(self.registry_path()) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| io_err(&self.registry_path(), e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Registry::default(),
            Err(e) => return Err(io_err(&self.registry_path(), e)),
        };
        let mut blobs = BTreeMap::new();
        for id in self.list_blobs()? {
            let bytes = self.get_blob(&id)?.unwrap_or_default();
            blobs.insert(id, B64.encode(bytes));
        }
        Ok(Snapshot {
            events,
            registry,
            blobs,
        })
    }

    fn load(&mut self, snapshot: &Snapshot) -> Result<()> {
        let path = self.events_path();
        let mut f = File::create(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(export_jsonl(&snapshot.events).as_bytes())
            .map_err(|e| io_err(&path, e))?;
        self.save_registry(&snapshot.registry)?;
        for (id, bytes) in snapshot.blob_bytes()? {
            self.put_blob(&id, &bytes)?;
        }
        let records: Vec<DocumentRecord> = snapshot
            .events
            .iter()
            .filter_map(|e| match &e.body {
                EventBody::DocumentUploaded { record } => Some(record.clone()),
                _ => None,
            })
            .collect();
        self.save_document_index(&records)
    }
}

impl Engine {
    /// Stores the bytes once under their hash. Re-uploading identical bytes
    /// to the same lab returns the existing record and logs nothing.
    pub fn upload_document(
        &mut self,
        lab_id: &LabId,
        agent: &AgentId,
        title: &str,
        content: &[u8],
        media_type: &str,
    ) -> Result<DocumentRecord> {
        let lab = self.lab(lab_id)?;
        if !lab.is_member(agent) {
            return Err(Error::NotMember);
        }
        if content.is_empty() {
            return Err(Error::EmptyContent);
        }
        let id = DocumentId(sha256_hex(content));
        if let Some(existing) = self.state.document(lab_id, &id) {
            return Ok(existing.clone());
        }
        self.store.put_blob(&id, content)?;
        let record = DocumentRecord {
            document_id: id.clone(),
            lab_id: lab_id.clone(),
            uploader: agent.clone(),
            title: title.to_owned(),
            media_type: if media_type.is_empty() {
                "text/markdown".to_owned()
            } else {
                media_type.to_owned()
            },
            byte_size: content.len() as u64,
            created_at: self.now(),
        };
        self.commit(
            Actor::agent(agent),
            Some(lab_id.clone()),
            EventBody::DocumentUploaded { record },
        )?;
        let all: Vec<DocumentRecord> = self.state.all_documents().cloned().collect();
        self.store.save_document_index(&all)?;
        Ok(self.state.documents[lab_id][&id].clone())
    }

    /// Record and bytes. The bytes are re-hashed on every read.
    pub fn get_document(&self, id: &DocumentId) -> Result<(DocumentRecord, Vec<u8>)> {
        let record = self
            .state
            .all_documents()
            .find(|r| &r.document_id == id)
            .cloned()
            .ok_or_else(|| Error::UnknownDocument(id.to_string()))?;
        let bytes = self
            .store
            .get_blob(id)?
            .ok_or_else(|| Error::Storage(format!("blob {id} missing")))?;
        if sha256_hex(&bytes) != id.as_str() {
            return Err(Error::Storage(format!("blob {id} fails its checksum")));
        }
        Ok((record, bytes))
    }

    pub fn list_documents(&self, lab_id: &LabId) -> Result<Vec<DocumentRecord>> {
        self.lab(lab_id)?;
        Ok(self
            .state
            .documents
            .get(lab_id)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default())
    }

    /// Stores an artifact blob produced by a provider backend.
    pub(crate) fn put_artifact(&mut self, bytes: &[u8]) -> Result<DocumentId> {
        let id = DocumentId(sha256_hex(bytes));
        self.store.put_blob(&id, bytes)?;
        Ok(id)
    }

    pub fn get_blob(&self, id: &DocumentId) -> Result<Option<Vec<u8>>> {
        self.store.get_blob(id)
    }
}

//! Branching history of model snapshots.
//!
//! Every node holds a full, immutable snapshot. Edges carry the log of
//! training runs and refinements that produced the child, and any node can
//! be the parent of a new commit.
//!
//! On disk a tree is one archive:
//!
//! ```text
//! magic "STRTREE\0" | version u32 LE | manifest length u64 LE | manifest SHA-256 (32 bytes)
//! manifest (JSON) | blob area
//! ```
//!
//! The manifest indexes the corpus blob and two blobs per node (model state
//! and relevance state) by offset, length and SHA-256.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::engine::codec::{corpus_digest, hex};
use crate::engine::ModelState;
use crate::error::{Error, Result};
use crate::evaluation::{summarize, TopicSummary};
use crate::refinement::EdgeRecord;
use crate::suggestion::RelevanceState;

pub type NodeId = u64;

pub const TREE_MAGIC: &[u8; 8] = b"STRTREE\0";
pub const TREE_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub model: ModelState,
    pub relevance: RelevanceState,
}

impl PartialEq for Snapshot {
    fn eq(&self, other: &Self) -> bool {
        self.relevance == other.relevance && self.model.to_bytes() == other.model.to_bytes()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub snapshot: Arc<Snapshot>,
    pub edge_log: Vec<EdgeRecord>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelTree {
    corpus: Arc<Corpus>,
    digest: String,
    root: NodeId,
    next_id: NodeId,
    nodes: BTreeMap<NodeId, ModelNode>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
    embedding_path: Option<String>,
}

/// Per-node topic overview used when comparing models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: NodeId,
    pub topics: Vec<TopicSummary>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl ModelTree {
    /// Starts a tree whose root (id 1) holds `root`.
    pub fn new(root: Snapshot) -> Self {
        let corpus = root.model.corpus().clone();
        let digest = corpus_digest(&corpus);
        let node = ModelNode {
            id: 1,
            parent: None,
            snapshot: Arc::new(root),
            edge_log: Vec::new(),
            created_at: now(),
            note: None,
        };
        Self {
            corpus,
            digest,
            root: 1,
            next_id: 2,
            nodes: BTreeMap::from([(1, node)]),
            children: BTreeMap::from([(1, Vec::new())]),
            embedding_path: None,
        }
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn embedding_path(&self) -> Option<&str> {
        self.embedding_path.as_deref()
    }

    pub fn set_embedding_path(&mut self, path: Option<String>) {
        self.embedding_path = path;
    }

    pub fn node(&self, id: NodeId) -> Result<&ModelNode> {
        self.nodes.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ModelNode> {
        self.nodes.values()
    }

    pub fn children(&self, id: NodeId) -> Result<&[NodeId]> {
        self.children.get(&id).map(Vec::as_slice).ok_or(Error::UnknownNode(id))
    }

    pub fn set_note(&mut self, id: NodeId, note: Option<String>) -> Result<()> {
        self.nodes.get_mut(&id).ok_or(Error::UnknownNode(id))?.note = note;
        Ok(())
    }

    /// Appends a new leaf under `parent` and returns its id.
    pub fn commit(&mut self, parent: NodeId, snapshot: Snapshot, edge_log: Vec<EdgeRecord>) -> Result<NodeId> {
        if !self.nodes.contains_key(&parent) {
            return Err(Error::UnknownNode(parent));
        }
        if edge_log.is_empty() {
            return Err(Error::EmptyEdgeLog);
        }
        if !Arc::ptr_eq(snapshot.model.corpus(), &self.corpus) && corpus_digest(snapshot.model.corpus()) != self.digest {
            return Err(Error::CorpusMismatch);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            ModelNode {
                id,
                parent: Some(parent),
                snapshot: Arc::new(snapshot),
                edge_log,
                created_at: now(),
                note: None,
            },
        );
        self.children.entry(parent).or_default().push(id);
        self.children.insert(id, Vec::new());
        Ok(id)
    }

    /// The log on the edge from `parent` to its direct child `child`.
    pub fn edge_history(&self, parent: NodeId, child: NodeId) -> Result<&[EdgeRecord]> {
        self.node(parent)?;
        let node = self.node(child)?;
        if node.parent != Some(parent) {
            return Err(Error::NotAdjacent { parent, child });
        }
        Ok(&node.edge_log)
    }

    /// Topic overviews (top `top_n` words) for each requested node.
    pub fn compare(&self, ids: &[NodeId], top_n: usize) -> Result<Vec<NodeSummary>> {
        if ids.is_empty() {
            return Err(Error::EmptySelection);
        }
        ids.iter()
            .map(|&id| {
                let node = self.node(id)?;
                Ok(NodeSummary { node: id, topics: summarize(&node.snapshot.model, top_n) })
            })
            .collect()
    }

    pub fn to_archive(&self) -> Vec<u8> {
        let mut blobs: Vec<u8> = Vec::new();
        let mut put = |bytes: Vec<u8>| -> BlobRef {
            let r = BlobRef { offset: blobs.len() as u64, len: bytes.len() as u64, sha256: hex(&Sha256::digest(&bytes)) };
            blobs.extend_from_slice(&bytes);
            r
        };
        let corpus = put(serde_json::to_vec(&*self.corpus).expect("corpus serializes"));
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in self.nodes.values() {
            let model = put(n.snapshot.model.encode(&self.digest));
            let relevance = put(serde_json::to_vec(&n.snapshot.relevance).expect("relevance serializes"));
            nodes.push(NodeEntry {
                id: n.id,
                parent: n.parent,
                edge_log: n.edge_log.clone(),
                created_at: n.created_at,
                note: n.note.clone(),
                model,
                relevance,
            });
        }
        let manifest = Manifest {
            root: self.root,
            next_id: self.next_id,
            embedding_path: self.embedding_path.clone(),
            blob_area_len: blobs.len() as u64,
            corpus,
            nodes,
        };
        let manifest = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(52 + manifest.len() + blobs.len());
        out.extend_from_slice(TREE_MAGIC);
        out.extend_from_slice(&TREE_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&manifest));
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&blobs);
        out
    }

    pub fn from_archive(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 8 + 4 + 8 + 32;
        if bytes.len() < HEADER || &bytes[..8] != TREE_MAGIC {
            return Err(Error::Corrupt("not a model tree archive".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != TREE_VERSION {
            return Err(Error::VersionMismatch { expected: TREE_VERSION, found: version });
        }
        let manifest_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let manifest_end = HEADER
            .checked_add(manifest_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Corrupt("manifest truncated".into()))?;
        let manifest_bytes = &bytes[HEADER..manifest_end];
        if Sha256::digest(manifest_bytes)[..] != bytes[20..52] {
            return Err(Error::Corrupt("manifest checksum mismatch".into()));
        }
        let manifest: Manifest = serde_json::from_slice(manifest_bytes)
            .map_err(|e| Error::Corrupt(format!("manifest: {e}")))?;
        let area = &bytes[manifest_end..];
        if area.len() as u64 != manifest.blob_area_len {
            return Err(Error::Corrupt(format!(
                "blob area is {} bytes, manifest declares {}",
                area.len(),
                manifest.blob_area_len
            )));
        }

        let corpus: Corpus = serde_json::from_slice(manifest.corpus.slice(area)?)
            .map_err(|e| Error::Corrupt(format!("corpus: {e}")))?;
        let corpus = Arc::new(corpus);
        let digest = corpus_digest(&corpus);

        let mut nodes = BTreeMap::new();
        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for e in manifest.nodes {
            let model = ModelState::decode(e.model.slice(area)?, corpus.clone(), &digest)?;
            let relevance: RelevanceState = serde_json::from_slice(e.relevance.slice(area)?)
                .map_err(|err| Error::Corrupt(format!("relevance of node {}: {err}", e.id)))?;
            children.entry(e.id).or_default();
            if let Some(p) = e.parent {
                children.entry(p).or_default().push(e.id);
            }
            let node = ModelNode {
                id: e.id,
                parent: e.parent,
                snapshot: Arc::new(Snapshot { model, relevance }),
                edge_log: e.edge_log,
                created_at: e.created_at,
                note: e.note,
            };
            if nodes.insert(e.id, node).is_some() {
                return Err(Error::Corrupt(format!("duplicate node id {}", e.id)));
            }
        }
        let tree = Self {
            corpus,
            digest,
            root: manifest.root,
            next_id: manifest.next_id,
            nodes,
            children,
            embedding_path: manifest.embedding_path,
        };
        tree.check_structure().map_err(Error::Corrupt)?;
        Ok(tree)
    }

    fn check_structure(&self) -> std::result::Result<(), String> {
        let root = self.nodes.get(&self.root).ok_or("root node missing")?;
        if root.parent.is_some() || !root.edge_log.is_empty() {
            return Err("root has a parent or an edge log".into());
        }
        for n in self.nodes.values() {
            if n.id >= self.next_id {
                return Err(format!("node id {} is not below the id counter", n.id));
            }
            if n.id != self.root {
                let p = n.parent.ok_or_else(|| format!("node {} has no parent", n.id))?;
                // ids grow with every commit, so parents always precede children
                if !self.nodes.contains_key(&p) || p >= n.id {
                    return Err(format!("node {} has an invalid parent {p}", n.id));
                }
            }
        }
        if self.children.keys().any(|k| !self.nodes.contains_key(k)) {
            return Err("child list refers to a missing node".into());
        }
        Ok(())
    }

    /// Writes the archive, replacing `path` atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_archive())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_archive(&fs::read(path)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BlobRef {
    offset: u64,
    len: u64,
    sha256: String,
}

impl BlobRef {
    fn slice<'a>(&self, area: &'a [u8]) -> Result<&'a [u8]> {
        let start = self.offset as usize;
        let end = start
            .checked_add(self.len as usize)
            .filter(|&e| e <= area.len())
            .ok_or_else(|| Error::Corrupt("blob out of range".into()))?;
        let data = &area[start..end];
        if hex(&Sha256::digest(data)) != self.sha256 {
            return Err(Error::Corrupt("blob checksum mismatch".into()));
        }
        Ok(data)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NodeEntry {
    id: NodeId,
    parent: Option<NodeId>,
    edge_log: Vec<EdgeRecord>,
    created_at: u64,
    note: Option<String>,
    model: BlobRef,
    relevance: BlobRef,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    root: NodeId,
    next_id: NodeId,
    embedding_path: Option<String>,
    blob_area_len: u64,
    corpus: BlobRef,
    nodes: Vec<NodeEntry>,
}

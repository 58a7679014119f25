use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use steertm_core::{
    Corpus, EdgeRecord, EmbeddingTable, Hyperparams, ModelState, ModelTree, NodeId, PendingSet, RelevanceState,
    Snapshot, SuggestionParams, TermStats,
};

use super::error::{ApiError, ApiResult};

/// Server-wide settings; request bodies fall back to these.
#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Trees are saved here after every commit and reloaded on start.
    pub workdir: Option<PathBuf>,
    pub defaults: Hyperparams,
    pub suggestion: SuggestionParams,
    pub train_iters: usize,
    pub apply_iters: usize,
    pub min_doc_freq: u32,
    pub stopwords: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            workdir: None,
            defaults: Hyperparams::default(),
            suggestion: SuggestionParams::default(),
            train_iters: 2000,
            apply_iters: 10,
            min_doc_freq: 2,
            stopwords: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Train,
    Apply,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobPhase {
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobProgress {
    pub id: u64,
    pub tree: u64,
    pub node: NodeId,
    pub kind: JobKind,
    pub phase: JobPhase,
    pub done_iters: usize,
    pub total_iters: usize,
    pub started_at: u64,
    pub finished_at: Option<u64>,
    pub result_node: Option<NodeId>,
    pub error: Option<String>,
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// One model tree plus its per-node pending queues and the running job.
pub struct TreeSlot {
    pub(crate) tree: RwLock<ModelTree>,
    pub(crate) pending: Mutex<BTreeMap<NodeId, PendingSet>>,
    pub(crate) job: Mutex<Option<u64>>,
    stats: OnceLock<TermStats>,
    embeddings: OnceLock<Option<Arc<EmbeddingTable>>>,
}

impl TreeSlot {
    fn new(tree: ModelTree) -> Self {
        Self {
            tree: RwLock::new(tree),
            pending: Mutex::new(BTreeMap::new()),
            job: Mutex::new(None),
            stats: OnceLock::new(),
            embeddings: OnceLock::new(),
        }
    }

    pub fn snapshot(&self, node: NodeId) -> ApiResult<Arc<Snapshot>> {
        let tree = self.tree.read().unwrap();
        Ok(tree.node(node)?.snapshot.clone())
    }

    pub(crate) fn stats(&self) -> &TermStats {
        let corpus = self.tree.read().unwrap().corpus().clone();
        self.stats.get_or_init(|| TermStats::new(&corpus))
    }
}

pub(crate) struct Inner {
    pub config: ServerConfig,
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub corpora: RwLock<BTreeMap<u64, Arc<Corpus>>>,
    pub trees: RwLock<BTreeMap<u64, Arc<TreeSlot>>>,
    pub jobs: RwLock<BTreeMap<u64, Arc<Mutex<JobProgress>>>>,
    next_corpus: AtomicU64,
    next_tree: AtomicU64,
    next_job: AtomicU64,
}

#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

impl AppState {
    /// Builds the state and loads any trees already in the working directory.
    pub fn new(config: ServerConfig, embeddings: Option<EmbeddingTable>) -> std::io::Result<Self> {
        let mut trees = BTreeMap::new();
        if let Some(dir) = &config.workdir {
            fs::create_dir_all(dir)?;
            for entry in fs::read_dir(dir)? {
                let path = entry?.path();
                let Some(id) = tree_file_id(&path) else { continue };
                match ModelTree::load(&path) {
                    Ok(t) => {
                        log::info!("loaded tree {id} from {}", path.display());
                        trees.insert(id, Arc::new(TreeSlot::new(t)));
                    }
                    Err(e) => log::warn!("skipping {}: {e}", path.display()),
                }
            }
        }
        let next_tree = trees.keys().max().map_or(1, |m| m + 1);
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                embeddings: embeddings.map(Arc::new),
                corpora: RwLock::new(BTreeMap::new()),
                trees: RwLock::new(trees),
                jobs: RwLock::new(BTreeMap::new()),
                next_corpus: AtomicU64::new(1),
                next_tree: AtomicU64::new(next_tree),
                next_job: AtomicU64::new(1),
            }),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.inner.config
    }

    pub fn embeddings(&self) -> Option<&Arc<EmbeddingTable>> {
        self.inner.embeddings.as_ref()
    }

    pub fn add_corpus(&self, corpus: Corpus) -> u64 {
        let id = self.inner.next_corpus.fetch_add(1, Ordering::Relaxed);
        self.inner.corpora.write().unwrap().insert(id, Arc::new(corpus));
        id
    }

    pub fn corpus(&self, id: u64) -> ApiResult<Arc<Corpus>> {
        self.inner.corpora.read().unwrap().get(&id).cloned().ok_or_else(|| ApiError::not_found("corpus", id))
    }

    pub fn corpora(&self) -> Vec<(u64, Arc<Corpus>)> {
        self.inner.corpora.read().unwrap().iter().map(|(k, v)| (*k, v.clone())).collect()
    }

    pub fn add_tree(&self, tree: ModelTree) -> u64 {
        self.insert_tree(TreeSlot::new(tree))
    }

    /// Like [`Self::add_tree`] with the suggestion inputs already computed.
    pub(crate) fn add_prepared_tree(&self, tree: ModelTree, stats: TermStats, emb: Option<Arc<EmbeddingTable>>) -> u64 {
        let slot = TreeSlot::new(tree);
        let _ = slot.stats.set(stats);
        let _ = slot.embeddings.set(emb);
        self.insert_tree(slot)
    }

    fn insert_tree(&self, slot: TreeSlot) -> u64 {
        let id = self.inner.next_tree.fetch_add(1, Ordering::Relaxed);
        self.inner.trees.write().unwrap().insert(id, Arc::new(slot));
        self.autosave(id);
        id
    }

    /// Installs `tree` under `id`, replacing any tree there. Refused while a
    /// job runs on the existing tree.
    pub fn replace_tree(&self, id: u64, tree: ModelTree) -> ApiResult<bool> {
        let mut trees = self.inner.trees.write().unwrap();
        if let Some(slot) = trees.get(&id) {
            if let Some(job) = *slot.job.lock().unwrap() {
                return Err(ApiError::conflict(format!("job {job} is running on tree {id}")));
            }
        }
        let existed = trees.insert(id, Arc::new(TreeSlot::new(tree))).is_some();
        self.inner.next_tree.fetch_max(id + 1, Ordering::Relaxed);
        drop(trees);
        self.autosave(id);
        Ok(!existed)
    }

    pub fn tree(&self, id: u64) -> ApiResult<Arc<TreeSlot>> {
        self.inner.trees.read().unwrap().get(&id).cloned().ok_or_else(|| ApiError::not_found("tree", id))
    }

    pub fn tree_ids(&self) -> Vec<u64> {
        self.inner.trees.read().unwrap().keys().copied().collect()
    }

    pub fn job(&self, id: u64) -> ApiResult<JobProgress> {
        let jobs = self.inner.jobs.read().unwrap();
        let job = jobs.get(&id).ok_or_else(|| ApiError::not_found("job", id))?;
        let progress = job.lock().unwrap().clone();
        Ok(progress)
    }

    /// Embeddings restricted to the tree's vocabulary, computed once.
    pub(crate) fn tree_embeddings(&self, slot: &TreeSlot) -> Option<Arc<EmbeddingTable>> {
        slot.embeddings
            .get_or_init(|| {
                let emb = self.inner.embeddings.as_ref()?;
                let tree = slot.tree.read().unwrap();
                Some(Arc::new(emb.restrict_to(tree.corpus().vocabulary())))
            })
            .clone()
    }

    /// Relevance and suggestions for a freshly produced state.
    pub(crate) fn snapshot_for(&self, slot: &TreeSlot, model: ModelState, parent: Option<&RelevanceState>) -> Snapshot {
        let mut relevance = match parent {
            Some(r) => r.clone(),
            None => RelevanceState::new(&model, self.inner.config.suggestion.clone()),
        };
        let emb = self.tree_embeddings(slot);
        relevance.refresh(&model, emb.as_deref(), slot.stats());
        Snapshot { model, relevance }
    }

    pub(crate) fn autosave(&self, id: u64) {
        let Some(dir) = &self.inner.config.workdir else { return };
        let Ok(slot) = self.tree(id) else { return };
        let path = dir.join(format!("tree-{id}.strtree"));
        let tree = slot.tree.read().unwrap();
        if let Err(e) = tree.save(&path) {
            log::error!("autosave of tree {id} to {} failed: {e}", path.display());
        }
    }

    /// Registers a running job on `tree`, or reports the one already running.
    pub(crate) fn start_job(&self, tree: u64, slot: &TreeSlot, node: NodeId, kind: JobKind, total: usize) -> ApiResult<Arc<Mutex<JobProgress>>> {
        let mut running = slot.job.lock().unwrap();
        if let Some(job) = *running {
            return Err(ApiError::conflict(format!("job {job} is already running on tree {tree}")));
        }
        let id = self.inner.next_job.fetch_add(1, Ordering::Relaxed);
        let progress = Arc::new(Mutex::new(JobProgress {
            id,
            tree,
            node,
            kind,
            phase: JobPhase::Running,
            done_iters: 0,
            total_iters: total,
            started_at: unix_now(),
            finished_at: None,
            result_node: None,
            error: None,
        }));
        self.inner.jobs.write().unwrap().insert(id, progress.clone());
        *running = Some(id);
        Ok(progress)
    }

    /// Commits the job's result, or records why it failed, and frees the tree.
    pub(crate) fn finish_job(
        &self,
        tree: u64,
        slot: &TreeSlot,
        progress: &Mutex<JobProgress>,
        outcome: Result<(Snapshot, Vec<EdgeRecord>), String>,
    ) -> Option<NodeId> {
        let node = progress.lock().unwrap().node;
        let committed = outcome.and_then(|(snap, log)| {
            slot.tree.write().unwrap().commit(node, snap, log).map_err(|e| e.to_string())
        });
        if committed.is_ok() {
            self.autosave(tree);
        }
        *slot.job.lock().unwrap() = None;
        let mut p = progress.lock().unwrap();
        p.finished_at = Some(unix_now());
        let result = match committed {
            Ok(child) => {
                p.phase = JobPhase::Done;
                p.done_iters = p.total_iters;
                p.result_node = Some(child);
                Some(child)
            }
            Err(e) => {
                log::warn!("job {} on tree {tree} failed: {e}", p.id);
                p.phase = JobPhase::Failed;
                p.error = Some(e);
                None
            }
        };
        result
    }
}

fn tree_file_id(path: &std::path::Path) -> Option<u64> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("tree-")?.strip_suffix(".strtree")?.parse().ok()
}

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use steertm_core::corpus::{default_stopwords, parse_csv, parse_json_lines, read_records, CorpusFormat};
use steertm_core::evaluation::{summarize, top_documents, topic_summary};
use steertm_core::refinement::apply_refinements_with_progress;
use steertm_core::tree::NodeSummary;
use steertm_core::{
    build_corpus, distance_map, expand_query, init_model, preflight, ApplyOptions, BuildOptions, CoherenceIndex,
    ConceptPrior, Corpus, CorpusRecord, EdgeRecord, EvaluationReport, Hyperparams, MapPoint, ModelTree, NodeId,
    Refinement, RelevanceState, Snapshot, Suggestion, TermStats, TopicId, TopicSummary,
};

use super::error::{ApiError, ApiResult};
use super::state::{AppState, JobKind, JobProgress, TreeSlot};
use crate::options::{parse_id_list, parse_mapping};

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
}

// ---- corpora ----

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatInput {
    #[default]
    Auto,
    Jsonl,
    Csv,
}

/// Either a server-side `path`, inline `content`, or (with a non-JSON
/// content type) the request body itself as the file.
#[derive(Debug, Default, Deserialize)]
pub struct CorpusRequest {
    pub path: Option<PathBuf>,
    pub content: Option<String>,
    #[serde(default)]
    pub format: FormatInput,
    pub min_doc_freq: Option<u32>,
    pub stopwords: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub id: u64,
    pub documents: usize,
    pub vocabulary: usize,
    pub tokens: usize,
    pub categories: Vec<String>,
}

impl CorpusInfo {
    fn new(id: u64, c: &Corpus) -> Self {
        let categories: BTreeSet<&str> = c.documents().iter().filter_map(|d| d.category.as_deref()).collect();
        Self {
            id,
            documents: c.len(),
            vocabulary: c.vocab_size(),
            tokens: c.num_tokens(),
            categories: categories.into_iter().map(str::to_owned).collect(),
        }
    }
}

fn parse_upload(bytes: &[u8], format: FormatInput) -> steertm_core::Result<Vec<CorpusRecord>> {
    let csv = match format {
        FormatInput::Csv => true,
        FormatInput::Jsonl => false,
        FormatInput::Auto => bytes.iter().find(|b| !b.is_ascii_whitespace()).is_some_and(|&b| b != b'{'),
    };
    if csv {
        parse_csv(bytes)
    } else {
        parse_json_lines(bytes)
    }
}

pub async fn create_corpus(
    State(app): State<AppState>,
    Query(query): Query<CorpusRequest>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<CorpusInfo>)> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (req, upload) = if is_json { (parse_required::<CorpusRequest>(&body)?, None) } else { (query, Some(body)) };
    let cfg = app.config();
    let stopwords = if req.stopwords.unwrap_or(cfg.stopwords) { default_stopwords() } else { HashSet::new() };
    let opts = BuildOptions::new(stopwords, req.min_doc_freq.unwrap_or(cfg.min_doc_freq));
    let corpus = blocking(move || {
        let records = match (upload, req.content, req.path) {
            (Some(b), _, _) if !b.is_empty() => parse_upload(&b, req.format)?,
            (_, Some(c), _) => parse_upload(c.as_bytes(), req.format)?,
            (_, _, Some(p)) => {
                let f = match req.format {
                    FormatInput::Auto => CorpusFormat::Auto,
                    FormatInput::Jsonl => CorpusFormat::JsonLines,
                    FormatInput::Csv => CorpusFormat::Csv,
                };
                read_records(&p, f)?
            }
            _ => return Err(ApiError::bad_request("expected a path, inline content or an uploaded file")),
        };
        Ok(build_corpus(&records, &opts)?)
    })
    .await?;
    let id = app.add_corpus(corpus);
    let info = CorpusInfo::new(id, &*app.corpus(id)?);
    Ok((StatusCode::CREATED, Json(info)))
}

pub async fn get_corpus(State(app): State<AppState>, Path(c): Path<u64>) -> ApiResult<Json<CorpusInfo>> {
    Ok(Json(CorpusInfo::new(c, &*app.corpus(c)?)))
}

pub async fn list_corpora(State(app): State<AppState>) -> Json<Vec<CorpusInfo>> {
    Json(app.corpora().iter().map(|(id, c)| CorpusInfo::new(*id, c)).collect())
}

// ---- models and trees ----

#[derive(Clone, Debug, Default, Deserialize)]
pub struct HyperInput {
    pub alpha: Option<f64>,
    pub gamma0: Option<f64>,
    pub beta: Option<f64>,
    pub k_init: Option<usize>,
    pub seed: Option<u64>,
}

impl HyperInput {
    pub fn resolve(&self, d: &Hyperparams) -> Hyperparams {
        Hyperparams {
            alpha: self.alpha.unwrap_or(d.alpha),
            gamma0: self.gamma0.unwrap_or(d.gamma0),
            beta: self.beta.unwrap_or(d.beta),
            k_init: self.k_init.unwrap_or(d.k_init),
            rng_seed: self.seed.unwrap_or(d.rng_seed),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ModelRequest {
    pub corpus: u64,
    #[serde(default)]
    pub hyperparams: HyperInput,
    /// Topic id to its concept words.
    #[serde(default)]
    pub priors: BTreeMap<TopicId, Vec<String>>,
    pub note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelCreated {
    pub tree: u64,
    pub root: NodeId,
    pub topics: usize,
    pub warnings: Vec<String>,
}

pub async fn create_model(
    State(app): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<ModelCreated>)> {
    let req: ModelRequest = parse_required(&body)?;
    let corpus = app.corpus(req.corpus)?;
    let hyper = req.hyperparams.resolve(&app.config().defaults);
    let priors = ConceptPrior::from_map(req.priors)?;
    let suggestion = app.config().suggestion.clone();
    let emb = app.embeddings().map(|e| Arc::new(e.restrict_to(corpus.vocabulary())));
    let (tree, stats, emb, warnings) = blocking(move || {
        let report = init_model(corpus.clone(), priors, hyper)?;
        let warnings = report
            .dropped_seeds
            .iter()
            .map(|w| format!("seed word {w:?} is not in the vocabulary; dropped"))
            .collect();
        let stats = TermStats::new(&corpus);
        let mut relevance = RelevanceState::new(&report.state, suggestion);
        relevance.refresh(&report.state, emb.as_deref(), &stats);
        let mut tree = ModelTree::new(Snapshot { model: report.state, relevance });
        tree.set_note(tree.root(), req.note)?;
        Ok((tree, stats, emb, warnings))
    })
    .await?;
    let root = tree.root();
    let topics = tree.node(root)?.snapshot.model.active_topics().len();
    let id = app.add_prepared_tree(tree, stats, emb);
    Ok((StatusCode::CREATED, Json(ModelCreated { tree: id, root, topics, warnings })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodeView {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub edge_log: Vec<EdgeRecord>,
    pub created_at: u64,
    pub note: Option<String>,
    pub iteration: u64,
    pub topics: usize,
    pub pending: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TreeView {
    pub id: u64,
    pub root: NodeId,
    pub documents: usize,
    pub vocabulary: usize,
    pub nodes: Vec<NodeView>,
    pub job: Option<u64>,
}

fn tree_view(id: u64, slot: &TreeSlot) -> TreeView {
    let pending = slot.pending.lock().unwrap();
    let tree = slot.tree.read().unwrap();
    let nodes = tree
        .nodes()
        .map(|n| NodeView {
            id: n.id,
            parent: n.parent,
            children: tree.children(n.id).map(<[_]>::to_vec).unwrap_or_default(),
            edge_log: n.edge_log.clone(),
            created_at: n.created_at,
            note: n.note.clone(),
            iteration: n.snapshot.model.iteration(),
            topics: n.snapshot.model.active_topics().len(),
            pending: pending.get(&n.id).map_or(0, |p| p.len()),
        })
        .collect();
    TreeView {
        id,
        root: tree.root(),
        documents: tree.corpus().len(),
        vocabulary: tree.corpus().vocab_size(),
        nodes,
        job: *slot.job.lock().unwrap(),
    }
}

pub async fn list_trees(State(app): State<AppState>) -> ApiResult<Json<Vec<TreeView>>> {
    let mut out = Vec::new();
    for id in app.tree_ids() {
        out.push(tree_view(id, &*app.tree(id)?));
    }
    Ok(Json(out))
}

pub async fn get_tree(State(app): State<AppState>, Path(t): Path<u64>) -> ApiResult<Json<TreeView>> {
    Ok(Json(tree_view(t, &*app.tree(t)?)))
}

#[derive(Debug, Serialize)]
pub struct EdgeView {
    parent: NodeId,
    child: NodeId,
    edge_log: Vec<EdgeRecord>,
}

pub async fn edge_history(
    State(app): State<AppState>,
    Path((t, parent, child)): Path<(u64, NodeId, NodeId)>,
) -> ApiResult<Json<EdgeView>> {
    let slot = app.tree(t)?;
    let tree = slot.tree.read().unwrap();
    let edge_log = tree.edge_history(parent, child)?.to_vec();
    Ok(Json(EdgeView { parent, child, edge_log }))
}

#[derive(Debug, Default, Deserialize)]
struct NoteRequest {
    note: Option<String>,
}

pub async fn set_note(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
    body: Bytes,
) -> ApiResult<StatusCode> {
    let req: NoteRequest = parse_body(&body)?;
    let slot = app.tree(t)?;
    slot.tree.write().unwrap().set_note(n, req.note)?;
    app.autosave(t);
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct CompareQuery {
    ids: String,
    top_n: Option<usize>,
}

pub async fn compare_nodes(
    State(app): State<AppState>,
    Path(t): Path<u64>,
    Query(q): Query<CompareQuery>,
) -> ApiResult<Json<Vec<NodeSummary>>> {
    let ids = parse_id_list(&q.ids).map_err(ApiError::bad_request)?;
    let slot = app.tree(t)?;
    let tree = slot.tree.read().unwrap();
    Ok(Json(tree.compare(&ids, q.top_n.unwrap_or(10))?))
}

pub async fn download_tree(State(app): State<AppState>, Path(t): Path<u64>) -> ApiResult<impl IntoResponse> {
    let slot = app.tree(t)?;
    let bytes = blocking(move || Ok(slot.tree.read().unwrap().to_archive())).await?;
    let disposition = format!("attachment; filename=\"tree-{t}.strtree\"");
    Ok(([(header::CONTENT_TYPE, "application/octet-stream".to_owned()), (header::CONTENT_DISPOSITION, disposition)], bytes))
}

pub async fn upload_tree(
    State(app): State<AppState>,
    Path(t): Path<u64>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<TreeView>)> {
    let tree = blocking(move || Ok(ModelTree::from_archive(&body)?)).await?;
    let created = app.replace_tree(t, tree)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(tree_view(t, &*app.tree(t)?))))
}

// ---- topics ----

#[derive(Debug, Default, Deserialize)]
pub struct TopicQuery {
    top_n: Option<usize>,
    docs: Option<usize>,
}

pub async fn list_topics(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
    Query(q): Query<TopicQuery>,
) -> ApiResult<Json<Vec<TopicSummary>>> {
    let snap = app.tree(t)?.snapshot(n)?;
    Ok(Json(summarize(&snap.model, q.top_n.unwrap_or(10))))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DocWeight {
    pub index: usize,
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TopicDetail {
    #[serde(flatten)]
    pub summary: TopicSummary,
    pub top_documents: Vec<DocWeight>,
    pub suggestions: Vec<Suggestion>,
}

pub async fn topic_detail(
    State(app): State<AppState>,
    Path((t, n, k)): Path<(u64, NodeId, TopicId)>,
    Query(q): Query<TopicQuery>,
) -> ApiResult<Json<TopicDetail>> {
    let snap = app.tree(t)?.snapshot(n)?;
    let state = &snap.model;
    if !state.is_active(k) {
        return Err(ApiError::not_found("topic", k));
    }
    let summary = topic_summary(state, k, q.top_n.unwrap_or(10))?;
    let top_documents = top_documents(state, k, q.docs.unwrap_or(10))
        .into_iter()
        .map(|(j, weight)| DocWeight { index: j, id: state.corpus().document(j).id.clone(), weight })
        .collect();
    let suggestions = snap.relevance.suggestions(k).to_vec();
    Ok(Json(TopicDetail { summary, top_documents, suggestions }))
}

#[derive(Debug, Serialize)]
pub struct DocumentView {
    index: usize,
    id: String,
    text: String,
    category: Option<String>,
    tokens: Vec<String>,
    topics: Vec<(TopicId, f64)>,
}

pub async fn document_view(
    State(app): State<AppState>,
    Path((t, n, j)): Path<(u64, NodeId, usize)>,
) -> ApiResult<Json<DocumentView>> {
    let snap = app.tree(t)?.snapshot(n)?;
    let corpus = snap.model.corpus();
    if j >= corpus.len() {
        return Err(ApiError::not_found("document", j));
    }
    let d = corpus.document(j);
    let mut topics = snap.model.doc_topic_dist(j);
    topics.retain(|(_, p)| *p > 0.0);
    topics.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(Json(DocumentView {
        index: j,
        id: d.id.clone(),
        text: d.raw_text.clone(),
        category: d.category.clone(),
        tokens: corpus.decode(j).into_iter().map(str::to_owned).collect(),
        topics,
    }))
}

pub async fn topic_map(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
) -> ApiResult<Json<Vec<MapPoint>>> {
    let snap = app.tree(t)?.snapshot(n)?;
    Ok(Json(blocking(move || Ok(distance_map(&snap.model)?)).await?))
}

#[derive(Debug, Deserialize)]
pub struct EvalQuery {
    top_n: Option<usize>,
    k: Option<usize>,
    /// `topic=category` pairs separated by commas.
    mapping: Option<String>,
}

pub async fn evaluate_node(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
    Query(q): Query<EvalQuery>,
) -> ApiResult<Json<EvaluationReport>> {
    let snap = app.tree(t)?.snapshot(n)?;
    let mapping = q.mapping.as_deref().map(parse_mapping).transpose().map_err(ApiError::bad_request)?;
    let report = blocking(move || {
        let index = CoherenceIndex::new(snap.model.corpus());
        let m = mapping.as_ref().map(|m| (m, q.k.unwrap_or(10)));
        Ok(EvaluationReport::new(n, &snap.model, &index, q.top_n.unwrap_or(10), m)?)
    })
    .await?;
    Ok(Json(report))
}

// ---- pending refinements ----

#[derive(Debug, Serialize, Deserialize)]
pub struct PendingView {
    pub node: NodeId,
    pub pending: Vec<Refinement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<Refinement>,
}

fn pending_items(slot: &TreeSlot, n: NodeId) -> Vec<Refinement> {
    slot.pending.lock().unwrap().get(&n).map(|p| p.items().to_vec()).unwrap_or_default()
}

pub async fn get_pending(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
) -> ApiResult<Json<PendingView>> {
    let slot = app.tree(t)?;
    slot.snapshot(n)?;
    Ok(Json(PendingView { node: n, pending: pending_items(&slot, n), removed: None }))
}

/// Queues a refinement after checking the whole queue still compiles
/// against the node.
pub async fn queue_pending(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<PendingView>)> {
    let r: Refinement = parse_required(&body)?;
    let slot = app.tree(t)?;
    let snap = slot.snapshot(n)?;
    let pending = blocking(move || {
        let mut all = slot.pending.lock().unwrap();
        let queue = all.entry(n).or_default();
        let mut items = queue.items().to_vec();
        items.push(r.clone());
        preflight(&snap.model, &items)?;
        queue.queue(r);
        Ok(items)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(PendingView { node: n, pending, removed: None })))
}

pub async fn undo_pending(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
) -> ApiResult<Json<PendingView>> {
    let slot = app.tree(t)?;
    slot.snapshot(n)?;
    let mut all = slot.pending.lock().unwrap();
    let queue = all.entry(n).or_default();
    let removed = queue.undo();
    Ok(Json(PendingView { node: n, pending: queue.items().to_vec(), removed }))
}

#[derive(Debug, Default, Deserialize)]
struct ItersRequest {
    iters: Option<usize>,
}

type JobWork = Box<dyn FnOnce(&Mutex<JobProgress>) -> Result<(Snapshot, Vec<EdgeRecord>), String> + Send>;

fn spawn_job(app: AppState, t: u64, slot: Arc<TreeSlot>, progress: Arc<Mutex<JobProgress>>, work: JobWork, on_fail: impl FnOnce() + Send + 'static) {
    tokio::task::spawn_blocking(move || {
        let out = catch_unwind(AssertUnwindSafe(|| work(&progress))).unwrap_or_else(|_| Err("job panicked".to_owned()));
        if out.is_err() {
            on_fail();
        }
        app.finish_job(t, &slot, &progress, out);
    });
}

pub async fn train_node(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobProgress>)> {
    let req: ItersRequest = parse_body(&body)?;
    let iters = req.iters.unwrap_or(app.config().train_iters);
    let slot = app.tree(t)?;
    let snap = slot.snapshot(n)?;
    let progress = app.start_job(t, &slot, n, JobKind::Train, iters)?;
    let view = progress.lock().unwrap().clone();
    let (app2, slot2) = (app.clone(), slot.clone());
    let work: JobWork = Box::new(move |p| {
        let mut state = snap.model.clone();
        state.train_with_progress(iters, |done, _| p.lock().unwrap().done_iters = done);
        let fresh = app2.snapshot_for(&slot2, state, Some(&snap.relevance));
        Ok((fresh, vec![EdgeRecord::Train { iters }]))
    });
    spawn_job(app, t, slot, progress, work, || {});
    Ok((StatusCode::ACCEPTED, Json(view)))
}

/// Applies the node's pending queue as a job. The queue is checked before
/// the job starts, so a bad batch is rejected without touching the tree.
pub async fn apply_pending(
    State(app): State<AppState>,
    Path((t, n)): Path<(u64, NodeId)>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobProgress>)> {
    let req: ItersRequest = parse_body(&body)?;
    let sweeps = req.iters.unwrap_or(app.config().apply_iters);
    let slot = app.tree(t)?;
    let snap = slot.snapshot(n)?;
    let items = pending_items(&slot, n);
    let (snap, items) = blocking(move || {
        preflight(&snap.model, &items)?;
        Ok((snap, items))
    })
    .await?;
    let progress = app.start_job(t, &slot, n, JobKind::Apply, sweeps)?;
    let view = progress.lock().unwrap().clone();
    {
        let mut all = slot.pending.lock().unwrap();
        let queue = all.entry(n).or_default();
        // anything queued while we were checking stays for the next apply
        let rest = queue.items()[items.len().min(queue.len())..].to_vec();
        queue.clear();
        rest.into_iter().for_each(|r| queue.queue(r));
    }
    let (app2, slot2) = (app.clone(), slot.clone());
    let restore = {
        let slot = slot.clone();
        let items = items.clone();
        move || {
            let mut all = slot.pending.lock().unwrap();
            let queue = all.entry(n).or_default();
            let rest = queue.items().to_vec();
            queue.clear();
            items.into_iter().chain(rest).for_each(|r| queue.queue(r));
        }
    };
    let work: JobWork = Box::new(move |p| {
        let applied = apply_refinements_with_progress(&snap.model, &items, ApplyOptions { sweeps }, |done, _| {
            p.lock().unwrap().done_iters = done;
        })
        .map_err(|e| e.to_string())?;
        let fresh = app2.snapshot_for(&slot2, applied.state, Some(&snap.relevance));
        Ok((fresh, applied.records))
    });
    spawn_job(app, t, slot, progress, work, restore);
    Ok((StatusCode::ACCEPTED, Json(view)))
}

pub async fn get_job(State(app): State<AppState>, Path(id): Path<u64>) -> ApiResult<Json<JobProgress>> {
    Ok(Json(app.job(id)?))
}

// ---- query expansion ----

#[derive(Debug, Deserialize)]
pub struct ExpandRequest {
    pub phrase: String,
    pub n: Option<usize>,
    /// Restrict candidates to this corpus's vocabulary.
    pub corpus: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Candidate {
    pub word: String,
    pub similarity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Expansion {
    pub phrase: String,
    pub candidates: Vec<Candidate>,
}

pub async fn expand(State(app): State<AppState>, body: Bytes) -> ApiResult<Json<Expansion>> {
    let req: ExpandRequest = parse_required(&body)?;
    let emb = app.embeddings().cloned().ok_or_else(|| ApiError::bad_request("no embeddings loaded"))?;
    let corpus = req.corpus.map(|c| app.corpus(c)).transpose()?;
    let n = req.n.unwrap_or(10);
    let phrase = req.phrase.clone();
    let found = blocking(move || {
        let out = match corpus {
            Some(c) => expand_query(&phrase, &emb.restrict_to(c.vocabulary()), n)?,
            None => expand_query(&phrase, &emb, n)?,
        };
        Ok(out)
    })
    .await?;
    let candidates = found.into_iter().map(|(word, similarity)| Candidate { word, similarity }).collect();
    Ok(Json(Expansion { phrase: req.phrase, candidates }))
}

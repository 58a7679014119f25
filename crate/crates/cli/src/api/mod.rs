//! JSON over HTTP. Long runs (training and applying refinements) are jobs:
//! the request returns a job id at once and `GET /jobs/{id}` reports
//! progress. A tree runs at most one job at a time.

mod error;
mod handlers;
mod state;

use axum::extract::DefaultBodyLimit;
use axum::routing::{delete, get, post, put};
use axum::Router;

pub use error::{ApiError, ApiResult};
pub use handlers::{
    CorpusInfo, CorpusRequest, ExpandRequest, HyperInput, ModelCreated, ModelRequest, NodeView, TopicDetail, TreeView,
};
pub use state::{AppState, JobKind, JobPhase, JobProgress, ServerConfig, TreeSlot};

const MAX_BODY: usize = 1 << 30;

pub fn router(state: AppState) -> Router {
    use handlers::*;
    Router::new()
        .route("/corpora", get(list_corpora).post(create_corpus))
        .route("/corpora/{c}", get(get_corpus))
        .route("/models", post(create_model))
        .route("/trees", get(list_trees))
        .route("/trees/{t}", get(get_tree))
        .route("/trees/{t}/file", get(download_tree).put(upload_tree))
        .route("/trees/{t}/compare", get(compare_nodes))
        .route("/trees/{t}/edges/{parent}/{child}", get(edge_history))
        .route("/trees/{t}/nodes/{n}/note", put(set_note))
        .route("/trees/{t}/nodes/{n}/train", post(train_node))
        .route("/trees/{t}/nodes/{n}/topics", get(list_topics))
        .route("/trees/{t}/nodes/{n}/topics/{k}", get(topic_detail))
        .route("/trees/{t}/nodes/{n}/documents/{j}", get(document_view))
        .route("/trees/{t}/nodes/{n}/pending", get(get_pending).post(queue_pending))
        .route("/trees/{t}/nodes/{n}/pending/last", delete(undo_pending))
        .route("/trees/{t}/nodes/{n}/apply", post(apply_pending))
        .route("/trees/{t}/nodes/{n}/map", get(topic_map))
        .route("/trees/{t}/nodes/{n}/evaluation", get(evaluate_node))
        .route("/jobs/{id}", get(get_job))
        .route("/expand-query", post(expand))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

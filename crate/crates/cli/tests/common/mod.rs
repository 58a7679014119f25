#![allow(dead_code)]

use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::Value;
use steertm_cli::api::{router, AppState, ServerConfig};
use steertm_core::synthetic::{planted_embeddings, planted_records, PlantedSpec};
use steertm_core::{EmbeddingTable, ModelTree};
use tower::ServiceExt;

pub fn small_spec() -> PlantedSpec {
    PlantedSpec {
        num_docs: 120,
        categories: 3,
        words_per_category: 15,
        background_words: 10,
        doc_len: (10, 16),
        ..PlantedSpec::default()
    }
}

pub fn jsonl(spec: &PlantedSpec) -> String {
    planted_records(spec).iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
}

pub fn embeddings(spec: &PlantedSpec) -> EmbeddingTable {
    planted_embeddings(spec, spec.categories + 4, 0.2, 7)
}

/// Text format accepted by `--embeddings`.
pub fn embeddings_text(e: &EmbeddingTable) -> String {
    e.words()
        .iter()
        .map(|w| {
            let v: Vec<String> = e.get(w).unwrap().iter().map(|x| format!("{x:?}")).collect();
            format!("{w} {}\n", v.join(" "))
        })
        .collect()
}

pub fn app(emb: Option<EmbeddingTable>) -> Router {
    let config = ServerConfig { min_doc_freq: 1, stopwords: false, ..ServerConfig::default() };
    router(AppState::new(config, emb).unwrap())
}

pub async fn send(app: &Router, method: Method, uri: &str, content_type: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", content_type)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let bytes = body.map(|b| serde_json::to_vec(&b).unwrap()).unwrap_or_default();
    let (status, out) = send(app, method, uri, "application/json", bytes).await;
    let v = if out.is_empty() { Value::Null } else { serde_json::from_slice(&out).unwrap() };
    (status, v)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

/// Polls a job until it leaves the running phase.
pub async fn wait_job(app: &Router, job: u64) -> Value {
    let start = Instant::now();
    loop {
        let (status, v) = get(app, &format!("/jobs/{job}")).await;
        assert_eq!(status, StatusCode::OK);
        if v["phase"] != "running" {
            return v;
        }
        assert!(start.elapsed() < Duration::from_secs(120), "job {job} did not finish");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

/// Uploads the small planted corpus and creates a model; returns the tree id.
pub async fn setup_model(app: &Router, k_init: usize, priors: Value) -> u64 {
    let (status, c) = post(app, "/corpora", serde_json::json!({ "content": jsonl(&small_spec()) })).await;
    assert_eq!(status, StatusCode::CREATED, "{c}");
    let body = serde_json::json!({
        "corpus": c["id"],
        "hyperparams": { "k_init": k_init, "seed": 3 },
        "priors": priors,
    });
    let (status, m) = post(app, "/models", body).await;
    assert_eq!(status, StatusCode::CREATED, "{m}");
    m["tree"].as_u64().unwrap()
}

/// Trains `node` and returns the committed child.
pub async fn train(app: &Router, tree: u64, node: u64, iters: usize) -> u64 {
    let (status, job) = post(app, &format!("/trees/{tree}/nodes/{node}/train"), serde_json::json!({ "iters": iters })).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let done = wait_job(app, job["id"].as_u64().unwrap()).await;
    assert_eq!(done["phase"], "done", "{done}");
    done["result_node"].as_u64().unwrap()
}

pub async fn download(app: &Router, tree: u64) -> (Vec<u8>, ModelTree) {
    let (status, bytes) = send(app, Method::GET, &format!("/trees/{tree}/file"), "application/json", vec![]).await;
    assert_eq!(status, StatusCode::OK);
    let t = ModelTree::from_archive(&bytes).unwrap();
    (bytes, t)
}

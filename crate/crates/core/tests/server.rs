mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use llmrs::app::config::{EngineConfig, Overrides};
use llmrs::app::server::{router, ServiceState, Snapshot};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> (tempfile::TempDir, Arc<ServiceState>, Router) {
    let tmp = tempfile::tempdir().unwrap();
    let store = common::build_store(tmp.path());
    let cfg = EngineConfig::load(store.dir(), None, &Overrides::default()).unwrap();
    let state = Arc::new(ServiceState::new(Snapshot::load(&cfg).unwrap(), cfg.preselect_m));
    let router = router(state.clone());
    (tmp, state, router)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn post(body: Value) -> Request<Body> {
    Request::post("/v1/query")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn health() {
    let (_tmp, _, app) = app();
    let (status, body) = call(&app, get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok", "products": 20}));
}

#[tokio::test]
async fn query_ranks_and_respects_constraints() {
    let (_tmp, _, app) = app();
    let (status, body) = call(&app, post(json!({"text": common::QUERY, "top_k": 20}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["results"][0]["product_id"], common::MANY_REVIEWS);

    let (_, body) = call(
        &app,
        post(json!({"text": common::QUERY, "constraints": {"max_price": 50.0}, "ranker": "baseline", "top_k": 20})),
    )
    .await;
    let results = body["results"].as_array().unwrap();
    assert!(!results.is_empty());
    assert!(results.iter().all(|r| r["price"].as_f64().unwrap() <= 50.0));
    assert!(results.iter().all(|r| r["product_id"] != common::ONE_REVIEW));

    let (status, body) = call(&app, post(json!({"text": "x", "constraints": {"max_price": 0.0}}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "no_products_within_budget");
    assert_eq!(body["message"], "no products within budget");
}

#[tokio::test]
async fn invalid_queries_are_400() {
    let (_tmp, _, app) = app();
    for body in [
        json!({"text": "x", "constraints": {"max_price": -1.0}}),
        json!({"text": "x", "top_k": 0}),
        json!({"text": ""}),
        json!({"text": "x", "ranker": "magic"}),
        json!({"text": "x", "unexpected": true}),
        json!({"constraints": {}}),
    ] {
        let (status, reply) = call(&app, post(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(reply["error"].is_string());
    }
    let raw = Request::post("/v1/query")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(call(&app, raw).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn product_lookup() {
    let (_tmp, _, app) = app();
    let (status, body) = call(&app, get(&format!("/v1/products/{}", common::MANY_REVIEWS))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["product"]["id"], common::MANY_REVIEWS);
    assert_eq!(body["aggregate"]["count"], 100);
    assert_eq!(body["avg_rating"], 3.1);

    let (status, _) = call(&app, get("/v1/products/B000MISSING")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn snapshot_swap() {
    let (tmp, state, app) = app();
    let before = state.current();
    let cfg = EngineConfig::load(&tmp.path().join("store"), None, &Overrides::default()).unwrap();
    state.replace(Snapshot::load(&cfg).unwrap());
    assert!(!Arc::ptr_eq(&before, &state.current()));
    // Requests holding the old snapshot keep working; new ones see the new one.
    assert_eq!(before.engine.catalog().len(), 20);
    assert_eq!(call(&app, get("/healthz")).await.0, StatusCode::OK);
}

//! Read-only HTTP service over an engine snapshot.
//!
//! * `GET /healthz` → `{"status":"ok","products":n}`
//! * `POST /v1/query` → `{"status":..,"results":[..]}`
//! * `GET /v1/products/{id}` → product record with its ranking signals
//!
//! Requests clone an `Arc` to the current [`Snapshot`]; a reload builds a new
//! snapshot off to the side and swaps the pointer, so no request ever sees a
//! half-loaded store. On Unix, `SIGHUP` triggers a reload.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::app::config::EngineConfig;
use crate::catalog::Product;
use crate::embed::EmbedProvider;
use crate::error::{Error, Result};
use crate::rank::{Budget, Engine, ProductSignals, QueryRequest, QueryStatus, Ranker, Recommendation, DEFAULT_TOP_K};
use crate::store::Store;

pub struct Snapshot {
    pub engine: Engine,
    pub embedder: Box<dyn EmbedProvider>,
}

impl Snapshot {
    pub fn load(cfg: &EngineConfig) -> Result<Self> {
        let store = Store::open(&cfg.store_dir)?;
        let engine = store.engine_from_file(&cfg.embed.path)?;
        let embedder = cfg.query_embedder(engine.index())?;
        Ok(Self { engine, embedder })
    }
}

pub struct ServiceState {
    snapshot: RwLock<Arc<Snapshot>>,
    default_preselect_m: usize,
}

impl ServiceState {
    pub fn new(snapshot: Snapshot, default_preselect_m: usize) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(snapshot)),
            default_preselect_m,
        }
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    pub fn replace(&self, next: Snapshot) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(next);
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryBody {
    pub text: String,
    #[serde(default)]
    pub constraints: Budget,
    pub top_k: Option<usize>,
    pub preselect_m: Option<usize>,
    pub ranker: Option<Ranker>,
}

#[derive(Debug, Serialize)]
pub struct QueryReply {
    pub status: QueryStatus,
    pub message: &'static str,
    pub excluded_unranked: usize,
    pub results: Vec<Recommendation>,
}

#[derive(Debug, Serialize)]
struct ProductReply<'a> {
    product: &'a Product,
    #[serde(flatten)]
    signals: ProductSignals,
}

fn error_reply(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::Validation(_) => StatusCode::BAD_REQUEST,
        Error::Provider(_) => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn healthz(State(state): State<Arc<ServiceState>>) -> Json<serde_json::Value> {
    let snap = state.current();
    Json(json!({ "status": "ok", "products": snap.engine.catalog().len() }))
}

async fn query(
    State(state): State<Arc<ServiceState>>,
    body: std::result::Result<Json<QueryBody>, JsonRejection>,
) -> Response {
    let body = match body {
        Ok(Json(b)) => b,
        Err(rejection) => return error_reply(StatusCode::BAD_REQUEST, rejection.body_text()),
    };
    let request = QueryRequest {
        text: body.text,
        budget: body.constraints,
        top_k: body.top_k.unwrap_or(DEFAULT_TOP_K),
        preselect_m: body.preselect_m.unwrap_or(state.default_preselect_m),
        ranker: body.ranker.unwrap_or_default(),
    };
    if let Err(e) = request.validate() {
        return error_reply(StatusCode::BAD_REQUEST, e.to_string());
    }
    let snap = state.current();
    let outcome = tokio::task::spawn_blocking(move || snap.engine.query(&request, snap.embedder.as_ref())).await;
    match outcome {
        Ok(Ok(resp)) => Json(QueryReply {
            status: resp.status,
            message: resp.status.message(),
            excluded_unranked: resp.excluded_unranked,
            results: resp.results,
        })
        .into_response(),
        Ok(Err(e)) => error_reply(status_for(&e), e.to_string()),
        Err(join) => error_reply(StatusCode::INTERNAL_SERVER_ERROR, join.to_string()),
    }
}

async fn product(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> Response {
    let snap = state.current();
    match snap.engine.catalog().get(&id) {
        Some(p) => Json(ProductReply {
            product: p,
            signals: snap.engine.signals(&id).copied().unwrap_or_default(),
        })
        .into_response(),
        None => error_reply(StatusCode::NOT_FOUND, format!("no product {id}")),
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/query", post(query))
        .route("/v1/products/{id}", get(product))
        .with_state(state)
}

pub async fn serve(cfg: EngineConfig, port: u16) -> Result<()> {
    let snapshot = Snapshot::load(&cfg)?;
    let state = Arc::new(ServiceState::new(snapshot, cfg.preselect_m));
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("bind {addr}"), e))?;
    tracing::info!(%addr, products = state.current().engine.catalog().len(), "serving");

    #[cfg(unix)]
    {
        let state = state.clone();
        let cfg = cfg.clone();
        tokio::spawn(async move {
            use tokio::signal::unix::{signal, SignalKind};
            let Ok(mut hup) = signal(SignalKind::hangup()) else {
                return;
            };
            while hup.recv().await.is_some() {
                let cfg = cfg.clone();
                match tokio::task::spawn_blocking(move || Snapshot::load(&cfg)).await {
                    Ok(Ok(next)) => {
                        state.replace(next);
                        tracing::info!("snapshot reloaded");
                    }
                    Ok(Err(e)) => tracing::error!(error = %e, "reload failed; keeping current snapshot"),
                    Err(e) => tracing::error!(error = %e, "reload task panicked"),
                }
            }
        });
    }

    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("http server", e))
}

pub fn serve_blocking(cfg: EngineConfig, port: u16) -> Result<()> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .try_init();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(serve(cfg, port))
}

//! HTTP scoring service.
//!
//! Evaluations run against an immutable [`Snapshot`] of the active rule base.
//! `PUT /api/rulebase` builds a new snapshot and swaps the pointer, so requests
//! already holding the old one finish on it. Candidate writes go through a
//! single mutex-guarded [`CandidateStore`]. Cached candidate scores carry the
//! rule-base version they were computed under and are recomputed on read when
//! that version is stale.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::gk::{default_calibration, rank_order, GKCalibration, GKProfile, GkModel, ScoreError};
use crate::report::EvaluationReport;
use crate::ruledsl::{format_rulebase, parse_rulebase_bytes, ParseError};
use crate::store::{CandidateRecord, CandidateStore, StoreError};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_STORE: &str = "gkq-candidates.jsonl";
pub const VERSION_HEADER: &str = "x-rulebase-version";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot read rule base {path}: {source}")]
    ReadRules { path: PathBuf, source: std::io::Error },
    #[error("invalid rule base {path}:\n{source}")]
    ParseRules { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Incompatible(#[from] ScoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("invalid CORS origin `{0}`")]
    CorsOrigin(String),
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

impl ServiceError {
    /// Process exit code: 2 for invalid user input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::ParseRules { .. } | ServiceError::Incompatible(_) | ServiceError::CorsOrigin(_) => 2,
            _ => 1,
        }
    }
}

/// A rule base version together with its model and canonical text.
#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub model: GkModel,
    pub text: String,
}

impl Snapshot {
    fn new(version: u64, model: GkModel) -> Self {
        let text = format_rulebase(model.rulebase());
        Snapshot { version, model, text }
    }
}

#[derive(Debug)]
pub struct AppState {
    calibration: GKCalibration,
    snapshot: RwLock<Arc<Snapshot>>,
    store: Mutex<CandidateStore>,
}

impl AppState {
    /// Starts at version 1. Records already in the store are marked stale.
    pub fn new(model: GkModel, mut store: CandidateStore) -> Self {
        for id in store.ids() {
            let r = store.get(&id).expect("listed id");
            let (score, level) = (r.score, r.level);
            store.refresh_cache(&id, score, level, 0);
        }
        AppState {
            calibration: model.calibration().clone(),
            snapshot: RwLock::new(Arc::new(Snapshot::new(1, model))),
            store: Mutex::new(store),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Replaces the active rule base and returns the new version.
    pub fn swap_model(&self, model: GkModel) -> u64 {
        let mut guard = self.snapshot.write().expect("snapshot lock");
        let version = guard.version + 1;
        *guard = Arc::new(Snapshot::new(version, model));
        version
    }

    pub fn calibration(&self) -> &GKCalibration {
        &self.calibration
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub port: u16,
    pub store: PathBuf,
    pub rules: Option<PathBuf>,
    /// Comma-separated allowed origins; `None` allows any origin.
    pub cors_origin: Option<String>,
    pub calibration: Option<GKCalibration>,
}

impl ServiceConfig {
    /// Reads `GKQ_PORT`, `GKQ_STORE`, `GKQ_RULES` and `GKQ_CORS_ORIGIN`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        ServiceConfig {
            port: var("GKQ_PORT").and_then(|p| p.parse().ok()).unwrap_or(DEFAULT_PORT),
            store: var("GKQ_STORE").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)),
            rules: var("GKQ_RULES").map(PathBuf::from),
            cors_origin: var("GKQ_CORS_ORIGIN"),
            calibration: None,
        }
    }
}

/// Loads the rule base (generated unless `config.rules` is set) and opens the store.
pub fn build_state(config: &ServiceConfig) -> Result<AppState, ServiceError> {
    let calibration = config.calibration.clone().unwrap_or_else(default_calibration);
    let model = match &config.rules {
        None => GkModel::new(calibration),
        Some(path) => {
            let bytes =
                std::fs::read(path).map_err(|source| ServiceError::ReadRules { path: path.clone(), source })?;
            let rb = parse_rulebase_bytes(&bytes)
                .map_err(|source| ServiceError::ParseRules { path: path.clone(), source })?;
            GkModel::with_rulebase(calibration, rb)?
        }
    };
    let (store, stats) = CandidateStore::open(&config.store)?;
    tracing::info!(
        path = %config.store.display(),
        records = store.len(),
        torn_tail = stats.torn_tail,
        "candidate store replayed"
    );
    Ok(AppState::new(model, store))
}

pub fn cors_layer(origin: Option<&str>) -> Result<CorsLayer, ServiceError> {
    let base = CorsLayer::new().allow_methods(Any).allow_headers(Any).expose_headers([HeaderName::from_static(
        VERSION_HEADER,
    )]);
    match origin {
        None => Ok(base.allow_origin(Any)),
        Some(list) => {
            let origins = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| HeaderValue::from_str(s).map_err(|_| ServiceError::CorsOrigin(s.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(base.allow_origin(AllowOrigin::list(origins)))
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/evaluate", axum::routing::post(evaluate))
        .route("/api/candidates", get(list_candidates).post(create_candidate))
        .route("/api/candidates/{id}", get(get_candidate).delete(delete_candidate))
        .route("/api/rulebase", get(get_rulebase).put(put_rulebase))
        .with_state(state)
}

/// Binds and serves until ctrl-c or SIGTERM.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let cors = cors_layer(config.cors_origin.as_deref())?;
    let state = Arc::new(build_state(&config)?);
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })?;
    let local = listener.local_addr().map_err(ServiceError::Serve)?;
    tracing::info!(%local, "listening");
    println!("gkq listening on http://{local}");
    axum::serve(listener, router(state).layer(cors))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(ServiceError::Serve)?;
    tracing::info!("shut down");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, body: json!({ "error": message.into() }) }
    }

    fn malformed(e: serde_json::Error) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("malformed JSON: {e}"))
    }
}

impl From<ScoreError> for ApiError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::Profile(p) => ApiError {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": "invalid profile", "fields": p.errors }),
            },
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::Duplicate(_) => StatusCode::CONFLICT,
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn version_header(version: u64) -> [(HeaderName, HeaderValue); 1] {
    [(HeaderName::from_static(VERSION_HEADER), HeaderValue::from(version))]
}

fn json_text(status: StatusCode, version: u64, body: String) -> Response {
    let mut resp = (status, version_header(version), body).into_response();
    resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    resp
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let snap = state.snapshot();
    let candidates = state.store.lock().expect("store lock").len();
    Json(json!({ "status": "ok", "rulebase_version": snap.version, "candidates": candidates }))
}

async fn evaluate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let profile: GKProfile = serde_json::from_slice(&body).map_err(ApiError::malformed)?;
    let snap = state.snapshot();
    let scored = snap.model.score(&profile)?;
    let report = EvaluationReport::new(&scored, snap.model.rulebase());
    Ok(json_text(StatusCode::OK, snap.version, report.to_json()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateCandidate {
    id: Option<String>,
    name: String,
    profile: GKProfile,
}

/// A listed candidate with its place in the ranking.
#[derive(Debug, Serialize)]
struct ListedCandidate {
    rank: usize,
    tied: bool,
    #[serde(flatten)]
    record: CandidateRecord,
}

/// Brings the cached score of `id` up to `snap.version`.
fn refresh(store: &mut CandidateStore, id: &str, snap: &Snapshot) -> Result<(), ApiError> {
    let Some(record) = store.get(id) else { return Ok(()) };
    if record.rulebase_version == snap.version {
        return Ok(());
    }
    let scored = snap.model.score(&record.profile)?;
    store.refresh_cache(id, scored.score, scored.level, snap.version);
    Ok(())
}

async fn create_candidate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateCandidate = serde_json::from_slice(&body).map_err(ApiError::malformed)?;
    let id = match req.id {
        Some(id) if id.trim().is_empty() => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "id must not be empty"));
        }
        Some(id) => id,
        None => uuid::Uuid::new_v4().to_string(),
    };
    let snap = state.snapshot();
    let scored = snap.model.score(&req.profile)?;
    let record = CandidateRecord {
        id,
        name: req.name,
        profile: scored.profile,
        created_at: Utc::now(),
        score: scored.score,
        level: scored.level,
        rulebase_version: snap.version,
    };
    state.store.lock().expect("store lock").insert(record.clone())?;
    Ok((StatusCode::CREATED, version_header(snap.version), Json(record)).into_response())
}

async fn list_candidates(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let mut store = state.store.lock().expect("store lock");
    let ids = store.ids();
    for id in &ids {
        refresh(&mut store, id, &snap)?;
    }
    let records: Vec<CandidateRecord> = store.records().cloned().collect();
    drop(store);
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    let listed: Vec<ListedCandidate> = rank_order(&scores)
        .into_iter()
        .map(|p| ListedCandidate { rank: p.rank, tied: p.tied, record: records[p.index].clone() })
        .collect();
    Ok((version_header(snap.version), Json(listed)).into_response())
}

async fn get_candidate(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let mut store = state.store.lock().expect("store lock");
    refresh(&mut store, &id, &snap)?;
    let record = store.get(&id).cloned().ok_or(StoreError::NotFound(id))?;
    Ok((version_header(snap.version), Json(record)).into_response())
}

async fn delete_candidate(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    state.store.lock().expect("store lock").delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_rulebase(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.snapshot();
    let mut resp = (version_header(snap.version), snap.text.clone()).into_response();
    resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"));
    resp
}

async fn put_rulebase(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let rulebase = parse_rulebase_bytes(&body).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        body: json!({
            "error": "invalid rule base",
            "diagnostics": e.diagnostics.iter().map(|d| json!({
                "code": d.code,
                "line": d.line,
                "column": d.column,
                "location": format!("{}:{}", d.line, d.column),
                "message": d.message,
            })).collect::<Vec<_>>(),
        }),
    })?;
    let rules = rulebase.rules().len();
    let model = GkModel::with_rulebase(state.calibration.clone(), rulebase)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let version = state.swap_model(model);
    Ok((version_header(version), Json(json!({ "rulebase_version": version, "rules": rules }))).into_response())
}

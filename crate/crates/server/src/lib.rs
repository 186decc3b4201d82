//! HTTP JSON API over the experiment harness.
//!
//! | Method | Path | Body / result |
//! |---|---|---|
//! | GET | `/api/envs` | shipped maps with full geometry |
//! | POST | `/api/runs` | run config → `{"id": ..}` (202) |
//! | GET | `/api/runs` | every known handle |
//! | GET | `/api/runs/{id}` | run handle |
//! | GET | `/api/runs/{id}/curves` | curve payload once done (404 unknown, 409 not done) |
//! | POST | `/api/subgoals/validate` | series → `{"ok": bool, "errors": [..]}` |
//! | GET | `/` | UI bundle |

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use waypoint_core::env::{builtin, EnvKind};
use waypoint_core::harness::RunConfig;
use waypoint_core::subgoal::{check_series_value, errors_by_field, FieldError};
use waypoint_core::Error;

mod registry;

pub use registry::{CurveLookup, Registry, RunHandle, RunStatus};

#[derive(Clone, Debug, Default)]
pub struct ServerConfig {
    /// Directory holding one sub-directory per submitted run.
    pub spool: Option<PathBuf>,
    /// Built UI bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
    /// Threads per battery; 0 uses every core.
    pub workers: usize,
}

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
}

impl AppState {
    pub fn new(config: &ServerConfig) -> waypoint_core::Result<Self> {
        Ok(AppState {
            registry: Registry::start(config.spool.clone(), config.workers)?,
        })
    }
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/envs", get(list_envs))
        .route("/api/runs", post(submit_run).get(list_runs))
        .route("/api/runs/{id}", get(poll_run))
        .route("/api/runs/{id}/curves", get(fetch_curves))
        .route("/api/subgoals/validate", post(validate_subgoals))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found))
        .with_state(state);
    match ui_dir.filter(|d| d.join("index.html").is_file()) {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api.route("/", get(placeholder)),
    }
}

pub async fn serve(addr: SocketAddr, config: ServerConfig) -> anyhow::Result<()> {
    let state = AppState::new(&config)?;
    let app = router(state, config.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

/// Error body: `{"error": {"code", "message", "fields"}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    fields: BTreeMap<String, Vec<String>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            fields: BTreeMap::new(),
        }
    }

    fn invalid(errors: &[FieldError]) -> Self {
        ApiError {
            fields: errors_by_field(errors),
            ..ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_config",
                "configuration failed validation",
            )
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": { "code": self.code, "message": self.message, "fields": self.fields }
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(fields) => ApiError::invalid(&fields),
            Error::Config(_) | Error::MapLoad { .. } | Error::Json(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e.to_string())
            }
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

fn parse_json(body: &[u8]) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "malformed_json",
            format!("request body: {e}"),
        )
    })
}

async fn list_envs() -> Json<Vec<Value>> {
    let envs = builtin::IDS
        .iter()
        .map(|&id| {
            let map = builtin::by_id(id).expect("shipped map");
            json!({
                "id": id,
                "kind": map.kind(),
                "action_count": map.action_count(),
                "step_cap": map.step_cap(),
                "subgoal_radius": map.subgoal_radius(),
                "map": map.to_document().to_value(),
            })
        })
        .collect();
    Json(envs)
}

async fn submit_run(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let value = parse_json(&body)?;
    let config: RunConfig = serde_json::from_value(value).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_config",
            format!("run config: {e}"),
        )
    })?;
    let prepared = config.prepare()?;
    let total = prepared.total_runs();
    let handle = state.registry.submit(config, total);
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": handle.id }))).into_response())
}

async fn list_runs(State(state): State<AppState>) -> Json<Vec<RunHandle>> {
    Json(state.registry.handles())
}

async fn poll_run(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<RunHandle>, ApiError> {
    state
        .registry
        .handle(&id)
        .map(Json)
        .ok_or_else(|| unknown_run(&id))
}

async fn fetch_curves(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match state.registry.curves(&id) {
        CurveLookup::Ready(payload) => {
            let body = serde_json::to_vec(&*payload).map_err(Error::Json)?;
            Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
        }
        CurveLookup::NotFinished(status) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_finished",
            format!("run {id} is {}", serde_json::to_value(status).unwrap_or_default()),
        )),
        CurveLookup::Failed(msg) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "run_failed",
            format!("run {id} failed: {msg}"),
        )),
        CurveLookup::Unknown => Err(unknown_run(&id)),
    }
}

fn unknown_run(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no run with id {id}"))
}

/// Accepts either a bare series document, validated against the shipped map of
/// its `env` kind, or `{"map": <id or map document>, "series": <series>}`.
async fn validate_subgoals(body: Bytes) -> Result<Json<Value>, ApiError> {
    let value = parse_json(&body)?;
    let (map, series) = match value {
        Value::Object(mut obj) if obj.contains_key("series") => {
            let series = obj.remove("series").unwrap_or(Value::Null);
            let map = match obj.remove("map") {
                None => default_map(&series),
                Some(Value::String(id)) => waypoint_core::env::resolve_map(&id).ok(),
                Some(doc) => waypoint_core::env::MapDocument::from_value(doc)
                    .and_then(|d| d.into_map())
                    .ok(),
            };
            (map, series)
        }
        series => (default_map(&series), series),
    };
    let errors = match map {
        Some(map) => check_series_value(&map, series),
        None => vec![FieldError::new("map", "unknown or invalid map")],
    };
    Ok(Json(json!({ "ok": errors.is_empty(), "errors": errors })))
}

fn default_map(series: &Value) -> Option<waypoint_core::env::EnvMap> {
    let kind: EnvKind = serde_json::from_value(series.get("env")?.clone()).ok()?;
    builtin::by_id(kind.as_str())
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

const PLACEHOLDER: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>waypoint</title></head>
<body>
<h1>waypoint</h1>
<p>No UI bundle is configured. Start the server with <code>--ui-dir</code> pointing at a built bundle.</p>
<p>API: <code>GET /api/envs</code>, <code>POST /api/runs</code>, <code>GET /api/runs/{id}</code>,
<code>GET /api/runs/{id}/curves</code>, <code>POST /api/subgoals/validate</code>.</p>
</body></html>
";

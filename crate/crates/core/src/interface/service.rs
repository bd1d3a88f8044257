//! HTTP scoring service.
//!
//! | method | path          | body                                      |
//! |--------|---------------|-------------------------------------------|
//! | GET    | `/v1/health`  |                                           |
//! | POST   | `/v1/score`   | `{completion, problem_id?, problem?, config_overrides?}` |
//! | POST   | `/v1/batch`   | [`BatchScoreRequest`]                     |
//! | GET    | `/v1/rules`   | query `category`                          |
//!
//! Every response carries the `x-codequal-schema` header. Malformed requests
//! get 400 with `{"error": ...}`; when the test runner has no free worker
//! the answer is 503 with `Retry-After`.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{version_info, BatchScoreRequest, BatchScoreResponse, Engine, API_SCHEMA_VERSION};
use crate::dataset::{Dataset, ProblemRecord};
use crate::findings::{catalog, Category};
use crate::reward::{Correctness, RewardBreakdown};

pub const SCHEMA_HEADER: &str = "x-codequal-schema";

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
    dataset: Arc<Dataset>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub completion: String,
    #[serde(default)]
    pub problem_id: Option<String>,
    #[serde(default)]
    pub problem: Option<ProblemRecord>,
    #[serde(default)]
    pub config_overrides: Option<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub schema_version: u32,
    pub config_fingerprint: String,
    pub breakdown: RewardBreakdown,
    pub elapsed_ms: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesQuery {
    category: Option<String>,
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl ToString) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.to_string() }
    }

    fn busy() -> Self {
        Self {
            status: StatusCode::SERVICE_UNAVAILABLE,
            message: "test runner workers are all busy; retry later".into(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut response = (self.status, Json(json!({ "error": self.message }))).into_response();
        if self.status == StatusCode::SERVICE_UNAVAILABLE {
            response.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from_static("1"));
        }
        response
    }
}

pub fn router(engine: Engine, dataset: Dataset) -> Router {
    let state = AppState { engine: Arc::new(engine), dataset: Arc::new(dataset) };
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/score", post(score))
        .route("/v1/batch", post(batch))
        .route("/v1/rules", get(rules))
        .with_state(state)
        .layer(axum::middleware::map_response(|mut response: Response| async move {
            response.headers_mut().insert(SCHEMA_HEADER, HeaderValue::from(API_SCHEMA_VERSION));
            response
        }))
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, engine: Engine, dataset: Dataset) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("codequal listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine, dataset))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let mut body = version_info();
    body["status"] = json!("ok");
    body["config_fingerprint"] = json!(state.engine.fingerprint());
    body["test_runner"] = json!(if state.engine.has_runner() { "configured" } else { "not_configured" });
    body["problems"] = json!(state.dataset.len());
    Json(body)
}

async fn rules(query: Result<Query<RulesQuery>, QueryRejection>) -> Result<Json<Value>, ApiError> {
    let Query(query) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let category = match query.category {
        Some(c) => Some(c.parse::<Category>().map_err(ApiError::bad_request)?),
        None => None,
    };
    Ok(Json(json!(catalog(category))))
}

fn retryable(correctness: &Correctness) -> bool {
    matches!(correctness, Correctness::Unavailable { retryable: true, .. })
}

async fn score(State(state): State<AppState>, body: Result<Json<ScoreRequest>, JsonRejection>) -> Result<Json<ScoreResponse>, ApiError> {
    let Json(req) = body?;
    let engine = state.engine.with_overrides(req.config_overrides.as_ref()).map_err(ApiError::bad_request)?;
    let problem = match (req.problem, req.problem_id) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give either `problem` or `problem_id`, not both")),
        (Some(p), None) => Some(p),
        (None, Some(id)) => Some(
            state.dataset.get(&id).cloned().ok_or_else(|| ApiError::bad_request(format!("unknown problem_id `{id}`")))?,
        ),
        (None, None) => None,
    };
    let completion = req.completion;
    let response = tokio::task::spawn_blocking(move || {
        let started = Instant::now();
        let breakdown = engine.score(&completion, problem.as_ref());
        ScoreResponse {
            schema_version: API_SCHEMA_VERSION,
            config_fingerprint: engine.fingerprint().to_string(),
            breakdown,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    })
    .await
    .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })?;
    if retryable(&response.breakdown.correctness) {
        return Err(ApiError::busy());
    }
    Ok(Json(response))
}

async fn batch(
    State(state): State<AppState>,
    body: Result<Json<BatchScoreRequest>, JsonRejection>,
) -> Result<Json<BatchScoreResponse>, ApiError> {
    let Json(req) = body?;
    req.validate().map_err(ApiError::bad_request)?;
    let engine = state.engine.with_overrides(req.config_overrides.as_ref()).map_err(ApiError::bad_request)?;
    let dataset = state.dataset.clone();
    let response = tokio::task::spawn_blocking(move || engine.score_batch(&req, &dataset))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })?
        .map_err(ApiError::bad_request)?;
    if response.results.iter().any(|r| r.retryable()) {
        return Err(ApiError::busy());
    }
    Ok(Json(response))
}

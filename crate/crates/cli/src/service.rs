//! HTTP API over a frozen model and suggestion database.

use std::sync::Arc;

use axum::extract::{rejection::JsonRejection, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use happiness_core::features::Side;
use happiness_core::her::{rank_suggestions, HerModel};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::db::SuggestionDb;
use crate::feedback::{Action, FeedbackLog};

pub const DEFAULT_K: usize = 3;

pub struct AppState {
    pub model: Option<HerModel>,
    pub db: SuggestionDb,
    pub feedback: FeedbackLog,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("model not loaded")]
    Unavailable,
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SuggestRequest {
    pub moment: String,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionOut {
    pub id: String,
    pub text: String,
    pub probability: f64,
    pub concepts: Vec<String>,
    pub agency: bool,
    pub sociality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub suggestions: Vec<SuggestionOut>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FeedbackRequest {
    pub moment: String,
    pub suggestion_id: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub record_id: String,
}

/// Ranks the database against `moment`. Feature annotations describe the
/// moment and are empty or false when the model carries no classifiers.
pub fn suggest(model: Option<&HerModel>, db: &SuggestionDb, req: &SuggestRequest) -> Result<SuggestResponse, ApiError> {
    if req.moment.trim().is_empty() {
        return Err(ApiError::BadRequest("moment required".into()));
    }
    let k = req.k.unwrap_or(DEFAULT_K);
    if k == 0 {
        return Err(ApiError::BadRequest("k must be at least 1".into()));
    }
    let model = model.ok_or(ApiError::Unavailable)?;
    let texts = db.texts();
    let ranked = rank_suggestions(model, &req.moment, &texts, k).map_err(|e| ApiError::Internal(e.to_string()))?;
    let annotated = model.features.as_ref().map(|f| f.annotate(&req.moment, Side::Moment));
    let concepts: Vec<String> = annotated
        .as_ref()
        .and_then(|a| a.concepts.as_ref())
        .map(|v| v.concepts().into_iter().map(|c| c.name().to_string()).collect())
        .unwrap_or_default();
    let agency = annotated.as_ref().and_then(|a| a.agency).unwrap_or(false);
    let sociality = annotated.as_ref().and_then(|a| a.sociality).unwrap_or(false);
    let suggestions = ranked
        .into_iter()
        .map(|r| {
            let s = &db.items()[r.index];
            SuggestionOut {
                id: s.id.clone(),
                text: s.text.clone(),
                probability: r.probability,
                concepts: concepts.clone(),
                agency,
                sociality,
            }
        })
        .collect();
    Ok(SuggestResponse { suggestions })
}

pub fn feedback(state: &AppState, req: &FeedbackRequest) -> Result<FeedbackAck, ApiError> {
    if state.db.get(&req.suggestion_id).is_none() {
        return Err(ApiError::NotFound(format!("unknown suggestion id {:?}", req.suggestion_id)));
    }
    let record = state
        .feedback
        .append(&req.moment, &req.suggestion_id, req.action)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(FeedbackAck {
        record_id: record.record_id,
    })
}

async fn suggest_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SuggestRequest>, JsonRejection>,
) -> Result<Json<SuggestResponse>, ApiError> {
    let Json(req) = body?;
    tokio::task::spawn_blocking(move || suggest(state.model.as_ref(), &state.db, &req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map(Json)
}

async fn feedback_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Json<FeedbackRequest>, JsonRejection>,
) -> Result<Json<FeedbackAck>, ApiError> {
    let Json(req) = body?;
    tokio::task::spawn_blocking(move || feedback(&state, &req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map(Json)
}

async fn suggestions_handler(State(state): State<Arc<AppState>>) -> Json<SuggestionDb> {
    Json(state.db.clone())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/suggest", post(suggest_handler))
        .route("/api/feedback", post(feedback_handler))
        .route("/api/suggestions", get(suggestions_handler))
        .with_state(state)
}

/// Serves until ctrl-c. Prints the bound address so callers can use port 0.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

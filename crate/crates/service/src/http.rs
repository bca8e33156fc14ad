//! JSON-over-HTTP API.
//!
//! Posting and reading walls are open. Everything a manager does requires
//! `Authorization: Bearer <manager_token>`. Errors are returned as
//! `{"error": <code>, "message": <text>}`.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use wallfilter_core::{ClassLabel, ClassPosterior, PolicyConfig};

use crate::domain::{MessageStatus, ReviewAction};
use crate::error::ServiceError;
use crate::moderator::Moderator;

pub const DEFAULT_PAGE_LIMIT: usize = 20;
pub const MAX_PAGE_LIMIT: usize = 200;
const DEFAULT_ACTOR: &str = "manager";

#[derive(Clone)]
struct AppState {
    moderator: Arc<Moderator>,
    token: Arc<str>,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::WallNotFound(_)
            | ServiceError::MessageNotFound(_)
            | ServiceError::UserNotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::WallExists(_)
            | ServiceError::NotPending(_)
            | ServiceError::NotPublished(_) => StatusCode::CONFLICT,
            ServiceError::InvalidPolicy(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::InvalidInput(_)
            | ServiceError::Corpus(_)
            | ServiceError::Model(_)
            | ServiceError::Eval(_) => StatusCode::BAD_REQUEST,
            ServiceError::Config(_) | ServiceError::Log(_) | ServiceError::Io { .. } => {
                log::error!("{e}");
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let mut message = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            let text = s.to_string();
            if !message.ends_with(&text) {
                message = format!("{message}: {text}");
            }
            source = s.source();
        }
        ApiError::new(status, e.code(), message)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.into(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateWallRequest {
    pub wall_id: String,
    pub owner_id: String,
    #[serde(default)]
    pub policy: Option<PolicyConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostRequest {
    pub author_id: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostResponse {
    pub message_id: String,
    /// `published`, `pending` or `rejected`.
    pub status: String,
    pub flagged: BTreeSet<ClassLabel>,
    pub evidence: Option<ClassPosterior>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WallQuery {
    pub page: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueueQuery {
    pub class: Option<ClassLabel>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReviewRequest {
    pub action: ReviewAction,
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BlockRequest {
    pub blocked: bool,
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RetrainRequest {
    pub corpus_path: PathBuf,
}

pub fn router(moderator: Arc<Moderator>, manager_token: impl Into<String>) -> Router {
    let state = AppState {
        moderator,
        token: manager_token.into().into(),
    };
    let manager = Router::new()
        .route("/walls", post(create_wall))
        .route("/walls/{wall_id}/rules", put(set_rules))
        .route("/moderation/queue", get(queue))
        .route("/moderation/{message_id}", post(review))
        .route("/messages/{message_id}", delete(delete_message))
        .route("/users/{user_id}", get(get_user))
        .route("/users/{user_id}/block", post(block_user))
        .route("/admin/retrain", post(retrain))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_manager));
    Router::new()
        .route("/health", get(health))
        .route("/walls/{wall_id}", get(get_wall))
        .route("/walls/{wall_id}/messages", post(post_message))
        .route("/reports/latest", get(latest_report))
        .merge(manager)
        .with_state(state)
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn require_manager(
    State(app): State<AppState>,
    headers: HeaderMap,
    request: Request,
    next: Next,
) -> Response {
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match presented {
        Some(t) if constant_time_eq(t.as_bytes(), app.token.as_bytes()) => next.run(request).await,
        _ => ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "manager token required",
        )
        .into_response(),
    }
}

async fn health(State(app): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "model_version": app.moderator.model_version(),
    }))
}

async fn create_wall(
    State(app): State<AppState>,
    body: Result<Json<CreateWallRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let wall = app
        .moderator
        .create_wall(&req.wall_id, &req.owner_id, req.policy)?;
    Ok((StatusCode::CREATED, Json(wall)))
}

async fn post_message(
    State(app): State<AppState>,
    Path(wall_id): Path<String>,
    body: Result<Json<PostRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let out = app.moderator.post_message(&wall_id, &req.author_id, &req.text)?;
    let flagged = match &out.status {
        MessageStatus::Pending { flagged } => flagged.clone(),
        _ => BTreeSet::new(),
    };
    let resp = PostResponse {
        message_id: out.message_id,
        status: out.status.name().into(),
        flagged,
        evidence: out.evidence,
    };
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn get_wall(
    State(app): State<AppState>,
    Path(wall_id): Path<String>,
    query: Result<Query<WallQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query?;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE_LIMIT).min(MAX_PAGE_LIMIT);
    let page = app.moderator.get_wall(&wall_id, q.page.unwrap_or(1), limit)?;
    Ok(Json(page))
}

async fn queue(
    State(app): State<AppState>,
    query: Result<Query<QueueQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query?;
    Ok(Json(app.moderator.moderation_queue(q.class)))
}

async fn review(
    State(app): State<AppState>,
    Path(message_id): Path<String>,
    body: Result<Json<ReviewRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let actor = req.actor.as_deref().unwrap_or(DEFAULT_ACTOR);
    Ok(Json(app.moderator.manager_decision(&message_id, req.action, actor)?))
}

async fn delete_message(
    State(app): State<AppState>,
    Path(message_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.moderator.delete_message(&message_id, DEFAULT_ACTOR)?))
}

async fn get_user(
    State(app): State<AppState>,
    Path(user_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.moderator.get_user(&user_id)?))
}

async fn block_user(
    State(app): State<AppState>,
    Path(user_id): Path<String>,
    body: Result<Json<BlockRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let actor = req.actor.as_deref().unwrap_or(DEFAULT_ACTOR);
    Ok(Json(app.moderator.set_user_block(&user_id, req.blocked, actor)?))
}

async fn set_rules(
    State(app): State<AppState>,
    Path(wall_id): Path<String>,
    body: Result<Json<PolicyConfig>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(policy) = body?;
    Ok(Json(app.moderator.set_wall_rules(&wall_id, policy, DEFAULT_ACTOR)?))
}

async fn retrain(
    State(app): State<AppState>,
    body: Result<Json<RetrainRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let moderator = app.moderator.clone();
    let out = tokio::task::spawn_blocking(move || moderator.retrain(&req.corpus_path))
        .await
        .map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
        })??;
    Ok((StatusCode::ACCEPTED, Json(out)))
}

async fn latest_report(State(app): State<AppState>) -> ApiResult<Response> {
    match app.moderator.latest_report()? {
        Some(body) => Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response()),
        None => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "report_not_found",
            "no comparison report has been produced yet",
        )),
    }
}

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::{Mutex, RwLock};
use tower_http::services::ServeDir;

use crate::config::ServerConfig;
use crate::error::ApiError;
use crate::study::{StudyData, StudyRequest, Submission, STUDY_FILE};

/// Shared service state: configuration plus one mutex per study.
#[derive(Clone)]
pub struct AppState {
    config: Arc<ServerConfig>,
    studies: Arc<RwLock<HashMap<String, Arc<Mutex<StudyData>>>>>,
}

impl AppState {
    /// Loads every study found under the data directory.
    pub fn open(config: ServerConfig) -> Result<Self, ApiError> {
        std::fs::create_dir_all(&config.data_dir).map_err(ApiError::io)?;
        let mut studies = HashMap::new();
        for entry in std::fs::read_dir(&config.data_dir).map_err(ApiError::io)? {
            let dir = entry.map_err(ApiError::io)?.path();
            if dir.join(STUDY_FILE).is_file() {
                let data = StudyData::open(&dir, &config.bundles_dir)?;
                studies.insert(data.study.id.clone(), Arc::new(Mutex::new(data)));
            }
        }
        Ok(Self { config: Arc::new(config), studies: Arc::new(RwLock::new(studies)) })
    }

    async fn study(&self, id: &str) -> Result<Arc<Mutex<StudyData>>, ApiError> {
        self.studies.read().await.get(id).cloned().ok_or_else(|| ApiError::unknown_study(id))
    }

    fn is_admin(&self, headers: &HeaderMap) -> bool {
        let token = &self.config.admin_token;
        !token.is_empty()
            && headers
                .get(header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.strip_prefix("Bearer "))
                .is_some_and(|t| t == token)
    }

    fn require_admin(&self, headers: &HeaderMap) -> Result<(), ApiError> {
        if self.is_admin(headers) {
            Ok(())
        } else {
            Err(ApiError::unauthorized())
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn create_study(
    State(state): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<StudyRequest>, JsonRejection>,
) -> ApiResult<Response> {
    state.require_admin(&headers)?;
    let request = body(payload)?;
    let mut studies = state.studies.write().await;
    if let Some(id) = &request.id {
        if studies.contains_key(id) {
            return Err(ApiError::new(StatusCode::CONFLICT, "STUDY_EXISTS", format!("study {id:?} already exists")));
        }
    }
    let config = state.config.clone();
    let data = StudyData::create(request, &config.bundles_dir, &config.data_dir)?;
    let summary = serde_json::json!({
        "id": data.study.id,
        "state": data.study.state,
        "lineups": data.study.lineups.len(),
        "block_size": data.study.block_size,
    });
    studies.insert(data.study.id.clone(), Arc::new(Mutex::new(data)));
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    participant: String,
}

async fn next_lineup(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> ApiResult<Response> {
    let study = state.study(&id).await?;
    let mut data = study.lock().await;
    let next = data.next(&q.participant)?;
    Ok(Json(next).into_response())
}

async fn submit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Submission>, JsonRejection>,
) -> ApiResult<Response> {
    let submission = body(payload)?;
    let study = state.study(&id).await?;
    let mut data = study.lock().await;
    let record = data.submit(submission)?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

#[derive(Deserialize)]
struct ResultQuery {
    #[serde(default)]
    reveal: bool,
}

async fn lineup_result(
    State(state): State<AppState>,
    Path((id, lineup)): Path<(String, String)>,
    Query(q): Query<ResultQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let admin = state.is_admin(&headers);
    let study = state.study(&id).await?;
    let data = study.lock().await;
    let result = data.result(&lineup, q.reveal, admin)?;
    Ok(Json(result).into_response())
}

async fn export(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    state.require_admin(&headers)?;
    let study = state.study(&id).await?;
    let bytes = study.lock().await.export()?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

async fn close(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    state.require_admin(&headers)?;
    let study = state.study(&id).await?;
    study.lock().await.close()?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint")
}

/// All API routes; every other path is served from `static_dir` when set.
pub fn router(state: AppState) -> Router {
    let static_dir = state.config.static_dir.clone();
    let api = Router::new()
        .route("/api/studies", post(create_study))
        .route("/api/studies/{id}/next", get(next_lineup))
        .route("/api/studies/{id}/evaluations", post(submit))
        .route("/api/studies/{id}/lineups/{lineup}/result", get(lineup_result))
        .route("/api/studies/{id}/export", get(export))
        .route("/api/studies/{id}/close", post(close))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(api_not_found),
    }
}

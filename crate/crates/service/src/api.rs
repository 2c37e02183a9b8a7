use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nonword_core::study::analyze;
use nonword_core::StudyList;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::ApiError;
use crate::pipeline::{self, AppState, GenerateRequest, StudyRequest, TrialBatch};

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/generate", post(generate))
        .route("/api/v1/study", post(create_study))
        .route("/api/v1/study/{id}", get(get_study))
        .route("/api/v1/trials", post(post_trials))
        .route("/api/v1/analysis/{session}", get(get_analysis))
        .route("/api/v1/models", get(list_models))
        .with_state(state)
}

/// Parses a JSON body, mapping every failure to 400.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn json_bytes(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(state: Arc<AppState>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state)).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn generate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<pipeline::GenerateResponse>, ApiError> {
    let req: GenerateRequest = parse(&body)?;
    blocking(state, move |s| pipeline::generate(s, &req)).await.map(Json)
}

fn new_session_id() -> String {
    format!("{:016x}", rand::random::<u64>())
}

async fn create_study(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: StudyRequest = parse(&body)?;
    let list = blocking(state.clone(), move |s| pipeline::build_study(s, &req)).await?;
    let list_json = serde_json::to_string(&list).map_err(|e| ApiError::internal(e.to_string()))?;
    let id = loop {
        let id = new_session_id();
        if state.store.study(&id)?.is_none() {
            break id;
        }
    };
    state.store.create_study(&id, &list_json)?;
    tracing::info!(session = %id, items = list.items.len(), "study list issued");
    Ok(json_bytes(format!("{{\"id\":\"{id}\",\"study\":{list_json}}}")))
}

async fn get_study(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match state.store.study(&id)? {
        Some(list) => Ok(json_bytes(list)),
        None => Err(ApiError::not_found(format!("unknown study {id:?}"))),
    }
}

#[derive(Serialize)]
struct TrialAck {
    session: String,
    accepted: usize,
    total: usize,
}

async fn post_trials(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<TrialAck>, ApiError> {
    let batch: TrialBatch = parse(&body)?;
    let list_json =
        state.store.study(&batch.session)?.ok_or_else(|| ApiError::not_found(format!("unknown session {:?}", batch.session)))?;
    let list: StudyList = serde_json::from_str(&list_json).map_err(|e| ApiError::internal(e.to_string()))?;
    let records = pipeline::resolve_trials(&list, &batch)?;
    state.store.append_trials(&batch.session, &records)?;
    let total = state.store.trials(&batch.session)?.len();
    Ok(Json(TrialAck { session: batch.session, accepted: records.len(), total }))
}

async fn get_analysis(State(state): State<Arc<AppState>>, Path(session): Path<String>) -> Result<Response, ApiError> {
    if state.store.study(&session)?.is_none() {
        return Err(ApiError::not_found(format!("unknown session {session:?}")));
    }
    let trials = state.store.trials(&session)?;
    if trials.is_empty() {
        return Err(ApiError::not_found(format!("session {session:?} has no trials yet")));
    }
    let analysis = analyze(&trials).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(analysis).into_response())
}

#[derive(Serialize)]
struct ModelInfo {
    id: String,
    order: usize,
    alphabet: String,
    path: String,
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<ModelInfo>> {
    Json(
        state
            .models
            .iter()
            .map(|(id, m)| ModelInfo {
                id: id.clone(),
                order: m.model.order(),
                alphabet: m.model.alphabet().to_string(),
                path: m.path.display().to_string(),
            })
            .collect(),
    )
}

//! HTTP service hosting annotation sessions.
//!
//! Wire protocol (version [`PROTOCOL_VERSION`]), all bodies JSON unless noted:
//!
//! - `POST /sessions` `{protocol_version?, per_tuple?, seed?}` → 201
//!   `{session_id, protocol_version, emotion, tuples, per_tuple}`
//! - `GET /sessions/{id}/next?annotator=A` → `{status: "question", tuple_index,
//!   prompt_most, prompt_least, speakers: [{number, item_id, text}]}` or
//!   `{status: "complete"}`
//! - `POST /sessions/{id}/responses` `{annotator, tuple_index, best, worst}` →
//!   `{outcome: "accepted" | "gold_feedback" | "rejected_annotator", ...}`
//! - `GET /sessions/{id}/progress` → progress counters
//! - `GET /sessions/{id}/export` → response TSV
//!
//! Errors are `{error, code}` with 400 (malformed), 403 (rejected annotator),
//! 404 (unknown session or annotator) or 409 (not the assigned tuple).

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bwskit::annotation::{AnnotationError, GateConfig, GoldQuestion, Session, SubmitOutcome};
use bwskit::corpus::Emotion;
use bwskit::design::TupleDesign;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::store::{SessionStore, SharedSession, StoreError};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_PER_TUPLE: usize = 3;

/// What every new session is built from.
#[derive(Debug, Clone)]
pub struct SessionTemplate {
    pub design: Arc<TupleDesign>,
    pub gold: Vec<GoldQuestion>,
    pub texts: BTreeMap<String, String>,
    pub emotion: Emotion,
    pub gate: GateConfig,
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub template: Arc<SessionTemplate>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{sid}/next", get(next))
        .route("/sessions/{sid}/responses", post(respond))
        .route("/sessions/{sid}/progress", get(progress))
        .route("/sessions/{sid}/export", get(export))
        .with_state(state)
}

pub fn prompts(emotion: Emotion) -> (String, String) {
    let adj = emotion.adjective();
    (
        format!("Which of the four speakers is likely to be the MOST {adj}?"),
        format!("Which of the four speakers is likely to be the LEAST {adj}?"),
    )
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn no_session(sid: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("unknown session {sid}"))
    }
}

fn gate_explanation(accuracy: f64, threshold: f64) -> String {
    format!(
        "annotators must answer at least {:.0}% of check questions correctly; your accuracy is {:.0}%, so no further questions will be served",
        threshold * 100.0,
        accuracy * 100.0
    )
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Annotation(a) => a.into(),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", other.to_string()),
        }
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        match &e {
            AnnotationError::InvalidResponse(_) | AnnotationError::UnknownTuple(_) | AnnotationError::Config(_) => {
                Self::bad_request(e.to_string())
            }
            AnnotationError::UnknownAnnotator(_) => Self::new(StatusCode::NOT_FOUND, "unknown_annotator", e.to_string()),
            AnnotationError::AnnotatorRejected { accuracy, threshold, .. } => Self::new(
                StatusCode::FORBIDDEN,
                "annotator_rejected",
                gate_explanation(*accuracy, *threshold),
            ),
            AnnotationError::NotAssigned { .. } => Self::new(StatusCode::CONFLICT, "not_assigned", e.to_string()),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "code": self.code }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Bodies are parsed by hand so every malformed request gets our 400 shape.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    let text = if body.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn session(state: &AppState, sid: &str) -> ApiResult<SharedSession> {
    state.store.get(sid).ok_or_else(|| ApiError::no_session(sid))
}

/// Runs a blocking mutation (it fsyncs) off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    protocol_version: Option<u32>,
    per_tuple: Option<usize>,
    seed: Option<u64>,
}

async fn create(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateRequest = parse_body(&body)?;
    if let Some(v) = req.protocol_version {
        if v != PROTOCOL_VERSION {
            return Err(ApiError::bad_request(format!(
                "protocol version {v} not supported; server speaks {PROTOCOL_VERSION}"
            )));
        }
    }
    let per_tuple = req.per_tuple.unwrap_or(DEFAULT_PER_TUPLE);
    let t = Arc::clone(&state.template);
    let session = Session::new(Arc::clone(&t.design), t.gold.clone(), per_tuple, req.seed.unwrap_or(0), t.gate)?;
    let (tuples, emotion) = (t.design.n_tuples(), t.emotion);
    let sid = blocking(move || Ok(state.store.create(session, t.texts.clone(), t.emotion)?)).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session_id": sid,
            "protocol_version": PROTOCOL_VERSION,
            "emotion": emotion,
            "tuples": tuples,
            "per_tuple": per_tuple,
        })),
    ))
}

async fn list(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "sessions": state.store.ids(), "protocol_version": PROTOCOL_VERSION }))
}

async fn next(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let annotator = query
        .get("annotator")
        .filter(|a| !a.trim().is_empty())
        .cloned()
        .ok_or_else(|| ApiError::bad_request("missing annotator query parameter"))?;
    let shared = session(&state, &sid)?;
    blocking(move || {
        let mut hosted = shared.write().expect("session lock");
        let Some(q) = hosted.next_question(&annotator)? else {
            return Ok(Json(json!({ "status": "complete", "session_id": sid, "annotator": annotator })));
        };
        let (most, least) = prompts(hosted.emotion);
        let speakers: Vec<Value> = q
            .item_ids
            .iter()
            .enumerate()
            .map(|(i, id)| json!({ "number": i + 1, "item_id": id, "text": hosted.text(id) }))
            .collect();
        Ok(Json(json!({
            "status": "question",
            "session_id": sid,
            "annotator": annotator,
            "tuple_index": q.tuple_index,
            "prompt_most": most,
            "prompt_least": least,
            "speakers": speakers,
        })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitRequest {
    annotator: String,
    tuple_index: usize,
    best: String,
    worst: String,
}

async fn respond(State(state): State<AppState>, Path(sid): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let shared = session(&state, &sid)?;
    let req: SubmitRequest = parse_body(&body)?;
    if req.best == req.worst {
        return Err(ApiError::bad_request("best and worst must be different items"));
    }
    blocking(move || {
        let mut hosted = shared.write().expect("session lock");
        if hosted.session.annotator(&req.annotator).is_none() {
            return Err(AnnotationError::UnknownAnnotator(req.annotator).into());
        }
        let outcome = hosted.submit(&req.annotator, req.tuple_index, &req.best, &req.worst)?;
        let mut body = serde_json::to_value(outcome).expect("outcome serializes");
        if let SubmitOutcome::RejectedAnnotator { accuracy } = outcome {
            body["message"] = json!(gate_explanation(accuracy, hosted.session.gate().threshold));
        }
        body["progress"] = serde_json::to_value(hosted.session.progress()).expect("progress serializes");
        Ok(Json(body))
    })
    .await
}

async fn progress(State(state): State<AppState>, Path(sid): Path<String>) -> ApiResult<Json<Value>> {
    let shared = session(&state, &sid)?;
    let hosted = shared.read().expect("session lock");
    let mut body = serde_json::to_value(hosted.session.progress()).expect("progress serializes");
    body["session_id"] = json!(sid);
    body["complete"] = json!(hosted.session.is_complete());
    Ok(Json(body))
}

async fn export(State(state): State<AppState>, Path(sid): Path<String>) -> ApiResult<Response> {
    let shared = session(&state, &sid)?;
    let tsv = shared.read().expect("session lock").session.response_set().to_tsv();
    Ok(([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], tsv).into_response())
}

//! HTTP session service. Each session sits behind its own lock, so requests
//! for one session run in arrival order while sessions proceed
//! independently.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::{Mutex, RwLock};

use qasp_core::session::{Session, SessionError, DEFAULT_CAP};

use crate::wire::{
    CreateSession, ErrorBody, ErrorResponse, QueryResponse, SessionResponse, SubmitQuery, TranscriptResponse,
};

type Shared = Arc<Mutex<Session>>;

pub struct AppState {
    sessions: RwLock<BTreeMap<String, Shared>>,
    next_id: AtomicU64,
    defaults: Option<(String, String)>,
    cap: usize,
}

impl AppState {
    /// `defaults` holds the encoding and setup texts used when a create
    /// request leaves them out.
    pub fn new(defaults: Option<(String, String)>, cap: usize) -> Arc<Self> {
        Arc::new(AppState {
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            defaults,
            cap,
        })
    }
}

impl Default for AppState {
    fn default() -> Self {
        AppState {
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            defaults: None,
            cap: DEFAULT_CAP,
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/queries", post(submit_query))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/stop", post(stop_session))
        .with_state(state)
}

pub async fn serve(bind: &str, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn error(status: StatusCode, step: Option<i64>, body: ErrorBody) -> Response {
    (status, Json(ErrorResponse { step, error: body })).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, None, ErrorBody::plain(format!("unknown session {id}")))
}

async fn lookup(state: &AppState, id: &str) -> Option<Shared> {
    state.sessions.read().await.get(id).cloned()
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> Response {
    let defaults = state.defaults.as_ref();
    let (Some(encoding), Some(setup)) = (
        req.encoding.or_else(|| defaults.map(|d| d.0.clone())),
        req.setup.or_else(|| defaults.map(|d| d.1.clone())),
    ) else {
        return error(
            StatusCode::BAD_REQUEST,
            None,
            ErrorBody::plain("encoding and setup texts are required"),
        );
    };
    let cap = req.cap.unwrap_or(state.cap);
    let opened = tokio::task::spawn_blocking(move || Session::open(&encoding, &setup).map(|s| s.with_cap(cap))).await;
    let session = match opened {
        Ok(Ok(session)) => session,
        Ok(Err(e)) => return error(StatusCode::UNPROCESSABLE_ENTITY, None, ErrorBody::from(&e)),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, None, ErrorBody::plain(e.to_string())),
    };
    let id = state.next_id.fetch_add(1, Ordering::Relaxed).to_string();
    let body = SessionResponse::new(&id, &session.state());
    state.sessions.write().await.insert(id, Arc::new(Mutex::new(session)));
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match lookup(&state, &id).await {
        Some(session) => Json(SessionResponse::new(&id, &session.lock().await.state())).into_response(),
        None => not_found(&id),
    }
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let removed = state.sessions.write().await.remove(&id);
    match removed {
        Some(session) => {
            let mut session = session.lock().await;
            session.stop();
            Json(SessionResponse::new(&id, &session.state())).into_response()
        }
        None => not_found(&id),
    }
}

async fn submit_query(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SubmitQuery>,
) -> Response {
    let Some(session) = lookup(&state, &id).await else {
        return not_found(&id);
    };
    let guard = session.lock_owned().await;
    let outcome = tokio::task::spawn_blocking(move || {
        let mut session = guard;
        let result = session.run_query_text(&req.query, req.cap);
        let labels: Vec<String> = session.active_labels().iter().map(ToString::to_string).collect();
        (result, session.q(), labels)
    })
    .await;
    match outcome {
        Ok((Ok(result), _, _)) => Json(QueryResponse::from_result(&result)).into_response(),
        Ok((Err(e), q, labels)) => {
            let status = if e == SessionError::Stopped {
                StatusCode::CONFLICT
            } else {
                StatusCode::UNPROCESSABLE_ENTITY
            };
            (status, Json(QueryResponse::failure(q, labels, ErrorBody::from(&e)))).into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, None, ErrorBody::plain(e.to_string())),
    }
}

async fn get_transcript(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match lookup(&state, &id).await {
        Some(session) => {
            let session = session.lock().await;
            Json(TranscriptResponse {
                id,
                step: session.q(),
                transcript: session.transcript(),
            })
            .into_response()
        }
        None => not_found(&id),
    }
}

async fn stop_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match lookup(&state, &id).await {
        Some(session) => {
            let mut session = session.lock().await;
            session.stop();
            Json(SessionResponse::new(&id, &session.state())).into_response()
        }
        None => not_found(&id),
    }
}

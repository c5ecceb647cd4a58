//! HTTP service running interactive optimization sessions for a human decision-maker.
//!
//! Every mutation is persisted before it is acknowledged, so a restarted
//! service resumes each session at the same pending query.

pub mod api;
pub mod error;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use tower_http::services::ServeDir;

pub use api::{
    parse_create_request, parse_response_body, CreateSessionRequest, QueryStatus, QueryView,
    ResponseBody, SessionSummary, StateView,
};
pub use error::{Result, ServiceError};
pub use session::{parse_session_document, Session};
pub use store::Store;

const PLACEHOLDER_INDEX: &str = include_str!("../assets/index.html");

type Shared = Arc<RwLock<Session>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Shared>>>,
    store: Store,
}

impl AppState {
    /// Loads the sessions found in `store`, returning the documents that were skipped.
    pub fn open(store: Store) -> Result<(Self, Vec<store::Skipped>)> {
        let (loaded, skipped) = store.load_all()?;
        let sessions = loaded
            .into_iter()
            .map(|s| (s.id.clone(), Arc::new(RwLock::new(s))))
            .collect();
        Ok((
            AppState {
                sessions: Arc::new(RwLock::new(sessions)),
                store,
            },
            skipped,
        ))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().map(|m| m.len()).unwrap_or(0)
    }

    fn find(&self, id: &str) -> Result<Shared> {
        self.sessions
            .read()
            .map_err(|_| poisoned())?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }
}

fn poisoned() -> ServiceError {
    ServiceError::Internal("session lock poisoned".into())
}

async fn blocking<T, F>(f: F) -> Result<T>
where
    F: FnOnce() -> Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

/// Routes of the API, with static files from `assets` (or a placeholder page) at `/`.
pub fn router(state: AppState, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/query", get(get_query))
        .route("/sessions/{id}/response", post(post_response))
        .route("/sessions/{id}/state", get(get_state))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    }
}

/// Serves `app` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn healthz() -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse> {
    let (config, names, units) = parse_create_request(&body)?.into_config()?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let store = state.store.clone();
    let session = blocking(move || {
        let s = Session::create(id, config, names, units)?;
        store.save(&s)?;
        Ok(s)
    })
    .await?;
    let view = QueryView::of(&session);
    state
        .sessions
        .write()
        .map_err(|_| poisoned())?
        .insert(session.id.clone(), Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(state): State<AppState>) -> Result<Json<Vec<SessionSummary>>> {
    let all: Vec<Shared> = state
        .sessions
        .read()
        .map_err(|_| poisoned())?
        .values()
        .cloned()
        .collect();
    let mut out = all
        .iter()
        .map(|s| {
            s.read()
                .map(|s| SessionSummary::of(&s))
                .map_err(|_| poisoned())
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    Ok(Json(out))
}

async fn get_query(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<QueryView>> {
    let shared = state.find(&id)?;
    let view = QueryView::of(&*shared.read().map_err(|_| poisoned())?);
    Ok(Json(view))
}

async fn post_response(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<QueryView>> {
    let body = parse_response_body(&body)?;
    let shared = state.find(&id)?;
    let store = state.store.clone();
    let view = blocking(move || {
        // one mutation at a time; a concurrent post loses instead of queueing
        let mut guard = shared.try_write().map_err(|e| match e {
            std::sync::TryLockError::WouldBlock => ServiceError::Conflict(
                "another response for this session is being processed".into(),
            ),
            std::sync::TryLockError::Poisoned(_) => poisoned(),
        })?;
        let next = guard.answered(body.response(), body.iteration)?;
        store.save(&next)?;
        *guard = next;
        Ok(QueryView::of(&guard))
    })
    .await?;
    Ok(Json(view))
}

async fn get_state(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StateView>> {
    let shared = state.find(&id)?;
    let view = blocking(move || StateView::of(&*shared.read().map_err(|_| poisoned())?)).await?;
    Ok(Json(view))
}

//! Local HTTP API for an ABX session, plus static hosting of the listening UI.

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::abx::{Choice, Session, SessionError, Stimulus, DEFAULT_LISTENER};

pub type SharedSession = Arc<Mutex<Session>>;

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<title>UPB ABX</title>\n<p>No UI directory configured. \
The API is available under <code>/api/session</code>, <code>/api/response</code> and <code>/api/tally</code>.</p>\n";

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::UnknownTrial(_) => StatusCode::NOT_FOUND,
            SessionError::SessionNotFetched(_)
            | SessionError::DuplicateResponse { .. }
            | SessionError::Incomplete(_) => StatusCode::CONFLICT,
            SessionError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

#[derive(Debug, Deserialize)]
pub struct ListenerQuery {
    listener: Option<String>,
}

impl ListenerQuery {
    fn name(self) -> String {
        self.listener.unwrap_or_else(|| DEFAULT_LISTENER.to_string())
    }
}

#[derive(Debug, Deserialize)]
pub struct ResponseBody {
    trial_id: String,
    choice: Choice,
    listener: Option<String>,
}

fn lock(s: &SharedSession) -> std::sync::MutexGuard<'_, Session> {
    // A panicked handler cannot leave the store half-written: appends are
    // done before the in-memory push.
    s.lock().unwrap_or_else(|p| p.into_inner())
}

async fn get_session(State(s): State<SharedSession>, Query(q): Query<ListenerQuery>) -> impl IntoResponse {
    Json(lock(&s).view(&q.name()))
}

async fn post_response(
    State(s): State<SharedSession>,
    Json(body): Json<ResponseBody>,
) -> Result<impl IntoResponse, ApiError> {
    let listener = body.listener.unwrap_or_else(|| DEFAULT_LISTENER.to_string());
    let ack = lock(&s).respond(&listener, &body.trial_id, body.choice)?;
    Ok((StatusCode::CREATED, Json(ack)))
}

async fn get_tally(State(s): State<SharedSession>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(lock(&s).tally()?))
}

async fn get_audio(
    State(s): State<SharedSession>,
    Path((trial, which)): Path<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no stimulus {trial}/{which}"));
    let stimulus = Stimulus::parse(&which).ok_or_else(not_found)?;
    let path = {
        let session = lock(&s);
        session.trial(&trial).ok_or_else(not_found)?;
        session.dir().join("trials").join(&trial).join(stimulus.file_name())
    };
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes))
}

pub fn router(session: SharedSession, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", get(get_session))
        .route("/api/response", post(post_response))
        .route("/api/tally", get(get_tally))
        .route("/audio/{trial}/{which}", get(get_audio))
        .with_state(session);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    }
}

/// Binds `host:port` and serves until Ctrl-C.
pub async fn serve(session: Session, host: IpAddr, port: u16, ui_dir: Option<PathBuf>) -> Result<()> {
    let addr = SocketAddr::new(host, port);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            anyhow::anyhow!("port {port} is busy on {host}")
        } else {
            anyhow::Error::new(e).context(format!("binding {addr}"))
        }
    })?;
    log::info!("serving {} on http://{}", session.dir().display(), listener.local_addr()?);
    let app = router(Arc::new(Mutex::new(session)), ui_dir);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server error")
}

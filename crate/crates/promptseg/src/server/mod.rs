//! HTTP prompt-session server.

mod session;

pub use session::{PromptApplied, SessionEntry, SessionError, SessionState, SessionTable, TableFull, Token, Upload};

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use promptseg_core::{Radius, ReferenceSegmenter, SegmenterBackend, SegmenterParams};
use tokio::sync::oneshot;

use crate::wire::{
    ErrorBody, Health, PromptRequest, ResetAck, SessionCreated, UploadAck, HEADER_CHANGED_VOXELS,
    HEADER_MASK_DIGEST, HEADER_REVISION, OCTET_STREAM,
};

pub const DEFAULT_PORT: u16 = 1527;
pub const DEFAULT_MAX_VOXELS: u64 = 1 << 28;
pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);
pub const DEFAULT_MAX_SESSIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub max_voxels: u64,
    pub session_ttl: Duration,
    pub max_sessions: usize,
    pub params: SegmenterParams,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            max_voxels: DEFAULT_MAX_VOXELS,
            session_ttl: DEFAULT_TTL,
            max_sessions: DEFAULT_MAX_SESSIONS,
            params: SegmenterParams::default(),
        }
    }
}

impl ServerConfig {
    /// Loopback, ephemeral port; for tests.
    pub fn ephemeral() -> Self {
        ServerConfig { port: 0, ..Self::default() }
    }

    pub fn with_params(mut self, tolerance: f64, radius: Radius) -> Self {
        self.params = SegmenterParams::new(tolerance, radius).expect("valid segmenter params");
        self
    }
}

pub type Backend = Arc<dyn SegmenterBackend + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    pub sessions: Arc<SessionTable>,
    pub backend: Backend,
    pub max_voxels: u64,
}

impl AppState {
    pub fn new(config: &ServerConfig, backend: Backend) -> Self {
        AppState {
            sessions: Arc::new(SessionTable::new(config.max_sessions, config.session_ttl)),
            backend,
            max_voxels: config.max_voxels,
        }
    }

    fn session(&self, token: &str) -> Result<Arc<SessionEntry>, ApiError> {
        Token::parse(token)
            .and_then(|t| self.sessions.get(&t, Instant::now()))
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", "no session with this token"))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { error: error.into(), message: message.into() } }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, name) = match &e {
            SessionError::NoImage => (StatusCode::CONFLICT, "NoImage"),
            SessionError::Svol(s) => (StatusCode::BAD_REQUEST, s.name()),
            SessionError::Rle(r) => (StatusCode::BAD_REQUEST, r.name()),
            SessionError::TooLarge { .. } => (StatusCode::PAYLOAD_TOO_LARGE, "TooLarge"),
            SessionError::DimsMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "DimsMismatch"),
            SessionError::StaleImage { .. } => (StatusCode::PRECONDITION_REQUIRED, "StaleImage"),
            SessionError::StaleMask { .. } => (StatusCode::PRECONDITION_REQUIRED, "StaleMask"),
            SessionError::Prompt(p) => (StatusCode::UNPROCESSABLE_ENTITY, p.name()),
        };
        ApiError::new(status, name, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs CPU-heavy work without stalling the async workers.
fn heavy<T>(f: impl FnOnce() -> T) -> T {
    tokio::task::block_in_place(f)
}

fn mask_response(rle: Vec<u8>, digest: promptseg_core::Digest, revision: u64, changed: Option<usize>) -> Response {
    let mut h = HeaderMap::new();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(OCTET_STREAM));
    h.insert(HEADER_MASK_DIGEST, HeaderValue::from_str(&digest.to_hex()).expect("hex is ascii"));
    h.insert(HEADER_REVISION, HeaderValue::from(revision));
    if let Some(c) = changed {
        h.insert(HEADER_CHANGED_VOXELS, HeaderValue::from(c as u64));
    }
    (StatusCode::OK, h, rle).into_response()
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into() })
}

async fn create_session(State(app): State<AppState>) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let token = app
        .sessions
        .create(Instant::now())
        .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "SessionTableFull", e.to_string()))?;
    tracing::debug!(%token, "session created");
    Ok((StatusCode::CREATED, Json(SessionCreated { token: token.to_string() })))
}

async fn get_status(State(app): State<AppState>, Path(token): Path<String>) -> ApiResult<Response> {
    let entry = app.session(&token)?;
    let status = entry.state.lock().await.status();
    Ok(Json(status).into_response())
}

async fn put_image(State(app): State<AppState>, Path(token): Path<String>, body: Bytes) -> ApiResult<Json<UploadAck>> {
    let entry = app.session(&token)?;
    let mut state = entry.state.lock().await;
    let up = heavy(|| state.put_image(&body, app.max_voxels))?;
    Ok(Json(UploadAck { digest: up.digest, mask_digest: up.mask_digest, revision: up.revision }))
}

async fn put_mask(State(app): State<AppState>, Path(token): Path<String>, body: Bytes) -> ApiResult<Json<UploadAck>> {
    let entry = app.session(&token)?;
    let mut state = entry.state.lock().await;
    let up = heavy(|| state.put_mask(&body))?;
    Ok(Json(UploadAck { digest: up.digest, mask_digest: up.mask_digest, revision: up.revision }))
}

async fn get_mask(State(app): State<AppState>, Path(token): Path<String>) -> ApiResult<Response> {
    let entry = app.session(&token)?;
    let state = entry.state.lock().await;
    let (rle, digest, revision) = heavy(|| state.mask_rle())?;
    Ok(mask_response(rle, digest, revision, None))
}

async fn post_prompt(State(app): State<AppState>, Path(token): Path<String>, body: Bytes) -> ApiResult<Response> {
    let entry = app.session(&token)?;
    let req: PromptRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()))?;
    let mut state = entry.state.lock().await;
    let out = heavy(|| {
        state.apply_prompt(app.backend.as_ref(), req.prompt, req.expected_image_digest, req.expected_mask_digest)
    })?;
    Ok(mask_response(out.rle, out.mask_digest, out.revision, Some(out.changed_voxels)))
}

async fn reset(State(app): State<AppState>, Path(token): Path<String>) -> ApiResult<Json<ResetAck>> {
    let entry = app.session(&token)?;
    let (revision, mask_digest) = entry.state.lock().await.reset()?;
    Ok(Json(ResetAck { revision, mask_digest }))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

pub fn router(app: AppState) -> Router {
    // large enough for the biggest admissible F32 volume plus JSON slack
    let limit = app.max_voxels.saturating_mul(4).saturating_add(30 + (1 << 20));
    let limit = usize::try_from(limit).unwrap_or(usize::MAX);
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/session", post(create_session))
        .route("/v1/session/{token}", get(get_status))
        .route("/v1/session/{token}/image", put(put_image))
        .route("/v1/session/{token}/mask", put(put_mask).get(get_mask))
        .route("/v1/session/{token}/prompt", post(post_prompt))
        .route("/v1/session/{token}/reset", post(reset))
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(app)
}

fn sweep_interval(ttl: Duration) -> Duration {
    (ttl / 4).clamp(Duration::from_millis(50), Duration::from_secs(60))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    config: ServerConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let backend: Backend = Arc::new(ReferenceSegmenter::new(config.params));
    let app = AppState::new(&config, backend);
    let sessions = app.sessions.clone();
    let sweeper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep_interval(sessions.ttl()));
        loop {
            tick.tick().await;
            let n = sessions.expire_sessions(Instant::now());
            if n > 0 {
                tracing::info!(expired = n, "expired idle sessions");
            }
        }
    });
    let result = axum::serve(listener, router(app)).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    result
}

/// A server running on its own runtime thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn spawn(config: ServerConfig) -> std::io::Result<Self> {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let listener = rt.block_on(tokio::net::TcpListener::bind((config.host.as_str(), config.port)))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name(format!("promptseg-server-{}", addr.port())).spawn(move || {
            rt.block_on(serve(listener, config, async {
                let _ = rx.await;
            }))
        })?;
        Ok(ServerHandle { addr, stop: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

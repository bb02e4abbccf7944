//! HTTP service exposing sessions as JSON resources plus a server-sent event stream.
//!
//! Mutations on one session run one at a time on the blocking pool. Reads of the
//! snapshot come from the last published value and never wait on a mutation.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use arc_swap::ArcSwap;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use provox_core::dsl::FunctionRecord;
use provox_core::planner::{BackendConfig, BackendKind};
use provox_core::session::{ContextFile, Mode, Session, SessionConfig, SessionError, SessionEvent, Snapshot};
use provox_core::sim::SceneSpec;
use provox_core::synthesis::{TeachExample, TeachForm};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::backend::build;

const EVENT_BUFFER: usize = 256;

/// Shared state behind the router.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    default_scene: SceneSpec,
    scene_dir: Option<PathBuf>,
    backend: BackendConfig,
    next_id: AtomicU64,
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
}

struct Handle {
    session: Mutex<Session>,
    snapshot: ArcSwap<Snapshot>,
    events: broadcast::Sender<SessionEvent>,
}

impl Handle {
    /// Publishes the new snapshot and any queued events after a mutation.
    fn publish(&self, session: &mut Session) {
        self.snapshot.store(Arc::new(session.snapshot()));
        for event in session.drain_events() {
            // No subscribers is fine.
            let _ = self.events.send(event);
        }
    }
}

impl AppState {
    /// `scene_dir`, when set, lets requests name scenes stored as `<dir>/<name>.json`.
    pub fn new(default_scene: SceneSpec, scene_dir: Option<PathBuf>, backend: BackendConfig) -> AppState {
        AppState {
            inner: Arc::new(Inner {
                default_scene,
                scene_dir,
                backend,
                next_id: AtomicU64::new(1),
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_snapshot))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/confirm", post(confirm))
        .route("/sessions/{id}/reject", post(reject))
        .route("/sessions/{id}/teach", post(teach))
        .route("/sessions/{id}/functions/{name}", put(edit_function).delete(delete_function))
        .route("/sessions/{id}/goal", put(set_goal))
        .route("/sessions/{id}/test-utterance", post(test_utterance))
        .route("/sessions/{id}/mode", post(set_mode))
        .route("/sessions/{id}/end", post(end_session))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Error body `{error, message}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> ApiError {
        ApiError { status, code: code.to_string(), message: message.to_string() }
    }

    fn invalid(message: impl ToString) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidRequest", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        let status = match e.code() {
            "WrongState" => StatusCode::CONFLICT,
            "BackendUnavailable" => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(bytes).map_err(ApiError::invalid)
}

fn to_value<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("responses serialize")
}

/// Runs `op` against the locked session on the blocking pool, then publishes.
async fn mutate<F>(state: &AppState, id: &str, op: F) -> ApiResult
where
    F: FnOnce(&mut Session) -> Result<Value, SessionError> + Send + 'static,
{
    let handle = state.handle(id)?;
    tokio::task::spawn_blocking(move || {
        let mut session = handle.session.lock().expect("session lock");
        let result = op(&mut session);
        handle.publish(&mut session);
        result.map(Json).map_err(ApiError::from)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e))?
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SceneField {
    Name(String),
    Inline(Box<SceneSpec>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BackendField {
    Kind(BackendKind),
    Config(Box<BackendConfig>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    scene: Option<SceneField>,
    #[serde(default)]
    mode: Mode,
    backend: Option<BackendField>,
    proactive: Option<bool>,
    context: Option<ContextFile>,
    auto_confirm_user_plans: Option<bool>,
    config: Option<SessionConfig>,
}

fn resolve_scene(state: &Inner, field: Option<SceneField>) -> Result<SceneSpec, ApiError> {
    match field {
        None => Ok(state.default_scene.clone()),
        Some(SceneField::Inline(scene)) => Ok(*scene),
        Some(SceneField::Name(name)) => {
            let dir = state.scene_dir.as_deref().ok_or_else(|| ApiError::invalid("this server only accepts inline scenes"))?;
            let valid = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !valid {
                return Err(ApiError::invalid(format!("invalid scene name `{name}`")));
            }
            load_named_scene(dir, &name)
        }
    }
}

fn load_named_scene(dir: &Path, name: &str) -> Result<SceneSpec, ApiError> {
    SceneSpec::load(dir.join(format!("{name}.json")))
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let scene = resolve_scene(&state.inner, req.scene)?;
    let backend = match req.backend {
        None => state.inner.backend.clone(),
        Some(BackendField::Kind(kind)) => BackendConfig { kind, ..state.inner.backend.clone() },
        Some(BackendField::Config(cfg)) => *cfg,
    };
    let mut config = req.config.unwrap_or_default();
    config.max_retries = backend.max_retries;
    if let Some(p) = req.proactive {
        config.proactive = p;
    }
    if let Some(a) = req.auto_confirm_user_plans {
        config.auto_confirm_user_plans = a;
    }
    let mode = req.mode;
    let context = req.context;
    // The remote client blocks, so it is built off the async workers.
    let session = tokio::task::spawn_blocking(move || -> Result<Session, ApiError> {
        let (planner, namer) = build(&backend).map_err(|e| {
            let status = if e.code() == "BackendUnavailable" { StatusCode::SERVICE_UNAVAILABLE } else { StatusCode::UNPROCESSABLE_ENTITY };
            ApiError::new(status, e.code(), e)
        })?;
        let session = match &context {
            Some(ctx) => Session::from_context(scene, ctx, mode, config, planner),
            None => Session::new(scene, mode, config, planner),
        }?;
        Ok(session.with_namer(namer).with_backend_config(backend))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e))??;

    let id = format!("s{}", state.inner.next_id.fetch_add(1, Ordering::Relaxed));
    let (events, _) = broadcast::channel(EVENT_BUFFER);
    let handle = Arc::new(Handle {
        snapshot: ArcSwap::from_pointee(session.snapshot()),
        session: Mutex::new(session),
        events,
    });
    state.inner.sessions.write().expect("session table lock").insert(id.clone(), handle);
    tracing::info!(session = %id, "created");
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn get_snapshot(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let handle = state.handle(&id)?;
    let snapshot = handle.snapshot.load_full();
    Ok(Json(to_value(&*snapshot)))
}

async fn metrics(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let handle = state.handle(&id)?;
    let snapshot = handle.snapshot.load_full();
    Ok(Json(to_value(&snapshot.metrics)))
}

async fn export(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let handle = state.handle(&id)?;
    let session = handle.session.lock().expect("session lock");
    Ok(Json(to_value(&session.export_context())))
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

async fn utterance(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let TextBody { text } = parse_body(&body)?;
    mutate(&state, &id, move |s| s.handle_utterance(&text).map(|r| to_value(&r))).await
}

async fn confirm(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    mutate(&state, &id, |s| s.confirm().map(|r| to_value(&r))).await
}

async fn reject(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    mutate(&state, &id, |s| s.reject().map(|r| to_value(&r))).await
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum TeachBody {
    Form(TeachForm),
    Example(TeachExample),
}

async fn teach(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let teach: TeachBody = parse_body(&body)?;
    mutate(&state, &id, move |s| {
        let def = match &teach {
            TeachBody::Form(form) => s.meta_teach(form)?,
            TeachBody::Example(example) => s.teach_live(example)?,
        };
        Ok(to_value(&FunctionRecord::from(&def)))
    })
    .await
}

async fn edit_function(
    State(state): State<AppState>,
    UrlPath((id, name)): UrlPath<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let form: TeachForm = match parse_body::<Value>(&body)? {
        Value::Object(mut map) if map.contains_key("form") => {
            serde_json::from_value(map.remove("form").unwrap_or_default()).map_err(ApiError::invalid)?
        }
        other => serde_json::from_value(other).map_err(ApiError::invalid)?,
    };
    mutate(&state, &id, move |s| s.meta_edit(&name, &form).map(|d| to_value(&FunctionRecord::from(&d)))).await
}

async fn delete_function(State(state): State<AppState>, UrlPath((id, name)): UrlPath<(String, String)>) -> ApiResult {
    mutate(&state, &id, move |s| s.meta_delete(&name).map(|_| json!({ "deleted": name }))).await
}

async fn set_goal(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let TextBody { text } = parse_body(&body)?;
    mutate(&state, &id, move |s| s.meta_set_goal(&text).map(|_| json!({ "goal": text }))).await
}

async fn test_utterance(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let TextBody { text } = parse_body(&body)?;
    mutate(&state, &id, move |s| s.meta_test_utterance(&text).map(|o| to_value(&o))).await
}

#[derive(Deserialize)]
struct ModeBody {
    live: bool,
}

async fn set_mode(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let ModeBody { live } = parse_body(&body)?;
    if !live {
        return Err(ApiError::invalid("sessions cannot return to meta-prompting mode"));
    }
    mutate(&state, &id, |s| s.go_live().map(|_| json!({ "mode": s.mode() }))).await
}

async fn end_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    mutate(&state, &id, |s| s.end().map(|_| to_value(&s.metrics()))).await
}

/// Server push: the current state first, then every event as `{type, payload}`.
async fn events(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let handle = state.handle(&id)?;
    let rx = handle.events.subscribe();
    let snapshot = handle.snapshot.load_full();
    let first = SessionEvent {
        kind: provox_core::session::EventType::StateChanged,
        payload: json!({ "state": snapshot.state, "mode": snapshot.mode }),
    };
    let live = BroadcastStream::new(rx).filter_map(|item| match item {
        Ok(event) => Some(event),
        Err(lag) => {
            tracing::warn!(%lag, "event subscriber fell behind");
            None
        }
    });
    let stream = tokio_stream::once(first).chain(live).map(|event| Ok(sse_event(&event)));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

fn sse_event(event: &SessionEvent) -> Event {
    let name = to_value(&event.kind);
    let name = name.as_str().unwrap_or("message");
    Event::default().event(name).data(serde_json::to_string(event).expect("events serialize"))
}

//! HTTP front door over a simulated cluster that runs in step with the wall clock.
//!
//! One virtual tick is one millisecond since the gateway started. Requests that must wait on the
//! cluster (file transfers, session setup) run the simulation ahead of the wall clock until the
//! answer is in; virtual time never runs backwards.
//!
//! | Route | |
//! |---|---|
//! | `POST /sessions` | form or JSON `user_id`, `width`, `height`; returns the session id |
//! | `GET /sessions/{id}/stream` | websocket: binary input events up, binary updates down |
//! | `GET /sessions/{id}/digest` | host and client framebuffer digests |
//! | `DELETE /sessions/{id}` | closes the session |
//! | `PUT /files/{path}` | stores the body |
//! | `GET /files/{path}` | reads, honouring a single `Range: bytes=` range |
//! | `GET /cluster/telemetry` | one JSON object per node, keyed by gauge name |

use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use cumulus_core::dfs::{DfsError, Manifest};
use cumulus_core::gateway::GatewayError;
use cumulus_core::protocol::InputEvent;
use cumulus_core::render::SessionId;
use cumulus_core::sim::{SimConfig, SimWorld};
use cumulus_core::vmm::telemetry::TELEMETRY_KEYS;
use cumulus_core::vmm::{Health, NodeRole};
use cumulus_core::Tick;

mod range;

pub use range::{parse_range, RangeError};

/// Largest file body accepted by `PUT /files`.
pub const MAX_FILE_BYTES: usize = 256 << 20;

/// Longest a request may run the simulation ahead while waiting for its answer.
const MAX_WAIT_TICKS: Tick = 3_600_000;

/// How often a stream checks for new updates.
const STREAM_POLL: Duration = Duration::from_millis(10);

/// The simulated world plus the wall-clock anchor for its virtual time.
pub struct Cluster {
    world: SimWorld,
    started: Instant,
}

impl Cluster {
    pub fn new(mut world: SimWorld) -> Self {
        world.set_capture(true);
        Self {
            world,
            started: Instant::now(),
        }
    }

    /// Brings virtual time up to the wall clock.
    pub fn advance(&mut self) {
        let wall = self.started.elapsed().as_millis() as Tick;
        if wall > self.world.now() {
            self.world.run_until(wall);
        }
    }

    /// Runs ahead of the wall clock until `done` yields.
    fn drive<T>(&mut self, mut done: impl FnMut(&mut SimWorld) -> Option<T>) -> Option<T> {
        let deadline = self.world.now() + MAX_WAIT_TICKS;
        loop {
            if let Some(v) = done(&mut self.world) {
                return Some(v);
            }
            if self.world.now() >= deadline {
                return None;
            }
            let next = self.world.now() + 5;
            self.world.run_until(next);
        }
    }

    pub fn world(&self) -> &SimWorld {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut SimWorld {
        &mut self.world
    }
}

#[derive(Clone)]
pub struct AppState(Arc<Mutex<Cluster>>);

impl AppState {
    pub fn new(cluster: Cluster) -> Self {
        Self(Arc::new(Mutex::new(cluster)))
    }

    /// Locks the cluster with virtual time caught up.
    pub fn lock(&self) -> MutexGuard<'_, Cluster> {
        let mut c = self.0.lock().unwrap_or_else(|p| p.into_inner());
        c.advance();
        c
    }
}

/// A world suited to serving: reads are not double-checked against a copy of every file.
pub fn serving_config(mut config: SimConfig) -> SimConfig {
    config.verify_reads = false;
    config.max_ticks = Tick::MAX;
    config
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", axum::routing::delete(close_session))
        .route("/sessions/{id}/stream", get(stream))
        .route("/sessions/{id}/digest", get(digest))
        .route("/files/{*path}", put(put_file).get(get_file))
        .route("/cluster/telemetry", get(telemetry))
        .layer(DefaultBodyLimit::max(MAX_FILE_BYTES))
        .with_state(state)
}

fn error(status: u16, message: impl Into<String>) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn gateway_error(e: GatewayError) -> Response {
    error(e.status(), e.to_string())
}

fn session_id(raw: &str) -> Result<SessionId, Response> {
    raw.parse()
        .map_err(|_| error(400, format!("bad session id {raw:?}")))
}

#[derive(Debug, Deserialize)]
struct OpenBody {
    user_id: String,
    width: Option<usize>,
    height: Option<usize>,
}

fn parse_open(headers: &HeaderMap, body: &[u8]) -> Result<OpenBody, String> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    if is_json {
        return serde_json::from_slice(body).map_err(|e| e.to_string());
    }
    let mut open = OpenBody {
        user_id: String::new(),
        width: None,
        height: None,
    };
    for (k, v) in form_urlencoded::parse(body) {
        let number = || {
            v.parse::<usize>()
                .map_err(|_| format!("{k} must be a number"))
        };
        match k.as_ref() {
            "user_id" => open.user_id = v.into_owned(),
            "width" => open.width = Some(number()?),
            "height" => open.height = Some(number()?),
            _ => {}
        }
    }
    Ok(open)
}

async fn open_session(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    let open = match parse_open(&headers, &body) {
        Ok(o) if !o.user_id.is_empty() => o,
        Ok(_) => return error(400, "user_id is required"),
        Err(e) => return error(400, e),
    };
    let mut c = app.lock();
    let config = c.world.config();
    let geometry = (
        open.width.unwrap_or(config.width),
        open.height.unwrap_or(config.height),
    );
    let tile = config.tile_size;
    match c.world.open_session(&open.user_id, geometry) {
        Ok(id) => {
            let host = c.world.router().get(id).map(|s| s.host).ok();
            let host = host
                .and_then(|h| c.world.label(h))
                .unwrap_or("")
                .to_string();
            let body = json!({
                "session_id": id.to_string(),
                "width": geometry.0,
                "height": geometry.1,
                "tile_size": tile,
                "host": host,
            });
            (StatusCode::CREATED, Json(body)).into_response()
        }
        Err(e) => gateway_error(e),
    }
}

async fn close_session(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let id = match session_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    match app.lock().world.close_session(id) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => gateway_error(e),
    }
}

async fn digest(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    let id = match session_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    let c = app.lock();
    if c.world.router().get(id).is_err() {
        return gateway_error(GatewayError::UnknownSession(id));
    }
    let hex = |d: Option<cumulus_core::Digest>| d.map(|d| d.to_hex());
    Json(json!({
        "host": hex(c.world.host_frame_digest(id)),
        "client": hex(c.world.client_frame_digest(id)),
    }))
    .into_response()
}

async fn stream(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Response {
    let id = match session_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    {
        let mut c = app.lock();
        if c.world.router().get(id).is_err() {
            return gateway_error(GatewayError::UnknownSession(id));
        }
        // Whatever queued up before this subscriber is stale; it starts from a full frame.
        c.world.take_updates(id);
        if let Err(e) = c.world.resync(id) {
            return gateway_error(e);
        }
    }
    ws.on_upgrade(move |socket| run_stream(app, id, socket))
}

async fn run_stream(app: AppState, id: SessionId, mut socket: WebSocket) {
    let mut poll = tokio::time::interval(STREAM_POLL);
    loop {
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Binary(bytes))) => {
                    let result = InputEvent::decode(&bytes)
                        .map_err(GatewayError::from)
                        .and_then(|e| app.lock().world.submit_event(id, e));
                    if let Err(e) = result {
                        let text = json!({ "error": e.to_string(), "status": e.status() }).to_string();
                        if socket.send(Message::Text(text.into())).await.is_err() {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            _ = poll.tick() => {
                let (updates, open) = {
                    let mut c = app.lock();
                    (c.world.take_updates(id), c.world.router().get(id).is_ok())
                };
                for u in updates {
                    if socket.send(Message::Binary(u)).await.is_err() {
                        return;
                    }
                }
                if !open {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            }
        }
    }
}

fn manifest_json(m: &Manifest) -> Value {
    json!({
        "path": m.path,
        "total_length": m.total_length,
        "block_size": m.block_size,
        "blocks": m.blocks.iter().map(|b| json!({
            "digest": b.digest.to_hex(),
            "size": b.size,
            "replicas": b.replicas.iter().map(|n| n.0).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

fn dfs_error(e: &DfsError) -> Response {
    gateway_error(GatewayError::Dfs(e.clone()))
}

async fn put_file(State(app): State<AppState>, Path(path): Path<String>, body: Bytes) -> Response {
    let mut c = app.lock();
    let req = c.world.put_file(&path, body);
    match c.drive(|w| w.take_put_result(req)) {
        Some(Ok(m)) => (StatusCode::CREATED, Json(manifest_json(&m))).into_response(),
        Some(Err(e)) => dfs_error(&e),
        None => error(504, "store did not answer"),
    }
}

async fn get_file(
    State(app): State<AppState>,
    Path(path): Path<String>,
    headers: HeaderMap,
) -> Response {
    let mut c = app.lock();
    let Some(total) = c.world.dfs().manifest(&path).map(|m| m.total_length) else {
        return dfs_error(&DfsError::NotFound(path));
    };
    let range = match headers.get(header::RANGE).map(|v| v.to_str()) {
        None => None,
        Some(Ok(text)) => match parse_range(text, total) {
            Ok(r) => Some(r),
            Err(RangeError::Unsatisfiable) => {
                let mut r = error(416, format!("range {text:?} is outside 0..{total}"));
                r.headers_mut().insert(
                    header::CONTENT_RANGE,
                    format!("bytes */{total}").parse().unwrap(),
                );
                return r;
            }
            Err(RangeError::Malformed) => None,
        },
        Some(Err(_)) => None,
    };
    let (offset, length) = range.unwrap_or((0, total));
    let req = c.world.get_file(&path, Some((offset, length)));
    match c.drive(|w| w.take_get_result(req)) {
        Some(Ok(data)) => {
            let mut headers = HeaderMap::new();
            headers.insert(
                header::CONTENT_TYPE,
                "application/octet-stream".parse().unwrap(),
            );
            headers.insert(header::ACCEPT_RANGES, "bytes".parse().unwrap());
            if range.is_some() {
                let last = (offset + length).saturating_sub(1);
                headers.insert(
                    header::CONTENT_RANGE,
                    format!("bytes {offset}-{last}/{total}").parse().unwrap(),
                );
                (StatusCode::PARTIAL_CONTENT, headers, data).into_response()
            } else {
                (StatusCode::OK, headers, data).into_response()
            }
        }
        Some(Err(e)) => dfs_error(&e),
        None => error(504, "store did not answer"),
    }
}

async fn telemetry(State(app): State<AppState>) -> Response {
    let c = app.lock();
    let w = &c.world;
    let nodes: Vec<Value> = w
        .telemetry()
        .into_iter()
        .map(|t| {
            let mut obj = Map::new();
            obj.insert("node".into(), json!(t.node_id.0));
            obj.insert("label".into(), json!(w.label(t.node_id)));
            if let Some(n) = w.manager().node(t.node_id) {
                let role = match n.role {
                    NodeRole::Render => "render",
                    NodeRole::Storage => "storage",
                };
                let health = match n.health {
                    Health::Alive => "alive",
                    Health::Suspect => "suspect",
                    Health::Failed => "failed",
                };
                obj.insert("role".into(), json!(role));
                obj.insert("health".into(), json!(health));
            }
            obj.insert("poll_time".into(), json!(t.poll_time));
            for key in TELEMETRY_KEYS {
                obj.insert(key.into(), json!(t.gauge(key).unwrap_or(0)));
            }
            Value::Object(obj)
        })
        .collect();
    Json(nodes).into_response()
}

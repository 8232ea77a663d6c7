use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use depthtouch_core::io::encode_mhdf;
use depthtouch_core::{RenderParams, RoiSelection, Vec3};
use serde::{Deserialize, Serialize};

use crate::assets::{AssetInfo, AssetStore};
use crate::protocol::{ClientMsg, ErrorCode, ServerMsg, Snapshot};
use crate::session::{Command, CommandError, Session, SessionConfig};

pub struct AppState {
    assets: AssetStore,
    sessions: Mutex<HashMap<u64, Arc<Session>>>,
    next_id: AtomicU64,
    config: SessionConfig,
}

impl AppState {
    pub fn new(assets: AssetStore, config: SessionConfig) -> Arc<Self> {
        Arc::new(Self { assets, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1), config })
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<u64, Arc<Session>>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// A live session, or the error response explaining why not.
    #[allow(clippy::result_large_err)]
    fn session(&self, id: u64) -> Result<Arc<Session>, Response> {
        match self.sessions().get(&id) {
            Some(s) if s.is_live() => Ok(s.clone()),
            Some(_) => Err(gone(id)),
            None if id > 0 && id < self.next_id.load(Ordering::Acquire) => Err(gone(id)),
            None => Err(error(StatusCode::NOT_FOUND, ErrorCode::NotFound, format!("no session {id}"))),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/assets", get(list_assets))
        .route("/assets/{id}/levels/{level}/grid", get(level_grid))
        .route("/sessions", axum::routing::post(open_session))
        .route("/sessions/{id}", get(session_snapshot).delete(close_session))
        .route("/sessions/{id}/ws", get(session_ws))
        .with_state(state)
}

fn error(status: StatusCode, code: ErrorCode, message: String) -> Response {
    (status, Json(ServerMsg::Error { code, message, cmd_id: None })).into_response()
}

fn gone(id: u64) -> Response {
    error(StatusCode::GONE, ErrorCode::Gone, format!("session {id} has ended"))
}

async fn list_assets(State(app): State<Arc<AppState>>) -> Json<Vec<AssetInfo>> {
    Json(app.assets.list())
}

async fn level_grid(State(app): State<Arc<AppState>>, Path((id, level)): Path<(String, usize)>) -> Response {
    let Some(asset) = app.assets.get(&id) else {
        return error(StatusCode::NOT_FOUND, ErrorCode::NotFound, format!("no asset {id:?}"));
    };
    let Some(field) = asset.pyramid.level(level) else {
        let msg = format!("asset {id:?} has levels 0..{}", asset.pyramid.len() - 1);
        return error(StatusCode::NOT_FOUND, ErrorCode::NotFound, msg);
    };
    ([(header::CONTENT_TYPE, "application/octet-stream")], encode_mhdf(field)).into_response()
}

/// Parameter overrides; anything omitted keeps the engine default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsIn {
    stiffness_k: Option<f64>,
    delta_n: Option<f64>,
    eps_surface: Option<f64>,
    eps_converge: Option<f64>,
    max_iters: Option<u32>,
    tick_budget_us: Option<u64>,
}

impl ParamsIn {
    fn resolve(&self) -> RenderParams<f64> {
        let d = RenderParams::default();
        RenderParams {
            stiffness_k: self.stiffness_k.unwrap_or(d.stiffness_k),
            delta_n: self.delta_n.unwrap_or(d.delta_n),
            eps_surface: self.eps_surface.unwrap_or(d.eps_surface),
            eps_converge: self.eps_converge.unwrap_or(d.eps_converge),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tick_budget: self.tick_budget_us.map(Duration::from_micros).unwrap_or(d.tick_budget),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenRequest {
    asset: String,
    #[serde(default)]
    params: ParamsIn,
    roi: Option<RoiSelection>,
}

#[derive(Debug, Serialize)]
struct Opened {
    session_id: u64,
    asset: String,
    ws: String,
    snapshot: Snapshot,
}

async fn open_session(State(app): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: OpenRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, ErrorCode::BadRequest, e.to_string()),
    };
    let Some(asset) = app.assets.get(&req.asset) else {
        return error(StatusCode::NOT_FOUND, ErrorCode::NotFound, format!("no asset {:?}", req.asset));
    };
    let params = req.params.resolve();
    if let Err(e) = params.validate() {
        return error(StatusCode::BAD_REQUEST, ErrorCode::InvalidParams, e.to_string());
    }
    let roi = req.roi.unwrap_or_else(|| asset.default_roi());
    let id = app.next_id.fetch_add(1, Ordering::AcqRel);
    let session = match Session::spawn(id, &asset, roi, params, app.config) {
        Ok(s) => Arc::new(s),
        Err(e @ depthtouch_core::Error::Selection(_)) => {
            return error(StatusCode::BAD_REQUEST, ErrorCode::InvalidRoi, e.to_string())
        }
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::BadRequest, e.to_string()),
    };
    let snapshot = session.latest();
    app.sessions().insert(id, session);
    let body = Opened { session_id: id, asset: asset.id.clone(), ws: format!("/sessions/{id}/ws"), snapshot };
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn session_snapshot(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match app.session(id) {
        Ok(s) => Json(ServerMsg::Snapshot(s.latest())).into_response(),
        Err(r) => r,
    }
}

async fn close_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let s = match app.session(id) {
        Ok(s) => s,
        Err(r) => return r,
    };
    tokio::task::spawn_blocking(move || s.close()).await.ok();
    StatusCode::NO_CONTENT.into_response()
}

/// Session errors take precedence over a missing upgrade handshake.
async fn session_ws(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    upgrade: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Response {
    match (app.session(id), upgrade) {
        (Err(r), _) => r,
        (Ok(_), Err(rejection)) => rejection.into_response(),
        (Ok(s), Ok(upgrade)) => upgrade.on_upgrade(move |socket| client_loop(socket, s)),
    }
}

async fn send(socket: &mut WebSocket, msg: &ServerMsg) -> bool {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

fn to_command(msg: &ClientMsg) -> Result<Command, (ErrorCode, String)> {
    match *msg {
        ClientMsg::SetHip { x, y, z, .. } => {
            if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                return Err((ErrorCode::BadRequest, "set_hip coordinates must be finite".into()));
            }
            Ok(Command::Hip(Vec3::new(x, y, z)))
        }
        ClientMsg::SetRoi { level, x, y, w, h, .. } => Ok(Command::Roi(RoiSelection { level, x, y, w, h })),
        ClientMsg::SetLevel { delta, .. } => Ok(Command::Level(delta)),
    }
}

/// Streams snapshots to one client and forwards its commands. Only the most
/// recent snapshot is ever pending, so a slow client skips frames instead of
/// queueing them.
async fn client_loop(mut socket: WebSocket, session: Arc<Session>) {
    let mut snaps = session.subscribe();
    let first = *snaps.borrow_and_update();
    if !send(&mut socket, &ServerMsg::Snapshot(first)).await {
        return;
    }
    let gone =
        ServerMsg::Error { code: ErrorCode::Gone, message: format!("session {} has ended", session.id), cmd_id: None };
    loop {
        tokio::select! {
            changed = snaps.changed() => {
                if changed.is_err() || !session.is_live() {
                    send(&mut socket, &gone).await;
                    break;
                }
                let s = *snaps.borrow_and_update();
                if !send(&mut socket, &ServerMsg::Snapshot(s)).await {
                    break;
                }
            }
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => continue,
                };
                let msg: ClientMsg = match serde_json::from_str(text.as_str()) {
                    Ok(m) => m,
                    Err(e) => {
                        let reply = ServerMsg::Error { code: ErrorCode::BadRequest, message: e.to_string(), cmd_id: None };
                        if !send(&mut socket, &reply).await { break; }
                        continue;
                    }
                };
                let cmd_id = msg.cmd_id();
                let reply = match to_command(&msg) {
                    Err((code, message)) => ServerMsg::Error { code, message, cmd_id },
                    Ok(cmd) => match session.command(cmd).await {
                        Ok(seq) => ServerMsg::Ack { cmd_id, seq },
                        Err(CommandError::InvalidRoi(message)) => ServerMsg::Error { code: ErrorCode::InvalidRoi, message, cmd_id },
                        Err(CommandError::InvalidLevel(message)) => ServerMsg::Error { code: ErrorCode::InvalidLevel, message, cmd_id },
                        Err(CommandError::Gone) => {
                            send(&mut socket, &gone).await;
                            break;
                        }
                    },
                };
                if !send(&mut socket, &reply).await {
                    break;
                }
            }
        }
    }
}

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use depthtouch_core::io::decode_mhdf;
use depthtouch_core::{DepthField, RoiSelection};
use depthtouch_service::{router, AppState, AssetStore, ErrorCode, ServerMsg, SessionConfig, Snapshot};
use futures_util::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};
use tower::ServiceExt;

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn state() -> Arc<AppState> {
    AppState::new(AssetStore::with_demos().unwrap(), SessionConfig::default())
}

async fn http(app: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn serve(app: Arc<AppState>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(app)).await.unwrap() });
    format!("127.0.0.1:{}", addr.port())
}

async fn open(app: &Arc<AppState>, asset: &str) -> u64 {
    let (status, body) = http(app, "POST", "/sessions", Some(json!({ "asset": asset }))).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    json_of(&body)["session_id"].as_u64().unwrap()
}

async fn connect(addr: &str, id: u64) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/ws")).await.unwrap().0
}

async fn next_msg(ws: &mut Ws) -> ServerMsg {
    loop {
        let m = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("server went quiet");
        if let Message::Text(t) = m.unwrap().unwrap() {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn next_snapshot(ws: &mut Ws) -> Snapshot {
    loop {
        if let ServerMsg::Snapshot(s) = next_msg(ws).await {
            return s;
        }
    }
}

/// Sends a command and returns its ack or error, skipping snapshots.
async fn command(ws: &mut Ws, msg: Value) -> ServerMsg {
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
    loop {
        match next_msg(ws).await {
            ServerMsg::Snapshot(_) => continue,
            other => return other,
        }
    }
}

async fn snapshot_at_least(ws: &mut Ws, seq: u64) -> Snapshot {
    loop {
        let s = next_snapshot(ws).await;
        if s.seq >= seq {
            return s;
        }
    }
}

#[tokio::test]
async fn lists_assets_with_levels() {
    let app = state();
    let (status, body) = http(&app, "GET", "/assets", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = json_of(&body);
    let ids: Vec<_> = list.as_array().unwrap().iter().map(|a| a["id"].as_str().unwrap().to_owned()).collect();
    assert_eq!(ids, ["demo-flat", "demo-holed"]);
    let flat = &list[0];
    assert_eq!(flat["levels"][0]["width"], 101);
    assert_eq!(flat["levels"][1]["width"], 51);
    assert_eq!(flat["default_roi"]["level"], 0);
}

#[tokio::test]
async fn grid_endpoint_serves_mhdf_levels() {
    let app = state();
    let (status, body) = http(&app, "GET", "/assets/demo-holed/levels/1/grid", None).await;
    assert_eq!(status, StatusCode::OK);
    let f: DepthField<f64> = decode_mhdf(&body, std::path::Path::new("grid")).unwrap();
    assert_eq!((f.width(), f.height()), (101, 101));
    assert!(f.is_filled());

    for uri in ["/assets/nope/levels/0/grid", "/assets/demo-flat/levels/9/grid"] {
        let (status, body) = http(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(json_of(&body)["code"], "not_found");
    }
}

#[tokio::test]
async fn open_session_validates_input() {
    let app = state();
    let cases = [
        (json!({ "asset": "missing" }), StatusCode::NOT_FOUND, "not_found"),
        (json!({ "asset": "demo-flat", "params": { "delta_n": 0.0 } }), StatusCode::BAD_REQUEST, "invalid_params"),
        (json!({ "asset": "demo-flat", "params": { "stiffness": 1.0 } }), StatusCode::BAD_REQUEST, "bad_request"),
        (
            json!({ "asset": "demo-flat", "roi": { "level": 0, "x": 90, "y": 0, "w": 20, "h": 20 } }),
            StatusCode::BAD_REQUEST,
            "invalid_roi",
        ),
    ];
    for (body, status, code) in cases {
        let (got, resp) = http(&app, "POST", "/sessions", Some(body.clone())).await;
        assert_eq!(got, status, "{body}");
        assert_eq!(json_of(&resp)["code"], code, "{body}");
    }
}

#[tokio::test]
async fn first_snapshot_is_parked_in_free_space() {
    let app = state();
    let (status, body) = http(&app, "POST", "/sessions", Some(json!({ "asset": "demo-flat" }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let opened = json_of(&body);
    let id = opened["session_id"].as_u64().unwrap();
    assert_eq!(opened["ws"], format!("/sessions/{id}/ws"));

    let addr = serve(app).await;
    let mut ws = connect(&addr, id).await;
    let s = next_snapshot(&mut ws).await;
    assert!(!s.in_contact);
    assert_eq!(s.force.norm(), 0.0);
    assert!(s.hip.z > 20.0);
    assert_eq!(s.roi, RoiSelection { level: 0, x: 0, y: 0, w: 101, h: 101 });
}

#[tokio::test]
async fn set_hip_below_surface_renders_contact_within_two_snapshots() {
    let app = state();
    let id = open(&app, "demo-flat").await;
    let addr = serve(app).await;
    let mut ws = connect(&addr, id).await;
    next_snapshot(&mut ws).await;

    // The demo plane sits at 20 mm and the default window maps 1:1.
    let ack = command(&mut ws, json!({ "type": "set_hip", "x": 50.8, "y": 50.8, "z": 19.0, "cmd_id": 7 })).await;
    let ServerMsg::Ack { cmd_id, seq } = ack else { panic!("{ack:?}") };
    assert_eq!(cmd_id, Some(7));
    let s = snapshot_at_least(&mut ws, seq + 1).await;
    assert_eq!(s.seq, seq + 1, "snapshots skipped under no load");
    assert!(s.in_contact);
    assert!((s.force.z - 0.5).abs() < 1e-9, "{:?}", s.force);
    assert!((s.proxy.z - 20.0).abs() < 1e-9);
}

#[tokio::test]
async fn set_level_respects_pyramid_bounds() {
    let app = state();
    let id = open(&app, "demo-flat").await;
    let addr = serve(app.clone()).await;
    let mut ws = connect(&addr, id).await;
    next_snapshot(&mut ws).await;

    let r = command(&mut ws, json!({ "type": "set_level", "delta": -1, "cmd_id": 1 })).await;
    assert!(matches!(r, ServerMsg::Error { code: ErrorCode::InvalidLevel, cmd_id: Some(1), .. }), "{r:?}");

    let (_, body) = http(&app, "GET", "/assets", None).await;
    let levels = json_of(&body)[0]["levels"].as_array().unwrap().len();
    assert!(levels >= 3);
    for _ in 1..levels {
        assert!(matches!(command(&mut ws, json!({ "type": "set_level", "delta": 1 })).await, ServerMsg::Ack { .. }));
    }
    let r = command(&mut ws, json!({ "type": "set_level", "delta": 1 })).await;
    assert!(matches!(r, ServerMsg::Error { code: ErrorCode::InvalidLevel, .. }), "{r:?}");
    let r = command(&mut ws, json!({ "type": "set_level", "delta": 2 })).await;
    assert!(matches!(r, ServerMsg::Error { code: ErrorCode::InvalidLevel, .. }), "{r:?}");

    let s = next_snapshot(&mut ws).await;
    assert_eq!(s.roi.level, levels - 1);
    assert_eq!(s.mapping_version, (levels - 1) as u64);
}

#[tokio::test]
async fn same_roi_bumps_version_and_keeps_geometry() {
    let app = state();
    let id = open(&app, "demo-holed").await;
    let addr = serve(app).await;
    let mut ws = connect(&addr, id).await;
    let before = next_snapshot(&mut ws).await;
    let r = before.roi;

    let ack = command(
        &mut ws,
        json!({ "type": "set_roi", "level": r.level, "x": r.x, "y": r.y, "w": r.w, "h": r.h, "cmd_id": 3 }),
    )
    .await;
    let ServerMsg::Ack { seq, .. } = ack else { panic!("{ack:?}") };
    let after = snapshot_at_least(&mut ws, seq).await;
    assert_eq!(after.roi, r);
    assert_eq!(after.mapping_version, before.mapping_version + 1);
    assert_eq!(after.lateral_scale, before.lateral_scale);
}

#[tokio::test]
async fn invalid_roi_is_rejected_without_side_effects() {
    let app = state();
    let id = open(&app, "demo-holed").await;
    let addr = serve(app).await;
    let mut ws = connect(&addr, id).await;
    let before = next_snapshot(&mut ws).await;

    let r = command(&mut ws, json!({ "type": "set_roi", "level": 1, "x": 90, "y": 0, "w": 50, "h": 50, "cmd_id": 4 }))
        .await;
    assert!(matches!(r, ServerMsg::Error { code: ErrorCode::InvalidRoi, cmd_id: Some(4), .. }), "{r:?}");
    let r = command(&mut ws, json!({ "type": "warp" })).await;
    assert!(matches!(r, ServerMsg::Error { code: ErrorCode::BadRequest, .. }), "{r:?}");

    let s = next_snapshot(&mut ws).await;
    assert_eq!((s.roi, s.mapping_version), (before.roi, before.mapping_version));
}

#[tokio::test]
async fn zoom_keeps_snapshots_consistent() {
    let app = state();
    let id = open(&app, "demo-holed").await;
    let addr = serve(app).await;
    let mut ws = connect(&addr, id).await;
    next_snapshot(&mut ws).await;

    let ack = command(&mut ws, json!({ "type": "set_roi", "level": 0, "x": 50, "y": 50, "w": 101, "h": 101 })).await;
    let ServerMsg::Ack { seq, .. } = ack else { panic!("{ack:?}") };
    let s = snapshot_at_least(&mut ws, seq).await;
    assert_eq!(s.roi, RoiSelection { level: 0, x: 50, y: 50, w: 101, h: 101 });
    assert_eq!(s.mapping_version, 1);
    // 201 nodes across the full demo, 101 of them in view: twice the scale.
    assert!((s.lateral_scale - 2.0).abs() < 1e-12, "{}", s.lateral_scale);
}

#[tokio::test]
async fn sessions_are_independent() {
    let app = state();
    let (a, b) = (open(&app, "demo-flat").await, open(&app, "demo-flat").await);
    assert_ne!(a, b);
    let addr = serve(app).await;
    let (mut wa, mut wb) = (connect(&addr, a).await, connect(&addr, b).await);
    let ack = command(&mut wa, json!({ "type": "set_hip", "x": 30.0, "y": 30.0, "z": 18.0 })).await;
    let ServerMsg::Ack { seq, .. } = ack else { panic!("{ack:?}") };
    let sa = snapshot_at_least(&mut wa, seq + 1).await;
    assert!(sa.in_contact && (sa.force.z - 1.0).abs() < 1e-9);
    let sb = snapshot_at_least(&mut wb, seq + 1).await;
    assert!(!sb.in_contact && sb.force.norm() == 0.0);
}

#[tokio::test]
async fn stream_is_ordered_and_never_penetrates() {
    let app = state();
    let id = open(&app, "demo-holed").await;
    let addr = serve(app.clone()).await;
    let mut ws = connect(&addr, id).await;
    let first = next_snapshot(&mut ws).await;
    let field = {
        let (_, body) = http(&app, "GET", "/assets/demo-holed/levels/1/grid", None).await;
        decode_mhdf::<f64>(&body, std::path::Path::new("grid")).unwrap()
    };
    // Level 1 of the holed demo is shown whole, 101 nodes over 101.6 mm: the
    // workspace frame is the level's own frame.
    assert_eq!(first.roi, RoiSelection { level: 1, x: 0, y: 0, w: 101, h: 101 });
    assert!((first.lateral_scale - 1.0).abs() < 1e-12);

    let path = [(30.0, 50.0), (50.0, 50.0), (70.0, 40.0), (60.0, 70.0), (40.0, 30.0)];
    let mut last = first.seq;
    for (x, y) in path {
        let z = field.sample_depth(x, y).unwrap() - 0.8;
        command(&mut ws, json!({ "type": "set_hip", "x": x, "y": y, "z": z })).await;
        for _ in 0..8 {
            let s = next_snapshot(&mut ws).await;
            assert!(s.seq > last, "seq {} after {last}", s.seq);
            last = s.seq;
            let h = field.sample_depth(s.proxy.x, s.proxy.y).unwrap();
            assert!(s.proxy.z >= h - 1e-3, "proxy {:.4} below surface {h:.4}", s.proxy.z);
            if s.in_contact {
                assert!((s.proxy.z - h).abs() <= 1e-3);
            }
        }
    }
}

#[tokio::test]
async fn slow_client_does_not_stall_ticks() {
    let app = state();
    let id = open(&app, "demo-flat").await;
    let addr = serve(app.clone()).await;
    let mut ws = connect(&addr, id).await;
    let a = next_snapshot(&mut ws).await;
    let start = Instant::now();
    // Stop reading the socket; the session must keep ticking regardless.
    tokio::time::sleep(Duration::from_millis(600)).await;
    let (_, body) = http(&app, "GET", &format!("/sessions/{id}"), None).await;
    let latest: ServerMsg = serde_json::from_slice(&body).unwrap();
    let ServerMsg::Snapshot(latest) = latest else { panic!("{latest:?}") };
    let elapsed_ms = start.elapsed().as_millis() as u64;
    assert!(latest.t - a.t >= elapsed_ms / 2, "{} ticks in {elapsed_ms} ms", latest.t - a.t);
    assert!(latest.tick_stats.mean_us > 0.0);
    // The backlogged client still gets its command through.
    let r = command(&mut ws, json!({ "type": "set_hip", "x": 10.0, "y": 10.0, "z": 40.0, "cmd_id": 9 })).await;
    assert!(matches!(r, ServerMsg::Ack { cmd_id: Some(9), .. }), "{r:?}");
}

#[tokio::test]
async fn closed_session_reports_gone() {
    let app = state();
    let id = open(&app, "demo-flat").await;
    let addr = serve(app.clone()).await;
    let mut ws = connect(&addr, id).await;
    next_snapshot(&mut ws).await;

    let (status, _) = http(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    loop {
        match next_msg(&mut ws).await {
            ServerMsg::Snapshot(_) => continue,
            ServerMsg::Error { code, .. } => {
                assert_eq!(code, ErrorCode::Gone);
                break;
            }
            other => panic!("{other:?}"),
        }
    }
    for (method, uri) in [("GET", format!("/sessions/{id}")), ("GET", format!("/sessions/{id}/ws"))] {
        let (status, body) = http(&app, method, &uri, None).await;
        assert_eq!(status, StatusCode::GONE, "{uri}");
        assert_eq!(json_of(&body)["code"], "gone");
    }
    let (status, _) = http(&app, "GET", "/sessions/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idle_sessions_shut_down() {
    let config = SessionConfig { idle_timeout: Duration::from_millis(100), ..SessionConfig::default() };
    let app = AppState::new(AssetStore::with_demos().unwrap(), config);
    let id = open(&app, "demo-flat").await;
    tokio::time::sleep(Duration::from_millis(400)).await;
    let (status, _) = http(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::GONE);
}

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use waypoint_server::{router, AppState, ServerConfig};

fn app_with(config: ServerConfig) -> Router {
    let ui = config.ui_dir.clone();
    router(AppState::new(&config).unwrap(), ui)
}

fn app() -> Router {
    app_with(ServerConfig {
        workers: 2,
        ..Default::default()
    })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn small_config() -> Value {
    json!({
        "env": "fourrooms",
        "agent": { "agent": "sarsa" },
        "methods": [
            { "method": "baseline" },
            { "method": "hrs", "subgoal_series": { "env": "fourrooms", "subgoals": [
                { "kind": "cell", "cell": 27 }, { "kind": "cell", "cell": 74 } ] } }
        ],
        "episodes": 6,
        "asymptotic_tail": 3,
        "seeds": [1, 2, 3]
    })
}

async fn wait_done(app: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let (status, handle) = call(app, "GET", &format!("/api/runs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if handle["status"] == "done" || handle["status"] == "failed" {
            return handle;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("run {id} did not finish");
}

#[tokio::test]
async fn envs_lists_both_shipped_maps() {
    let (status, envs) = call(&app(), "GET", "/api/envs", None).await;
    assert_eq!(status, StatusCode::OK);
    let envs = envs.as_array().unwrap();
    assert_eq!(envs.len(), 2);
    let grid = envs.iter().find(|e| e["id"] == "fourrooms").unwrap();
    let file: Value = serde_json::from_str(waypoint_core::env::builtin::FOURROOMS_JSON).unwrap();
    for key in ["walls", "start", "goal"] {
        assert_eq!(grid["map"][key], file[key], "{key}");
    }
    let pinball = envs.iter().find(|e| e["id"] == "pinball").unwrap();
    assert!(pinball["map"]["obstacles"].as_array().unwrap().len() > 4);
    assert!(pinball["map"]["target_radius"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn submitted_run_completes_with_curves() {
    let app = app();
    let (status, body) = call(&app, "POST", "/api/runs", Some(small_config())).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = body["id"].as_str().unwrap().to_string();

    let handle = wait_done(&app, &id).await;
    assert_eq!(handle["status"], "done");
    assert_eq!(handle["progress"], 1.0);
    assert_eq!(handle["total"], 6);

    let (status, payload) = call(&app, "GET", &format!("/api/runs/{id}/curves"), None).await;
    assert_eq!(status, StatusCode::OK);
    let curves = payload["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 2);
    for c in curves {
        assert_eq!(c["mean"].as_array().unwrap().len(), 6);
        assert!(c["stderr"]
            .as_array()
            .unwrap()
            .iter()
            .all(|s| s.as_f64().unwrap() >= 0.0));
    }
}

#[tokio::test]
async fn duplicate_submissions_are_independent_and_identical() {
    let app = app();
    let (_, a) = call(&app, "POST", "/api/runs", Some(small_config())).await;
    let (_, b) = call(&app, "POST", "/api/runs", Some(small_config())).await;
    let (a, b) = (
        a["id"].as_str().unwrap().to_string(),
        b["id"].as_str().unwrap().to_string(),
    );
    assert_ne!(a, b);
    wait_done(&app, &a).await;
    wait_done(&app, &b).await;
    let (_, pa) = call(&app, "GET", &format!("/api/runs/{a}/curves"), None).await;
    let (_, pb) = call(&app, "GET", &format!("/api/runs/{b}/curves"), None).await;
    assert_eq!(pa, pb);
}

#[tokio::test]
async fn wall_subgoal_is_rejected_with_field_errors() {
    let mut config = small_config();
    config["methods"][1]["subgoal_series"]["subgoals"][0]["cell"] = json!(5);
    let (status, body) = call(&app(), "POST", "/api/runs", Some(config)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "invalid_config");
    let fields = body["error"]["fields"].as_object().unwrap();
    assert!(fields.keys().any(|k| k.contains("subgoals[0]")), "{fields:?}");
}

#[tokio::test]
async fn malformed_body_is_a_bad_request() {
    let app = app();
    let req = Request::builder()
        .method("POST")
        .uri("/api/runs")
        .body(Body::from("{not json"))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_run_is_404() {
    let app = app();
    let (status, body) = call(&app, "GET", "/api/runs/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");
    let (status, _) = call(&app, "GET", "/api/runs/nope/curves", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn curves_before_done_is_409() {
    let app = app();
    let mut long = small_config();
    long["episodes"] = json!(200);
    long["seeds"] = json!((0..20).collect::<Vec<u64>>());
    let (_, body) = call(&app, "POST", "/api/runs", Some(long)).await;
    let id = body["id"].as_str().unwrap();
    let (status, body) = call(&app, "GET", &format!("/api/runs/{id}/curves"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "not_finished");
}

#[tokio::test]
async fn validate_endpoint_reports_errors() {
    let app = app();
    let good = json!({ "env": "fourrooms", "subgoals": [{ "kind": "cell", "cell": 27 }] });
    let (status, body) = call(&app, "POST", "/api/subgoals/validate", Some(good.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "ok": true, "errors": [] }));

    let wrapped = json!({ "map": "fourrooms", "series": good });
    let (_, body) = call(&app, "POST", "/api/subgoals/validate", Some(wrapped)).await;
    assert_eq!(body["ok"], true);

    let inside = json!({ "env": "pinball", "subgoals": [
        { "kind": "circle", "center": [0.5, 0.82], "radius": 0.04 } ] });
    let (_, body) = call(&app, "POST", "/api/subgoals/validate", Some(inside)).await;
    assert_eq!(body["ok"], false);
    assert_eq!(body["errors"][0]["field"], "subgoals[0].center");
}

#[tokio::test]
async fn root_serves_a_page_without_a_bundle() {
    let resp = app()
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert!(String::from_utf8_lossy(&bytes).contains("/api/envs"));
}

#[tokio::test]
async fn root_serves_the_ui_bundle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>bundle</html>").unwrap();
    let app = app_with(ServerConfig {
        ui_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    });
    let resp = app
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<html>bundle</html>");
}

#[tokio::test]
async fn spool_survives_restart() {
    let spool = tempfile::tempdir().unwrap();
    let config = ServerConfig {
        spool: Some(spool.path().to_path_buf()),
        workers: 2,
        ui_dir: None,
    };
    let first = app_with(config.clone());
    let (_, body) = call(&first, "POST", "/api/runs", Some(small_config())).await;
    let id = body["id"].as_str().unwrap().to_string();
    wait_done(&first, &id).await;
    let (_, before) = call(&first, "GET", &format!("/api/runs/{id}/curves"), None).await;
    drop(first);

    for file in [
        "config.json",
        "handle.json",
        "results.csv",
        "report.json",
        "curves.json",
    ] {
        assert!(spool.path().join(&id).join(file).is_file(), "{file}");
    }

    let second = app_with(config);
    let (status, handle) = call(&second, "GET", &format!("/api/runs/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(handle["status"], "done");
    let (_, after) = call(&second, "GET", &format!("/api/runs/{id}/curves"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn interrupted_spool_entries_are_requeued() {
    let spool = tempfile::tempdir().unwrap();
    let dir = spool.path().join("abc-0001");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("config.json"), small_config().to_string()).unwrap();
    let handle = json!({ "id": "abc-0001", "status": "running", "progress": 0.5,
        "completed": 3, "total": 6, "created_at": 1 });
    std::fs::write(dir.join("handle.json"), handle.to_string()).unwrap();

    let app = app_with(ServerConfig {
        spool: Some(spool.path().to_path_buf()),
        workers: 1,
        ui_dir: None,
    });
    let done = wait_done(&app, "abc-0001").await;
    assert_eq!(done["status"], "done");
}

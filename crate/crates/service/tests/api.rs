use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use lattice_core::dataset::embedded_csv;
use lattice_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> (axum::Router, Arc<AppState>) {
    let (state, warnings) = AppState::open(dir).unwrap();
    assert!(warnings.is_empty());
    (router(state.clone(), None), state)
}

async fn send(app: &axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn post_json(app: &axum::Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn get_json(app: &axum::Router, uri: &str) -> (StatusCode, Value) {
    let (status, bytes) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn probe(slot: &str) -> Value {
    json!({
        "slot": slot,
        "lattice_type": "Simple Cubic",
        "thickness": 0.5,
        "young_modulus": 208.0,
        "poisson_ratio": 0.28,
        "conductivity": 9.7
    })
}

#[tokio::test]
async fn health() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = get_json(&app, "/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test]
async fn train_predict_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, metrics) = post_json(&app, "/api/train", json!({"model": "regularized", "seed": 7, "slot": "xgb"})).await;
    assert_eq!(status, StatusCode::OK, "{metrics}");
    assert!(metrics["r2"].as_f64().unwrap() > 0.8);

    let (status, a) = post_json(&app, "/api/predict", probe("xgb")).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    let (_, b) = post_json(&app, "/api/predict", probe("xgb")).await;
    assert_eq!(a, b);
    let value = a["predicted_young_modulus"].as_f64().unwrap();
    assert!((value - 3.05216).abs() / 3.05216 < 0.2, "{value}");
    assert_eq!(a["model"], "xgb");
    assert_eq!(a["model_version"].as_str().unwrap().len(), 12);

    let (status, diag) = get_json(&app, "/api/diagnostics/xgb").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(diag["pairs"].as_array().unwrap().len(), 22);
    assert_eq!(diag["qq"].as_array().unwrap().len(), 22);
    assert_eq!(diag["correlation"].as_array().unwrap().len(), 6);
    assert!(dir.path().join("xgb.json").exists());
}

#[tokio::test]
async fn slot_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let first = {
        let (app, _) = app(dir.path());
        let (status, _) = post_json(&app, "/api/train", json!({"model": "gbm", "seed": 3})).await;
        assert_eq!(status, StatusCode::OK);
        post_json(&app, "/api/predict", probe("default")).await.1
    };
    let (app, _) = app(dir.path());
    let (status, again) = post_json(&app, "/api/predict", probe("default")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first, again);
}

#[tokio::test]
async fn unknown_slot_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = post_json(&app, "/api/predict", probe("nothing")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["kind"], "unknown_slot");
    let (status, _) = get_json(&app, "/api/diagnostics/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_label_lists_known_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    post_json(&app, "/api/train", json!({"model": "cart"})).await;
    let mut req = probe("default");
    req["lattice_type"] = json!("Gyroid");
    let (status, body) = post_json(&app, "/api/predict", req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["kind"], "unknown_label");
    let msg = body["error"].as_str().unwrap();
    assert!(msg.contains("Gyroid"));
    for label in lattice_core::lattice::Topology::ALL.map(|t| t.label()) {
        assert!(msg.contains(label), "{label} missing from {msg}");
    }
}

#[tokio::test]
async fn invalid_requests_are_400() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    post_json(&app, "/api/train", json!({"model": "cart"})).await;

    let mut neg = probe("default");
    neg["thickness"] = json!(-0.5);
    let (status, body) = post_json(&app, "/api/predict", neg).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let (status, body) = post_json(&app, "/api/train", json!({"model": "svm"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    let (status, _) = post_json(&app, "/api/train", json!({"model": "cart", "slot": "../x"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post_json(&app, "/api/train", json!({"model": "cart", "config": {"bogus": 1}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = post_json(&app, "/api/train", json!({"model": "cart", "config": {"test_fraction": 2.0}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let (status, body) = send(&app, Request::post("/api/predict").header("content-type", "application/json").body(Body::from("{")).unwrap()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["kind"], "invalid_argument");
}

#[tokio::test]
async fn concurrent_train_on_same_slot_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let (app, state) = app(dir.path());
    let guard = state.registry.begin_training("busy").unwrap();
    let (status, body) = post_json(&app, "/api/train", json!({"model": "cart", "slot": "busy"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["kind"], "conflict");
    let (status, _) = post_json(&app, "/api/train", json!({"model": "cart", "slot": "free"})).await;
    assert_eq!(status, StatusCode::OK);
    drop(guard);
    let (status, _) = post_json(&app, "/api/train", json!({"model": "cart", "slot": "busy"})).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn dataset_get_and_upload() {
    let dir = tempfile::tempdir().unwrap();
    let (app, state) = app(dir.path());
    let (status, csv) = send(&app, Request::get("/api/dataset").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().count(), 111);

    let five: String = embedded_csv().lines().take(6).map(|l| format!("{l}\n")).collect();
    let (status, body) = send(&app, Request::post("/api/dataset").body(Body::from(five)).unwrap()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["kind"], "invalid_argument");
    assert_eq!(state.dataset().len(), 110);

    let (status, body) = send(&app, Request::post("/api/dataset").body(Body::from("a,b\n1,2\n")).unwrap()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["kind"], "schema");

    let forty: String = embedded_csv().lines().take(41).map(|l| format!("{l}\n")).collect();
    let (status, body) = send(&app, Request::post("/api/dataset").body(Body::from(forty)).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap(), json!({"rows": 40}));
    let (status, metrics) = post_json(&app, "/api/train", json!({"model": "cart"})).await;
    assert_eq!(status, StatusCode::OK, "{metrics}");
    let (_, diag) = get_json(&app, "/api/diagnostics/default").await;
    assert_eq!(diag["pairs"].as_array().unwrap().len(), 8);
}

#[tokio::test]
async fn homogenize_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = get_json(&app, "/api/homogenize?topology=simple_cubic&thickness=0.5&E=208&nu=0.28").await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let ex = body["engineering"]["Ex"].as_f64().unwrap();
    let oracle = 208.0 * std::f64::consts::PI * 0.25 / 4.0 / 25.0;
    assert!((ex - oracle).abs() / oracle < 0.15, "{ex} vs {oracle}");
    assert_eq!(body["cell_size_mm"], 5.0);
    assert_eq!(body["C"].as_array().unwrap().len(), 6);

    let (status, body) = get_json(&app, "/api/homogenize?topology=gyroid&thickness=0.5&E=208&nu=0.28").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["kind"], "unknown_label");
    let (status, _) = get_json(&app, "/api/homogenize?topology=octet&thickness=0.5").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = get_json(&app, "/api/homogenize?topology=octet&thickness=4&E=208&nu=0.28").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
}

#[tokio::test]
async fn leaderboard_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = get_json(&app, "/api/leaderboard?seeds=0,1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["seeds"], json!([0, 1]));
    assert_eq!(body["entries"].as_array().unwrap().len(), 5);
    let (status, _) = get_json(&app, "/api/leaderboard?seeds=abc").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use lucin::knowledge::Registry;
use lucin::service::http::router;
use lucin::service::Engine;

fn app() -> Router {
    router(Arc::new(Engine::new(Registry::builtin())))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn start_gcd(app: &Router) -> String {
    let (status, v) = call(
        app,
        Method::POST,
        "/session",
        Some(json!({"problem": ["diophantine", "gcd"], "model": {"a": "12", "b": "8"}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["result"]["session"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn full_session_over_http() {
    let app = app();
    let id = start_gcd(&app).await;

    let (s, v) = call(&app, Method::GET, &format!("/session/{id}/hint"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["kind"], "next_step");
    assert_eq!(v["result"]["tactic"], "Calculate ''MOD''");

    let (s, v) = call(&app, Method::POST, &format!("/session/{id}/term"), Some(json!({"formula": "gcd 8 4"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["outcome"], "accepted");
    assert_eq!(v["result"]["kind"], "found_step");

    let (s, v) = call(&app, Method::POST, &format!("/session/{id}/auto"), Some(json!({}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["finished"], true);
    assert_eq!(v["result"]["result"], "4");

    let (s, v) = call(&app, Method::GET, &format!("/session/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["result"], "4");
}

#[tokio::test]
async fn rejected_term_is_ok_and_keeps_hash() {
    let app = app();
    let id = start_gcd(&app).await;
    let (_, before) = call(&app, Method::GET, &format!("/session/{id}"), None).await;
    let (s, v) = call(&app, Method::POST, &format!("/session/{id}/term"), Some(json!({"formula": "7"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["outcome"], "rejected");
    assert_eq!(v["result"]["hash"], before["result"]["hash"]);
}

#[tokio::test]
async fn tactic_endpoint_reports_safe_step() {
    let app = app();
    let id = start_gcd(&app).await;
    let (s, v) = call(
        &app,
        Method::POST,
        &format!("/session/{id}/tactic"),
        Some(json!({"tactic": "Calculate ''MOD''"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["result"]["kind"], "safe_step");
    assert_eq!(v["result"]["state"]["formula"], "gcd 8 4");
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (s, v) = call(&app, Method::GET, "/session/nope", None).await;
    assert_eq!((s, &v["error"]["code"]), (StatusCode::NOT_FOUND, &json!("SessionNotFound")));
    assert_eq!(v["ok"], false);

    let (s, v) = call(&app, Method::POST, "/session", Some(json!({"problem": ["no", "such"], "model": {}}))).await;
    assert_eq!((s, &v["error"]["code"]), (StatusCode::NOT_FOUND, &json!("KeyNotFound")));

    let (s, v) = call(
        &app,
        Method::POST,
        "/session",
        Some(json!({"problem": ["equation", "linear"], "model": {"a": "0", "b": "1"}})),
    )
    .await;
    assert_eq!((s, &v["error"]["code"]), (StatusCode::UNPROCESSABLE_ENTITY, &json!("GuardFailed")));
    assert_eq!(v["error"]["details"]["preconditions"][0]["truth"], "False");

    let id = start_gcd(&app).await;
    let (s, v) = call(&app, Method::POST, &format!("/session/{id}/undo"), None).await;
    assert_eq!((s, &v["error"]["code"]), (StatusCode::CONFLICT, &json!("NothingToUndo")));

    let (s, v) = call(&app, Method::POST, &format!("/session/{id}/term"), Some(json!({"formula": "(1 +"}))).await;
    assert_eq!((s, &v["error"]["code"]), (StatusCode::BAD_REQUEST, &json!("SyntaxError")));
    assert!(v["error"]["details"]["span"].is_object());

    let req = Request::builder()
        .method(Method::POST)
        .uri("/session")
        .body(Body::from("{not json"))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn auto_step_limit_leaves_session_alone() {
    let app = app();
    let id = start_gcd(&app).await;
    let (_, before) = call(&app, Method::GET, &format!("/session/{id}"), None).await;
    let (s, v) = call(&app, Method::POST, &format!("/session/{id}/auto"), Some(json!({"max_steps": 1}))).await;
    assert_eq!((s, &v["error"]["code"]), (StatusCode::UNPROCESSABLE_ENTITY, &json!("StepLimit")));
    let (_, after) = call(&app, Method::GET, &format!("/session/{id}"), None).await;
    assert_eq!(before["result"]["hash"], after["result"]["hash"]);
}

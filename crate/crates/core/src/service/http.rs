//! HTTP front end.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use super::protocol::{envelope, execute, parse_request, Request};
use super::{Engine, ErrorCode, ServiceError, ServiceResult};

fn status(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::SessionNotFound | ErrorCode::KeyNotFound => StatusCode::NOT_FOUND,
        ErrorCode::GuardFailed | ErrorCode::InvalidModel | ErrorCode::StepLimit => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCode::NothingToUndo => StatusCode::CONFLICT,
        ErrorCode::SyntaxError | ErrorCode::InvalidRequest => StatusCode::BAD_REQUEST,
        ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

type Reply = (StatusCode, Json<Value>);

async fn run(engine: Arc<Engine>, req: ServiceResult<Request>) -> Reply {
    let result = match req {
        Ok(req) => tokio::task::spawn_blocking(move || execute(&engine, &req))
            .await
            .unwrap_or_else(|e| Err(ServiceError::new(ErrorCode::Internal, e.to_string()))),
        Err(e) => Err(e),
    };
    let code = match &result {
        Ok(_) => StatusCode::OK,
        Err(e) => status(e.code),
    };
    (code, Json(envelope(&result)))
}

/// Builds a request from a body object plus fields taken from the URL.
fn request(op: &str, body: &Bytes, extra: Value) -> ServiceResult<Request> {
    let mut v: Value = if body.iter().all(u8::is_ascii_whitespace) {
        json!({})
    } else {
        serde_json::from_slice(body)
            .map_err(|e| ServiceError::new(ErrorCode::InvalidRequest, format!("malformed JSON: {e}")))?
    };
    let obj = v
        .as_object_mut()
        .ok_or_else(|| ServiceError::new(ErrorCode::InvalidRequest, "body must be a JSON object"))?;
    obj.insert("op".into(), op.into());
    if let Value::Object(extra) = extra {
        obj.extend(extra);
    }
    parse_request(v)
}

async fn start(State(e): State<Arc<Engine>>, body: Bytes) -> Reply {
    run(e, request("start", &body, Value::Null)).await
}

async fn term(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: Bytes) -> Reply {
    run(e, request("term", &body, json!({ "session": id }))).await
}

async fn tactic(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: Bytes) -> Reply {
    run(e, request("tactic", &body, json!({ "session": id }))).await
}

async fn auto(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: Bytes) -> Reply {
    run(e, request("auto", &body, json!({ "session": id }))).await
}

async fn undo(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    run(e, Ok(Request::Undo { session: id })).await
}

async fn hint(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    run(e, Ok(Request::Hint { session: id })).await
}

async fn state(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    run(e, Ok(Request::State { session: id })).await
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/session", post(start))
        .route("/session/{id}", get(state))
        .route("/session/{id}/term", post(term))
        .route("/session/{id}/tactic", post(tactic))
        .route("/session/{id}/hint", get(hint))
        .route("/session/{id}/auto", post(auto))
        .route("/session/{id}/undo", post(undo))
        .with_state(engine)
}

pub async fn serve(engine: Arc<Engine>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    axum::serve(listener, router(engine)).await
}

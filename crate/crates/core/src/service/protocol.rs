//! The JSON message set shared by the HTTP and stdio front ends.

use serde::Deserialize;
use serde_json::{json, Value};

use super::{Engine, ErrorCode, ServiceError, ServiceResult, StartParams};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Start(StartParams),
    Term { session: String, formula: String },
    Tactic { session: String, tactic: String },
    Hint { session: String },
    Auto {
        session: String,
        #[serde(default)]
        max_steps: Option<usize>,
    },
    State { session: String },
    Undo { session: String },
}

fn to_value<T: serde::Serialize>(r: ServiceResult<T>) -> ServiceResult<Value> {
    r.map(|v| serde_json::to_value(v).expect("payloads serialize"))
}

/// Runs one request and returns its payload.
pub fn execute(engine: &Engine, req: &Request) -> ServiceResult<Value> {
    match req {
        Request::Start(p) => to_value(engine.start_session(p)),
        Request::Term { session, formula } => to_value(engine.input_term(session, formula)),
        Request::Tactic { session, tactic } => to_value(engine.input_tactic(session, tactic)),
        Request::Hint { session } => to_value(engine.hint(session)),
        Request::Auto { session, max_steps } => to_value(engine.auto_complete(session, *max_steps)),
        Request::State { session } => to_value(engine.state(session)),
        Request::Undo { session } => to_value(engine.undo(session)),
    }
}

/// Wraps a payload or error in the response envelope.
pub fn envelope(r: &ServiceResult<Value>) -> Value {
    match r {
        Ok(v) => json!({ "ok": true, "result": v }),
        Err(e) => json!({ "ok": false, "error": e.to_json() }),
    }
}

pub fn parse_request(v: Value) -> ServiceResult<Request> {
    serde_json::from_value(v).map_err(|e| ServiceError::new(ErrorCode::InvalidRequest, e.to_string()))
}

/// Handles one JSON request object.
pub fn handle(engine: &Engine, v: Value) -> Value {
    envelope(&parse_request(v).and_then(|r| execute(engine, &r)))
}

/// Handles one line of text holding a JSON request.
pub fn handle_line(engine: &Engine, line: &str) -> Value {
    match serde_json::from_str::<Value>(line) {
        Ok(v) => handle(engine, v),
        Err(e) => envelope(&Err(ServiceError::new(ErrorCode::InvalidRequest, format!("malformed JSON: {e}")))),
    }
}

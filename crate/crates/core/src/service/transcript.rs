//! Recorded request/response logs and their replay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::protocol::handle;
use super::Engine;

const SESSION_PLACEHOLDER: &str = "<session>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: Value,
    pub response: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub index: usize,
    pub expected: String,
    pub actual: String,
}

/// Replaces every `session` field value by a placeholder.
pub fn normalize(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.iter()
                .map(|(k, x)| {
                    let x = if k == "session" && x.is_string() { Value::from(SESSION_PLACEHOLDER) } else { normalize(x) };
                    (k.clone(), x)
                })
                .collect(),
        ),
        Value::Array(xs) => Value::Array(xs.iter().map(normalize).collect()),
        other => other.clone(),
    }
}

fn session_of(response: &Value) -> Option<&str> {
    response.get("result")?.get("session")?.as_str()
}

/// Sends each request to `engine`, translating recorded session ids to
/// the ids the engine hands out. Returns the actual responses.
pub fn replay(engine: &Engine, exchanges: &[Exchange]) -> Vec<Value> {
    let mut ids: BTreeMap<String, String> = BTreeMap::new();
    exchanges
        .iter()
        .map(|ex| {
            let mut req = ex.request.clone();
            if let Some(s) = req.get("session").and_then(Value::as_str) {
                let mapped = ids.get(s).cloned().unwrap_or_else(|| s.to_string());
                req["session"] = mapped.into();
            }
            let resp = handle(engine, req.clone());
            if req.get("op").and_then(Value::as_str) == Some("start") {
                if let (Some(old), Some(new)) = (session_of(&ex.response), session_of(&resp)) {
                    ids.insert(old.to_string(), new.to_string());
                }
            }
            resp
        })
        .collect()
}

/// Runs `requests` and pairs them with the responses.
pub fn record(engine: &Engine, requests: Vec<Value>) -> Vec<Exchange> {
    requests
        .into_iter()
        .map(|request| {
            let response = handle(engine, request.clone());
            Exchange { request, response }
        })
        .collect()
}

/// Compares serialized responses after session-id normalisation.
pub fn compare(expected: &[Exchange], actual: &[Value]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for i in 0..expected.len().max(actual.len()) {
        let e = expected.get(i).map(|x| normalize(&x.response).to_string()).unwrap_or_default();
        let a = actual.get(i).map(|x| normalize(x).to_string()).unwrap_or_default();
        if e != a {
            out.push(Mismatch { index: i, expected: e, actual: a });
        }
    }
    out
}

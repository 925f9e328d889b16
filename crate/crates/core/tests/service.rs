use std::collections::BTreeMap;

use serde_json::{json, Value};

use lucin::knowledge::Registry;
use lucin::service::protocol::handle_line;
use lucin::service::transcript::{self, Exchange};
use lucin::service::{stdio, Engine, ErrorCode, Hint, HintDetail, StartParams, StepOutcome};

fn params(problem: &[&str], model: &[(&str, &str)]) -> StartParams {
    StartParams {
        problem: problem.iter().map(|s| s.to_string()).collect(),
        model: model.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<BTreeMap<_, _>>(),
        ..Default::default()
    }
}

fn gcd(engine: &Engine) -> String {
    engine.start_session(&params(&["diophantine", "gcd"], &[("a", "30"), ("b", "18")])).unwrap().session
}

#[test]
fn hints_drive_the_session_to_the_end() {
    let engine = Engine::new(Registry::builtin());
    let id = gcd(&engine);
    let mut n = 0;
    loop {
        match engine.hint(&id).unwrap() {
            Hint::NextStep { tactic: Some(t), .. } => {
                let out = engine.input_tactic(&id, &t).unwrap();
                assert!(matches!(out, StepOutcome::Accepted { .. }), "{t}: {out:?}");
            }
            Hint::Finished { result } => {
                assert_eq!(result.as_deref(), Some("6"));
                break;
            }
            other => panic!("{other:?}"),
        }
        n += 1;
        assert!(n < 20);
    }
}

#[test]
fn hint_detail_controls_the_payload() {
    let engine = Engine::new(Registry::builtin());
    let mut p = params(&["diophantine", "gcd"], &[("a", "30"), ("b", "18")]);
    p.hint_detail = Some(HintDetail::TacticOnly);
    let id = engine.start_session(&p).unwrap().session;
    assert_eq!(engine.hint(&id).unwrap(), Hint::NextStep { tactic: Some("Calculate ''MOD''".into()), formula: None });
    p.hint_detail = Some(HintDetail::FormulaOnly);
    let id = engine.start_session(&p).unwrap().session;
    assert_eq!(engine.hint(&id).unwrap(), Hint::NextStep { tactic: None, formula: Some("gcd 18 12".into()) });
}

#[test]
fn undo_reverts_one_visible_step_at_a_time() {
    let engine = Engine::new(Registry::builtin());
    let id = gcd(&engine);
    let s0 = engine.state(&id).unwrap();
    engine.input_term(&id, "gcd 18 12").unwrap();
    let s1 = engine.state(&id).unwrap();
    engine.input_term(&id, "gcd 12 6").unwrap();
    assert_eq!(engine.undo(&id).unwrap().hash, s1.hash);
    assert_eq!(engine.undo(&id).unwrap().hash, s0.hash);
    assert_eq!(engine.undo(&id).unwrap_err().code, ErrorCode::NothingToUndo);
}

#[test]
fn unknown_tactic_is_rejected_without_change() {
    let engine = Engine::new(Registry::builtin());
    let id = gcd(&engine);
    let before = engine.state(&id).unwrap().hash;
    match engine.input_tactic(&id, "Rewrite ''add_0''").unwrap() {
        StepOutcome::Rejected { hash, .. } => assert_eq!(hash, before),
        other => panic!("{other:?}"),
    }
    assert_eq!(engine.input_tactic(&id, "Frobnicate").unwrap_err().code, ErrorCode::SyntaxError);
}

#[test]
fn save_and_load_round_trip() {
    let engine = Engine::new(Registry::builtin());
    let id = gcd(&engine);
    engine.input_term(&id, "gcd 18 12").unwrap();
    let saved = engine.save_session(&id).unwrap();
    let other = Engine::new(Registry::builtin());
    let restored = other.load_session(&saved).unwrap();
    assert_eq!(other.state(&restored).unwrap().hash, engine.state(&id).unwrap().hash);
    assert_eq!(other.auto_complete(&restored, None).unwrap().result.as_deref(), Some("6"));
    assert!(other.undo(&restored).is_ok());
    assert_eq!(other.load_session("{}").unwrap_err().code, ErrorCode::InvalidRequest);
}

#[test]
fn invalid_models_are_reported() {
    let engine = Engine::new(Registry::builtin());
    let missing = engine.start_session(&params(&["diophantine", "gcd"], &[("a", "3")])).unwrap_err();
    assert_eq!(missing.code, ErrorCode::InvalidModel);
    let extra = engine
        .start_session(&params(&["diophantine", "gcd"], &[("a", "3"), ("b", "4"), ("c", "5")]))
        .unwrap_err();
    assert_eq!(extra.code, ErrorCode::InvalidModel);
    let syntax = engine.start_session(&params(&["diophantine", "gcd"], &[("a", "3 +"), ("b", "4")])).unwrap_err();
    assert_eq!(syntax.code, ErrorCode::SyntaxError);
    assert_eq!(engine.session_count(), 0);
}

#[test]
fn stdio_answers_each_line() {
    let engine = Engine::new(Registry::builtin());
    let input = [
        json!({"op": "start", "problem": ["diophantine", "gcd"], "model": {"a": "12", "b": "8"}}).to_string(),
        String::new(),
        json!({"op": "auto", "session": "s1"}).to_string(),
        "garbage".to_string(),
        json!({"op": "fly"}).to_string(),
    ]
    .join("\n");
    let mut out = Vec::new();
    stdio::run(&engine, input.as_bytes(), &mut out).unwrap();
    let lines: Vec<Value> =
        String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["ok"], true);
    assert_eq!(lines[1]["result"]["result"], "4");
    assert_eq!(lines[2]["error"]["code"], "InvalidRequest");
    assert_eq!(lines[3]["error"]["code"], "InvalidRequest");
}

#[test]
fn protocol_envelope_shapes() {
    let engine = Engine::new(Registry::builtin());
    let ok = handle_line(&engine, r#"{"op":"start","problem":["rational","simplify"],"model":{"t":"1/(1 + 1/x)","x":"x"}}"#);
    assert_eq!(ok["ok"], true);
    assert_eq!(ok["result"]["formula"], "1 / (1 + 1 / x)");
    let err = handle_line(&engine, r#"{"op":"state","session":"zz"}"#);
    assert_eq!(err, json!({"ok": false, "error": {"code": "SessionNotFound", "message": err["error"]["message"]}}));
}

#[test]
fn transcript_normalizes_session_ids() {
    let engine = Engine::new(Registry::builtin());
    let requests = vec![
        json!({"op": "start", "problem": ["diophantine", "gcd"], "model": {"a": "9", "b": "6"}}),
        json!({"op": "auto", "session": "s1"}),
    ];
    let recorded: Vec<Exchange> = transcript::record(&engine, requests);
    // a fresh engine numbers sessions from the start again; a used one does not
    let busy = Engine::new(Registry::builtin());
    gcd(&busy);
    let actual = transcript::replay(&busy, &recorded);
    assert!(transcript::compare(&recorded, &actual).is_empty());
    assert_eq!(transcript::normalize(&actual[0])["result"]["session"], "<session>");
    assert_eq!(actual[1]["result"]["result"], "3");
}

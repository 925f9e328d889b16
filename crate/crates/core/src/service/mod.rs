//! Sessions around the interpreter: the operations every front end (HTTP,
//! stdio, CLI) shares.

pub mod http;
pub mod protocol;
pub mod stdio;
pub mod transcript;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calc::{init_calc, show, Calc, CalcError, Context, Origin, Position};
use crate::interpreter::{InputTacticResult, InputTermResult, Interp, NextStepResult};
use crate::knowledge::{Key, KnowledgeError, Model, Registry};
use crate::parser::{parse_formula, ParseError};
use crate::program::InputTactic;

/// Steps one `auto` request may take.
pub const AUTO_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    GuardFailed,
    SyntaxError,
    KeyNotFound,
    InvalidModel,
    SessionNotFound,
    NothingToUndo,
    StepLimit,
    InvalidRequest,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{code:?}: {message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    pub details: Value,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ServiceError { code, message: message.into(), details: Value::Null }
    }

    fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn to_json(&self) -> Value {
        let mut e = json!({ "code": self.code, "message": self.message });
        if !self.details.is_null() {
            e["details"] = self.details.clone();
        }
        e
    }
}

impl From<ParseError> for ServiceError {
    fn from(e: ParseError) -> Self {
        ServiceError::new(ErrorCode::SyntaxError, e.to_string()).with(json!({ "span": e.span() }))
    }
}

impl From<KnowledgeError> for ServiceError {
    fn from(e: KnowledgeError) -> Self {
        let code = match e {
            KnowledgeError::UnknownKey { .. } => ErrorCode::KeyNotFound,
            KnowledgeError::MissingItem(_) | KnowledgeError::UnexpectedItem(_) => ErrorCode::InvalidModel,
            _ => ErrorCode::Internal,
        };
        ServiceError::new(code, e.to_string())
    }
}

impl From<CalcError> for ServiceError {
    fn from(e: CalcError) -> Self {
        match e {
            CalcError::Knowledge(k) => k.into(),
            CalcError::GuardFailed(rs) => {
                let failed: Vec<Value> = rs
                    .iter()
                    .map(|r| json!({ "formula": show(&r.formula), "truth": r.truth }))
                    .collect();
                ServiceError::new(ErrorCode::GuardFailed, "preconditions not satisfied")
                    .with(json!({ "preconditions": failed }))
            }
            other => ServiceError::new(ErrorCode::Internal, other.to_string()),
        }
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintDetail {
    #[default]
    Full,
    TacticOnly,
    FormulaOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub problem: Key,
    pub calc: Calc,
    pub hint_detail: HintDetail,
    /// Snapshots taken before each visible step, newest last.
    history: Vec<Calc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepView {
    pub level: Vec<usize>,
    pub index: usize,
    pub tactic: String,
    pub formula: Option<String>,
    pub origin: Origin,
    pub hidden: bool,
    #[serde(rename = "unsafe")]
    pub unsafe_step: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelView {
    pub problem: String,
    pub method: String,
    pub program: String,
    pub path: String,
    pub act_arg: Option<String>,
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionState {
    pub session: String,
    pub problem: String,
    pub finished: bool,
    pub result: Option<String>,
    pub formula: Option<String>,
    pub cursor: Vec<usize>,
    pub steps: Vec<StepView>,
    /// One entry per level from the root down to the cursor.
    pub stack: Vec<LevelView>,
    pub hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptKind {
    FoundStep,
    SafeStep,
    UnsafeStep,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StepOutcome {
    Accepted {
        kind: AcceptKind,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
        state: SessionState,
    },
    Rejected {
        reason: String,
        hash: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hint {
    NextStep {
        #[serde(skip_serializing_if = "Option::is_none")]
        tactic: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        formula: Option<String>,
    },
    Finished {
        result: Option<String>,
    },
    NoHint {
        message: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        diagnostic: Option<String>,
    },
}

/// Stable fingerprint of a calculation.
pub fn state_hash(calc: &Calc) -> String {
    let bytes = serde_json::to_vec(calc).expect("calculations serialize");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn view(session: &Session) -> SessionState {
    let calc = &session.calc;
    let mut index: BTreeMap<Position, usize> = BTreeMap::new();
    let steps = calc
        .all_steps()
        .into_iter()
        .map(|(pos, s)| {
            let i = index.entry(pos.clone()).or_default();
            let v = StepView {
                level: pos.0,
                index: *i,
                tactic: s.tactic.input.to_string(),
                formula: s.formula.as_ref().map(show),
                origin: s.origin,
                hidden: s.hidden,
                unsafe_step: s.unsafe_step,
                assumptions: s.tactic.emitted.iter().map(show).collect(),
            };
            *i += 1;
            v
        })
        .collect();
    let cursor = calc.cursor();
    let stack = (0..=cursor.0.len())
        .map(|k| {
            let level = calc.level(&Position(cursor.0[..k].to_vec())).expect("cursor path");
            let ist = level.current_istate();
            LevelView {
                problem: level.problem.to_string(),
                method: level.method.to_string(),
                program: level.program.clone(),
                path: ist.path.to_string(),
                act_arg: ist.act_arg.as_ref().map(show),
                assumptions: level.current_ctx().assumptions.iter().map(|a| show(&a.term)).collect(),
            }
        })
        .collect();
    SessionState {
        session: session.id.clone(),
        problem: session.problem.to_string(),
        finished: calc.finished(),
        result: calc.result().map(show),
        formula: calc.current_formula().map(show),
        cursor: cursor.0,
        steps,
        stack,
        hash: state_hash(calc),
    }
}

/// Parses a model given as text under a fresh context.
pub fn parse_model(model: &BTreeMap<String, String>) -> ServiceResult<Model> {
    let ctx = Context::default();
    model
        .iter()
        .map(|(k, v)| {
            parse_formula(v, &ctx)
                .map(|t| (k.clone(), t))
                .map_err(|e| {
                    let span = e.span();
                    ServiceError::from(e).with(json!({ "item": k, "span": span }))
                })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct StartParams {
    pub problem: Vec<String>,
    #[serde(default)]
    pub method: Option<Vec<String>>,
    #[serde(default)]
    pub model: BTreeMap<String, String>,
    #[serde(default)]
    pub hint_detail: Option<HintDetail>,
}

/// In-memory session store. Requests for one session are serialised by its
/// lock; different sessions proceed in parallel.
pub struct Engine {
    registry: Registry,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl Engine {
    pub fn new(registry: Registry) -> Self {
        Engine { registry, sessions: Mutex::new(BTreeMap::new()), next_id: AtomicU64::new(1) }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table").len()
    }

    fn session(&self, id: &str) -> ServiceResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorCode::SessionNotFound, format!("no session `{id}`")))
    }

    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> ServiceResult<T>) -> ServiceResult<T> {
        let s = self.session(id)?;
        let mut guard: MutexGuard<'_, Session> = s.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }

    fn insert(&self, mut session: Session) -> String {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        session.id = id.clone();
        self.sessions.lock().expect("session table").insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    pub fn start_session(&self, p: &StartParams) -> ServiceResult<SessionState> {
        let problem = Key(p.problem.clone());
        let method = p.method.clone().map(Key);
        let model = parse_model(&p.model)?;
        let calc = init_calc(&self.registry, &problem, method.as_ref(), model)?;
        let session = Session {
            id: String::new(),
            problem,
            calc,
            hint_detail: p.hint_detail.unwrap_or_default(),
            history: Vec::new(),
        };
        let id = self.insert(session);
        self.state(&id)
    }

    pub fn state(&self, id: &str) -> ServiceResult<SessionState> {
        self.with_session(id, |s| Ok(view(s)))
    }

    pub fn input_term(&self, id: &str, src: &str) -> ServiceResult<StepOutcome> {
        self.with_session(id, |s| {
            let ctx = s.calc.current_level().current_ctx().clone();
            let t = parse_formula(src, &ctx)?;
            let interp = Interp::new(&self.registry);
            match interp.locate_input_term(&s.calc, &t) {
                InputTermResult::FoundStep(found) => {
                    if *found != s.calc {
                        s.history.push(std::mem::replace(&mut s.calc, *found));
                    }
                    Ok(StepOutcome::Accepted { kind: AcceptKind::FoundStep, warnings: vec![], state: view(s) })
                }
                InputTermResult::NotDerivable => Ok(StepOutcome::Rejected {
                    reason: format!("`{}` is not derivable from the current formula", show(&t)),
                    hash: state_hash(&s.calc),
                }),
            }
        })
    }

    pub fn input_tactic(&self, id: &str, src: &str) -> ServiceResult<StepOutcome> {
        let input = InputTactic::parse(src)?;
        self.with_session(id, |s| {
            let interp = Interp::new(&self.registry);
            let (ist, ctx, tac, kind) = match interp.locate_input_tactic(&s.calc, &input) {
                InputTacticResult::SafeStep(i, c, t) => (i, c, t, AcceptKind::SafeStep),
                InputTacticResult::UnsafeStep(i, c, t) => (i, c, t, AcceptKind::UnsafeStep),
                InputTacticResult::NotLocatable(reason) => {
                    return Ok(StepOutcome::Rejected { reason, hash: state_hash(&s.calc) })
                }
            };
            let mut next = s.calc.clone();
            let unsafe_step = kind == AcceptKind::UnsafeStep;
            interp.apply_tactic(&mut next, ist, ctx, tac, Origin::StudentTactic, unsafe_step)?;
            s.history.push(std::mem::replace(&mut s.calc, next));
            let warnings = if unsafe_step {
                vec![format!("{input} differs from the tactic the method suggests; check the result")]
            } else {
                vec![]
            };
            Ok(StepOutcome::Accepted { kind, warnings, state: view(s) })
        })
    }

    pub fn hint(&self, id: &str) -> ServiceResult<Hint> {
        self.with_session(id, |s| {
            let interp = Interp::new(&self.registry);
            Ok(match interp.find_next_step(&s.calc) {
                NextStepResult::NextStep(_, _, tac) => {
                    let tactic = Some(tac.input.to_string());
                    let formula = tac.result.as_ref().map(show);
                    match s.hint_detail {
                        HintDetail::Full => Hint::NextStep { tactic, formula },
                        HintDetail::TacticOnly => Hint::NextStep { tactic, formula: None },
                        HintDetail::FormulaOnly => Hint::NextStep { tactic: None, formula },
                    }
                }
                NextStepResult::EndProgram(_, tac) => Hint::Finished { result: tac.result.as_ref().map(show) },
                NextStepResult::Helpless(diagnostic) => {
                    Hint::NoHint { message: "no hint available".into(), diagnostic }
                }
            })
        })
    }

    /// Runs the method to its end. On `StepLimit` the session is unchanged.
    pub fn auto_complete(&self, id: &str, budget: Option<usize>) -> ServiceResult<SessionState> {
        let budget = budget.unwrap_or(AUTO_BUDGET);
        self.with_session(id, |s| {
            let interp = Interp::new(&self.registry);
            let mut calc = s.calc.clone();
            let mut history = Vec::new();
            let mut taken = 0;
            loop {
                let before = calc.clone();
                match interp.auto_step(&mut calc)? {
                    None => break,
                    Some(_) if taken == budget => {
                        return Err(ServiceError::new(
                            ErrorCode::StepLimit,
                            format!("no end reached within {budget} steps"),
                        ))
                    }
                    Some(_) => {
                        history.push(before);
                        taken += 1;
                    }
                }
            }
            s.history.extend(history);
            s.calc = calc;
            Ok(view(s))
        })
    }

    pub fn undo(&self, id: &str) -> ServiceResult<SessionState> {
        self.with_session(id, |s| {
            let prev = s
                .history
                .pop()
                .ok_or_else(|| ServiceError::new(ErrorCode::NothingToUndo, "no step to undo"))?;
            s.calc = prev;
            Ok(view(s))
        })
    }

    /// Serialises a session, history included.
    pub fn save_session(&self, id: &str) -> ServiceResult<String> {
        self.with_session(id, |s| {
            serde_json::to_string(s).map_err(|e| ServiceError::new(ErrorCode::Internal, e.to_string()))
        })
    }

    /// Restores a saved session under a fresh id.
    pub fn load_session(&self, saved: &str) -> ServiceResult<String> {
        let session: Session = serde_json::from_str(saved)
            .map_err(|e| ServiceError::new(ErrorCode::InvalidRequest, format!("bad session file: {e}")))?;
        Ok(self.insert(session))
    }
}

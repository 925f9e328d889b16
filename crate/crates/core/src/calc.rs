//! Calculations: the tree of steps a session builds, one level per
//! (sub)problem, and the logical context carried along with it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::interpreter::Interp;
use crate::knowledge::{Key, KnowledgeError, Model, PreconditionResult, ProblemPattern, Registry};
use crate::parser::{print_term, print_term_debug};
use crate::program::{InternalTactic, Istate, TacticOp};
use crate::rewrite::{Rewriter, Truth};
use crate::term::{apply_subst, consts, free_vars, Subst, Term, TypeTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Precondition,
    Rewrite,
    Inherited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption {
    pub term: Term,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("assumption `{0}` is not a boolean formula")]
    NotBool(String),
}

/// Logical context: recorded variable types and assumptions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Context {
    pub theory: String,
    pub type_constraints: BTreeMap<String, TypeTag>,
    pub assumptions: Vec<Assumption>,
}

const BOOL_HEADS: &[&str] = &[
    consts::EQ,
    consts::NEQ,
    consts::LESS,
    consts::LESS_EQ,
    consts::GREATER,
    consts::GREATER_EQ,
    consts::AND,
    consts::OR,
    consts::NOT,
    consts::TRUE,
    consts::FALSE,
    "is_num",
];

pub(crate) fn is_bool(t: &Term) -> bool {
    match t {
        Term::Free(_, TypeTag::Bool) => true,
        _ => t.head_const().is_some_and(|h| BOOL_HEADS.contains(&h)),
    }
}

impl Context {
    pub fn new(theory: impl Into<String>) -> Context {
        Context { theory: theory.into(), ..Default::default() }
    }

    pub fn has_assumption(&self, t: &Term) -> bool {
        self.assumptions.iter().any(|a| &a.term == t)
    }

    /// Records the type of a variable; the first declaration wins.
    pub fn declare_constraint(&mut self, name: &str, ty: TypeTag) {
        self.type_constraints.entry(name.to_string()).or_insert(ty);
    }

    /// Adds assumptions not yet present. Returns how many were new.
    pub fn insert_assumptions(&mut self, asms: &[Term], provenance: Provenance) -> Result<usize, ContextError> {
        if let Some(bad) = asms.iter().find(|a| !is_bool(a)) {
            return Err(ContextError::NotBool(print_term_debug(bad)));
        }
        let mut added = 0;
        for a in asms {
            if !self.has_assumption(a) {
                self.assumptions.push(Assumption { term: a.clone(), provenance });
                added += 1;
            }
        }
        Ok(added)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    StudentTerm,
    StudentTactic,
    Engine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// The produced formula; `None` while a subproblem is still open.
    pub formula: Option<Term>,
    pub tactic: InternalTactic,
    pub istate_after: Istate,
    pub ctx_after: Context,
    pub hidden: bool,
    pub origin: Origin,
    /// Set for a step applied by a tactic the program only matched by name.
    pub unsafe_step: bool,
    pub sub: Option<Box<Level>>,
}

/// One (sub)problem with the program solving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub problem: Key,
    pub method: Key,
    pub program: String,
    pub model: Model,
    pub start: Option<Term>,
    pub init_istate: Istate,
    pub init_ctx: Context,
    pub steps: Vec<Step>,
    pub result: Option<Term>,
}

impl Level {
    pub fn finished(&self) -> bool {
        self.result.is_some()
    }

    pub fn current_istate(&self) -> &Istate {
        self.steps.last().map(|s| &s.istate_after).unwrap_or(&self.init_istate)
    }

    pub fn current_ctx(&self) -> &Context {
        self.steps.last().map(|s| &s.ctx_after).unwrap_or(&self.init_ctx)
    }

    /// The newest formula of this level, falling back to the start formula.
    pub fn current_formula(&self) -> Option<&Term> {
        self.steps
            .iter()
            .rev()
            .find_map(|s| s.formula.as_ref())
            .or(self.start.as_ref())
    }

    fn open_child(&self) -> Option<&Level> {
        let sub = self.steps.last()?.sub.as_deref()?;
        (!sub.finished()).then_some(sub)
    }

    fn open_child_mut(&mut self) -> Option<&mut Level> {
        let sub = self.steps.last_mut()?.sub.as_deref_mut()?;
        (!sub.finished()).then_some(sub)
    }
}

/// Step indices from the root level down to a level, one per SubProblem step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Position(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalcError {
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("preconditions not satisfied: {}", failing(.0))]
    GuardFailed(Vec<PreconditionResult>),
    #[error("not a SubProblem tactic")]
    NotSubProblem,
    #[error("SubProblem expects {expected} arguments, got {got}")]
    SubProblemArity { expected: usize, got: usize },
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("tactic failed: {0}")]
    TacticFailed(String),
}

fn failing(rs: &[PreconditionResult]) -> String {
    rs.iter()
        .filter(|r| r.truth != Truth::True)
        .map(|r| format!("{} ({:?})", print_term_debug(&r.formula), r.truth))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A calculation: the root level and its nested subproblem levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calc {
    pub root: Level,
}

/// Builds a level for `problem` solved by `method`, checking the guard.
pub fn new_level(
    registry: &Registry,
    problem: &Key,
    method: Option<&Key>,
    model: Model,
    inherited: Option<&Context>,
) -> Result<Level, CalcError> {
    let pattern = registry.problem(problem)?;
    let method = match method {
        Some(k) => registry.method(k)?,
        None => registry.method_for(problem)?,
    };
    let prog = registry.program(&method.program)?;
    let checks = registry.check_preconditions(pattern, &model)?;
    if checks.iter().any(|r| r.truth != Truth::True) {
        return Err(CalcError::GuardFailed(checks));
    }
    let theory = pattern.id.0.first().cloned().unwrap_or_default();
    let mut ctx = Context::new(theory);
    declare_model(&mut ctx, pattern, &model);
    if let Some(caller) = inherited {
        let child_vars: BTreeSet<String> = model.values().flat_map(free_vars).collect();
        let shared: Vec<Term> = caller
            .assumptions
            .iter()
            .filter(|a| free_vars(&a.term).iter().any(|v| child_vars.contains(v)))
            .map(|a| a.term.clone())
            .collect();
        ctx.insert_assumptions(&shared, Provenance::Inherited)?;
    }
    let pre: Vec<Term> = checks.into_iter().map(|r| r.formula).collect();
    ctx.insert_assumptions(&pre, Provenance::Precondition)?;
    let env: Subst = prog
        .params
        .iter()
        .map(|p| (p.clone(), model.get(p).cloned().unwrap_or_else(|| Term::free(p.clone()))))
        .collect();
    let init_istate = Istate::fresh(env);
    let start = Interp::new(registry).start_formula(prog, &ctx, &init_istate);
    Ok(Level {
        problem: problem.clone(),
        method: method.id.clone(),
        program: prog.name.clone(),
        model,
        start,
        init_istate,
        init_ctx: ctx,
        steps: Vec::new(),
        result: None,
    })
}

fn declare_model(ctx: &mut Context, pattern: &ProblemPattern, model: &Model) {
    for item in pattern.given.iter().chain(&pattern.find) {
        ctx.declare_constraint(&item.name, item.ty.clone());
        if let Some(v) = model.get(&item.name) {
            for x in free_vars(v) {
                ctx.declare_constraint(&x, TypeTag::Real);
            }
        }
    }
}

/// Starts a calculation after checking the problem's preconditions.
pub fn init_calc(registry: &Registry, problem: &Key, method: Option<&Key>, model: Model) -> Result<Calc, CalcError> {
    Ok(Calc { root: new_level(registry, problem, method, model, None)? })
}

/// Opens the child level called for by a SubProblem tactic.
pub fn enter_subproblem(registry: &Registry, caller_ctx: &Context, tac: &InternalTactic) -> Result<Level, CalcError> {
    let TacticOp::SubProblem { problem, method, args, .. } = &tac.op else {
        return Err(CalcError::NotSubProblem);
    };
    let pattern = registry.problem(problem)?;
    if args.len() != pattern.given.len() {
        return Err(CalcError::SubProblemArity { expected: pattern.given.len(), got: args.len() });
    }
    let model: Model = pattern.given.iter().map(|i| i.name.clone()).zip(args.iter().cloned()).collect();
    new_level(registry, problem, Some(method), model, Some(caller_ctx))
}

/// Transfers a finished subproblem's result to its caller: assumptions
/// mentioning a caller variable are merged, and elements of a result list
/// that evaluate to False under the caller's assumptions are dropped.
pub fn subpbl_to_caller(
    registry: &Registry,
    child_ctx: &Context,
    caller_ctx: &Context,
    caller_vars: &BTreeSet<String>,
    child_result: &Term,
) -> (Context, Term) {
    let rw = Rewriter::new(registry);
    let solver = registry.default_solver();
    let contradicts = |t: &Term| rw.eval_condition(&solver, caller_ctx, t).truth == Truth::False;
    let result = match child_result.dest_list() {
        Some(items) => Term::list(items.into_iter().filter(|t| !contradicts(t)).cloned()),
        None => child_result.clone(),
    };
    let mut ctx = caller_ctx.clone();
    let merged: Vec<Term> = child_ctx
        .assumptions
        .iter()
        .filter(|a| free_vars(&a.term).iter().any(|v| caller_vars.contains(v)))
        .map(|a| a.term.clone())
        .collect();
    ctx.insert_assumptions(&merged, Provenance::Inherited).expect("assumptions were boolean in the child");
    (ctx, result)
}

impl Calc {
    /// Position of the innermost open level.
    pub fn cursor(&self) -> Position {
        let mut pos = Vec::new();
        let mut level = &self.root;
        while let Some(child) = level.open_child() {
            pos.push(level.steps.len() - 1);
            level = child;
        }
        Position(pos)
    }

    pub fn level(&self, pos: &Position) -> Option<&Level> {
        let mut level = &self.root;
        for &i in &pos.0 {
            level = level.steps.get(i)?.sub.as_deref()?;
        }
        Some(level)
    }

    pub fn level_mut(&mut self, pos: &Position) -> Option<&mut Level> {
        let mut level = &mut self.root;
        for &i in &pos.0 {
            level = level.steps.get_mut(i)?.sub.as_deref_mut()?;
        }
        Some(level)
    }

    pub fn current_level(&self) -> &Level {
        let mut level = &self.root;
        while let Some(child) = level.open_child() {
            level = child;
        }
        level
    }

    pub fn current_level_mut(&mut self) -> &mut Level {
        fn go(level: &mut Level) -> &mut Level {
            if level.open_child().is_some() {
                go(level.open_child_mut().expect("checked"))
            } else {
                level
            }
        }
        go(&mut self.root)
    }

    pub fn finished(&self) -> bool {
        self.root.finished()
    }

    pub fn result(&self) -> Option<&Term> {
        self.root.result.as_ref()
    }

    /// The newest formula at the cursor.
    pub fn current_formula(&self) -> Option<&Term> {
        self.current_level().current_formula()
    }

    /// All steps in execution order, each with its level position.
    pub fn all_steps(&self) -> Vec<(Position, &Step)> {
        fn go<'a>(level: &'a Level, pos: &mut Vec<usize>, out: &mut Vec<(Position, &'a Step)>) {
            for (i, s) in level.steps.iter().enumerate() {
                out.push((Position(pos.clone()), s));
                if let Some(sub) = &s.sub {
                    pos.push(i);
                    go(sub, pos, out);
                    pos.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// `(level position, step index)` of every step, in execution order.
    pub fn step_refs(&self) -> Vec<(Position, usize)> {
        let mut out = Vec::new();
        let mut seen: std::collections::BTreeMap<Position, usize> = Default::default();
        for (pos, _) in self.all_steps() {
            let i = seen.entry(pos.clone()).or_default();
            out.push((pos, *i));
            *i += 1;
        }
        out
    }

    /// Formulas of the visible steps, in order.
    pub fn visible_formulas(&self) -> Vec<&Term> {
        self.all_steps()
            .into_iter()
            .filter(|(_, s)| !s.hidden)
            .filter_map(|(_, s)| s.formula.as_ref())
            .collect()
    }

    /// Tree-shaped JSON export; formulas are printed as text.
    pub fn export(&self) -> Value {
        json!({
            "cursor": self.cursor().0,
            "finished": self.finished(),
            "result": self.result().map(show),
            "root": export_level(&self.root),
        })
    }
}

pub fn show(t: &Term) -> String {
    print_term(t).unwrap_or_else(|_| print_term_debug(t))
}

fn export_level(level: &Level) -> Value {
    let steps: Vec<Value> = level
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut v = json!({
                "index": i,
                "formula": s.formula.as_ref().map(show),
                "tactic": s.tactic.input.to_string(),
                "hidden": s.hidden,
                "origin": s.origin,
                "unsafe": s.unsafe_step,
                "assumptions": s.ctx_after.assumptions.iter().map(|a| show(&a.term)).collect::<Vec<_>>(),
            });
            if let Some(sub) = &s.sub {
                v["sub"] = export_level(sub);
            }
            v
        })
        .collect();
    json!({
        "problem": level.problem.0,
        "method": level.method.0,
        "model": level.model.iter().map(|(k, v)| (k.clone(), Value::String(show(v)))).collect::<serde_json::Map<_, _>>(),
        "start": level.start.as_ref().map(show),
        "steps": steps,
        "result": level.result.as_ref().map(show),
    })
}

/// Free variables of a level's model and start formula.
pub fn level_vars(level: &Level) -> BTreeSet<String> {
    let mut vars: BTreeSet<String> = level.model.values().flat_map(free_vars).collect();
    if let Some(s) = &level.start {
        vars.extend(free_vars(s));
    }
    vars.extend(level.init_istate.env.iter().flat_map(|(_, v)| free_vars(v)));
    vars
}

/// Substitutes a level's model into a term over its given items.
pub fn instantiate_model(level: &Level, t: &Term) -> Term {
    let s: Subst = level.model.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    apply_subst(&s, t)
}

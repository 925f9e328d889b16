//! Lucas-Interpretation: resumable scanning of a program body for its next
//! tactic, and the three operations over calculations built on it.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::calc::{enter_subproblem, level_vars, subpbl_to_caller, Calc, CalcError, Context, Origin, Position, Provenance, Step};
use crate::knowledge::{Key, Registry};
use crate::program::{
    self, associate, decode, Association, InputTactic, InternalTactic, Istate, Node, ProgramDef, TacticOp,
    LET_BODY, LET_EXPR,
};
use crate::rewrite::{calculate_traced, CalcOp, RewriteError, Rewriter, RuleSet, Truth};
use crate::term::{apply_subst, at_location, consts, Lrd, Path, Subst, Term};

/// Bound on scanning work (node visits and loop iterations) per scan.
const SCAN_FUEL: usize = 20_000;
/// Tactics `locate_input_tactic` may scan over before giving up.
pub const SKIP_BUDGET: usize = 10;
/// Auto-applied steps `locate_input_term` may search through.
pub const SEARCH_STEPS: usize = 50;
/// SubProblem levels `locate_input_term` may enter.
pub const SEARCH_DESCENTS: usize = 3;

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum ExprVal {
    TermVal(Option<Term>),
    RejectTac,
    AcceptTac(Istate, Context, InternalTactic),
    ScanError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextStepResult {
    NextStep(Istate, Context, InternalTactic),
    /// No program tactic applies; carries a diagnostic when the engine, not
    /// the student, caused the dead end.
    Helpless(Option<String>),
    EndProgram(Istate, InternalTactic),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputTacticResult {
    SafeStep(Istate, Context, InternalTactic),
    UnsafeStep(Istate, Context, InternalTactic),
    NotLocatable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputTermResult {
    FoundStep(Box<Calc>),
    NotDerivable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Applied {
    Step,
    /// The tactic opened a subproblem level.
    SubProblem,
}

#[allow(clippy::large_enum_variant)]
enum Flow {
    /// Completed; the value is the scanner's current `act_arg`.
    Val,
    Reject,
    Accept(Istate, Context, InternalTactic),
    Error(String),
    Abort,
}

#[allow(clippy::large_enum_variant)]
enum Filter {
    Accept,
    /// Accept with a replacement tactic and context.
    Replace(InternalTactic, Context),
    Skip,
    Abort,
}

type FilterFn<'f> = dyn FnMut(&InternalTactic, &Context) -> Filter + 'f;

/// The program body wrapped so that the body sits at path `[R]`.
fn wrapped(prog: &ProgramDef) -> Term {
    Term::app(Term::constant(prog.name.clone()), prog.body.clone())
}

fn body_path() -> Path {
    Path(vec![Lrd::R])
}

fn is_program_head(t: &Term) -> bool {
    matches!(t.head_const(), Some(n) if n == consts::LET
        || program::TACTIC_NAMES.contains(&n)
        || program::TACTICAL_NAMES.contains(&n))
}

fn name_of(t: &Term) -> Result<String, String> {
    match t {
        Term::Str(s) | Term::Free(s, _) | Term::Const(s, _) => Ok(s.clone()),
        _ => Err(format!("expected a name, found `{}`", crate::parser::print_term_debug(t))),
    }
}

fn names_of(t: &Term) -> Result<Vec<String>, String> {
    let items = t.dest_list().ok_or_else(|| "expected a list of names".to_string())?;
    items.into_iter().map(name_of).collect()
}

/// `[(''bdv'', x), ...]` as a substitution.
fn inst_of(t: &Term) -> Result<Subst, String> {
    let items = t.dest_list().ok_or_else(|| "expected an instantiation list".to_string())?;
    items
        .into_iter()
        .map(|p| match p.dest_binop(consts::PAIR) {
            Some((n, v)) => Ok((name_of(n)?, v.clone())),
            None => Err("expected a (name, term) pair".to_string()),
        })
        .collect()
}

/// Flattens a ∨- or ∧-chain into its elements, left to right.
fn flatten(t: &Term, out: &mut Vec<Term>) {
    for op in [consts::OR, consts::AND] {
        if let Some((a, b)) = t.dest_binop(op) {
            flatten(a, out);
            flatten(b, out);
            return;
        }
    }
    out.push(t.clone());
}

/// Interpreter over the contents of a registry.
pub struct Interp<'r> {
    reg: &'r Registry,
    rw: Rewriter<'r>,
    prog_expr: Option<&'r RuleSet>,
    cond_rs: RuleSet,
}

struct Scanner<'a, 'r> {
    interp: &'a Interp<'r>,
    prog: Term,
    ctx: &'a Context,
    env: Subst,
    cur: Option<Term>,
    fuel: usize,
    filter: Option<&'a mut FilterFn<'a>>,
    warnings: Vec<String>,
}

impl Scanner<'_, '_> {
    fn node(&self, path: &Path) -> Result<Term, String> {
        at_location(path, &self.prog).cloned().map_err(|e| e.to_string())
    }

    fn burn(&mut self) -> Result<(), String> {
        if self.fuel == 0 {
            return Err("scan budget exhausted".into());
        }
        self.fuel -= 1;
        Ok(())
    }

    fn set_arg(&mut self, arg: Option<&Term>) -> Result<(), String> {
        if let Some(a) = arg {
            self.cur = Some(self.interp.eval(&self.env, a)?);
        }
        Ok(())
    }

    /// Rebinds a variable trailing argument to the current value.
    fn rebind(&mut self, arg: Option<&Term>) {
        if let (Some(Term::Free(v, _)), Some(cur)) = (arg, &self.cur) {
            self.env.insert(v.clone(), cur.clone());
        }
    }

    fn cond(&mut self, c: &Term) -> Result<bool, String> {
        let t = self.interp.eval(&self.env, c)?;
        match self.interp.rw.eval_condition(&self.interp.cond_rs, self.ctx, &t).truth {
            Truth::True => Ok(true),
            Truth::False => Ok(false),
            Truth::Unknown => {
                self.warnings.push(format!("condition `{}` undecided; taken as False", crate::calc::show(&t)));
                Ok(false)
            }
        }
    }

    fn scan_dn(&mut self, path: &Path) -> Flow {
        match self.scan_dn_inner(path) {
            Ok(f) => f,
            Err(e) => Flow::Error(e),
        }
    }

    fn scan_dn_inner(&mut self, path: &Path) -> Result<Flow, String> {
        self.burn()?;
        let t = self.node(path)?;
        let node = decode(&t);
        let n = node.spine_len();
        let op = |i: usize| path.join(&program::arg_path(i, n));
        Ok(match node {
            Node::Tactic { name, args, on } => self.tactic(path, name, &args, on)?,
            Node::Let { var, expr, .. } => {
                if is_program_head(expr) {
                    match self.scan_dn(&path.join(&LET_EXPR)) {
                        Flow::Val => {}
                        other => return Ok(other),
                    }
                } else {
                    self.cur = Some(self.interp.eval(&self.env, expr)?);
                }
                self.bind(var);
                self.scan_dn(&path.join(&LET_BODY))
            }
            Node::Chain { arg, .. } => {
                self.set_arg(arg)?;
                match self.scan_dn(&op(0)) {
                    Flow::Val => self.scan_dn(&op(1)),
                    other => other,
                }
            }
            Node::Or { arg, .. } => {
                self.set_arg(arg)?;
                let saved = self.cur.clone();
                match self.scan_dn(&op(0)) {
                    Flow::Reject => {
                        self.cur = saved;
                        self.scan_dn(&op(1))
                    }
                    other => other,
                }
            }
            Node::Try { arg, .. } => {
                self.set_arg(arg)?;
                let saved = self.cur.clone();
                match self.scan_dn(&op(0)) {
                    Flow::Reject => {
                        self.cur = saved;
                        Flow::Val
                    }
                    other => other,
                }
            }
            Node::Repeat { arg, .. } => {
                self.set_arg(arg)?;
                self.repeat_loop(path, &op(0))?
            }
            Node::While { arg, .. } => {
                self.set_arg(arg)?;
                self.while_loop(path)?
            }
            Node::If { cond, arg, .. } => {
                self.set_arg(arg)?;
                self.rebind(arg);
                if self.cond(cond)? {
                    self.scan_dn(&op(1))
                } else {
                    self.scan_dn(&op(2))
                }
            }
            Node::Expr(e) => {
                self.cur = Some(self.interp.eval(&self.env, e)?);
                Flow::Val
            }
        })
    }

    fn bind(&mut self, var: &str) {
        if let Some(v) = &self.cur {
            self.env.insert(var.to_string(), v.clone());
        }
    }

    fn repeat_loop(&mut self, _path: &Path, body: &Path) -> Result<Flow, String> {
        loop {
            self.burn()?;
            let before = self.cur.clone();
            match self.scan_dn(body) {
                Flow::Reject => {
                    self.cur = before;
                    return Ok(Flow::Val);
                }
                Flow::Val if self.cur == before => return Ok(Flow::Val),
                Flow::Val => {}
                other => return Ok(other),
            }
        }
    }

    fn while_loop(&mut self, path: &Path) -> Result<Flow, String> {
        let t = self.node(path)?;
        let node = decode(&t);
        let Node::While { cond, arg, .. } = node else {
            return Err("While expected".into());
        };
        let body = path.join(&program::arg_path(1, node.spine_len()));
        loop {
            self.burn()?;
            self.rebind(arg);
            if !self.cond(cond)? {
                return Ok(Flow::Val);
            }
            let before = self.cur.clone();
            match self.scan_dn(&body) {
                // a loop body that changes nothing would spin forever
                Flow::Val if self.cur == before => return Ok(Flow::Reject),
                Flow::Val => {}
                other => return Ok(other),
            }
        }
    }

    fn tactic(&mut self, path: &Path, name: &str, args: &[&Term], on: Option<&Term>) -> Result<Flow, String> {
        let Some((input, op, on)) = self.interp.instantiate(name, args, on, &self.env, self.cur.as_ref())? else {
            return Ok(Flow::Reject);
        };
        let Some((tac, ctx)) = self.interp.apply(input, op, on, self.ctx)? else {
            return Ok(Flow::Reject);
        };
        let (tac, ctx) = match self.filter.as_mut().map(|f| f(&tac, &ctx)) {
            None | Some(Filter::Accept) => (tac, ctx),
            Some(Filter::Replace(t, c)) => (t, c),
            Some(Filter::Skip) => return Ok(Flow::Reject),
            Some(Filter::Abort) => return Ok(Flow::Abort),
        };
        let ist = Istate { path: path.clone(), env: self.env.clone(), act_arg: tac.result.clone(), finished: false };
        Ok(Flow::Accept(ist, ctx, tac))
    }

    /// The innermost control node having `child` as an operand.
    fn parent_of(&self, child: &Path) -> Result<(Path, Vec<Lrd>), String> {
        for k in (1..child.len()).rev() {
            // function parts of an application are partial spines, not nodes
            if child.0[k - 1] == Lrd::L {
                continue;
            }
            let parent = Path(child.0[..k].to_vec());
            let rel = child.0[k..].to_vec();
            let t = self.node(&parent)?;
            let node = decode(&t);
            let is_operand = node.operand_paths().contains(&rel)
                || (matches!(node, Node::Let { .. }) && rel == LET_EXPR);
            if is_operand {
                return Ok((parent, rel));
            }
        }
        Err(format!("path {child} does not address a program operand"))
    }

    fn go_scan_up(&mut self, from: &Path, mut flow: Flow) -> Flow {
        let mut child = from.clone();
        loop {
            if child.len() <= 1 {
                return flow;
            }
            let (parent, rel) = match self.parent_of(&child) {
                Ok(p) => p,
                Err(e) => return Flow::Error(e),
            };
            flow = match self.scan_up(&parent, &rel, flow) {
                Ok(f) => f,
                Err(e) => Flow::Error(e),
            };
            match flow {
                Flow::Val | Flow::Reject => child = parent,
                _ => return flow,
            }
        }
    }

    fn scan_up(&mut self, parent: &Path, rel: &[Lrd], flow: Flow) -> Result<Flow, String> {
        self.burn()?;
        let t = self.node(parent)?;
        let node = decode(&t);
        let n = node.spine_len();
        let op = |i: usize| parent.join(&program::arg_path(i, n));
        let is = |i: usize| rel == program::arg_path(i, n).as_slice();
        Ok(match (node, flow) {
            (Node::Let { var, .. }, Flow::Val) if rel == LET_EXPR => {
                self.bind(var);
                self.scan_dn(&parent.join(&LET_BODY))
            }
            (Node::Chain { .. }, Flow::Val) if is(0) => self.scan_dn(&op(1)),
            (Node::Or { .. }, Flow::Reject) if is(0) => self.scan_dn(&op(1)),
            (Node::Try { .. }, Flow::Reject) => Flow::Val,
            (Node::Repeat { .. }, Flow::Reject) => Flow::Val,
            (Node::Repeat { .. }, Flow::Val) => self.repeat_loop(parent, &op(0))?,
            (Node::While { .. }, Flow::Val) => self.while_loop(parent)?,
            (_, flow) => flow,
        })
    }

    fn to_expr_val(&self, flow: Flow) -> ExprVal {
        match flow {
            Flow::Val => ExprVal::TermVal(self.cur.clone()),
            Flow::Reject | Flow::Abort => ExprVal::RejectTac,
            Flow::Accept(i, c, t) => ExprVal::AcceptTac(i, c, t),
            Flow::Error(e) => ExprVal::ScanError(e),
        }
    }
}

impl<'r> Interp<'r> {
    pub fn new(reg: &'r Registry) -> Self {
        Interp {
            reg,
            rw: Rewriter::new(reg),
            prog_expr: reg.ruleset("prog_expr").ok(),
            cond_rs: reg.default_solver(),
        }
    }

    pub fn registry(&self) -> &'r Registry {
        self.reg
    }

    /// Evaluates a program expression: environment substitution, then
    /// normalisation by the `prog_expr` rule set.
    fn eval(&self, env: &Subst, t: &Term) -> Result<Term, String> {
        let t = apply_subst(env, t);
        match self.prog_expr {
            Some(rs) => self
                .rw
                .normalize(rs, &Context::default(), &t)
                .map_err(|e| format!("cannot evaluate `{}`: {e}", crate::calc::show(&t))),
            None => Ok(t),
        }
    }

    /// Resolves a tactic's arguments. `None` when there is no term to act on.
    #[allow(clippy::type_complexity)]
    fn instantiate(
        &self,
        name: &str,
        args: &[&Term],
        on: Option<&Term>,
        env: &Subst,
        cur: Option<&Term>,
    ) -> Result<Option<(InputTactic, TacticOp, Option<Term>)>, String> {
        let args: Vec<Term> = args.iter().map(|a| self.eval(env, a)).collect::<Result<_, _>>()?;
        let on = match on {
            Some(t) => Some(self.eval(env, t)?),
            None => cur.cloned(),
        };
        let rule = |n: &Term| -> Result<String, String> {
            let n = name_of(n)?;
            self.reg.rule(&n).map_err(|e| e.to_string())?;
            Ok(n)
        };
        let set = |n: &Term| -> Result<String, String> {
            let n = name_of(n)?;
            self.reg.ruleset(&n).map_err(|e| e.to_string())?;
            Ok(n)
        };
        let op = match name {
            program::CALCULATE => {
                let n = name_of(&args[0])?;
                TacticOp::Calculate(CalcOp::from_name(&n).ok_or_else(|| format!("unknown calculation `{n}`"))?)
            }
            program::REWRITE => TacticOp::Rewrite { rule: rule(&args[0])?, inst: Subst::new() },
            program::REWRITE_INST => TacticOp::Rewrite { rule: rule(&args[1])?, inst: inst_of(&args[0])? },
            program::REWRITE_SET => TacticOp::RewriteSet { set: set(&args[0])?, inst: Subst::new() },
            program::REWRITE_SET_INST => TacticOp::RewriteSet { set: set(&args[1])?, inst: inst_of(&args[0])? },
            program::OR_TO_LIST => TacticOp::OrToList,
            program::SUBSTITUTE => {
                let eqs = args[0].dest_list().ok_or("Substitute expects a list of equations")?;
                TacticOp::Substitute(eqs.into_iter().cloned().collect())
            }
            program::TAKE => TacticOp::Take,
            program::SUBPROBLEM => {
                let (theory, rest) = args[0].dest_binop(consts::PAIR).ok_or("SubProblem expects (theory, problem, method)")?;
                let (pbl, met) = rest.dest_binop(consts::PAIR).ok_or("SubProblem expects (theory, problem, method)")?;
                let problem = Key(names_of(pbl)?);
                let method = Key(names_of(met)?);
                self.reg.problem(&problem).map_err(|e| e.to_string())?;
                self.reg.method(&method).map_err(|e| e.to_string())?;
                let call_args = args[1].dest_list().ok_or("SubProblem expects a list of arguments")?;
                TacticOp::SubProblem {
                    theory: name_of(theory)?,
                    problem,
                    method,
                    args: call_args.into_iter().cloned().collect(),
                }
            }
            other => return Err(format!("unknown tactic `{other}`")),
        };
        let needs_on = !matches!(op, TacticOp::Take | TacticOp::SubProblem { .. });
        if needs_on && on.is_none() {
            return Ok(None);
        }
        Ok(Some((InputTactic { name: name.to_string(), args }, op, on)))
    }

    /// Runs a tactic's effect. `None` when it is not applicable.
    fn apply(
        &self,
        input: InputTactic,
        op: TacticOp,
        on: Option<Term>,
        ctx: &Context,
    ) -> Result<Option<(InternalTactic, Context)>, String> {
        let mut ctx = ctx.clone();
        let rewrite_err = |e: RewriteError| e.to_string();
        let (result, emitted) = match &op {
            TacticOp::Calculate(c) => match calculate_traced(*c, on.as_ref().expect("checked")) {
                Ok(Some((r, _))) => (Some(r), vec![]),
                Ok(None) | Err(RewriteError::DomainError(_)) => return Ok(None),
                Err(e) => return Err(rewrite_err(e)),
            },
            TacticOp::Rewrite { rule, inst } => {
                let rule = self.reg.rule(rule).map_err(|e| e.to_string())?;
                match self.rw.rewrite_single_inst(rule, inst, &ctx, on.as_ref().expect("checked")).map_err(rewrite_err)? {
                    Some(r) => (Some(r.new_term), r.emitted_assumptions),
                    None => return Ok(None),
                }
            }
            TacticOp::RewriteSet { set, inst } => {
                let rs = self.reg.ruleset(set).map_err(|e| e.to_string())?;
                match self.rw.rewrite_set_inst(rs, inst, &ctx, on.as_ref().expect("checked")).map_err(rewrite_err)? {
                    Some(r) => (Some(r.new_term), r.emitted_assumptions),
                    None => return Ok(None),
                }
            }
            TacticOp::OrToList => {
                let t = on.as_ref().expect("checked");
                if t.dest_list().is_some() || !crate::calc::is_bool(t) {
                    return Ok(None);
                }
                let mut items = Vec::new();
                flatten(t, &mut items);
                (Some(Term::list(items)), vec![])
            }
            TacticOp::Substitute(eqs) => {
                let s: Subst = eqs
                    .iter()
                    .filter_map(|e| match e.dest_binop(consts::EQ) {
                        Some((Term::Free(v, _), r)) => Some((v.clone(), r.clone())),
                        _ => None,
                    })
                    .collect();
                let t = on.as_ref().expect("checked");
                let r = apply_subst(&s, t);
                if &r == t {
                    return Ok(None);
                }
                (Some(r), vec![])
            }
            TacticOp::Take => (Some(input.args[0].clone()), vec![]),
            TacticOp::SubProblem { .. } => (None, vec![]),
            TacticOp::End => (on.clone(), vec![]),
        };
        ctx.insert_assumptions(&emitted, Provenance::Rewrite).map_err(|e| e.to_string())?;
        Ok(Some((InternalTactic { input, op, on, result, emitted }, ctx)))
    }

    /// Instantiates and applies a student's tactic to `on`.
    pub fn apply_input(
        &self,
        input: &InputTactic,
        on: Option<&Term>,
        ctx: &Context,
    ) -> Result<Option<(InternalTactic, Context)>, String> {
        let args: Vec<&Term> = input.args.iter().collect();
        let expected = program::tactic_arity(&input.name).ok_or_else(|| format!("unknown tactic `{}`", input.name))?;
        if args.len() != expected {
            return Err(format!("{} expects {expected} arguments", input.name));
        }
        match self.instantiate(&input.name, &args, None, &Subst::new(), on)? {
            Some((inp, op, on)) => self.apply(inp, op, on, ctx),
            None => Ok(None),
        }
    }

    fn scanner<'a>(&'a self, prog: &ProgramDef, ctx: &'a Context, ist: &Istate) -> Scanner<'a, 'r> {
        Scanner {
            interp: self,
            prog: wrapped(prog),
            ctx,
            env: ist.env.clone(),
            cur: ist.act_arg.clone(),
            fuel: SCAN_FUEL,
            filter: None,
            warnings: Vec::new(),
        }
    }

    fn run(&self, sc: &mut Scanner<'_, 'r>, ist: &Istate) -> Flow {
        if ist.finished {
            Flow::Val
        } else if ist.path.is_empty() {
            sc.scan_dn(&body_path())
        } else {
            sc.go_scan_up(&ist.path, Flow::Val)
        }
    }

    /// Finds the next tactic in execution order from `ist`.
    pub fn scan_to_tactic(&self, prog: &ProgramDef, ctx: &Context, ist: &Istate) -> ExprVal {
        let mut sc = self.scanner(prog, ctx, ist);
        let flow = self.run(&mut sc, ist);
        sc.to_expr_val(flow)
    }

    /// Top-down scan of the node at `path` (a path into the wrapped body,
    /// starting with `R`).
    pub fn scan_dn(&self, prog: &ProgramDef, ctx: &Context, ist: &Istate, path: &Path) -> ExprVal {
        let mut sc = self.scanner(prog, ctx, ist);
        let flow = sc.scan_dn(path);
        sc.to_expr_val(flow)
    }

    /// Resumes after the tactic at `ist.path` produced `ist.act_arg`.
    pub fn go_scan_up(&self, prog: &ProgramDef, ctx: &Context, ist: &Istate) -> ExprVal {
        let mut sc = self.scanner(prog, ctx, ist);
        let flow = sc.go_scan_up(&ist.path, Flow::Val);
        sc.to_expr_val(flow)
    }

    /// Resumes the control node at `parent` after its operand at
    /// `ist.path` completed with `ist.act_arg`, without going further up.
    pub fn scan_up(&self, prog: &ProgramDef, ctx: &Context, ist: &Istate, parent: &Path) -> ExprVal {
        let mut sc = self.scanner(prog, ctx, ist);
        if !ist.path.starts_with(parent) || ist.path.len() == parent.len() {
            return ExprVal::ScanError(format!("{parent} is not above {}", ist.path));
        }
        let rel = ist.path.0[parent.len()..].to_vec();
        let flow = match sc.scan_up(parent, &rel, Flow::Val) {
            Ok(f) => f,
            Err(e) => Flow::Error(e),
        };
        sc.to_expr_val(flow)
    }

    /// Warnings from undecided conditions met while scanning from `ist`.
    pub fn scan_warnings(&self, prog: &ProgramDef, ctx: &Context, ist: &Istate) -> Vec<String> {
        let mut sc = self.scanner(prog, ctx, ist);
        self.run(&mut sc, ist);
        sc.warnings
    }

    /// The term the first tactic of a fresh program acts on.
    pub fn start_formula(&self, prog: &ProgramDef, ctx: &Context, ist: &Istate) -> Option<Term> {
        match self.scan_to_tactic(prog, ctx, ist) {
            ExprVal::AcceptTac(_, _, tac) => tac.on,
            _ => None,
        }
    }

    fn end_tactic(result: Option<Term>) -> InternalTactic {
        InternalTactic {
            input: InputTactic { name: program::TAKE.to_string(), args: result.iter().cloned().collect() },
            op: TacticOp::End,
            on: result.clone(),
            result,
            emitted: vec![],
        }
    }

    pub fn find_next_step(&self, calc: &Calc) -> NextStepResult {
        let level = calc.current_level();
        let ist = level.current_istate();
        if level.finished() {
            let mut ist = ist.clone();
            ist.finished = true;
            return NextStepResult::EndProgram(ist, Self::end_tactic(level.result.clone()));
        }
        let prog = match self.reg.program(&level.program) {
            Ok(p) => p,
            Err(e) => return NextStepResult::Helpless(Some(e.to_string())),
        };
        match self.scan_to_tactic(prog, level.current_ctx(), ist) {
            ExprVal::AcceptTac(i, c, t) => NextStepResult::NextStep(i, c, t),
            ExprVal::TermVal(v) => {
                let mut ist = ist.clone();
                ist.finished = true;
                let v = v.or_else(|| level.current_formula().cloned());
                NextStepResult::EndProgram(ist, Self::end_tactic(v))
            }
            ExprVal::RejectTac => NextStepResult::Helpless(None),
            ExprVal::ScanError(e) => NextStepResult::Helpless(Some(e)),
        }
    }

    /// Appends the step produced by `tac` at the cursor, then closes every
    /// level whose program has ended.
    pub fn apply_tactic(
        &self,
        calc: &mut Calc,
        ist: Istate,
        ctx: Context,
        tac: InternalTactic,
        origin: Origin,
        unsafe_step: bool,
    ) -> Result<Applied, CalcError> {
        let mut applied = Applied::Step;
        if let TacticOp::End = tac.op {
            self.settle(calc);
            if !calc.current_level().finished() {
                let pos = calc.cursor();
                self.finish_level(calc, &pos, tac.result);
                self.settle(calc);
            }
            return Ok(applied);
        }
        let sub = match &tac.op {
            TacticOp::SubProblem { .. } => {
                applied = Applied::SubProblem;
                Some(Box::new(enter_subproblem(self.reg, &ctx, &tac)?))
            }
            _ => {
                if tac.result.is_none() {
                    return Err(CalcError::TacticFailed(format!("{} produced no formula", tac.input)));
                }
                None
            }
        };
        let step = Step {
            formula: tac.result.clone(),
            tactic: tac,
            istate_after: ist,
            ctx_after: ctx,
            hidden: false,
            origin,
            unsafe_step,
            sub,
        };
        calc.current_level_mut().steps.push(step);
        self.settle(calc);
        Ok(applied)
    }

    fn finish_level(&self, calc: &mut Calc, pos: &Position, result: Option<Term>) {
        let level = calc.level_mut(pos).expect("cursor addresses a level");
        let result = result
            .or_else(|| level.current_formula().cloned())
            .unwrap_or_else(|| Term::list([]));
        if level.current_formula() != Some(&result) {
            let mut ist = level.current_istate().clone();
            ist.act_arg = Some(result.clone());
            let ctx = level.current_ctx().clone();
            level.steps.push(Step {
                formula: Some(result.clone()),
                tactic: Self::end_tactic(Some(result.clone())),
                istate_after: ist,
                ctx_after: ctx,
                hidden: false,
                origin: Origin::Engine,
                unsafe_step: false,
                sub: None,
            });
        }
        match level.steps.last_mut() {
            Some(s) => s.istate_after.finished = true,
            None => level.init_istate.finished = true,
        }
        level.result = Some(result);
    }

    /// Detects program ends at the cursor and transfers subproblem results.
    fn settle(&self, calc: &mut Calc) {
        loop {
            let pos = calc.cursor();
            let level = calc.current_level();
            if level.finished() {
                return;
            }
            let Ok(prog) = self.reg.program(&level.program) else { return };
            let ExprVal::TermVal(v) = self.scan_to_tactic(prog, level.current_ctx(), level.current_istate()) else {
                return;
            };
            self.finish_level(calc, &pos, v);
            let Some((&idx, parent)) = pos.0.split_last() else { return };
            let parent_pos = Position(parent.to_vec());
            let child = calc.level(&pos).expect("level exists").clone();
            let caller = calc.level_mut(&parent_pos).expect("parent exists");
            let caller_vars: BTreeSet<String> = level_vars(caller);
            let step = &mut caller.steps[idx];
            let (ctx, result) = subpbl_to_caller(
                self.reg,
                child.current_ctx(),
                &step.ctx_after,
                &caller_vars,
                child.result.as_ref().expect("just finished"),
            );
            step.formula = Some(result.clone());
            step.tactic.result = Some(result.clone());
            step.istate_after.act_arg = Some(result);
            step.ctx_after = ctx;
        }
    }

    /// One `find_next_step` plus application. Returns `None` when the
    /// calculation is finished or the interpreter is helpless.
    pub fn auto_step(&self, calc: &mut Calc) -> Result<Option<Applied>, CalcError> {
        match self.find_next_step(calc) {
            NextStepResult::NextStep(i, c, t) => self.apply_tactic(calc, i, c, t, Origin::Engine, false).map(Some),
            NextStepResult::EndProgram(i, t) => {
                if calc.finished() {
                    return Ok(None);
                }
                self.apply_tactic(calc, i, Context::default(), t, Origin::Engine, false)?;
                Ok(Some(Applied::Step))
            }
            NextStepResult::Helpless(_) => Ok(None),
        }
    }

    /// Applies next steps until the calculation ends, the interpreter is
    /// helpless, or `budget` steps have been taken. Returns the step count.
    pub fn auto_complete(&self, calc: &mut Calc, budget: usize) -> Result<usize, CalcError> {
        let mut n = 0;
        while n < budget {
            match self.auto_step(calc)? {
                Some(_) => n += 1,
                None => return Ok(n),
            }
        }
        Ok(n)
    }

    /// Locates a student's tactic in the program at the cursor level.
    pub fn locate_input_tactic(&self, calc: &Calc, input: &InputTactic) -> InputTacticResult {
        let level = calc.current_level();
        if level.finished() {
            return InputTacticResult::NotLocatable("the calculation is finished".into());
        }
        let prog = match self.reg.program(&level.program) {
            Ok(p) => p,
            Err(e) => return InputTacticResult::NotLocatable(e.to_string()),
        };
        let ist = level.current_istate().clone();
        let ctx = level.current_ctx();
        let here = ist.act_arg.clone().or_else(|| level.current_formula().cloned());
        match self.apply_input(input, here.as_ref(), ctx) {
            Ok(Some(_)) => {}
            Ok(None) => return InputTacticResult::NotLocatable(format!("{input} is not applicable")),
            Err(e) => return InputTacticResult::NotLocatable(e),
        }
        let mut skipped = 0;
        let mut unsafe_step = false;
        let mut filter = |tac: &InternalTactic, _: &Context| -> Filter {
            match associate(tac, input) {
                Association::Same => return Filter::Accept,
                Association::SameName => {
                    if let Ok(Some((t, c))) = self.apply_input(input, tac.on.as_ref(), ctx) {
                        unsafe_step = true;
                        return Filter::Replace(t, c);
                    }
                }
                Association::Different => {}
            }
            skipped += 1;
            if skipped > SKIP_BUDGET {
                Filter::Abort
            } else {
                Filter::Skip
            }
        };
        let flow = {
            let mut sc = self.scanner(prog, ctx, &ist);
            sc.filter = Some(&mut filter);
            let flow = self.run(&mut sc, &ist);
            sc.to_expr_val(flow)
        };
        match flow {
            ExprVal::AcceptTac(i, c, t) if unsafe_step => InputTacticResult::UnsafeStep(i, c, t),
            ExprVal::AcceptTac(i, c, t) => InputTacticResult::SafeStep(i, c, t),
            ExprVal::ScanError(e) => InputTacticResult::NotLocatable(e),
            _ => InputTacticResult::NotLocatable(format!("{input} cannot be located in the program")),
        }
    }

    fn normal_form(&self, level_method: &Key, t: &Term) -> Option<Term> {
        let rs = self
            .reg
            .method(level_method)
            .ok()
            .and_then(|m| m.normal_form.as_ref())
            .and_then(|n| self.reg.ruleset(n).ok().cloned())
            .unwrap_or_else(|| self.reg.default_solver());
        self.rw.normalize(&rs, &Context::default(), t).ok()
    }

    /// Searches forward from the cursor for a step producing `input`.
    pub fn locate_input_term(&self, calc: &Calc, input: &Term) -> InputTermResult {
        if calc.current_formula() == Some(input) {
            return InputTermResult::FoundStep(Box::new(calc.clone()));
        }
        let known: BTreeSet<(Position, usize)> = calc.step_refs().into_iter().collect();
        let mut c = calc.clone();
        let mut nf_match: Option<Calc> = None;
        let mut exact: Option<Calc> = None;
        let mut descents = 0;
        for _ in 0..SEARCH_STEPS {
            match self.find_next_step(&c) {
                NextStepResult::NextStep(i, ctx, t) => {
                    if matches!(t.op, TacticOp::SubProblem { .. }) {
                        descents += 1;
                        if descents > SEARCH_DESCENTS {
                            break;
                        }
                    }
                    if self.apply_tactic(&mut c, i, ctx, t, Origin::Engine, false).is_err() {
                        break;
                    }
                }
                NextStepResult::EndProgram(..) | NextStepResult::Helpless(_) => break,
            }
            let level = c.current_level();
            let Some(cand) = level.steps.last().and_then(|s| s.formula.as_ref()) else { continue };
            if cand == input {
                exact = Some(c.clone());
                break;
            }
            if nf_match.is_none() {
                let method = level.method.clone();
                let same = match (self.normal_form(&method, cand), self.normal_form(&method, input)) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                };
                if same {
                    nf_match = Some(c.clone());
                }
            }
        }
        let Some(mut found) = exact.or(nf_match) else {
            return InputTermResult::NotDerivable;
        };
        mark_found(&mut found, &known, input);
        InputTermResult::FoundStep(Box::new(found))
    }
}

/// Hides the auto-applied steps of a found derivation and turns its last
/// step into the student's input.
fn mark_found(calc: &mut Calc, known: &BTreeSet<(Position, usize)>, input: &Term) {
    for (pos, i) in calc.step_refs() {
        if !known.contains(&(pos.clone(), i)) {
            calc.level_mut(&pos).expect("listed").steps[i].hidden = true;
        }
    }
    let cursor = calc.cursor();
    for k in 0..cursor.0.len() {
        let pos = Position(cursor.0[..k].to_vec());
        calc.level_mut(&pos).expect("on cursor path").steps[cursor.0[k]].hidden = false;
    }
    let level = calc.current_level_mut();
    let was_result = level.result.is_some() && level.result.as_ref() == level.current_formula();
    let step = level.steps.last_mut().expect("a step was applied");
    step.hidden = false;
    step.origin = Origin::StudentTerm;
    step.formula = Some(input.clone());
    step.istate_after.act_arg = Some(input.clone());
    if was_result {
        level.result = Some(input.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::init_calc;
    use crate::knowledge::Model;
    use crate::parser::{parse_formula, parse_program};

    fn f(s: &str) -> Term {
        parse_formula(s, &Context::default()).unwrap()
    }

    fn model(pairs: &[(&str, &str)]) -> Model {
        pairs.iter().map(|(k, v)| (k.to_string(), f(v))).collect()
    }

    fn gcd(reg: &Registry, a: &str, b: &str) -> Calc {
        init_calc(reg, &Key::new(["diophantine", "gcd"]), None, model(&[("a", a), ("b", b)])).unwrap()
    }

    #[test]
    fn first_gcd_step_is_mod() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let c = gcd(&reg, "12", "8");
        match it.find_next_step(&c) {
            NextStepResult::NextStep(_, _, t) => {
                assert_eq!(t.op, TacticOp::Calculate(CalcOp::Mod));
                assert_eq!(t.result, Some(f("gcd 8 4")));
            }
            r => panic!("unexpected {r:?}"),
        }
    }

    #[test]
    fn gcd_auto_complete() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let mut c = gcd(&reg, "12", "8");
        it.auto_complete(&mut c, 100).unwrap();
        assert!(c.finished());
        assert_eq!(c.result(), Some(&f("4")));
        let formulas: Vec<Term> = c.visible_formulas().into_iter().cloned().collect();
        assert_eq!(formulas, vec![f("gcd 8 4"), f("gcd 4 (8 mod 4)"), f("gcd 4 0"), f("4")]);
        // finished calculations are left alone
        let before = c.clone();
        assert_eq!(it.auto_complete(&mut c, 100).unwrap(), 0);
        assert_eq!(c, before);
    }

    #[test]
    fn try_skips_inapplicable_tactic() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let prog = parse_program("program p(t) = Try (Rewrite ''add_0'') t").unwrap();
        let ist = Istate::fresh(Subst::singleton("t", f("x * y")));
        assert_eq!(it.scan_to_tactic(&prog, &Context::default(), &ist), ExprVal::TermVal(Some(f("x * y"))));
    }

    #[test]
    fn repeat_in_normal_form_yields_value() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let prog = parse_program("program p(t) = Repeat (Rewrite_Set ''cancel'') t").unwrap();
        let ist = Istate::fresh(Subst::singleton("t", f("x")));
        assert_eq!(it.scan_to_tactic(&prog, &Context::default(), &ist), ExprVal::TermVal(Some(f("x"))));
    }

    #[test]
    fn while_false_is_zero_iterations() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let prog = parse_program("program p(t) = (While (is_num t) Do (Calculate ''PLUS'')) t").unwrap();
        let ist = Istate::fresh(Subst::singleton("t", f("gcd 1 2")));
        assert_eq!(it.scan_to_tactic(&prog, &Context::default(), &ist), ExprVal::TermVal(Some(f("gcd 1 2"))));
    }

    #[test]
    fn unknown_rule_is_scan_error() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let prog = parse_program("program p(t) = Rewrite ''no_such_rule'' t").unwrap();
        let ist = Istate::fresh(Subst::singleton("t", f("x")));
        assert!(matches!(it.scan_to_tactic(&prog, &Context::default(), &ist), ExprVal::ScanError(_)));
    }

    #[test]
    fn chain_end_and_resume() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let prog = parse_program("program p(t) = (Calculate ''PLUS'' #> Calculate ''TIMES'') t").unwrap();
        let ctx = Context::default();
        let ist = Istate::fresh(Subst::singleton("t", f("(1 + 2) * 3")));
        let ExprVal::AcceptTac(i1, _, t1) = it.scan_to_tactic(&prog, &ctx, &ist) else { panic!() };
        assert_eq!(t1.result, Some(f("3 * 3")));
        assert_eq!(at_location(&i1.path, &wrapped(&prog)).unwrap().head_const(), Some(program::CALCULATE));
        let ExprVal::AcceptTac(i2, _, t2) = it.go_scan_up(&prog, &ctx, &i1) else { panic!() };
        assert_eq!(t2.result, Some(f("9")));
        assert_eq!(it.go_scan_up(&prog, &ctx, &i2), ExprVal::TermVal(Some(f("9"))));
    }

    #[test]
    fn input_terms() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let c = gcd(&reg, "12", "8");
        match it.locate_input_term(&c, &f("4")) {
            InputTermResult::FoundStep(found) => {
                assert_eq!(found.current_formula(), Some(&f("4")));
                assert_eq!(found.visible_formulas(), vec![&f("4")]);
            }
            r => panic!("unexpected {r:?}"),
        }
        assert_eq!(it.locate_input_term(&c, &f("5")), InputTermResult::NotDerivable);
        let start = c.current_formula().unwrap().clone();
        assert_eq!(it.locate_input_term(&c, &start), InputTermResult::FoundStep(Box::new(c.clone())));
    }

    #[test]
    fn input_tactics() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let c = gcd(&reg, "12", "8");
        let mod_ = InputTactic::parse("Calculate ''MOD''").unwrap();
        assert!(matches!(it.locate_input_tactic(&c, &mod_), InputTacticResult::SafeStep(..)));
        let foreign = InputTactic::parse("Rewrite ''lin_isolate''").unwrap();
        assert!(matches!(it.locate_input_tactic(&c, &foreign), InputTacticResult::NotLocatable(_)));
    }

    #[test]
    fn linear_solution() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let mut c =
            init_calc(&reg, &Key::new(["equation", "linear"]), None, model(&[("a", "2"), ("b", "-4")])).unwrap();
        it.auto_complete(&mut c, 100).unwrap();
        assert_eq!(c.result(), Some(&f("[x = 2]")));
    }

    #[test]
    fn subproblem_transfer() {
        let reg = Registry::builtin();
        let it = Interp::new(&reg);
        let mut c = init_calc(
            &reg,
            &Key::new(["equation", "fractional"]),
            None,
            model(&[("e", "(x * (x - √2)) / x = 0"), ("v", "x")]),
        )
        .unwrap();
        it.auto_complete(&mut c, 100).unwrap();
        assert_eq!(c.result(), Some(&f("[x = √2]")));
    }
}

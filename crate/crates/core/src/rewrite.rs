//! Conditional term rewriting: single rules, ordered rule sets normalised
//! leftmost-outermost, exact numeral calculation and condition evaluation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calc::Context;
use crate::knowledge::Registry;
use crate::term::{apply_subst, at_location, consts, free_vars, match_pattern, replace_at, Path, Subst, Term};

pub const DEFAULT_MAX_STEPS: usize = 2000;

/// Nesting bound for condition solving inside condition solving.
const MAX_COND_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub conds: Vec<Term>,
    pub lhs: Term,
    pub rhs: Term,
}

impl Rule {
    pub fn validate(&self) -> Result<(), String> {
        if matches!(self.lhs.strip_comb().0, Term::Var(..)) {
            return Err(format!("rule {}: left-hand side is headed by a schematic variable", self.name));
        }
        let lhs_vars = self.lhs.schematic_vars();
        let mut extra: Vec<String> = self
            .conds
            .iter()
            .chain(std::iter::once(&self.rhs))
            .flat_map(|t| t.schematic_vars())
            .filter(|v| !lhs_vars.contains(v))
            .collect();
        extra.dedup();
        if !extra.is_empty() {
            return Err(format!(
                "rule {}: schematic variables not bound by the left-hand side: ?{}",
                self.name,
                extra.join(", ?")
            ));
        }
        Ok(())
    }

    pub fn instantiate(&self, inst: &Subst) -> Rule {
        if inst.is_empty() {
            return self.clone();
        }
        Rule {
            name: self.name.clone(),
            conds: self.conds.iter().map(|c| apply_subst(inst, c)).collect(),
            lhs: apply_subst(inst, &self.lhs),
            rhs: apply_subst(inst, &self.rhs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CalcOp {
    Plus,
    Minus,
    Times,
    Divide,
    Power,
    Mod,
    Div,
    Neg,
    Equal,
    NotEqual,
    Less,
    LessEq,
    Greater,
    GreaterEq,
    IsNum,
}

impl CalcOp {
    pub const ALL: [CalcOp; 15] = [
        CalcOp::Plus,
        CalcOp::Minus,
        CalcOp::Times,
        CalcOp::Divide,
        CalcOp::Power,
        CalcOp::Mod,
        CalcOp::Div,
        CalcOp::Neg,
        CalcOp::Equal,
        CalcOp::NotEqual,
        CalcOp::Less,
        CalcOp::LessEq,
        CalcOp::Greater,
        CalcOp::GreaterEq,
        CalcOp::IsNum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CalcOp::Plus => "PLUS",
            CalcOp::Minus => "MINUS",
            CalcOp::Times => "TIMES",
            CalcOp::Divide => "DIVIDE",
            CalcOp::Power => "POWER",
            CalcOp::Mod => "MOD",
            CalcOp::Div => "DIV",
            CalcOp::Neg => "NEG",
            CalcOp::Equal => "EQUAL",
            CalcOp::NotEqual => "NOT_EQUAL",
            CalcOp::Less => "LESS",
            CalcOp::LessEq => "LESS_EQ",
            CalcOp::Greater => "GREATER",
            CalcOp::GreaterEq => "GREATER_EQ",
            CalcOp::IsNum => "IS_NUM",
        }
    }

    pub fn from_name(s: &str) -> Option<CalcOp> {
        CalcOp::ALL.into_iter().find(|op| op.name() == s)
    }

    fn constant(self) -> &'static str {
        match self {
            CalcOp::Plus => consts::PLUS,
            CalcOp::Minus => consts::MINUS,
            CalcOp::Times => consts::TIMES,
            CalcOp::Divide => consts::DIVIDE,
            CalcOp::Power => consts::POWER,
            CalcOp::Mod => consts::MOD,
            CalcOp::Div => consts::DIV,
            CalcOp::Neg => consts::UMINUS,
            CalcOp::Equal => consts::EQ,
            CalcOp::NotEqual => consts::NEQ,
            CalcOp::Less => consts::LESS,
            CalcOp::LessEq => consts::LESS_EQ,
            CalcOp::Greater => consts::GREATER,
            CalcOp::GreaterEq => consts::GREATER_EQ,
            CalcOp::IsNum => "is_num",
        }
    }
}

/// A rule set as declared in a theory file: rules by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSetDecl {
    pub name: String,
    pub rules: Vec<String>,
    pub calc_ops: Vec<CalcOp>,
    pub cond_solver: Option<String>,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub name: String,
    pub rules: Vec<Rule>,
    pub calc_ops: Vec<CalcOp>,
    pub cond_solver: Option<String>,
    pub max_steps: usize,
}

impl RuleSet {
    pub fn new(name: impl Into<String>, rules: Vec<Rule>, calc_ops: Vec<CalcOp>) -> RuleSet {
        RuleSet { name: name.into(), rules, calc_ops, cond_solver: None, max_steps: DEFAULT_MAX_STEPS }
    }

    /// The set with every rule instantiated by `inst`.
    pub fn instantiate(&self, inst: &Subst) -> RuleSet {
        RuleSet { rules: self.rules.iter().map(|r| r.instantiate(inst)).collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Rule name, or `calc:OP` for a numeral folding.
    pub rule: String,
    pub path: Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteResult {
    pub new_term: Term,
    pub emitted_assumptions: Vec<Term>,
    pub rule_trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewriteError {
    #[error("rewriting exceeded {limit} steps")]
    StepLimit { limit: usize, partial: Box<RewriteResult> },
    #[error("{0}")]
    DomainError(String),
    #[error("unknown rule set `{0}`")]
    UnknownRuleSet(String),
    #[error("cannot replay trace entry `{0}`")]
    BadTrace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truth {
    True,
    False,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CondOutcome {
    pub truth: Truth,
    /// The solver ran out of steps; `truth` is then `Unknown`.
    pub step_limited: bool,
}

fn num_args<'a>(t: &'a Term, op: &str) -> Option<(&'a BigInt, &'a BigInt)> {
    let (a, b) = t.dest_binop(op)?;
    Some((a.as_num()?, b.as_num()?))
}

/// Folds `op` at the root of `t` if its arguments are numerals.
fn fold_here(op: CalcOp, t: &Term) -> Result<Option<Term>, RewriteError> {
    let c = op.constant();
    let cmp = |f: fn(&BigInt, &BigInt) -> bool| num_args(t, c).map(|(a, b)| Term::truth(f(a, b)));
    let r = match op {
        CalcOp::Plus => num_args(t, c).map(|(a, b)| Term::Num(a + b)),
        CalcOp::Minus => num_args(t, c).map(|(a, b)| Term::Num(a - b)),
        CalcOp::Times => num_args(t, c).map(|(a, b)| Term::Num(a * b)),
        CalcOp::Neg => t.dest_unop(c).and_then(Term::as_num).map(|a| Term::Num(-a)),
        CalcOp::IsNum => t.dest_unop(c).map(|a| Term::truth(matches!(a, Term::Num(_)))),
        CalcOp::Equal => cmp(|a, b| a == b),
        CalcOp::NotEqual => cmp(|a, b| a != b),
        CalcOp::Less => cmp(|a, b| a < b),
        CalcOp::LessEq => cmp(|a, b| a <= b),
        CalcOp::Greater => cmp(|a, b| a > b),
        CalcOp::GreaterEq => cmp(|a, b| a >= b),
        CalcOp::Mod | CalcOp::Div => match num_args(t, c) {
            Some((_, b)) if b.is_zero() => {
                return Err(RewriteError::DomainError(format!("{} by zero", op.name())))
            }
            Some((a, b)) => Some(Term::Num(if op == CalcOp::Mod { a.mod_floor(b) } else { a.div_floor(b) })),
            None => None,
        },
        CalcOp::Divide => match num_args(t, c) {
            Some((_, b)) if b.is_zero() => return Err(RewriteError::DomainError("division by zero".into())),
            Some((a, b)) => {
                let g = a.gcd(b);
                let (mut p, mut q) = (a / &g, b / &g);
                if q.is_negative() {
                    p = -p;
                    q = -q;
                }
                if q == BigInt::from(1) {
                    Some(Term::Num(p))
                } else if &p == a && &q == b {
                    None
                } else {
                    Some(Term::binop(consts::DIVIDE, Term::Num(p), Term::Num(q)))
                }
            }
            None => None,
        },
        CalcOp::Power => match num_args(t, c) {
            Some((a, b)) if !b.is_negative() => match b.to_u32() {
                Some(e) if e <= 4096 => Some(Term::Num(num_traits::pow(a.clone(), e as usize))),
                _ => None,
            },
            _ => None,
        },
    };
    Ok(r)
}

/// Pre-order search for the first position where `f` yields a result.
fn find_redex<T>(t: &Term, path: &mut Vec<crate::term::Lrd>, f: &mut dyn FnMut(&Term, &[crate::term::Lrd]) -> Option<T>) -> Option<T> {
    use crate::term::Lrd;
    if let Some(r) = f(t, path) {
        return Some(r);
    }
    match t {
        Term::App(g, x) => {
            path.push(Lrd::L);
            let r = find_redex(g, path, f);
            path.pop();
            if r.is_some() {
                return r;
            }
            path.push(Lrd::R);
            let r = find_redex(x, path, f);
            path.pop();
            r
        }
        Term::Abs(_, _, b) => {
            path.push(Lrd::D);
            let r = find_redex(b, path, f);
            path.pop();
            r
        }
        _ => None,
    }
}

/// Folds the leftmost-outermost application of `op` to numerals.
pub fn calculate(op: CalcOp, t: &Term) -> Result<Option<Term>, RewriteError> {
    Ok(calculate_traced(op, t)?.map(|(t, _)| t))
}

pub(crate) fn calculate_traced(op: CalcOp, t: &Term) -> Result<Option<(Term, Path)>, RewriteError> {
    let mut err = None;
    let found = find_redex(t, &mut Vec::new(), &mut |node, path| match fold_here(op, node) {
        Ok(Some(r)) => Some((r, Path(path.to_vec()))),
        Ok(None) => None,
        Err(e) => {
            err = Some(e);
            Some((node.clone(), Path(path.to_vec())))
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(found.map(|(r, path)| (replace_at(&path, t, r).expect("path from traversal"), path)))
}

enum Step {
    Rule { name: String, path: Path, replacement: Term, emitted: Vec<Term> },
    Calc { op: CalcOp, path: Path, replacement: Term },
}

/// Rewriting against the rule sets of a registry.
pub struct Rewriter<'r> {
    registry: &'r Registry,
}

impl<'r> Rewriter<'r> {
    pub fn new(registry: &'r Registry) -> Self {
        Rewriter { registry }
    }

    fn solver_for(&self, rs: Option<&RuleSet>) -> RuleSet {
        rs.and_then(|r| r.cond_solver.as_ref())
            .and_then(|n| self.registry.ruleset(n).ok().cloned())
            .unwrap_or_else(|| self.registry.default_solver())
    }

    /// Checks the instantiated conditions of a matched rule. `None` means the
    /// rule is not applicable; otherwise the assumptions to emit.
    fn discharge(
        &self,
        conds: &[Term],
        solver: &RuleSet,
        ctx: &Context,
        emit: bool,
        depth: usize,
    ) -> Option<Vec<Term>> {
        let mut emitted = Vec::new();
        for c in conds {
            match self.eval_condition_at(solver, ctx, c, depth + 1).truth {
                Truth::True => {}
                Truth::False => return None,
                Truth::Unknown if emit => emitted.push(c.clone()),
                Truth::Unknown => return None,
            }
        }
        Some(emitted)
    }

    fn try_rule_here(
        &self,
        rule: &Rule,
        node: &Term,
        solver: &RuleSet,
        ctx: &Context,
        emit: bool,
        depth: usize,
    ) -> Option<(Term, Vec<Term>)> {
        let s = match_pattern(&rule.lhs, node).ok()??;
        let conds: Vec<Term> = rule.conds.iter().map(|c| apply_subst(&s, c)).collect();
        let emitted = self.discharge(&conds, solver, ctx, emit, depth)?;
        Some((apply_subst(&s, &rule.rhs), emitted))
    }

    /// Applies `rule` once at the leftmost-outermost position where it
    /// matches and its conditions are not refuted.
    pub fn rewrite_single(&self, rule: &Rule, ctx: &Context, t: &Term) -> Result<Option<RewriteResult>, RewriteError> {
        self.rewrite_single_inst(rule, &Subst::new(), ctx, t)
    }

    pub fn rewrite_single_inst(
        &self,
        rule: &Rule,
        inst: &Subst,
        ctx: &Context,
        t: &Term,
    ) -> Result<Option<RewriteResult>, RewriteError> {
        let rule = rule.instantiate(inst);
        let solver = self.solver_for(None);
        let found = find_redex(t, &mut Vec::new(), &mut |node, path| {
            self.try_rule_here(&rule, node, &solver, ctx, true, 0)
                .map(|(r, e)| (r, e, Path(path.to_vec())))
        });
        Ok(found.map(|(replacement, emitted, path)| RewriteResult {
            new_term: replace_at(&path, t, replacement).expect("path from traversal"),
            emitted_assumptions: emitted,
            rule_trace: vec![TraceEntry { rule: rule.name.clone(), path }],
        }))
    }

    fn find_step(&self, rs: &RuleSet, solver: &RuleSet, ctx: &Context, t: &Term, emit: bool, depth: usize) -> Option<Step> {
        find_redex(t, &mut Vec::new(), &mut |node, path| {
            for rule in &rs.rules {
                if let Some((replacement, emitted)) = self.try_rule_here(rule, node, solver, ctx, emit, depth) {
                    return Some(Step::Rule {
                        name: rule.name.clone(),
                        path: Path(path.to_vec()),
                        replacement,
                        emitted,
                    });
                }
            }
            for &op in &rs.calc_ops {
                if let Ok(Some(replacement)) = fold_here(op, node) {
                    return Some(Step::Calc { op, path: Path(path.to_vec()), replacement });
                }
            }
            None
        })
    }

    /// Normalises `t` with `rs`. `Ok(None)` iff no step applied.
    pub fn rewrite_set(&self, rs: &RuleSet, ctx: &Context, t: &Term) -> Result<Option<RewriteResult>, RewriteError> {
        self.rewrite_set_at(rs, ctx, t, true, 0)
    }

    pub fn rewrite_set_inst(
        &self,
        rs: &RuleSet,
        inst: &Subst,
        ctx: &Context,
        t: &Term,
    ) -> Result<Option<RewriteResult>, RewriteError> {
        if inst.is_empty() {
            return self.rewrite_set(rs, ctx, t);
        }
        self.rewrite_set(&rs.instantiate(inst), ctx, t)
    }

    fn rewrite_set_at(
        &self,
        rs: &RuleSet,
        ctx: &Context,
        t: &Term,
        emit: bool,
        depth: usize,
    ) -> Result<Option<RewriteResult>, RewriteError> {
        let solver = self.solver_for(Some(rs));
        let mut cur = t.clone();
        let mut trace = Vec::new();
        let mut emitted: Vec<Term> = Vec::new();
        while let Some(step) = self.find_step(rs, &solver, ctx, &cur, emit, depth) {
            if trace.len() == rs.max_steps {
                return Err(RewriteError::StepLimit {
                    limit: rs.max_steps,
                    partial: Box::new(RewriteResult { new_term: cur, emitted_assumptions: emitted, rule_trace: trace }),
                });
            }
            let (name, path, replacement) = match step {
                Step::Rule { name, path, replacement, emitted: e } => {
                    for a in e {
                        if !emitted.contains(&a) {
                            emitted.push(a);
                        }
                    }
                    (name, path, replacement)
                }
                Step::Calc { op, path, replacement } => (format!("calc:{}", op.name()), path, replacement),
            };
            cur = replace_at(&path, &cur, replacement).expect("path from traversal");
            trace.push(TraceEntry { rule: name, path });
        }
        if trace.is_empty() {
            return Ok(None);
        }
        Ok(Some(RewriteResult { new_term: cur, emitted_assumptions: emitted, rule_trace: trace }))
    }

    /// Normal form of `t` under `rs`, or `t` itself when nothing applies.
    pub fn normalize(&self, rs: &RuleSet, ctx: &Context, t: &Term) -> Result<Term, RewriteError> {
        Ok(self.rewrite_set(rs, ctx, t)?.map(|r| r.new_term).unwrap_or_else(|| t.clone()))
    }

    /// Replays a trace from `t`, applying each entry exactly at its path.
    pub fn replay(&self, rs: &RuleSet, ctx: &Context, t: &Term, trace: &[TraceEntry]) -> Result<Term, RewriteError> {
        let solver = self.solver_for(Some(rs));
        let mut cur = t.clone();
        for entry in trace {
            let node = at_location(&entry.path, &cur).map_err(|_| RewriteError::BadTrace(entry.rule.clone()))?;
            let replacement = if let Some(op) = entry.rule.strip_prefix("calc:") {
                let op = CalcOp::from_name(op).ok_or_else(|| RewriteError::BadTrace(entry.rule.clone()))?;
                fold_here(op, node)?
            } else {
                rs.rules
                    .iter()
                    .find(|r| r.name == entry.rule)
                    .and_then(|r| self.try_rule_here(r, node, &solver, ctx, true, 0))
                    .map(|(r, _)| r)
            };
            let replacement = replacement.ok_or_else(|| RewriteError::BadTrace(entry.rule.clone()))?;
            cur = replace_at(&entry.path, &cur, replacement).expect("validated path");
        }
        Ok(cur)
    }

    /// Decides a boolean condition by normalisation; never emits assumptions.
    pub fn eval_condition(&self, rs: &RuleSet, ctx: &Context, cond: &Term) -> CondOutcome {
        self.eval_condition_at(rs, ctx, cond, 0)
    }

    fn eval_condition_at(&self, rs: &RuleSet, ctx: &Context, cond: &Term, depth: usize) -> CondOutcome {
        let unknown = CondOutcome { truth: Truth::Unknown, step_limited: false };
        if depth > MAX_COND_DEPTH {
            return unknown;
        }
        if ctx.has_assumption(cond) {
            return CondOutcome { truth: Truth::True, step_limited: false };
        }
        let facts = known_values(ctx);
        let cond = apply_subst(&facts, cond);
        let norm = |t: &Term| match self.rewrite_set_at(rs, ctx, t, false, depth) {
            Ok(Some(r)) => Ok(r.new_term),
            Ok(None) => Ok(t.clone()),
            Err(e) => Err(e),
        };
        let nf = match norm(&cond) {
            Ok(t) => t,
            Err(RewriteError::StepLimit { .. }) => return CondOutcome { truth: Truth::Unknown, step_limited: true },
            Err(_) => return unknown,
        };
        let truth = if nf.is_const(consts::TRUE) {
            Truth::True
        } else if nf.is_const(consts::FALSE) {
            Truth::False
        } else {
            let assumed: Vec<Term> = ctx
                .assumptions
                .iter()
                .map(|a| norm(&apply_subst(&facts, &a.term)).unwrap_or_else(|_| a.term.clone()))
                .collect();
            if assumed.contains(&nf) {
                Truth::True
            } else if negation(&nf).is_some_and(|n| assumed.contains(&n)) {
                Truth::False
            } else {
                Truth::Unknown
            }
        };
        CondOutcome { truth, step_limited: false }
    }
}

/// Assumptions `v = c` with `c` closed act as known values of `v`.
fn known_values(ctx: &Context) -> Subst {
    ctx.assumptions
        .iter()
        .filter_map(|a| {
            let (l, r) = a.term.dest_binop(consts::EQ)?;
            match l {
                Term::Free(v, _) if free_vars(r).is_empty() => Some((v.clone(), r.clone())),
                _ => None,
            }
        })
        .collect()
}

/// The syntactic negation of an equation, disequation or negated formula.
pub fn negation(t: &Term) -> Option<Term> {
    if let Some((a, b)) = t.dest_binop(consts::EQ) {
        return Some(Term::binop(consts::NEQ, a.clone(), b.clone()));
    }
    if let Some((a, b)) = t.dest_binop(consts::NEQ) {
        return Some(Term::binop(consts::EQ, a.clone(), b.clone()));
    }
    if let Some(a) = t.dest_unop(consts::NOT) {
        return Some(a.clone());
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::Context;
    use crate::parser::{parse_formula, parse_rule};

    fn f(s: &str) -> Term {
        parse_formula(s, &Context::default()).unwrap()
    }

    fn registry() -> Registry {
        Registry::builtin()
    }

    #[test]
    fn discard_minus() {
        let reg = registry();
        let rw = Rewriter::new(&reg);
        let rule = parse_rule("rule discard_minus: ?a - ?b = ?a + -?b").unwrap();
        let r = rw.rewrite_single(&rule, &Context::default(), &f("u - v")).unwrap().unwrap();
        assert_eq!(r.new_term, f("u + -v"));
        assert!(r.emitted_assumptions.is_empty());
    }

    #[test]
    fn conditional_rule_emits_assumption() {
        let reg = registry();
        let rw = Rewriter::new(&reg);
        let rule = parse_rule("rule div_eq: ?x ~= 0 => (?a / ?x = ?b) = (?a = ?b * ?x)").unwrap();
        let r = rw.rewrite_single(&rule, &Context::default(), &f("a / x = b")).unwrap().unwrap();
        assert_eq!(r.new_term, f("a = b * x"));
        assert_eq!(r.emitted_assumptions, vec![f("x ~= 0")]);

        // already assumed: nothing emitted
        let mut ctx = Context::default();
        ctx.insert_assumptions(&[f("x ~= 0")], crate::calc::Provenance::Precondition).unwrap();
        let r = rw.rewrite_single(&rule, &ctx, &f("a / x = b")).unwrap().unwrap();
        assert!(r.emitted_assumptions.is_empty());

        // refuted condition: not applicable
        assert!(rw.rewrite_single(&rule, &Context::default(), &f("a / 0 = b")).unwrap().is_none());
    }

    #[test]
    fn not_applicable() {
        let reg = registry();
        let rw = Rewriter::new(&reg);
        let rule = parse_rule("rule add_0: ?a + 0 = ?a").unwrap();
        assert!(rw.rewrite_single(&rule, &Context::default(), &f("x * y")).unwrap().is_none());
        let rs = RuleSet::new("s", vec![rule], vec![]);
        assert!(rw.rewrite_set(&rs, &Context::default(), &f("x")).unwrap().is_none());
    }

    #[test]
    fn calculate_examples() {
        assert_eq!(calculate(CalcOp::Plus, &f("(2 + 3) * x")).unwrap(), Some(f("5 * x")));
        assert_eq!(calculate(CalcOp::Plus, &f("2 + 3 * x")).unwrap(), None);
        assert_eq!(calculate(CalcOp::Mod, &f("12 mod 8")).unwrap(), Some(f("4")));
        assert!(matches!(calculate(CalcOp::Divide, &f("1 / 0")), Err(RewriteError::DomainError(_))));
        assert_eq!(calculate(CalcOp::Divide, &f("4 / 2")).unwrap(), Some(f("2")));
        assert_eq!(calculate(CalcOp::Divide, &f("2 / 6")).unwrap(), Some(f("1 / 3")));
        assert_eq!(calculate(CalcOp::Divide, &f("1 / 3")).unwrap(), None);
        assert_eq!(calculate(CalcOp::Divide, &f("1 / -3")).unwrap(), Some(f("-1 / 3")));
        assert_eq!(calculate(CalcOp::Neg, &f("-(-4)")).unwrap(), Some(f("4")));
        assert_eq!(calculate(CalcOp::Neg, &f("-(4)")).unwrap(), Some(f("-4")));
        assert_eq!(calculate(CalcOp::NotEqual, &f("4 ~= 0")).unwrap(), Some(f("True")));
    }

    #[test]
    fn step_limit_reports_partial_result() {
        let reg = registry();
        let rw = Rewriter::new(&reg);
        let comm = parse_rule("rule comm: ?a + ?b = ?b + ?a").unwrap();
        let mut rs = RuleSet::new("loop", vec![comm], vec![]);
        rs.max_steps = 7;
        match rw.rewrite_set(&rs, &Context::default(), &f("x + y")) {
            Err(RewriteError::StepLimit { limit, partial }) => {
                assert_eq!(limit, 7);
                assert_eq!(partial.rule_trace.len(), 7);
            }
            r => panic!("expected step limit, got {r:?}"),
        }
    }

    #[test]
    fn eval_condition_examples() {
        let reg = registry();
        let rw = Rewriter::new(&reg);
        let arith = reg.default_solver();
        let ctx = Context::default();
        assert_eq!(rw.eval_condition(&arith, &ctx, &f("0 < 1")).truth, Truth::True);
        assert_eq!(rw.eval_condition(&arith, &ctx, &f("x < y")).truth, Truth::Unknown);
        let mut ctx = Context::default();
        ctx.insert_assumptions(&[f("x ~= 0")], crate::calc::Provenance::Rewrite).unwrap();
        assert_eq!(rw.eval_condition(&arith, &ctx, &f("x ~= 0")).truth, Truth::True);
        assert_eq!(rw.eval_condition(&arith, &ctx, &f("x = 0")).truth, Truth::False);
    }

    #[test]
    fn trace_replays() {
        let reg = registry();
        let rw = Rewriter::new(&reg);
        let rs = reg.ruleset("norm_rational").unwrap();
        let t = f("1 / (1 + 1 / x)");
        let r = rw.rewrite_set(rs, &Context::default(), &t).unwrap().unwrap();
        assert_eq!(rw.replay(rs, &Context::default(), &t, &r.rule_trace).unwrap(), r.new_term);
    }
}

//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use rand::rngs::StdRng;
use rand::Rng;

use lucin::calc::{init_calc, Calc, Context, Provenance};
use lucin::knowledge::{Key, Model, Registry};
use lucin::parser::parse_formula;
use lucin::program::{self as prog, decode, Node};
use lucin::rewrite::{calculate, CalcOp, Rewriter, Truth};
use lucin::term::{apply_subst, consts, Subst, Term, TypeTag};

pub fn f(s: &str) -> Term {
    parse_formula(s, &Context::default()).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn model(pairs: &[(&str, Term)]) -> Model {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn key(parts: &[&str]) -> Key {
    Key::new(parts.iter().copied())
}

pub fn gcd_key() -> Key {
    key(&["diophantine", "gcd"])
}

pub fn linear_key() -> Key {
    key(&["equation", "linear"])
}

pub fn rational_key() -> Key {
    key(&["rational", "simplify"])
}

pub fn fractional_key() -> Key {
    key(&["equation", "fractional"])
}

pub fn gcd_calc(reg: &Registry, a: i64, b: i64) -> Calc {
    init_calc(reg, &gcd_key(), None, model(&[("a", Term::num(a)), ("b", Term::num(b))])).unwrap()
}

pub fn linear_calc(reg: &Registry, a: i64, b: i64) -> Calc {
    init_calc(reg, &linear_key(), None, model(&[("a", Term::num(a)), ("b", Term::num(b))])).unwrap()
}

pub fn rational_calc(reg: &Registry, t: Term) -> Calc {
    init_calc(reg, &rational_key(), None, model(&[("t", t), ("x", f("x"))])).unwrap()
}

pub fn fractional_calc(reg: &Registry) -> Calc {
    init_calc(reg, &fractional_key(), None, model(&[("e", f("(x * (x - √2)) / x = 0")), ("v", f("x"))])).unwrap()
}

// ---------------------------------------------------------------------------
// Direct recursive evaluator: runs a program body to completion in one
// pass, with no interpreter state, no resumption and no calculation tree.

enum Out {
    Val(Option<Term>),
    Reject,
}

pub struct Direct<'r> {
    reg: &'r Registry,
    rw: Rewriter<'r>,
    ctx: Context,
    /// Formulas produced by the tactics, in order.
    pub formulas: Vec<Term>,
    fuel: usize,
    stuck: bool,
}

fn name(t: &Term) -> String {
    match t {
        Term::Str(s) | Term::Free(s, _) | Term::Const(s, _) => s.clone(),
        other => panic!("not a name: {other}"),
    }
}

fn inst(t: &Term) -> Subst {
    t.dest_list()
        .expect("instantiation list")
        .into_iter()
        .map(|p| {
            let (n, v) = p.dest_binop(consts::PAIR).expect("pair");
            (name(n), v.clone())
        })
        .collect()
}

impl<'r> Direct<'r> {
    fn expr(&self, env: &Subst, t: &Term) -> Term {
        let t = apply_subst(env, t);
        match self.reg.ruleset("prog_expr") {
            Ok(rs) => self.rw.normalize(rs, &Context::default(), &t).expect("program expression"),
            Err(_) => t,
        }
    }

    fn holds(&self, env: &Subst, c: &Term) -> bool {
        let c = self.expr(env, c);
        self.rw.eval_condition(&self.reg.default_solver(), &self.ctx, &c).truth == Truth::True
    }

    fn tactic(&mut self, name_: &str, args: &[&Term], on: Option<&Term>, env: &Subst, cur: &Option<Term>) -> Out {
        let args: Vec<Term> = args.iter().map(|a| self.expr(env, a)).collect();
        let on = match on {
            Some(t) => Some(self.expr(env, t)),
            None => cur.clone(),
        };
        let Some(on) = on else { return Out::Reject };
        let (result, emitted) = match name_ {
            prog::CALCULATE => match calculate(CalcOp::from_name(&name(&args[0])).unwrap(), &on) {
                Ok(Some(r)) => (r, vec![]),
                _ => return Out::Reject,
            },
            prog::REWRITE | prog::REWRITE_INST => {
                let (rule, s) = if name_ == prog::REWRITE {
                    (name(&args[0]), Subst::new())
                } else {
                    (name(&args[1]), inst(&args[0]))
                };
                let rule = self.reg.rule(&rule).unwrap();
                match self.rw.rewrite_single_inst(rule, &s, &self.ctx, &on) {
                    Ok(Some(r)) => (r.new_term, r.emitted_assumptions),
                    Ok(None) => return Out::Reject,
                    Err(_) => {
                        self.stuck = true;
                        return Out::Reject;
                    }
                }
            }
            prog::REWRITE_SET | prog::REWRITE_SET_INST => {
                let (set, s) = if name_ == prog::REWRITE_SET {
                    (name(&args[0]), Subst::new())
                } else {
                    (name(&args[1]), inst(&args[0]))
                };
                let rs = self.reg.ruleset(&set).unwrap();
                match self.rw.rewrite_set_inst(rs, &s, &self.ctx, &on) {
                    Ok(Some(r)) => (r.new_term, r.emitted_assumptions),
                    Ok(None) => return Out::Reject,
                    Err(_) => {
                        self.stuck = true;
                        return Out::Reject;
                    }
                }
            }
            prog::OR_TO_LIST => {
                fn flat(t: &Term, out: &mut Vec<Term>) {
                    match t.dest_binop(consts::OR) {
                        Some((a, b)) => {
                            flat(a, out);
                            flat(b, out);
                        }
                        None => out.push(t.clone()),
                    }
                }
                if on.dest_list().is_some() {
                    return Out::Reject;
                }
                let mut items = vec![];
                flat(&on, &mut items);
                (Term::list(items), vec![])
            }
            prog::TAKE => (args[0].clone(), vec![]),
            other => panic!("direct evaluator does not support {other}"),
        };
        self.ctx.insert_assumptions(&emitted, Provenance::Rewrite).unwrap();
        self.formulas.push(result.clone());
        Out::Val(Some(result))
    }

    fn eval(&mut self, t: &Term, env: &mut Subst, cur: &mut Option<Term>) -> Out {
        self.fuel = self.fuel.checked_sub(1).expect("direct evaluator ran out of fuel");
        let node = decode(t);
        let arg = |a: Option<&Term>, cur: &mut Option<Term>, env: &Subst, me: &Self| {
            if let Some(a) = a {
                *cur = Some(me.expr(env, a));
            }
        };
        let rebind = |a: Option<&Term>, cur: &Option<Term>, env: &mut Subst| {
            if let (Some(Term::Free(v, _)), Some(c)) = (a, cur) {
                env.insert(v.clone(), c.clone());
            }
        };
        match node {
            Node::Tactic { name, args, on } => {
                let out = self.tactic(name, &args, on, env, cur);
                if let Out::Val(v) = &out {
                    *cur = v.clone();
                }
                out
            }
            Node::Let { var, expr, body } => {
                let is_prog = expr
                    .head_const()
                    .is_some_and(|h| prog::TACTIC_NAMES.contains(&h) || prog::TACTICAL_NAMES.contains(&h));
                if is_prog {
                    if let Out::Reject = self.eval(expr, env, cur) {
                        return Out::Reject;
                    }
                } else {
                    *cur = Some(self.expr(env, expr));
                }
                if let Some(c) = cur.clone() {
                    env.insert(var.to_string(), c);
                }
                self.eval(body, env, cur)
            }
            Node::Chain { first, second, arg: a } => {
                arg(a, cur, env, self);
                match self.eval(first, env, cur) {
                    Out::Reject => Out::Reject,
                    Out::Val(_) => self.eval(second, env, cur),
                }
            }
            Node::Or { left, right, arg: a } => {
                arg(a, cur, env, self);
                let saved = cur.clone();
                match self.eval(left, env, cur) {
                    Out::Reject => {
                        *cur = saved;
                        self.eval(right, env, cur)
                    }
                    v => v,
                }
            }
            Node::Try { body, arg: a } => {
                arg(a, cur, env, self);
                let saved = cur.clone();
                match self.eval(body, env, cur) {
                    Out::Reject => {
                        *cur = saved.clone();
                        Out::Val(saved)
                    }
                    v => v,
                }
            }
            Node::Repeat { body, arg: a } => {
                arg(a, cur, env, self);
                loop {
                    let before = cur.clone();
                    match self.eval(body, env, cur) {
                        Out::Reject => {
                            *cur = before.clone();
                            return Out::Val(before);
                        }
                        Out::Val(_) if *cur == before => return Out::Val(before),
                        Out::Val(_) => {}
                    }
                }
            }
            Node::While { cond, body, arg: a } => {
                arg(a, cur, env, self);
                loop {
                    rebind(a, cur, env);
                    if !self.holds(env, cond) {
                        return Out::Val(cur.clone());
                    }
                    let before = cur.clone();
                    match self.eval(body, env, cur) {
                        Out::Val(_) if *cur == before => return Out::Reject,
                        Out::Val(_) => {}
                        Out::Reject => return Out::Reject,
                    }
                }
            }
            Node::If { cond, then, els, arg: a } => {
                arg(a, cur, env, self);
                rebind(a, cur, env);
                if self.holds(env, cond) {
                    self.eval(then, env, cur)
                } else {
                    self.eval(els, env, cur)
                }
            }
            Node::Expr(e) => {
                *cur = Some(self.expr(env, e));
                Out::Val(cur.clone())
            }
        }
    }
}

/// Runs the method for `problem` on `model` directly. Returns the program
/// value and the formulas the tactics produced, or `None` when the program
/// gets stuck.
pub fn direct_run(reg: &Registry, problem: &Key, m: &Model) -> Option<(Term, Vec<Term>)> {
    let method = reg.method_for(problem).unwrap();
    let program = reg.program(&method.program).unwrap();
    let init = init_calc(reg, problem, None, m.clone()).ok()?;
    let mut env: Subst = program
        .params
        .iter()
        .map(|p| (p.clone(), m.get(p).cloned().unwrap_or_else(|| Term::free(p.clone()))))
        .collect();
    let mut d = Direct { reg, rw: Rewriter::new(reg), ctx: init.root.init_ctx.clone(), formulas: vec![], fuel: 100_000, stuck: false };
    let mut cur = None;
    match d.eval(&program.body, &mut env, &mut cur) {
        Out::Val(Some(v)) if !d.stuck => {
            // the worksheet always ends on the result
            if d.formulas.last() != Some(&v) {
                d.formulas.push(v.clone());
            }
            Some((v, d.formulas))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Arithmetic oracles.

pub fn euclid(a: &BigInt, b: &BigInt) -> BigInt {
    a.gcd(b)
}

/// Exact rational value `(numerator, denominator)` with a positive,
/// reduced denominator; `None` on division by zero or unknown symbols.
pub type Q = (BigInt, BigInt);

fn q_norm(n: BigInt, d: BigInt) -> Option<Q> {
    if d.is_zero() {
        return None;
    }
    let g = n.gcd(&d);
    let (mut n, mut d) = (n / &g, d / &g);
    if d.is_negative() {
        n = -n;
        d = -d;
    }
    Some((n, d))
}

pub fn q_eval(t: &Term, x: &Q) -> Option<Q> {
    if let Some(n) = t.as_num() {
        return Some((n.clone(), BigInt::from(1)));
    }
    match t {
        Term::Free(v, _) if v == "x" => return Some(x.clone()),
        _ => {}
    }
    if let Some(a) = t.dest_unop(consts::UMINUS) {
        let (n, d) = q_eval(a, x)?;
        return Some((-n, d));
    }
    for op in [consts::PLUS, consts::MINUS, consts::TIMES, consts::DIVIDE] {
        if let Some((a, b)) = t.dest_binop(op) {
            let (an, ad) = q_eval(a, x)?;
            let (bn, bd) = q_eval(b, x)?;
            return match op {
                consts::PLUS => q_norm(an * &bd + bn * &ad, ad * bd),
                consts::MINUS => q_norm(an * &bd - bn * &ad, ad * bd),
                consts::TIMES => q_norm(an * bn, ad * bd),
                _ => q_norm(an * bd, ad * bn),
            };
        }
    }
    None
}

/// Sample points for value comparison of rational functions in `x`.
pub fn sample_points() -> Vec<Q> {
    [(2, 1), (3, 1), (5, 1), (-7, 1), (1, 3), (-5, 2), (11, 7), (13, 1)]
        .iter()
        .map(|&(n, d)| (BigInt::from(n), BigInt::from(d)))
        .collect()
}

/// True when `a` and `b` differ at some sample point where both are defined.
pub fn values_differ(a: &Term, b: &Term) -> bool {
    sample_points().iter().any(|p| match (q_eval(a, p), q_eval(b, p)) {
        (Some(u), Some(v)) => u != v,
        _ => false,
    })
}

/// True when `a` and `b` agree at every sample point where both are defined,
/// and at least one such point exists.
pub fn values_agree(a: &Term, b: &Term) -> bool {
    let mut seen = false;
    for p in sample_points() {
        if let (Some(u), Some(v)) = (q_eval(a, &p), q_eval(b, &p)) {
            if u != v {
                return false;
            }
            seen = true;
        }
    }
    seen
}

// ---------------------------------------------------------------------------
// Generators.

/// Rational expressions in `x` over small numerals, built from `+`, `-`
/// and `/`; the shape the rational fixture is meant for.
pub fn rational_term(rng: &mut StdRng, depth: u32) -> Term {
    if depth == 0 || rng.gen_ratio(1, 3) {
        return if rng.gen_bool(0.5) { Term::free("x") } else { Term::num(rng.gen_range(1..=5)) };
    }
    let a = rational_term(rng, depth - 1);
    let b = rational_term(rng, depth - 1);
    let op = [consts::PLUS, consts::MINUS, consts::DIVIDE, consts::DIVIDE][rng.gen_range(0..4)];
    Term::binop(op, a, b)
}

/// Continued-fraction shaped terms `k`, `x`, `k + t`, `k / t`.
pub fn fraction_chain(rng: &mut StdRng, depth: u32) -> Term {
    if depth == 0 || rng.gen_ratio(1, 4) {
        return if rng.gen_bool(0.5) { Term::free("x") } else { Term::num(rng.gen_range(1..=5)) };
    }
    let k = Term::num(rng.gen_range(1..=5));
    let t = fraction_chain(rng, depth - 1);
    if rng.gen_bool(0.5) {
        Term::binop(consts::PLUS, k, t)
    } else {
        Term::binop(consts::DIVIDE, k, t)
    }
}

/// Random first-order terms over a small signature. `schematic` allows
/// `?`-variables at the leaves.
pub fn random_term(rng: &mut StdRng, depth: u32, schematic: bool) -> Term {
    if depth == 0 || rng.gen_ratio(1, 4) {
        return match rng.gen_range(0..if schematic { 4 } else { 3 }) {
            0 => Term::num(rng.gen_range(-3..=3)),
            1 => Term::free(["x", "y", "z"][rng.gen_range(0..3)]),
            2 => Term::constant(["True", "False", "c"][rng.gen_range(0..3)]),
            _ => Term::var(["a", "b", "c"][rng.gen_range(0..3)]),
        };
    }
    match rng.gen_range(0..5) {
        0 => Term::app(Term::constant("f"), random_term(rng, depth - 1, schematic)),
        1 => Term::binop(consts::PLUS, random_term(rng, depth - 1, schematic), random_term(rng, depth - 1, schematic)),
        2 => Term::binop(consts::TIMES, random_term(rng, depth - 1, schematic), random_term(rng, depth - 1, schematic)),
        3 => Term::binop(consts::EQ, random_term(rng, depth - 1, schematic), random_term(rng, depth - 1, schematic)),
        _ => {
            let x = ["u", "v"][rng.gen_range(0..2)];
            let body = random_term(rng, depth - 1, false);
            Term::abs(x, TypeTag::Untyped, body)
        }
    }
}

//! First-order terms: the common medium for formulas, rewrite rules and
//! program bodies.
//!
//! Variables are named (no de Bruijn indices). A bound variable occurs in an
//! abstraction body as a `Free` node carrying the binder's name; equality on
//! terms is alpha-equality and ignores type tags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeTag {
    Real,
    Bool,
    ListOf(Box<TypeTag>),
    /// Right-associative: `Fun(a, Fun(b, c))` is `a => b => c`.
    Fun(Box<TypeTag>, Box<TypeTag>),
    Untyped,
}

impl TypeTag {
    pub fn fun(from: TypeTag, to: TypeTag) -> TypeTag {
        TypeTag::Fun(Box::new(from), Box::new(to))
    }

    pub fn list(elem: TypeTag) -> TypeTag {
        TypeTag::ListOf(Box::new(elem))
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Real => write!(f, "real"),
            TypeTag::Bool => write!(f, "bool"),
            TypeTag::ListOf(t) => write!(f, "{t} list"),
            TypeTag::Fun(a, b) => write!(f, "({a} => {b})"),
            TypeTag::Untyped => write!(f, "?"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Term {
    Const(String, TypeTag),
    /// Integer numeral. Non-integral quotients stay as `p / q` terms.
    Num(BigInt),
    /// Quoted literal, e.g. a rule name `''add_0''` in a program.
    Str(String),
    Free(String, TypeTag),
    /// Schematic variable `?a`; only inside rewrite-rule patterns.
    Var(String, TypeTag),
    Abs(String, TypeTag, Box<Term>),
    App(Box<Term>, Box<Term>),
}

/// Well-known constant names shared by the parser, printer and engine.
pub mod consts {
    pub const PLUS: &str = "+";
    pub const MINUS: &str = "-";
    pub const TIMES: &str = "*";
    pub const DIVIDE: &str = "/";
    pub const POWER: &str = "^";
    pub const UMINUS: &str = "uminus";
    pub const MOD: &str = "mod";
    pub const DIV: &str = "div";
    pub const EQ: &str = "=";
    pub const NEQ: &str = "~=";
    pub const LESS: &str = "<";
    pub const LESS_EQ: &str = "<=";
    pub const GREATER: &str = ">";
    pub const GREATER_EQ: &str = ">=";
    pub const AND: &str = "&";
    pub const OR: &str = "|";
    pub const NOT: &str = "Not";
    pub const TRUE: &str = "True";
    pub const FALSE: &str = "False";
    pub const NIL: &str = "[]";
    pub const CONS: &str = "#";
    pub const PAIR: &str = "Pair";
    pub const SQRT: &str = "sqrt";
    pub const LET: &str = "Let";
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(name.into(), TypeTag::Untyped)
    }

    pub fn free(name: impl Into<String>) -> Term {
        Term::Free(name.into(), TypeTag::Untyped)
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into(), TypeTag::Untyped)
    }

    pub fn num(n: impl Into<BigInt>) -> Term {
        Term::Num(n.into())
    }

    pub fn string(s: impl Into<String>) -> Term {
        Term::Str(s.into())
    }

    pub fn app(f: Term, x: Term) -> Term {
        Term::App(Box::new(f), Box::new(x))
    }

    pub fn abs(name: impl Into<String>, ty: TypeTag, body: Term) -> Term {
        Term::Abs(name.into(), ty, Box::new(body))
    }

    /// `f a1 ... an` as a left-nested application chain.
    pub fn apply(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    pub fn binop(op: &str, a: Term, b: Term) -> Term {
        Term::apply(Term::constant(op), [a, b])
    }

    pub fn truth(b: bool) -> Term {
        Term::constant(if b { consts::TRUE } else { consts::FALSE })
    }

    pub fn list(items: impl IntoIterator<Item = Term>) -> Term {
        let items: Vec<Term> = items.into_iter().collect();
        items.into_iter().rev().fold(Term::constant(consts::NIL), |acc, x| {
            Term::binop(consts::CONS, x, acc)
        })
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::binop(consts::PAIR, a, b)
    }

    pub fn is_const(&self, name: &str) -> bool {
        matches!(self, Term::Const(n, _) if n == name)
    }

    pub fn as_num(&self) -> Option<&BigInt> {
        match self {
            Term::Num(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Term::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Splits an application spine into its head and arguments.
    pub fn strip_comb(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut t = self;
        while let Term::App(f, x) = t {
            args.push(x.as_ref());
            t = f;
        }
        args.reverse();
        (t, args)
    }

    pub fn head_const(&self) -> Option<&str> {
        match self.strip_comb().0 {
            Term::Const(n, _) => Some(n),
            _ => None,
        }
    }

    /// Matches `op a b` for a binary constant `op`.
    pub fn dest_binop(&self, op: &str) -> Option<(&Term, &Term)> {
        match self {
            Term::App(f, b) => match f.as_ref() {
                Term::App(c, a) if c.is_const(op) => Some((a, b)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn dest_unop(&self, op: &str) -> Option<&Term> {
        match self {
            Term::App(f, a) if f.is_const(op) => Some(a),
            _ => None,
        }
    }

    /// Elements of a `#`/`[]` list term.
    pub fn dest_list(&self) -> Option<Vec<&Term>> {
        let mut out = Vec::new();
        let mut t = self;
        loop {
            if t.is_const(consts::NIL) {
                return Some(out);
            }
            let (x, rest) = t.dest_binop(consts::CONS)?;
            out.push(x);
            t = rest;
        }
    }

    pub fn contains_schematic(&self) -> bool {
        match self {
            Term::Var(..) => true,
            Term::Abs(_, _, b) => b.contains_schematic(),
            Term::App(f, x) => f.contains_schematic() || x.contains_schematic(),
            _ => false,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Abs(_, _, b) => 1 + b.size(),
            Term::App(f, x) => 1 + f.size() + x.size(),
            _ => 1,
        }
    }

    /// All valid paths of the term in pre-order.
    pub fn paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn go(t: &Term, cur: &mut Vec<Lrd>, out: &mut Vec<Path>) {
            out.push(Path(cur.clone()));
            match t {
                Term::Abs(_, _, b) => {
                    cur.push(Lrd::D);
                    go(b, cur, out);
                    cur.pop();
                }
                Term::App(f, x) => {
                    cur.push(Lrd::L);
                    go(f, cur, out);
                    cur.pop();
                    cur.push(Lrd::R);
                    go(x, cur, out);
                    cur.pop();
                }
                _ => {}
            }
        }
        go(self, &mut cur, &mut out);
        out
    }

    /// Names of constants, with multiplicity, in pre-order.
    pub fn const_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a Term, out: &mut Vec<&'a str>) {
            match t {
                Term::Const(n, _) => out.push(n),
                Term::Abs(_, _, b) => go(b, out),
                Term::App(f, x) => {
                    go(f, out);
                    go(x, out);
                }
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }

    pub fn schematic_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Var(n, _) => {
                    out.insert(n.clone());
                }
                Term::Abs(_, _, b) => go(b, out),
                Term::App(f, x) => {
                    go(f, out);
                    go(x, out);
                }
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }

    /// Replaces the type tag of every free occurrence of a constrained name.
    pub fn with_constraints(&self, constraints: &BTreeMap<String, TypeTag>) -> Term {
        match self {
            Term::Free(n, ty) => Term::Free(
                n.clone(),
                constraints.get(n).cloned().unwrap_or_else(|| ty.clone()),
            ),
            Term::Abs(x, ty, b) => {
                let mut inner = constraints.clone();
                inner.remove(x);
                Term::Abs(x.clone(), ty.clone(), Box::new(b.with_constraints(&inner)))
            }
            Term::App(f, a) => Term::app(f.with_constraints(constraints), a.with_constraints(constraints)),
            t => t.clone(),
        }
    }
}

impl PartialEq for Term {
    /// Alpha-equality; type tags are not compared.
    fn eq(&self, other: &Term) -> bool {
        alpha_eq(self, other)
    }
}

impl Eq for Term {}

pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn bound_index(stack: &[&str], name: &str) -> Option<usize> {
        stack.iter().rev().position(|n| *n == name)
    }
    fn go<'a>(a: &'a Term, b: &'a Term, la: &mut Vec<&'a str>, lb: &mut Vec<&'a str>) -> bool {
        match (a, b) {
            (Term::Const(x, _), Term::Const(y, _)) => x == y,
            (Term::Num(x), Term::Num(y)) => x == y,
            (Term::Str(x), Term::Str(y)) => x == y,
            (Term::Var(x, _), Term::Var(y, _)) => x == y,
            (Term::Free(x, _), Term::Free(y, _)) => {
                match (bound_index(la, x), bound_index(lb, y)) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::Abs(x, _, bx), Term::Abs(y, _, by)) => {
                la.push(x);
                lb.push(y);
                let r = go(bx, by, la, lb);
                la.pop();
                lb.pop();
                r
            }
            (Term::App(f, x), Term::App(g, y)) => go(f, g, la, lb) && go(x, y, la, lb),
            _ => false,
        }
    }
    go(a, b, &mut Vec::new(), &mut Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lrd {
    L,
    R,
    D,
}

/// A location in a term: `L`/`R` descend into function/argument of an
/// application, `D` into the body of an abstraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path(pub Vec<Lrd>);

impl Path {
    pub fn root() -> Path {
        Path(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, step: Lrd) -> Path {
        let mut p = self.0.clone();
        p.push(step);
        Path(p)
    }

    pub fn join(&self, steps: &[Lrd]) -> Path {
        let mut p = self.0.clone();
        p.extend_from_slice(steps);
        Path(p)
    }

    pub fn parent(&self) -> Option<Path> {
        let mut p = self.0.clone();
        p.pop().map(|_| Path(p))
    }

    pub fn starts_with(&self, prefix: &Path) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s:?}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TermError {
    #[error("at_location: no {path} for {term}")]
    PathMismatch { path: Path, term: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// The subterm reached by consuming `path`.
pub fn at_location<'a>(path: &Path, t: &'a Term) -> Result<&'a Term, TermError> {
    let mut cur = t;
    for (i, step) in path.0.iter().enumerate() {
        cur = match (step, cur) {
            (Lrd::D, Term::Abs(_, _, body)) => body,
            (Lrd::L, Term::App(f, _)) => f,
            (Lrd::R, Term::App(_, x)) => x,
            _ => {
                return Err(TermError::PathMismatch {
                    path: Path(path.0[i..].to_vec()),
                    term: format!("{cur:?}"),
                })
            }
        };
    }
    Ok(cur)
}

/// `t` with the subterm at `path` replaced by `sub`.
pub fn replace_at(path: &Path, t: &Term, sub: Term) -> Result<Term, TermError> {
    fn go(steps: &[Lrd], t: &Term, sub: Term) -> Result<Term, TermError> {
        let Some((step, rest)) = steps.split_first() else {
            return Ok(sub);
        };
        match (step, t) {
            (Lrd::D, Term::Abs(x, ty, body)) => {
                Ok(Term::Abs(x.clone(), ty.clone(), Box::new(go(rest, body, sub)?)))
            }
            (Lrd::L, Term::App(f, a)) => Ok(Term::App(Box::new(go(rest, f, sub)?), a.clone())),
            (Lrd::R, Term::App(f, a)) => Ok(Term::App(f.clone(), Box::new(go(rest, a, sub)?))),
            _ => Err(TermError::PathMismatch {
                path: Path(steps.to_vec()),
                term: format!("{t:?}"),
            }),
        }
    }
    go(&path.0, t, sub)
}

/// Bindings from variable names to terms. Keys address both `Free` and
/// schematic (`Var`) nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subst(pub BTreeMap<String, Term>);

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn singleton(name: impl Into<String>, t: Term) -> Subst {
        let mut s = Subst::new();
        s.insert(name, t);
        s
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Term) {
        self.0.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Term> {
        self.0.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    /// No binding's value mentions a bound schematic name.
    pub fn is_idempotent(&self) -> bool {
        self.0
            .values()
            .all(|v| v.schematic_vars().iter().all(|n| !self.0.contains_key(n)))
    }
}

impl FromIterator<(String, Term)> for Subst {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Subst(iter.into_iter().collect())
    }
}

pub fn free_vars(t: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn go(t: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match t {
            Term::Free(n, _) => {
                if !bound.contains(n) {
                    out.insert(n.clone());
                }
            }
            Term::Abs(x, _, b) => {
                bound.push(x.clone());
                go(b, bound, out);
                bound.pop();
            }
            Term::App(f, a) => {
                go(f, bound, out);
                go(a, bound, out);
            }
            _ => {}
        }
    }
    go(t, &mut Vec::new(), &mut out);
    out
}

fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut name = format!("{base}'");
    while avoid.contains(&name) {
        name.push('\'');
    }
    name
}

/// Capture-avoiding simultaneous substitution.
pub fn apply_subst(s: &Subst, t: &Term) -> Term {
    if s.is_empty() {
        return t.clone();
    }
    match t {
        Term::Free(n, _) | Term::Var(n, _) => s.get(n).cloned().unwrap_or_else(|| t.clone()),
        Term::App(f, a) => Term::app(apply_subst(s, f), apply_subst(s, a)),
        Term::Abs(x, ty, body) => {
            let mut inner = s.clone();
            inner.0.remove(x);
            let body_fv = free_vars(body);
            let captures = inner
                .iter()
                .any(|(k, v)| body_fv.contains(k) && free_vars(v).contains(x));
            if captures {
                let mut avoid = body_fv.clone();
                for v in inner.0.values() {
                    avoid.extend(free_vars(v));
                }
                avoid.insert(x.clone());
                let y = fresh_name(x, &avoid);
                inner.insert(x.clone(), Term::Free(y.clone(), ty.clone()));
                Term::Abs(y, ty.clone(), Box::new(apply_subst(&inner, body)))
            } else {
                Term::Abs(x.clone(), ty.clone(), Box::new(apply_subst(&inner, body)))
            }
        }
        _ => t.clone(),
    }
}

/// First-order syntactic matching of `pattern` against `t`.
///
/// Returns `Ok(None)` for no match; `InvalidInput` if `t` itself contains
/// schematic variables.
pub fn match_pattern(pattern: &Term, t: &Term) -> Result<Option<Subst>, TermError> {
    if t.contains_schematic() {
        return Err(TermError::InvalidInput(
            "matched term contains schematic variables".into(),
        ));
    }
    let mut s = Subst::new();
    Ok(matches(pattern, t, &mut s, &mut Vec::new()).then_some(s))
}

fn matches(p: &Term, t: &Term, s: &mut Subst, binders: &mut Vec<(String, String)>) -> bool {
    match (p, t) {
        (Term::Var(n, _), _) => {
            // a schematic variable may not capture a locally bound name
            let fv = free_vars(t);
            if binders.iter().any(|(_, tb)| fv.contains(tb)) {
                return false;
            }
            match s.get(n) {
                Some(bound) => bound == t,
                None => {
                    s.insert(n.clone(), t.clone());
                    true
                }
            }
        }
        (Term::Free(x, _), Term::Free(y, _)) => {
            let bx = binders.iter().rev().position(|(pb, _)| pb == x);
            let by = binders.iter().rev().position(|(_, tb)| tb == y);
            match (bx, by) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            }
        }
        (Term::Abs(x, _, pb), Term::Abs(y, _, tb)) => {
            binders.push((x.clone(), y.clone()));
            let r = matches(pb, tb, s, binders);
            binders.pop();
            r
        }
        (Term::App(pf, pa), Term::App(tf, ta)) => {
            matches(pf, tf, s, binders) && matches(pa, ta, s, binders)
        }
        (Term::Const(a, _), Term::Const(b, _)) => a == b,
        (Term::Num(a), Term::Num(b)) => a == b,
        (Term::Str(a), Term::Str(b)) => a == b,
        _ => false,
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::print_term_debug(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus(a: Term, b: Term) -> Term {
        Term::binop(consts::PLUS, a, b)
    }

    #[test]
    fn at_location_follows_clauses() {
        let fx = Term::app(Term::free("f"), Term::free("x"));
        assert_eq!(at_location(&Path::root(), &fx).unwrap(), &fx);
        assert_eq!(at_location(&Path(vec![Lrd::L]), &fx).unwrap(), &Term::free("f"));
        let body = plus(Term::free("y"), Term::num(1));
        let t = Term::app(Term::free("g"), Term::abs("y", TypeTag::Real, body.clone()));
        assert_eq!(at_location(&Path(vec![Lrd::R, Lrd::D]), &t).unwrap(), &body);
    }

    #[test]
    fn at_location_mismatch() {
        let err = at_location(&Path(vec![Lrd::D]), &Term::free("x")).unwrap_err();
        assert!(matches!(err, TermError::PathMismatch { .. }));
        assert!(replace_at(&Path(vec![Lrd::L]), &Term::num(1), Term::num(2)).is_err());
    }

    #[test]
    fn replace_at_examples() {
        let t = Term::app(Term::free("f"), Term::free("x"));
        assert_eq!(replace_at(&Path::root(), &t, Term::num(3)).unwrap(), Term::num(3));
        assert_eq!(
            replace_at(&Path(vec![Lrd::R]), &t, Term::free("y")).unwrap(),
            Term::app(Term::free("f"), Term::free("y"))
        );
    }

    #[test]
    fn matching_examples() {
        let pat = plus(Term::var("a"), Term::var("b"));
        let t = plus(Term::num(3), Term::free("x"));
        let s = match_pattern(&pat, &t).unwrap().unwrap();
        assert_eq!(s.get("a"), Some(&Term::num(3)));
        assert_eq!(s.get("b"), Some(&Term::free("x")));

        let nonlinear = plus(Term::var("a"), Term::var("a"));
        assert!(match_pattern(&nonlinear, &t).unwrap().is_none());

        let minus = Term::binop(consts::MINUS, Term::var("a"), Term::var("b"));
        let uv = Term::binop(consts::MINUS, Term::free("u"), Term::free("v"));
        let s = match_pattern(&minus, &uv).unwrap().unwrap();
        assert_eq!(apply_subst(&s, &minus), uv);

        assert!(matches!(
            match_pattern(&pat, &pat),
            Err(TermError::InvalidInput(_))
        ));
    }

    #[test]
    fn subst_examples() {
        let s = Subst::singleton("x", Term::num(2));
        assert_eq!(
            apply_subst(&s, &plus(Term::free("x"), Term::num(3))),
            plus(Term::num(2), Term::num(3))
        );
        let t = plus(Term::free("y"), Term::free("z"));
        assert_eq!(apply_subst(&Subst::new(), &t), t);
    }

    #[test]
    fn subst_avoids_capture() {
        // {y -> x} applied to (λx. y + x) must not capture
        let t = Term::abs("x", TypeTag::Real, plus(Term::free("y"), Term::free("x")));
        let s = Subst::singleton("y", Term::free("x"));
        let r = apply_subst(&s, &t);
        assert_eq!(free_vars(&r), BTreeSet::from(["x".to_string()]));
        match &r {
            Term::Abs(name, _, body) => {
                assert_eq!(name, "x'");
                assert_eq!(**body, plus(Term::free("x"), Term::free("x'")));
            }
            _ => panic!("expected abstraction"),
        }
    }

    #[test]
    fn free_vars_examples() {
        let t = plus(Term::free("x"), Term::free("y"));
        assert_eq!(free_vars(&t), BTreeSet::from(["x".into(), "y".into()]));
        let a = Term::abs("x", TypeTag::Real, t);
        assert_eq!(free_vars(&a), BTreeSet::from(["y".into()]));
        assert!(free_vars(&plus(Term::num(1), Term::constant("True"))).is_empty());
    }

    #[test]
    fn alpha_equality_ignores_binder_names_and_types() {
        let a = Term::abs("x", TypeTag::Real, Term::free("x"));
        let b = Term::abs("y", TypeTag::Bool, Term::free("y"));
        assert_eq!(a, b);
        let c = Term::abs("y", TypeTag::Real, Term::free("x"));
        assert_ne!(a, c);
        assert_eq!(Term::Free("x".into(), TypeTag::Real), Term::free("x"));
    }

    #[test]
    fn list_roundtrip() {
        let l = Term::list([Term::num(1), Term::num(2)]);
        let items = l.dest_list().unwrap();
        assert_eq!(items, vec![&Term::num(1), &Term::num(2)]);
    }
}

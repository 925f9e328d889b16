//! Concrete syntax for formulas, rules, programs and theory files, and the
//! printer back to text.

mod lexer;
mod printer;
mod theory;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calc::Context;
use crate::program::{self, ProgramDef};
use crate::term::{consts, free_vars, Term, TypeTag};

use lexer::{Lexer, Tok, Token};

pub use printer::{print_term, print_term_debug, PrintError};
pub use theory::{parse_rule, parse_theory, TheoryFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_offset: usize,
    pub end_offset: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {}:{}: {message}", span.line, span.col)]
    SyntaxError { span: SourceSpan, message: String },
    #[error("unbound variables on the right-hand side: {}", names.join(", "))]
    ValidationError { span: SourceSpan, names: Vec<String> },
}

impl ParseError {
    pub(crate) fn syntax(span: SourceSpan, message: impl Into<String>) -> Self {
        ParseError::SyntaxError { span, message: message.into() }
    }

    pub fn span(&self) -> SourceSpan {
        match self {
            ParseError::SyntaxError { span, .. } | ParseError::ValidationError { span, .. } => *span,
        }
    }
}

/// Names that never denote variables.
const RESERVED: &[&str] = &[
    "theory", "imports", "rules", "rulesets", "problems", "programs", "rule", "ruleset",
    "problem", "method", "program", "given", "where", "find", "relate", "calc", "solver",
    "max_steps", "guard", "normal_form", "let", "in", "If", "Then", "Else", "While", "Do", "Or",
    "mod", "div",
];

/// Identifiers parsed as constants rather than free variables.
const KNOWN_CONSTS: &[&str] = &[
    consts::TRUE, consts::FALSE, consts::SQRT, "gcd", "divisor", "hd", "tl", "lastElem", "nth",
    "length", "is_num", "fst", "snd",
];

fn is_reserved(s: &str) -> bool {
    RESERVED.contains(&s)
}

fn is_known_const(s: &str) -> bool {
    KNOWN_CONSTS.contains(&s)
        || program::TACTIC_NAMES.contains(&s)
        || program::TACTICAL_NAMES.contains(&s)
}

// binding powers
const BP_CHAIN: u8 = 1;
const BP_OR: u8 = 3;
const BP_AND: u8 = 4;
const BP_NOT: u8 = 5;
const BP_REL: u8 = 6;
const BP_CONS: u8 = 7;
const BP_ADD: u8 = 8;
const BP_MUL: u8 = 9;
const BP_NEG: u8 = 10;
const BP_POW: u8 = 11;

#[derive(Clone, Copy, PartialEq)]
enum Assoc {
    Left,
    Right,
    Non,
}

pub(crate) struct Parser<'c> {
    toks: Vec<Token>,
    pos: usize,
    program_mode: bool,
    constraints: Option<&'c BTreeMap<String, TypeTag>>,
}

impl<'c> Parser<'c> {
    pub(crate) fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: Lexer::new(src).tokenize()?, pos: 0, program_mode: false, constraints: None })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn advance(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        // at end of input, point at the last real token
        let span = if self.at_eof() && self.pos > 0 { self.prev_span() } else { self.span() };
        ParseError::syntax(span, msg)
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Num(n) => format!("numeral `{n}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string ''{s}''"),
            Tok::Schematic(s) => format!("`?{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.at_sym(s) {
            self.advance();
            Ok(())
        } else {
            Err(self.err_here(format!("expected `{s}`, found {}", self.describe())))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.at_word(w) {
            self.advance();
            Ok(())
        } else {
            Err(self.err_here(format!("expected `{w}`, found {}", self.describe())))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.err_here(format!("expected an identifier, found {}", self.describe()))),
        }
    }

    fn infix(&self) -> Option<(&'static str, u8, Assoc)> {
        let op = match self.peek() {
            Tok::Sym("#>") if self.program_mode => (program::CHAIN, BP_CHAIN, Assoc::Right),
            Tok::Ident(w) if w == "Or" && self.program_mode => (program::OR, BP_CHAIN, Assoc::Right),
            Tok::Sym("|") => (consts::OR, BP_OR, Assoc::Right),
            Tok::Sym("&") => (consts::AND, BP_AND, Assoc::Right),
            Tok::Sym("=") => (consts::EQ, BP_REL, Assoc::Non),
            Tok::Sym("~=") => (consts::NEQ, BP_REL, Assoc::Non),
            Tok::Sym("<") => (consts::LESS, BP_REL, Assoc::Non),
            Tok::Sym("<=") => (consts::LESS_EQ, BP_REL, Assoc::Non),
            Tok::Sym(">") => (consts::GREATER, BP_REL, Assoc::Non),
            Tok::Sym(">=") => (consts::GREATER_EQ, BP_REL, Assoc::Non),
            Tok::Sym("#") => (consts::CONS, BP_CONS, Assoc::Right),
            Tok::Sym("+") => (consts::PLUS, BP_ADD, Assoc::Left),
            Tok::Sym("-") => (consts::MINUS, BP_ADD, Assoc::Left),
            Tok::Sym("*") => (consts::TIMES, BP_MUL, Assoc::Left),
            Tok::Sym("/") => (consts::DIVIDE, BP_MUL, Assoc::Left),
            Tok::Ident(w) if w == "mod" => (consts::MOD, BP_MUL, Assoc::Left),
            Tok::Ident(w) if w == "div" => (consts::DIV, BP_MUL, Assoc::Left),
            Tok::Sym("^") => (consts::POWER, BP_POW, Assoc::Right),
            _ => return None,
        };
        Some(op)
    }

    pub(crate) fn expr(&mut self, min_bp: u8) -> Result<Term, ParseError> {
        let mut lhs = self.prefix()?;
        while let Some((op, bp, assoc)) = self.infix() {
            if bp < min_bp {
                break;
            }
            let op_span = self.span();
            self.advance();
            if self.at_eof() {
                return Err(ParseError::syntax(op_span, format!("missing operand after `{}`", op_text(op))));
            }
            let rhs = self.expr(if assoc == Assoc::Right { bp } else { bp + 1 })?;
            lhs = Term::binop(op, lhs, rhs);
            if assoc == Assoc::Non {
                if let Some((_, bp2, Assoc::Non)) = self.infix() {
                    if bp2 == bp {
                        return Err(self.err_here("relations do not associate; add parentheses"));
                    }
                }
            }
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Sym("-") => {
                self.advance();
                if let Tok::Num(n) = self.peek().clone() {
                    self.advance();
                    let v: BigInt = n.parse().expect("lexer yields digits");
                    return Ok(Term::Num(-v));
                }
                let operand = self.operand(BP_NEG, "-")?;
                Ok(Term::app(Term::constant(consts::UMINUS), operand))
            }
            Tok::Sym("~") => {
                self.advance();
                let operand = self.operand(BP_NOT, "~")?;
                Ok(Term::app(Term::constant(consts::NOT), operand))
            }
            Tok::Sym("\\") => {
                self.advance();
                let x = self.ident()?;
                self.expect_sym(".")?;
                let body = self.expr(0)?;
                let ty = self.var_type(&x);
                Ok(Term::abs(x, ty, body))
            }
            Tok::Ident(w) if w == "let" && self.program_mode => self.let_expr(),
            _ => self.application(),
        }
    }

    fn operand(&mut self, bp: u8, op: &str) -> Result<Term, ParseError> {
        if self.at_eof() {
            return Err(self.err_here(format!("missing operand after `{op}`")));
        }
        self.expr(bp)
    }

    fn let_expr(&mut self) -> Result<Term, ParseError> {
        self.expect_word("let")?;
        let mut binds = Vec::new();
        loop {
            let x = self.ident()?;
            self.expect_sym("=")?;
            let e = self.expr(BP_CHAIN)?;
            binds.push((x, e));
            if self.at_sym(";;") {
                self.advance();
                continue;
            }
            break;
        }
        self.expect_word("in")?;
        let body = self.expr(0)?;
        Ok(binds.into_iter().rev().fold(body, |acc, (x, e)| {
            Term::apply(Term::constant(consts::LET), [e, Term::abs(x, TypeTag::Untyped, acc)])
        }))
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Num(_) | Tok::Str(_) | Tok::Schematic(_) => true,
            Tok::Sym("(") | Tok::Sym("[") | Tok::Sym("sqrt") => true,
            Tok::Ident(w) => {
                !is_reserved(w) || (self.program_mode && (w == "If" || w == "While"))
            }
            _ => false,
        }
    }

    fn application(&mut self) -> Result<Term, ParseError> {
        if !self.starts_atom() {
            return Err(self.err_here(format!("expected a term, found {}", self.describe())));
        }
        let mut t = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            t = Term::app(t, arg);
        }
        Ok(t)
    }

    fn var_type(&self, name: &str) -> TypeTag {
        self.constraints
            .and_then(|c| c.get(name).cloned())
            .unwrap_or(TypeTag::Untyped)
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.advance();
                Ok(Term::Num(n.parse().expect("lexer yields digits")))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Term::Str(s))
            }
            Tok::Schematic(s) => {
                self.advance();
                Ok(Term::var(s))
            }
            Tok::Sym("sqrt") => {
                self.advance();
                if !self.starts_atom() {
                    return Err(self.err_here("missing operand after `√`"));
                }
                let a = self.atom()?;
                Ok(Term::app(Term::constant(consts::SQRT), a))
            }
            Tok::Sym("(") => {
                self.advance();
                let mut items = vec![self.expr(0)?];
                while self.at_sym(",") {
                    self.advance();
                    items.push(self.expr(0)?);
                }
                self.expect_sym(")")?;
                let last = items.pop().expect("at least one item");
                Ok(items.into_iter().rev().fold(last, |acc, x| Term::pair(x, acc)))
            }
            Tok::Sym("[") => {
                self.advance();
                let mut items = Vec::new();
                if !self.at_sym("]") {
                    items.push(self.expr(0)?);
                    while self.at_sym(",") {
                        self.advance();
                        items.push(self.expr(0)?);
                    }
                }
                self.expect_sym("]")?;
                Ok(Term::list(items))
            }
            Tok::Ident(w) if self.program_mode && w == "While" => {
                self.advance();
                let cond = self.atom_required("While")?;
                self.expect_word("Do")?;
                Ok(Term::app(Term::constant(program::WHILE), cond))
            }
            Tok::Ident(w) if self.program_mode && w == "If" => {
                self.advance();
                let cond = self.atom_required("If")?;
                self.expect_word("Then")?;
                let yes = self.atom_required("Then")?;
                self.expect_word("Else")?;
                let no = self.atom_required("Else")?;
                Ok(Term::apply(Term::constant(program::IF), [cond, yes, no]))
            }
            Tok::Ident(w) if is_reserved(&w) => {
                Err(ParseError::syntax(span, format!("`{w}` is a reserved word")))
            }
            Tok::Ident(w) => {
                self.advance();
                if is_known_const(&w) {
                    Ok(Term::constant(w))
                } else {
                    let ty = self.var_type(&w);
                    Ok(Term::Free(w, ty))
                }
            }
            _ => Err(self.err_here(format!("expected a term, found {}", self.describe()))),
        }
    }

    fn atom_required(&mut self, after: &str) -> Result<Term, ParseError> {
        if !self.starts_atom() {
            return Err(self.err_here(format!(
                "expected a parenthesised term after `{after}`, found {}",
                self.describe()
            )));
        }
        self.atom()
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.err_here(format!("unexpected {}", self.describe())))
        }
    }
}

fn op_text(op: &str) -> &str {
    match op {
        program::CHAIN => "#>",
        consts::TIMES => "·",
        consts::NEQ => "≠",
        consts::AND => "∧",
        consts::OR => "∨",
        o => o,
    }
}

/// Parses a formula; free variables take their type from the context's
/// recorded constraints.
pub fn parse_formula(src: &str, ctx: &Context) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    p.constraints = Some(&ctx.type_constraints);
    let t = p.expr(0)?;
    p.finish()?;
    Ok(t)
}

/// Parses a formula in program syntax (tacticals, `let`), e.g. an input tactic.
pub fn parse_program_expr(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    p.program_mode = true;
    let t = p.expr(0)?;
    p.finish()?;
    Ok(t)
}

/// `program NAME(param, ...) = BODY`
pub fn parse_program(src: &str) -> Result<ProgramDef, ParseError> {
    let mut p = Parser::new(src)?;
    let def = p.program_decl()?;
    p.finish()?;
    Ok(def)
}

impl Parser<'_> {
    pub(crate) fn program_decl(&mut self) -> Result<ProgramDef, ParseError> {
        let start = self.span();
        self.expect_word("program")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.at_sym(")") {
            params.push(self.ident()?);
            while self.at_sym(",") {
                self.advance();
                params.push(self.ident()?);
            }
        }
        self.expect_sym(")")?;
        self.expect_sym("=")?;
        let saved = self.program_mode;
        self.program_mode = true;
        let body = self.expr(0);
        self.program_mode = saved;
        let body = body?;
        let end = self.prev_span();
        let span = SourceSpan {
            start_offset: start.start_offset,
            end_offset: end.end_offset,
            line: start.line,
            col: start.col,
        };
        let unbound: Vec<String> = free_vars(&body)
            .into_iter()
            .filter(|v| !params.contains(v))
            .collect();
        if !unbound.is_empty() {
            return Err(ParseError::ValidationError { span, names: unbound });
        }
        if let Err(msg) = program::check_control(&body) {
            return Err(ParseError::syntax(span, msg));
        }
        Ok(ProgramDef { name, params, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Lrd, Path};

    fn f(s: &str) -> Term {
        parse_formula(s, &Context::default()).unwrap()
    }

    #[test]
    fn parses_sum() {
        assert_eq!(
            f("x + 3"),
            Term::binop(consts::PLUS, Term::free("x"), Term::num(3))
        );
    }

    #[test]
    fn division_equation_shape() {
        let t = f("a / x = b");
        let (lhs, rhs) = t.dest_binop(consts::EQ).unwrap();
        assert!(lhs.dest_binop(consts::DIVIDE).is_some());
        assert_eq!(rhs, &Term::free("b"));
    }

    #[test]
    fn incomplete_input_has_span() {
        let err = parse_formula("x +", &Context::default()).unwrap_err();
        match err {
            ParseError::SyntaxError { span, .. } => {
                assert_eq!((span.start_offset, span.end_offset), (2, 3));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn precedence() {
        assert_eq!(f("a + b · c"), f("a + (b · c)"));
        assert_eq!(f("a ∨ b ∧ c"), f("a | (b & c)"));
        assert_eq!(f("x ^ 2 ^ 3"), f("x ^ (2 ^ 3)"));
        assert_eq!(f("a - b - c"), f("(a - b) - c"));
        assert_eq!(f("-x ^ 2"), f("-(x ^ 2)"));
        assert_eq!(f("f x y"), f("(f x) y"));
    }

    #[test]
    fn relations_do_not_chain() {
        assert!(parse_formula("a = b = c", &Context::default()).is_err());
    }

    #[test]
    fn types_come_from_context() {
        let mut ctx = Context::default();
        ctx.type_constraints.insert("a".into(), TypeTag::Real);
        match parse_formula("a", &ctx).unwrap() {
            Term::Free(_, ty) => assert_eq!(ty, TypeTag::Real),
            t => panic!("{t:?}"),
        }
        match parse_formula("b", &ctx).unwrap() {
            Term::Free(_, ty) => assert_eq!(ty, TypeTag::Untyped),
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn single_tactic_program() {
        let p = parse_program("program p(t) = Rewrite ''add_0'' t").unwrap();
        assert_eq!(
            p.body,
            Term::apply(
                Term::constant("Rewrite"),
                [Term::string("add_0"), Term::free("t")]
            )
        );
    }

    #[test]
    fn unbound_variable_rejected() {
        let err = parse_program("program p(t) = Take (t + z)").unwrap_err();
        match err {
            ParseError::ValidationError { names, .. } => assert_eq!(names, vec!["z".to_string()]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn let_binds_names() {
        let p = parse_program("program p(t) = let u = Take (t + 1) ;; w = Take u in Take w").unwrap();
        assert_eq!(p.body.head_const(), Some(consts::LET));
        let inner = crate::term::at_location(&Path(vec![Lrd::R, Lrd::D]), &p.body).unwrap();
        assert_eq!(inner.head_const(), Some(consts::LET));
    }

    #[test]
    fn tacticals_parse() {
        let p = parse_program(
            "program p(t) = (Try (Rewrite ''a'') #> Repeat (Rewrite_Set ''b'')) t",
        )
        .unwrap();
        assert_eq!(p.body.head_const(), Some(program::CHAIN));
        let p = parse_program("program p(t) = While (t ~= 0) Do (Calculate ''MOD'') t").unwrap();
        assert_eq!(p.body.head_const(), Some(program::WHILE));
        assert_eq!(p.body.strip_comb().1.len(), 3);
        let p = parse_program("program p(t) = If (t = 0) Then (Take 1) Else (Take 2)").unwrap();
        assert_eq!(p.body.head_const(), Some(program::IF));
    }

    #[test]
    fn unknown_control_head_rejected() {
        assert!(parse_program("program p(t) = Try (Frobnicate t)").is_err());
    }

    #[test]
    fn negative_literals_and_unary_minus() {
        assert_eq!(f("-3"), Term::num(-3));
        assert_eq!(
            f("-x"),
            Term::app(Term::constant(consts::UMINUS), Term::free("x"))
        );
        assert_eq!(f("2 - 3"), Term::binop(consts::MINUS, Term::num(2), Term::num(3)));
    }
}

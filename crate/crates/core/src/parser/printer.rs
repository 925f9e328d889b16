use thiserror::Error;

use crate::program;
use crate::term::{consts, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrintError {
    #[error("abstractions are only printed in debug mode")]
    Abstraction,
    #[error("operator `{0}` is not fully applied")]
    PartialOperator(String),
}

const ATOM: u8 = 14;
const APP: u8 = 13;

fn binop_info(name: &str) -> Option<(&'static str, u8, u8, u8)> {
    // (text, own precedence, left minimum, right minimum)
    let left = |p: u8| (p, p, p + 1);
    let right = |p: u8| (p, p + 1, p);
    let non = |p: u8| (p, p + 1, p + 1);
    let (text, (own, l, r)) = match name {
        program::CHAIN => ("#>", right(1)),
        program::OR => ("Or", right(1)),
        consts::OR => ("∨", right(3)),
        consts::AND => ("∧", right(4)),
        consts::EQ => ("=", non(6)),
        consts::NEQ => ("≠", non(6)),
        consts::LESS => ("<", non(6)),
        consts::LESS_EQ => ("≤", non(6)),
        consts::GREATER => (">", non(6)),
        consts::GREATER_EQ => ("≥", non(6)),
        consts::CONS => ("#", right(7)),
        consts::PLUS => ("+", left(8)),
        consts::MINUS => ("-", left(8)),
        consts::TIMES => ("·", left(9)),
        consts::DIVIDE => ("/", left(9)),
        consts::MOD => ("mod", left(9)),
        consts::DIV => ("div", left(9)),
        consts::POWER => ("^", right(11)),
        _ => return None,
    };
    Some((text, own, l, r))
}

fn is_operator_const(name: &str) -> bool {
    binop_info(name).is_some()
        || matches!(
            name,
            consts::UMINUS | consts::NOT | consts::NIL | consts::CONS | consts::PAIR | consts::LET
        )
}

struct Printer {
    debug: bool,
}

impl Printer {
    fn wrap(&self, t: &Term, min: u8) -> Result<String, PrintError> {
        let (s, p) = self.doc(t)?;
        Ok(if p < min { format!("({s})") } else { s })
    }

    fn doc(&self, t: &Term) -> Result<(String, u8), PrintError> {
        if let Some(items) = t.dest_list() {
            let items = items
                .into_iter()
                .map(|x| self.wrap(x, 0))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok((format!("[{}]", items.join(", ")), ATOM));
        }
        match t {
            Term::Num(n) => {
                let own = if n.sign() == num_bigint::Sign::Minus { 10 } else { ATOM };
                Ok((n.to_string(), own))
            }
            Term::Str(s) => Ok((format!("''{s}''"), ATOM)),
            Term::Var(n, _) => Ok((format!("?{n}"), ATOM)),
            Term::Free(n, _) => Ok((n.clone(), ATOM)),
            Term::Const(n, _) => {
                if is_operator_const(n) {
                    if self.debug {
                        Ok((format!("({n})"), ATOM))
                    } else {
                        Err(PrintError::PartialOperator(n.clone()))
                    }
                } else {
                    Ok((n.clone(), ATOM))
                }
            }
            Term::Abs(x, _, body) => {
                if !self.debug {
                    return Err(PrintError::Abstraction);
                }
                Ok((format!("λ{x}. {}", self.wrap(body, 0)?), 0))
            }
            Term::App(..) => self.app(t),
        }
    }

    fn app(&self, t: &Term) -> Result<(String, u8), PrintError> {
        let (head, args) = t.strip_comb();
        let name = match head {
            Term::Const(n, _) => Some(n.as_str()),
            _ => None,
        };
        match (name, args.as_slice()) {
            (Some(consts::PAIR), [a, b]) => {
                return Ok((format!("({}, {})", self.wrap(a, 0)?, self.wrap(b, 0)?), ATOM));
            }
            (Some(consts::UMINUS), [a]) => {
                let inner = self.wrap(a, 10)?;
                let inner = if matches!(a, Term::Num(_)) || inner.starts_with(|c: char| c.is_ascii_digit() || c == '-') {
                    format!("({})", self.wrap(a, 0)?)
                } else {
                    inner
                };
                return Ok((format!("-{inner}"), 10));
            }
            (Some(consts::NOT), [a]) => {
                return Ok((format!("¬{}", self.wrap(a, 5)?), 5));
            }
            (Some(consts::SQRT), [a]) => {
                return Ok((format!("√{}", self.wrap(a, ATOM)?), ATOM));
            }
            (Some(consts::LET), [_, Term::Abs(..)]) => return self.let_chain(t),
            (Some(n), [a, b]) if binop_info(n).is_some() => {
                let (text, own, l, r) = binop_info(n).expect("checked");
                return Ok((format!("{} {text} {}", self.wrap(a, l)?, self.wrap(b, r)?), own));
            }
            (Some(program::IF), [c, y, n, rest @ ..]) => {
                let mut s = format!(
                    "If {} Then {} Else {}",
                    self.wrap(c, ATOM)?,
                    self.wrap(y, ATOM)?,
                    self.wrap(n, ATOM)?
                );
                for r in rest {
                    s.push(' ');
                    s.push_str(&self.wrap(r, ATOM)?);
                }
                return Ok((s, APP));
            }
            (Some(program::WHILE), [c, rest @ ..]) => {
                let mut s = format!("While {} Do", self.wrap(c, ATOM)?);
                for r in rest {
                    s.push(' ');
                    s.push_str(&self.wrap(r, ATOM)?);
                }
                return Ok((s, APP));
            }
            _ => {}
        }
        // a binary operator applied to more than two arguments
        if let Some(n) = name {
            if binop_info(n).is_some() && args.len() > 2 {
                let (f, x) = match t {
                    Term::App(f, x) => (f, x),
                    _ => unreachable!(),
                };
                return Ok((format!("{} {}", self.wrap(f, 0).map(|s| format!("({s})"))?, self.wrap(x, ATOM)?), APP));
            }
            if is_operator_const(n) && !self.debug {
                return Err(PrintError::PartialOperator(n.to_string()));
            }
        }
        let mut s = self.wrap(head, ATOM)?;
        for a in args {
            s.push(' ');
            s.push_str(&self.wrap(a, ATOM)?);
        }
        Ok((s, APP))
    }

    fn let_chain(&self, t: &Term) -> Result<(String, u8), PrintError> {
        let mut binds = Vec::new();
        let mut cur = t;
        loop {
            let (head, args) = cur.strip_comb();
            match (head, args.as_slice()) {
                (Term::Const(n, _), [e, Term::Abs(x, _, body)]) if n == consts::LET => {
                    binds.push(format!("{x} = {}", self.wrap(e, 1)?));
                    cur = body;
                }
                _ => break,
            }
        }
        Ok((format!("let {} in {}", binds.join(" ;; "), self.wrap(cur, 0)?), 0))
    }
}

/// User-facing printer; abstractions are rejected.
pub fn print_term(t: &Term) -> Result<String, PrintError> {
    Printer { debug: false }.doc(t).map(|(s, _)| s)
}

/// Prints any term, including abstractions and partially applied operators.
pub fn print_term_debug(t: &Term) -> String {
    Printer { debug: true }
        .doc(t)
        .map(|(s, _)| s)
        .unwrap_or_else(|e| format!("<{e}>"))
}

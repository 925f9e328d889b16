//! Program vocabulary: tactics, tacticals and the decoding of program terms
//! into control nodes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::knowledge::Key;
use crate::parser::{parse_program_expr, print_term, print_term_debug, ParseError};
use crate::rewrite::CalcOp;
use crate::term::{consts, Lrd, Path, Subst, Term};

pub const CALCULATE: &str = "Calculate";
pub const REWRITE: &str = "Rewrite";
pub const REWRITE_INST: &str = "Rewrite_Inst";
pub const REWRITE_SET: &str = "Rewrite_Set";
pub const REWRITE_SET_INST: &str = "Rewrite_Set_Inst";
pub const OR_TO_LIST: &str = "Or_to_List";
pub const SUBPROBLEM: &str = "SubProblem";
pub const SUBSTITUTE: &str = "Substitute";
pub const TAKE: &str = "Take";

pub const CHAIN: &str = "Chain";
pub const IF: &str = "If";
pub const OR: &str = "Or";
pub const REPEAT: &str = "Repeat";
pub const TRY: &str = "Try";
pub const WHILE: &str = "While";

pub const TACTIC_NAMES: &[&str] = &[
    CALCULATE,
    REWRITE,
    REWRITE_INST,
    REWRITE_SET,
    REWRITE_SET_INST,
    OR_TO_LIST,
    SUBPROBLEM,
    SUBSTITUTE,
    TAKE,
];

pub const TACTICAL_NAMES: &[&str] = &[CHAIN, IF, OR, REPEAT, TRY, WHILE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Term,
}

/// Number of user arguments a tactic takes, excluding the optional term it
/// acts on.
pub fn tactic_arity(name: &str) -> Option<usize> {
    Some(match name {
        CALCULATE | REWRITE | REWRITE_SET | SUBSTITUTE => 1,
        REWRITE_INST | REWRITE_SET_INST => 2,
        OR_TO_LIST => 0,
        TAKE => 1,
        SUBPROBLEM => 2,
        _ => return None,
    })
}

/// Index of the argument naming a rule, rule set or operator.
pub fn name_arg_index(name: &str) -> Option<usize> {
    match name {
        CALCULATE | REWRITE | REWRITE_SET => Some(0),
        REWRITE_INST | REWRITE_SET_INST => Some(1),
        _ => None,
    }
}

/// Operand counts of a tactical, excluding the optional trailing argument.
fn tactical_arity(name: &str) -> Option<usize> {
    Some(match name {
        TRY | REPEAT => 1,
        CHAIN | OR | WHILE => 2,
        IF => 3,
        _ => return None,
    })
}

/// Path, relative to an application spine with `n` arguments, of argument `i`.
pub fn arg_path(i: usize, n: usize) -> Vec<Lrd> {
    let mut p = vec![Lrd::L; n - 1 - i];
    p.push(Lrd::R);
    p
}

/// A program term viewed as a control node. Positions of sub-programs are
/// given as paths relative to the node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node<'a> {
    /// A tactic with its arguments; `on` is the explicit term it acts on.
    Tactic { name: &'a str, args: Vec<&'a Term>, on: Option<&'a Term> },
    /// `let var = expr in body`
    Let { var: &'a str, expr: &'a Term, body: &'a Term },
    Chain { first: &'a Term, second: &'a Term, arg: Option<&'a Term> },
    Or { left: &'a Term, right: &'a Term, arg: Option<&'a Term> },
    Try { body: &'a Term, arg: Option<&'a Term> },
    Repeat { body: &'a Term, arg: Option<&'a Term> },
    While { cond: &'a Term, body: &'a Term, arg: Option<&'a Term> },
    If { cond: &'a Term, then: &'a Term, els: &'a Term, arg: Option<&'a Term> },
    /// Anything else: evaluated as an expression.
    Expr(&'a Term),
}

pub const LET_EXPR: [Lrd; 2] = [Lrd::L, Lrd::R];
pub const LET_BODY: [Lrd; 2] = [Lrd::R, Lrd::D];

pub fn decode(t: &Term) -> Node<'_> {
    let (head, args) = t.strip_comb();
    let Term::Const(name, _) = head else {
        return Node::Expr(t);
    };
    let name = name.as_str();
    if name == consts::LET {
        if let [e, Term::Abs(x, _, body)] = args.as_slice() {
            return Node::Let { var: x, expr: e, body };
        }
        return Node::Expr(t);
    }
    if let Some(k) = tactic_arity(name) {
        if args.len() == k || args.len() == k + 1 {
            return Node::Tactic { name, args: args[..k].to_vec(), on: args.get(k).copied() };
        }
        return Node::Expr(t);
    }
    let Some(k) = tactical_arity(name) else {
        return Node::Expr(t);
    };
    if args.len() != k && args.len() != k + 1 {
        return Node::Expr(t);
    }
    let arg = args.get(k).copied();
    match name {
        CHAIN => Node::Chain { first: args[0], second: args[1], arg },
        OR => Node::Or { left: args[0], right: args[1], arg },
        TRY => Node::Try { body: args[0], arg },
        REPEAT => Node::Repeat { body: args[0], arg },
        WHILE => Node::While { cond: args[0], body: args[1], arg },
        _ => Node::If { cond: args[0], then: args[1], els: args[2], arg },
    }
}

impl Node<'_> {
    /// Number of spine arguments of the node, trailing argument included.
    pub fn spine_len(&self) -> usize {
        let with = |k: usize, arg: &Option<&Term>| k + usize::from(arg.is_some());
        match self {
            Node::Tactic { args, on, .. } => args.len() + usize::from(on.is_some()),
            Node::Let { .. } => 2,
            Node::Chain { arg, .. } | Node::Or { arg, .. } | Node::While { arg, .. } => with(2, arg),
            Node::Try { arg, .. } | Node::Repeat { arg, .. } => with(1, arg),
            Node::If { arg, .. } => with(3, arg),
            Node::Expr(_) => 0,
        }
    }

    /// Relative paths of the sub-programs executed by this node.
    pub fn operand_paths(&self) -> Vec<Vec<Lrd>> {
        let n = self.spine_len();
        match self {
            Node::Let { .. } => vec![LET_BODY.to_vec()],
            Node::Chain { .. } | Node::Or { .. } => vec![arg_path(0, n), arg_path(1, n)],
            Node::Try { .. } | Node::Repeat { .. } => vec![arg_path(0, n)],
            Node::While { .. } => vec![arg_path(1, n)],
            Node::If { .. } => vec![arg_path(1, n), arg_path(2, n)],
            Node::Tactic { .. } | Node::Expr(_) => vec![],
        }
    }

    pub fn is_control(&self) -> bool {
        !matches!(self, Node::Tactic { .. } | Node::Expr(_))
    }
}

/// Interpreter state: where in the program body execution stands.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Istate {
    /// Path of the last executed tactic; empty before the first scan.
    pub path: Path,
    pub env: Subst,
    /// The value threaded through tacticals.
    pub act_arg: Option<Term>,
    pub finished: bool,
}

impl Istate {
    pub fn fresh(env: Subst) -> Istate {
        Istate { path: Path::root(), env, act_arg: None, finished: false }
    }
}

/// A tactic as a student writes it: name and user-level arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTactic {
    pub name: String,
    pub args: Vec<Term>,
}

impl InputTactic {
    pub fn parse(src: &str) -> Result<InputTactic, ParseError> {
        let t = parse_program_expr(src)?;
        match decode(&t) {
            Node::Tactic { name, args, on: None } => {
                let mut args: Vec<Term> = args.into_iter().cloned().collect();
                // bare identifiers are accepted where a rule or operator name is expected
                if let Some(i) = name_arg_index(name) {
                    if let Term::Free(n, _) | Term::Const(n, _) = &args[i] {
                        args[i] = Term::Str(n.clone());
                    }
                }
                Ok(InputTactic { name: name.to_string(), args })
            }
            _ => {
                let span = crate::parser::SourceSpan { start_offset: 0, end_offset: src.len(), line: 1, col: 1 };
                Err(ParseError::SyntaxError { span, message: format!("`{}` is not a tactic", src.trim()) })
            }
        }
    }
}

impl fmt::Display for InputTactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for a in &self.args {
            let s = print_term(a).unwrap_or_else(|_| print_term_debug(a));
            if matches!(a, Term::App(..)) && a.dest_list().is_none() && a.head_const() != Some(consts::PAIR) {
                write!(f, " ({s})")?;
            } else {
                write!(f, " {s}")?;
            }
        }
        Ok(())
    }
}

/// What an instantiated tactic does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TacticOp {
    Calculate(CalcOp),
    Rewrite { rule: String, inst: Subst },
    RewriteSet { set: String, inst: Subst },
    OrToList,
    Substitute(Vec<Term>),
    Take,
    SubProblem { theory: String, problem: Key, method: Key, args: Vec<Term> },
    /// The program's result, delivered when its body is exhausted.
    End,
}

/// A fully instantiated and applicability-checked tactic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalTactic {
    pub input: InputTactic,
    pub op: TacticOp,
    /// The term the tactic acts on.
    pub on: Option<Term>,
    /// The produced formula; absent for a SubProblem until its level ends.
    pub result: Option<Term>,
    pub emitted: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Association {
    Same,
    SameName,
    Different,
}

/// Compares a located program tactic with a student's input tactic.
pub fn associate(internal: &InternalTactic, input: &InputTactic) -> Association {
    if internal.input.name != input.name {
        Association::Different
    } else if internal.input.args == input.args {
        Association::Same
    } else {
        Association::SameName
    }
}

fn is_program_head(t: &Term) -> bool {
    matches!(t.head_const(), Some(n) if n == consts::LET || TACTIC_NAMES.contains(&n) || TACTICAL_NAMES.contains(&n))
}

/// Checks that every operand of a tactical is itself a tactic, tactical or
/// `let`, and that tactics and tacticals are applied to the right number of
/// arguments.
pub fn check_control(t: &Term) -> Result<(), String> {
    if !is_program_head(t) {
        return Err(format!(
            "expected a tactic or tactical, found `{}`",
            crate::parser::print_term_debug(t)
        ));
    }
    let node = decode(t);
    if let Node::Expr(_) = node {
        let name = t.head_const().unwrap_or_default();
        return Err(format!("`{name}` applied to the wrong number of arguments"));
    }
    if let Node::Let { expr, .. } = node {
        if is_program_head(expr) && !matches!(decode(expr), Node::Tactic { .. }) {
            check_control(expr)?;
        }
    }
    for rel in node.operand_paths() {
        let sub = crate::term::at_location(&crate::term::Path(rel), t).map_err(|e| e.to_string())?;
        check_control(sub)?;
    }
    Ok(())
}

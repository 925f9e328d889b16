//! Theory files (`.thy-li`): rules, rule sets, problem patterns, methods and
//! programs.

use super::{lexer::Tok, ParseError, Parser, SourceSpan};
use crate::knowledge::{ItemDescriptor, Key, MethodDecl, ProblemPattern};
use crate::program::ProgramDef;
use crate::rewrite::{CalcOp, Rule, RuleSetDecl, DEFAULT_MAX_STEPS};
use crate::term::{consts, Term, TypeTag};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TheoryFile {
    pub name: String,
    pub imports: Vec<String>,
    pub rule_decls: Vec<Rule>,
    pub ruleset_decls: Vec<RuleSetDecl>,
    pub problem_decls: Vec<ProblemPattern>,
    pub method_decls: Vec<MethodDecl>,
    pub program_decls: Vec<ProgramDef>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rules,
    RuleSets,
    Problems,
    Programs,
}

pub fn parse_theory(src: &str) -> Result<TheoryFile, ParseError> {
    let mut p = Parser::new(src)?;
    let mut th = TheoryFile::default();
    p.expect_word("theory")?;
    th.name = p.ident()?;
    if p.at_word("imports") {
        p.advance();
        while matches!(p.peek(), Tok::Ident(w) if !super::is_reserved(w)) {
            th.imports.push(p.ident()?);
        }
    }
    let mut section = Section::None;
    while !p.at_eof() {
        let Tok::Ident(word) = p.peek().clone() else {
            return Err(p.err_here(format!("expected a declaration, found {}", p.describe())));
        };
        let needed = match word.as_str() {
            "rules" | "rulesets" | "problems" | "programs" => {
                p.advance();
                section = match word.as_str() {
                    "rules" => Section::Rules,
                    "rulesets" => Section::RuleSets,
                    "problems" => Section::Problems,
                    _ => Section::Programs,
                };
                continue;
            }
            "rule" => Section::Rules,
            "ruleset" => Section::RuleSets,
            "problem" => Section::Problems,
            "method" | "program" => Section::Programs,
            _ => return Err(p.err_here(format!("expected a declaration, found `{word}`"))),
        };
        if needed != section {
            return Err(p.err_here(format!("`{word}` declared outside its section")));
        }
        match word.as_str() {
            "rule" => th.rule_decls.push(p.rule_decl()?),
            "ruleset" => th.ruleset_decls.push(p.ruleset_decl()?),
            "problem" => th.problem_decls.push(p.problem_decl()?),
            "method" => th.method_decls.push(p.method_decl()?),
            _ => th.program_decls.push(p.program_decl()?),
        }
    }
    Ok(th)
}

/// `rule NAME: [COND ⇒] LHS = RHS`
pub fn parse_rule(src: &str) -> Result<Rule, ParseError> {
    let mut p = Parser::new(src)?;
    let r = p.rule_decl()?;
    p.finish()?;
    Ok(r)
}

fn split_conj(t: Term, out: &mut Vec<Term>) {
    match t.dest_binop(consts::AND) {
        Some((a, b)) => {
            let (a, b) = (a.clone(), b.clone());
            split_conj(a, out);
            split_conj(b, out);
        }
        None => out.push(t),
    }
}

impl Parser<'_> {
    fn span_since(&self, start: SourceSpan) -> SourceSpan {
        SourceSpan {
            start_offset: start.start_offset,
            end_offset: self.prev_span().end_offset,
            line: start.line,
            col: start.col,
        }
    }

    fn rule_decl(&mut self) -> Result<Rule, ParseError> {
        let start = self.span();
        self.expect_word("rule")?;
        let name = self.ident()?;
        self.expect_sym(":")?;
        let first = self.expr(0)?;
        let mut conds = Vec::new();
        let eq = if self.at_sym("=>") {
            self.advance();
            split_conj(first, &mut conds);
            self.expr(0)?
        } else {
            first
        };
        let span = self.span_since(start);
        let Some((lhs, rhs)) = eq.dest_binop(consts::EQ) else {
            return Err(ParseError::syntax(span, format!("rule {name}: expected `LHS = RHS`")));
        };
        let rule = Rule { name, conds, lhs: lhs.clone(), rhs: rhs.clone() };
        rule.validate().map_err(|m| ParseError::syntax(span, m))?;
        Ok(rule)
    }

    fn name_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect_sym("[")?;
        let mut out = Vec::new();
        if !self.at_sym("]") {
            loop {
                match self.peek().clone() {
                    Tok::Str(s) => {
                        self.advance();
                        out.push(s);
                    }
                    _ => out.push(self.ident()?),
                }
                if !self.at_sym(",") {
                    break;
                }
                self.advance();
            }
        }
        self.expect_sym("]")?;
        Ok(out)
    }

    fn ruleset_decl(&mut self) -> Result<RuleSetDecl, ParseError> {
        self.expect_word("ruleset")?;
        let name = self.ident()?;
        self.expect_sym("=")?;
        let rules = self.name_list()?;
        let mut decl = RuleSetDecl {
            name,
            rules,
            calc_ops: Vec::new(),
            cond_solver: None,
            max_steps: DEFAULT_MAX_STEPS,
        };
        loop {
            if self.at_word("calc") {
                self.advance();
                let span = self.span();
                for op in self.name_list()? {
                    let parsed = CalcOp::from_name(&op)
                        .ok_or_else(|| ParseError::syntax(span, format!("unknown calculation `{op}`")))?;
                    decl.calc_ops.push(parsed);
                }
            } else if self.at_word("solver") {
                self.advance();
                decl.cond_solver = Some(self.ident()?);
            } else if self.at_word("max_steps") {
                self.advance();
                let span = self.span();
                match self.peek().clone() {
                    Tok::Num(n) => {
                        self.advance();
                        let v: usize = n
                            .parse()
                            .map_err(|_| ParseError::syntax(span, "step limit out of range"))?;
                        if v == 0 {
                            return Err(ParseError::syntax(span, "step limit must be positive"));
                        }
                        decl.max_steps = v;
                    }
                    _ => return Err(self.err_here("expected a step limit")),
                }
            } else {
                break;
            }
        }
        Ok(decl)
    }

    fn items(&mut self) -> Result<Vec<ItemDescriptor>, ParseError> {
        let mut out = Vec::new();
        loop {
            let name = self.ident()?;
            let mut ty = TypeTag::Real;
            if self.at_sym(":") {
                self.advance();
                let span = self.span();
                ty = match self.ident()?.as_str() {
                    "real" | "int" => TypeTag::Real,
                    "bool" => TypeTag::Bool,
                    "list" => TypeTag::list(TypeTag::Bool),
                    other => return Err(ParseError::syntax(span, format!("unknown type `{other}`"))),
                };
            }
            out.push(ItemDescriptor { name, ty });
            if !self.at_sym(",") {
                return Ok(out);
            }
            self.advance();
        }
    }

    fn formulas(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut out = vec![self.expr(0)?];
        while self.at_sym(",") {
            self.advance();
            out.push(self.expr(0)?);
        }
        Ok(out)
    }

    fn problem_decl(&mut self) -> Result<ProblemPattern, ParseError> {
        let start = self.span();
        self.expect_word("problem")?;
        let id = Key(self.name_list()?);
        self.expect_sym(":")?;
        let mut pat = ProblemPattern { id, ..Default::default() };
        loop {
            if self.at_word("given") {
                self.advance();
                pat.given = self.items()?;
            } else if self.at_word("where") {
                self.advance();
                pat.where_ = self.formulas()?;
            } else if self.at_word("find") {
                self.advance();
                pat.find = self.items()?;
            } else if self.at_word("relate") {
                self.advance();
                pat.relate = self.formulas()?;
            } else {
                break;
            }
        }
        pat.validate().map_err(|m| ParseError::syntax(self.span_since(start), m))?;
        Ok(pat)
    }

    fn method_decl(&mut self) -> Result<MethodDecl, ParseError> {
        self.expect_word("method")?;
        let id = Key(self.name_list()?);
        self.expect_sym(":")?;
        self.expect_word("program")?;
        let program = self.ident()?;
        self.expect_word("guard")?;
        let guard = Key(self.name_list()?);
        let mut normal_form = None;
        if self.at_word("normal_form") {
            self.advance();
            normal_form = Some(self.ident()?);
        }
        Ok(MethodDecl { id, program, guard, normal_form })
    }
}

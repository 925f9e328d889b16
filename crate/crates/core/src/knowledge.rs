//! The knowledge registry: rules, rule sets, problem patterns, methods and
//! programs, loaded from theory files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calc::Context;
use crate::parser::{parse_theory, ParseError, TheoryFile};
use crate::program::ProgramDef;
use crate::rewrite::{CalcOp, Rewriter, Rule, RuleSet, Truth};
use crate::term::{apply_subst, free_vars, Subst, Term, TypeTag};

/// Theories compiled into the binary.
const BUILTIN: &[(&str, &str)] = &[
    ("arith.thy-li", include_str!("../theories/arith.thy-li")),
    ("gcd.thy-li", include_str!("../theories/gcd.thy-li")),
    ("linear.thy-li", include_str!("../theories/linear.thy-li")),
    ("rational.thy-li", include_str!("../theories/rational.thy-li")),
    ("poly.thy-li", include_str!("../theories/poly.thy-li")),
];

/// Hierarchical identifier of a problem or method, e.g. `[diophantine, gcd]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct Key(pub Vec<String>);

impl Key {
    pub fn new<S: Into<String>>(parts: impl IntoIterator<Item = S>) -> Key {
        Key(parts.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDescriptor {
    pub name: String,
    pub ty: TypeTag,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProblemPattern {
    pub id: Key,
    pub given: Vec<ItemDescriptor>,
    pub where_: Vec<Term>,
    pub find: Vec<ItemDescriptor>,
    pub relate: Vec<Term>,
}

impl ProblemPattern {
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for item in self.given.iter().chain(&self.find) {
            if !seen.insert(item.name.as_str()) {
                return Err(format!("problem {}: item `{}` declared twice", self.id, item.name));
            }
        }
        let given: BTreeSet<String> = self.given.iter().map(|i| i.name.clone()).collect();
        for w in &self.where_ {
            if let Some(v) = free_vars(w).into_iter().find(|v| !given.contains(v)) {
                return Err(format!("problem {}: precondition mentions unknown item `{v}`", self.id));
            }
        }
        let all: BTreeSet<&str> = seen;
        for r in &self.relate {
            if let Some(v) = free_vars(r).into_iter().find(|v| !all.contains(v.as_str())) {
                return Err(format!("problem {}: relation mentions unknown item `{v}`", self.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub id: Key,
    pub program: String,
    /// The problem this method solves.
    pub guard: Key,
    /// Rule set deciding whether two formulas are equal for input matching.
    pub normal_form: Option<String>,
}

/// Values of the given items of a problem.
pub type Model = BTreeMap<String, Term>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnowledgeError {
    #[error("unknown {kind} `{name}`")]
    UnknownKey { kind: &'static str, name: String },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("{file}: {error}")]
    Parse { file: String, error: ParseError },
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Unresolved(String),
    #[error("missing value for given item `{0}`")]
    MissingItem(String),
    #[error("unexpected item `{0}` in model")]
    UnexpectedItem(String),
}

fn unknown(kind: &'static str, name: impl ToString) -> KnowledgeError {
    KnowledgeError::UnknownKey { kind, name: name.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreconditionResult {
    pub formula: Term,
    pub truth: Truth,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    theories: BTreeSet<String>,
    rules: BTreeMap<String, Rule>,
    rulesets: BTreeMap<String, RuleSet>,
    problems: BTreeMap<Key, ProblemPattern>,
    methods: BTreeMap<Key, MethodDecl>,
    programs: BTreeMap<String, ProgramDef>,
}

impl Registry {
    pub fn empty() -> Registry {
        Registry::default()
    }

    /// The theories shipped with the crate.
    pub fn builtin() -> Registry {
        Registry::from_sources(BUILTIN.iter().map(|(f, s)| (f.to_string(), s.to_string())))
            .expect("built-in theories are well formed")
    }

    /// Loads every `*.thy-li` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Registry, KnowledgeError> {
        let entries = std::fs::read_dir(dir).map_err(|e| KnowledgeError::Io(format!("{}: {e}", dir.display())))?;
        let mut files: Vec<_> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "thy-li"))
            .collect();
        files.sort();
        let mut sources = Vec::new();
        for f in files {
            let src = std::fs::read_to_string(&f).map_err(|e| KnowledgeError::Io(format!("{}: {e}", f.display())))?;
            sources.push((f.display().to_string(), src));
        }
        Registry::from_sources(sources)
    }

    pub fn from_sources(sources: impl IntoIterator<Item = (String, String)>) -> Result<Registry, KnowledgeError> {
        let mut parsed = Vec::new();
        for (file, src) in sources {
            let th = parse_theory(&src).map_err(|error| KnowledgeError::Parse { file, error })?;
            parsed.push(th);
        }
        let mut reg = Registry::empty();
        for th in &parsed {
            reg.add_declarations(th)?;
        }
        for th in &parsed {
            reg.resolve(th)?;
        }
        for rs in reg.rulesets.values() {
            if let Some(s) = &rs.cond_solver {
                if !reg.rulesets.contains_key(s) {
                    return Err(KnowledgeError::Unresolved(format!("rule set {} uses unknown solver {s}", rs.name)));
                }
            }
        }
        Ok(reg)
    }

    fn add_declarations(&mut self, th: &TheoryFile) -> Result<(), KnowledgeError> {
        fn insert<K: Ord + ToString + Clone, V>(
            map: &mut BTreeMap<K, V>,
            kind: &'static str,
            k: K,
            v: V,
        ) -> Result<(), KnowledgeError> {
            if map.contains_key(&k) {
                return Err(KnowledgeError::Duplicate { kind, name: k.to_string() });
            }
            map.insert(k, v);
            Ok(())
        }
        if !self.theories.insert(th.name.clone()) {
            return Err(KnowledgeError::Duplicate { kind: "theory", name: th.name.clone() });
        }
        for r in &th.rule_decls {
            insert(&mut self.rules, "rule", r.name.clone(), r.clone())?;
        }
        for p in &th.problem_decls {
            insert(&mut self.problems, "problem", p.id.clone(), p.clone())?;
        }
        for m in &th.method_decls {
            insert(&mut self.methods, "method", m.id.clone(), m.clone())?;
        }
        for p in &th.program_decls {
            insert(&mut self.programs, "program", p.name.clone(), p.clone())?;
        }
        Ok(())
    }

    /// Resolves rule-set members and checks cross references.
    fn resolve(&mut self, th: &TheoryFile) -> Result<(), KnowledgeError> {
        for imp in &th.imports {
            if !self.theories.contains(imp) {
                return Err(KnowledgeError::Unresolved(format!("theory {} imports unknown theory {imp}", th.name)));
            }
        }
        for d in &th.ruleset_decls {
            let rules = d
                .rules
                .iter()
                .map(|n| {
                    self.rules.get(n).cloned().ok_or_else(|| {
                        KnowledgeError::Unresolved(format!("rule set {} refers to unknown rule {n}", d.name))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if self.rulesets.contains_key(&d.name) {
                return Err(KnowledgeError::Duplicate { kind: "rule set", name: d.name.clone() });
            }
            let rs = RuleSet {
                name: d.name.clone(),
                rules,
                calc_ops: d.calc_ops.clone(),
                cond_solver: d.cond_solver.clone(),
                max_steps: d.max_steps,
            };
            self.rulesets.insert(d.name.clone(), rs);
        }
        for m in &th.method_decls {
            if !self.programs.contains_key(&m.program) {
                return Err(KnowledgeError::Unresolved(format!("method {} uses unknown program {}", m.id, m.program)));
            }
            if !self.problems.contains_key(&m.guard) {
                return Err(KnowledgeError::Unresolved(format!("method {} guards unknown problem {}", m.id, m.guard)));
            }
        }
        Ok(())
    }

    pub fn rule(&self, name: &str) -> Result<&Rule, KnowledgeError> {
        self.rules.get(name).ok_or_else(|| unknown("rule", name))
    }

    pub fn ruleset(&self, name: &str) -> Result<&RuleSet, KnowledgeError> {
        self.rulesets.get(name).ok_or_else(|| unknown("rule set", name))
    }

    pub fn problem(&self, key: &Key) -> Result<&ProblemPattern, KnowledgeError> {
        self.problems.get(key).ok_or_else(|| unknown("problem", key))
    }

    pub fn method(&self, key: &Key) -> Result<&MethodDecl, KnowledgeError> {
        self.methods.get(key).ok_or_else(|| unknown("method", key))
    }

    pub fn program(&self, name: &str) -> Result<&ProgramDef, KnowledgeError> {
        self.programs.get(name).ok_or_else(|| unknown("program", name))
    }

    /// The first method (in key order) that solves `problem`.
    pub fn method_for(&self, problem: &Key) -> Result<&MethodDecl, KnowledgeError> {
        self.methods
            .values()
            .find(|m| &m.guard == problem)
            .ok_or_else(|| unknown("method for problem", problem))
    }

    pub fn problems(&self) -> impl Iterator<Item = &ProblemPattern> {
        self.problems.values()
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodDecl> {
        self.methods.values()
    }

    pub fn theory_names(&self) -> impl Iterator<Item = &str> {
        self.theories.iter().map(String::as_str)
    }

    /// Rule set used to decide rule conditions and preconditions.
    pub fn default_solver(&self) -> RuleSet {
        self.rulesets
            .get("arith")
            .cloned()
            .unwrap_or_else(|| RuleSet::new("arith", Vec::new(), CalcOp::ALL.to_vec()))
    }

    /// Evaluates the preconditions of `pattern` under `model`.
    pub fn check_preconditions(
        &self,
        pattern: &ProblemPattern,
        model: &Model,
    ) -> Result<Vec<PreconditionResult>, KnowledgeError> {
        for item in &pattern.given {
            if !model.contains_key(&item.name) {
                return Err(KnowledgeError::MissingItem(item.name.clone()));
            }
        }
        if let Some(extra) = model.keys().find(|k| !pattern.given.iter().any(|i| &i.name == *k)) {
            return Err(KnowledgeError::UnexpectedItem(extra.clone()));
        }
        let subst: Subst = model.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let solver = self.default_solver();
        let rw = Rewriter::new(self);
        let ctx = Context::default();
        Ok(pattern
            .where_
            .iter()
            .map(|w| {
                let formula = apply_subst(&subst, w);
                let truth = rw.eval_condition(&solver, &ctx, &formula).truth;
                PreconditionResult { formula, truth }
            })
            .collect())
    }
}

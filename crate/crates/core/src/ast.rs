//! Abstract syntax of sky programs.
//!
//! A [`Program`] can only be obtained through [`Program::new`] (or the parser,
//! which calls it), so every value of that type has already passed the static
//! checks in [`crate::analysis`]: arity consistency, rule safety,
//! stratification, guess exclusivity and a well-formed circumscription policy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::analysis::{self, DependencyGraph, Strata, ValidityReport};

/// A constant of the Herbrand universe.
///
/// The derived order puts integers before identifiers and compares integers
/// numerically, which is the canonical order used for universes and ground
/// atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Int(i64),
    Sym(String),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Constant),
    /// Variables start with an uppercase ASCII letter.
    Var(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn sym(name: &str) -> Self {
        Term::Const(Constant::Sym(name.to_string()))
    }

    pub fn int(n: i64) -> Self {
        Term::Const(Constant::Int(n))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.to_string(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| t.as_var().is_none())
    }

    /// Variables in order of first occurrence, without repetition.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for v in self.args.iter().filter_map(Term::as_var) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negated,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub polarity: Polarity,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            polarity: Polarity::Positive,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            polarity: Polarity::Negated,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.is_positive() {
            f.write_str("not ")?;
        }
        self.atom.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Fact,
    Rule,
    Constraint,
    Guess,
}

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// A statement of the program. Equality ignores the source position.
#[derive(Debug, Clone)]
pub struct Rule {
    pub kind: RuleKind,
    pub head: Option<Atom>,
    pub body: Vec<Literal>,
    pub position: Option<Position>,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.head == other.head && self.body == other.body
    }
}

impl Eq for Rule {}

impl Rule {
    pub fn fact(head: Atom) -> Self {
        Rule {
            kind: RuleKind::Fact,
            head: Some(head),
            body: Vec::new(),
            position: None,
        }
    }

    #[allow(clippy::self_named_constructors)]
    pub fn rule(head: Atom, body: Vec<Literal>) -> Self {
        Rule {
            kind: RuleKind::Rule,
            head: Some(head),
            body,
            position: None,
        }
    }

    pub fn constraint(body: Vec<Literal>) -> Self {
        Rule {
            kind: RuleKind::Constraint,
            head: None,
            body,
            position: None,
        }
    }

    pub fn guess(head: Atom, body: Vec<Literal>) -> Self {
        Rule {
            kind: RuleKind::Guess,
            head: Some(head),
            body,
            position: None,
        }
    }

    pub fn at(mut self, position: Position) -> Self {
        self.position = Some(position);
        self
    }

    pub fn positive_body(&self) -> impl Iterator<Item = &Atom> {
        self.body
            .iter()
            .filter(|l| l.is_positive())
            .map(|l| &l.atom)
    }

    pub fn negative_body(&self) -> impl Iterator<Item = &Atom> {
        self.body
            .iter()
            .filter(|l| !l.is_positive())
            .map(|l| &l.atom)
    }

    /// Every atom of the rule, head first.
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.head.iter().chain(self.body.iter().map(|l| &l.atom))
    }

    /// Variables in order of first occurrence in the body, then the head.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for atom in self.body.iter().map(|l| &l.atom).chain(self.head.iter()) {
            for v in atom.variables() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    for (i, lit) in body.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{lit}")?;
    }
    Ok(())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == RuleKind::Guess {
            f.write_str("#guess ")?;
        }
        if let Some(head) = &self.head {
            write!(f, "{head}")?;
            if !self.body.is_empty() {
                f.write_str(" :- ")?;
            }
        } else {
            f.write_str(":- ")?;
        }
        write_body(f, &self.body)?;
        f.write_str(".")
    }
}

/// Explicit `#minimize`, `#fix` and `#show` directives as written in the
/// source. Repeated directives of one kind accumulate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Directives {
    pub minimize: Option<BTreeSet<String>>,
    pub fix: Option<BTreeSet<String>>,
    pub show: Option<BTreeSet<String>>,
}

/// Partition of the program's predicates into minimized (P), fixed (Q) and
/// varying (Z) sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CircumscriptionPolicy {
    pub minimized: BTreeSet<String>,
    pub fixed: BTreeSet<String>,
    pub varying: BTreeSet<String>,
}

/// A validated program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    rules: Vec<Rule>,
    policy: CircumscriptionPolicy,
    show: Option<BTreeSet<String>>,
    arities: BTreeMap<String, usize>,
    guess_predicates: BTreeSet<String>,
    edb_predicates: BTreeSet<String>,
    graph: DependencyGraph,
    strata: Strata,
}

impl Program {
    /// Runs every static check and assembles the program. All violations are
    /// collected into one report.
    pub fn new(rules: Vec<Rule>, directives: Directives) -> Result<Program, ValidityReport> {
        let checked = analysis::check(&rules, &directives)?;
        Ok(Program {
            rules,
            policy: checked.policy,
            show: directives.show,
            arities: checked.arities,
            guess_predicates: checked.guess_predicates,
            edb_predicates: checked.edb_predicates,
            graph: checked.graph,
            strata: checked.strata,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn policy(&self) -> &CircumscriptionPolicy {
        &self.policy
    }

    /// Output projection; `None` shows every predicate.
    pub fn show(&self) -> Option<&BTreeSet<String>> {
        self.show.as_ref()
    }

    pub fn arities(&self) -> &BTreeMap<String, usize> {
        &self.arities
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.arities.keys().map(String::as_str)
    }

    pub fn guess_predicates(&self) -> &BTreeSet<String> {
        &self.guess_predicates
    }

    /// Predicates defined only by facts (or not defined at all).
    pub fn edb_predicates(&self) -> &BTreeSet<String> {
        &self.edb_predicates
    }

    pub fn dependency_graph(&self) -> &DependencyGraph {
        &self.graph
    }

    pub fn strata(&self) -> &Strata {
        &self.strata
    }

    pub fn facts(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.kind == RuleKind::Fact)
    }

    pub fn guesses(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.kind == RuleKind::Guess)
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.kind == RuleKind::Constraint)
    }
}

fn write_predlist(
    f: &mut fmt::Formatter<'_>,
    directive: &str,
    preds: &BTreeSet<String>,
) -> fmt::Result {
    let list: Vec<&str> = preds.iter().map(String::as_str).collect();
    writeln!(f, "{directive} {}.", list.join(", "))
}

/// Renders parseable source. Policy directives are only emitted where the
/// policy differs from the default one.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        let extra_fixed: BTreeSet<String> = self
            .policy
            .fixed
            .difference(&self.edb_predicates)
            .cloned()
            .collect();
        let default_minimized: BTreeSet<String> = self
            .guess_predicates
            .difference(&extra_fixed)
            .cloned()
            .collect();
        if self.policy.minimized != default_minimized {
            write_predlist(f, "#minimize", &self.policy.minimized)?;
        }
        if !extra_fixed.is_empty() {
            write_predlist(f, "#fix", &extra_fixed)?;
        }
        if let Some(show) = &self.show {
            write_predlist(f, "#show", show)?;
        }
        Ok(())
    }
}

//! Static checks over program rules: safety, predicate dependencies,
//! stratification, guess exclusivity and policy resolution.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::ast::{CircumscriptionPolicy, Directives, Polarity, Position, Rule, RuleKind};

/// Where an unsafe variable was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarLocation {
    Head,
    /// Index into the rule body.
    NegatedLiteral(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyViolation {
    pub variable: String,
    pub location: VarLocation,
}

impl fmt::Display for SafetyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            VarLocation::Head => write!(
                f,
                "variable {} in the head does not occur in a positive body literal",
                self.variable
            ),
            VarLocation::NegatedLiteral(i) => write!(
                f,
                "variable {} occurs only under negation (body literal {})",
                self.variable,
                i + 1
            ),
        }
    }
}

/// Range restriction: head variables and variables of negated literals must
/// occur in some positive body literal.
pub fn validate_safety(rule: &Rule) -> Result<(), Vec<SafetyViolation>> {
    let bound: BTreeSet<&str> = rule.positive_body().flat_map(|a| a.variables()).collect();
    let mut violations = Vec::new();
    if let Some(head) = &rule.head {
        for v in head.variables() {
            if !bound.contains(v) {
                violations.push(SafetyViolation {
                    variable: v.to_string(),
                    location: VarLocation::Head,
                });
            }
        }
    }
    for (i, lit) in rule.body.iter().enumerate() {
        if lit.is_positive() {
            continue;
        }
        for v in lit.atom.variables() {
            if !bound.contains(v) {
                violations.push(SafetyViolation {
                    variable: v.to_string(),
                    location: VarLocation::NegatedLiteral(i),
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// `from` is used in the body of a rule defining `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DependencyEdge {
    pub from: String,
    pub to: String,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    pub vertices: BTreeSet<String>,
    pub edges: BTreeSet<DependencyEdge>,
}

impl DependencyGraph {
    /// Predicates with an edge into `pred`.
    pub fn predecessors<'a>(
        &'a self,
        pred: &'a str,
    ) -> impl Iterator<Item = &'a DependencyEdge> + 'a {
        self.edges.iter().filter(move |e| e.to == pred)
    }

    /// Every predicate reachable from `start` following edges forwards,
    /// including `start` itself.
    pub fn reachable_from(&self, start: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.to_string()]);
        while let Some(p) = queue.pop_front() {
            if !seen.insert(p.clone()) {
                continue;
            }
            for e in self.edges.iter().filter(|e| e.from == p) {
                queue.push_back(e.to.clone());
            }
        }
        seen
    }

    /// Every predicate `target` depends on, directly or transitively,
    /// including `target` itself.
    pub fn dependencies_of(&self, target: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([target.to_string()]);
        while let Some(p) = queue.pop_front() {
            if !seen.insert(p.clone()) {
                continue;
            }
            for e in self.predecessors(&p) {
                queue.push_back(e.from.clone());
            }
        }
        seen
    }

    fn path(&self, from: &str, to: &str) -> Option<Vec<String>> {
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        let mut queue = VecDeque::from([from.to_string()]);
        let mut seen = BTreeSet::from([from.to_string()]);
        while let Some(p) = queue.pop_front() {
            if p == to {
                let mut path = vec![p.clone()];
                let mut cur = p;
                while let Some(prev) = parent.get(&cur) {
                    path.push(prev.clone());
                    cur = prev.clone();
                }
                path.reverse();
                return Some(path);
            }
            for e in self.edges.iter().filter(|e| e.from == p) {
                if seen.insert(e.to.clone()) {
                    parent.insert(e.to.clone(), p.clone());
                    queue.push_back(e.to.clone());
                }
            }
        }
        None
    }
}

/// Builds the predicate dependency graph. Every predicate mentioned anywhere
/// is a vertex; constraints contribute vertices but no edges.
pub fn build_dependency_graph(rules: &[Rule]) -> DependencyGraph {
    let mut graph = DependencyGraph::default();
    for rule in rules {
        for atom in rule.atoms() {
            graph.vertices.insert(atom.predicate.clone());
        }
        let Some(head) = &rule.head else { continue };
        for lit in &rule.body {
            graph.edges.insert(DependencyEdge {
                from: lit.atom.predicate.clone(),
                to: head.predicate.clone(),
                polarity: lit.polarity,
            });
        }
    }
    graph
}

/// Ordered layers of predicates; negation only refers to earlier layers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Strata(pub Vec<BTreeSet<String>>);

impl Strata {
    pub fn layers(&self) -> &[BTreeSet<String>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, pred: &str) -> Option<usize> {
        self.0.iter().position(|s| s.contains(pred))
    }

    /// Re-checks the edge conditions of `graph` against these strata.
    pub fn is_witness_for(&self, graph: &DependencyGraph) -> bool {
        let covered: usize = self.0.iter().map(BTreeSet::len).sum();
        if covered != graph.vertices.len() {
            return false;
        }
        graph
            .edges
            .iter()
            .all(|e| match (self.index_of(&e.from), self.index_of(&e.to)) {
                (Some(from), Some(to)) => match e.polarity {
                    Polarity::Positive => from <= to,
                    Polarity::Negated => from < to,
                },
                _ => false,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("program is not stratifiable: cycle through negation {}", .cycle.join(" -> "))]
pub struct NonStratifiable {
    /// Closed cycle, first and last element equal.
    pub cycle: Vec<String>,
}

/// Assigns each predicate the lowest stratum compatible with its incoming
/// edges. Positive-only programs end up in a single stratum.
pub fn stratify(graph: &DependencyGraph) -> Result<Strata, NonStratifiable> {
    let mut level: BTreeMap<&str, usize> = graph.vertices.iter().map(|v| (v.as_str(), 0)).collect();
    let bound = graph.vertices.len();
    let mut changed = true;
    while changed {
        changed = false;
        for e in &graph.edges {
            let need = level[e.from.as_str()] + usize::from(e.polarity == Polarity::Negated);
            let cur = level
                .get_mut(e.to.as_str())
                .expect("edge endpoints are vertices");
            if *cur < need {
                *cur = need;
                changed = true;
                if need > bound {
                    return Err(NonStratifiable {
                        cycle: negative_cycle(graph).unwrap_or_default(),
                    });
                }
            }
        }
    }
    let depth = level.values().copied().max().map_or(0, |m| m + 1);
    let mut layers = vec![BTreeSet::new(); depth];
    for (pred, l) in level {
        layers[l].insert(pred.to_string());
    }
    layers.retain(|l| !l.is_empty());
    Ok(Strata(layers))
}

fn negative_cycle(graph: &DependencyGraph) -> Option<Vec<String>> {
    graph
        .edges
        .iter()
        .filter(|e| e.polarity == Polarity::Negated)
        .find_map(|e| {
            let back = graph.path(&e.to, &e.from)?;
            let mut cycle = vec![e.from.clone()];
            cycle.extend(back);
            Some(cycle)
        })
}

/// Broad class of a validity violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationClass {
    Safety,
    Structure,
    Stratification,
    Policy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Unsafe {
        rule: usize,
        position: Option<Position>,
        violation: SafetyViolation,
    },
    ArityClash {
        predicate: String,
        arities: Vec<usize>,
        position: Option<Position>,
    },
    /// A guess predicate is the head of some other statement.
    GuessRedefined {
        predicate: String,
        rule: usize,
        position: Option<Position>,
    },
    /// A guess range depends on a guess predicate.
    GuessRangeDependsOnGuess {
        predicate: String,
        depends_on: String,
        rule: usize,
        position: Option<Position>,
    },
    NonStratifiable(NonStratifiable),
    PolicyConflict {
        predicate: String,
        reason: String,
    },
}

impl Violation {
    pub fn class(&self) -> ViolationClass {
        match self {
            Violation::Unsafe { .. } => ViolationClass::Safety,
            Violation::ArityClash { .. }
            | Violation::GuessRedefined { .. }
            | Violation::GuessRangeDependsOnGuess { .. } => ViolationClass::Structure,
            Violation::NonStratifiable(_) => ViolationClass::Stratification,
            Violation::PolicyConflict { .. } => ViolationClass::Policy,
        }
    }

    pub fn position(&self) -> Option<Position> {
        match self {
            Violation::Unsafe { position, .. }
            | Violation::ArityClash { position, .. }
            | Violation::GuessRedefined { position, .. }
            | Violation::GuessRangeDependsOnGuess { position, .. } => *position,
            Violation::NonStratifiable(_) | Violation::PolicyConflict { .. } => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(pos) = self.position() {
            write!(f, "{pos}: ")?;
        }
        match self {
            Violation::Unsafe { violation, .. } => write!(f, "unsafe rule: {violation}"),
            Violation::ArityClash {
                predicate, arities, ..
            } => {
                let list: Vec<String> = arities.iter().map(usize::to_string).collect();
                write!(
                    f,
                    "predicate {predicate} used with arities {}",
                    list.join(" and ")
                )
            }
            Violation::GuessRedefined { predicate, .. } => write!(
                f,
                "guess predicate {predicate} is defined by another statement"
            ),
            Violation::GuessRangeDependsOnGuess {
                predicate,
                depends_on,
                ..
            } => write!(
                f,
                "range of guess predicate {predicate} depends on guess predicate {depends_on}"
            ),
            Violation::NonStratifiable(e) => e.fmt(f),
            Violation::PolicyConflict { predicate, reason } => {
                write!(f, "policy conflict on {predicate}: {reason}")
            }
        }
    }
}

/// Every violation found in a program, in detection order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    /// The most fundamental class present (safety before structure before
    /// stratification before policy).
    pub fn primary_class(&self) -> Option<ViolationClass> {
        self.violations.iter().map(Violation::class).min()
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub(crate) struct Checked {
    pub arities: BTreeMap<String, usize>,
    pub guess_predicates: BTreeSet<String>,
    pub edb_predicates: BTreeSet<String>,
    pub graph: DependencyGraph,
    pub strata: Strata,
    pub policy: CircumscriptionPolicy,
}

pub(crate) fn check(rules: &[Rule], directives: &Directives) -> Result<Checked, ValidityReport> {
    let mut violations = Vec::new();

    let mut arities: BTreeMap<String, usize> = BTreeMap::new();
    let mut clashes: BTreeMap<String, (BTreeSet<usize>, Option<Position>)> = BTreeMap::new();
    for rule in rules {
        for atom in rule.atoms() {
            let first = *arities
                .entry(atom.predicate.clone())
                .or_insert(atom.arity());
            if first != atom.arity() {
                let entry = clashes
                    .entry(atom.predicate.clone())
                    .or_insert_with(|| (BTreeSet::from([first]), rule.position));
                entry.0.insert(atom.arity());
            }
        }
    }

    for (i, rule) in rules.iter().enumerate() {
        if let Err(found) = validate_safety(rule) {
            violations.extend(found.into_iter().map(|violation| Violation::Unsafe {
                rule: i,
                position: rule.position,
                violation,
            }));
        }
    }

    for (predicate, (set, position)) in clashes {
        violations.push(Violation::ArityClash {
            predicate,
            arities: set.into_iter().collect(),
            position,
        });
    }

    let guess_predicates: BTreeSet<String> = rules
        .iter()
        .filter(|r| r.kind == RuleKind::Guess)
        .filter_map(|r| r.head.as_ref().map(|h| h.predicate.clone()))
        .collect();
    let mut guess_owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, rule) in rules.iter().enumerate() {
        let Some(head) = &rule.head else { continue };
        if !guess_predicates.contains(&head.predicate) {
            continue;
        }
        let redefined = match rule.kind {
            RuleKind::Guess => guess_owner.insert(head.predicate.as_str(), i).is_some(),
            _ => true,
        };
        if redefined {
            violations.push(Violation::GuessRedefined {
                predicate: head.predicate.clone(),
                rule: i,
                position: rule.position,
            });
        }
    }

    let graph = build_dependency_graph(rules);
    let strata = match stratify(&graph) {
        Ok(s) => s,
        Err(e) => {
            violations.push(Violation::NonStratifiable(e));
            Strata::default()
        }
    };

    for (i, rule) in rules.iter().enumerate() {
        if rule.kind != RuleKind::Guess {
            continue;
        }
        let Some(head) = &rule.head else { continue };
        let mut deps = BTreeSet::new();
        for lit in &rule.body {
            deps.extend(graph.dependencies_of(&lit.atom.predicate));
        }
        if let Some(g) = deps.iter().find(|p| guess_predicates.contains(*p)) {
            violations.push(Violation::GuessRangeDependsOnGuess {
                predicate: head.predicate.clone(),
                depends_on: g.clone(),
                rule: i,
                position: rule.position,
            });
        }
    }

    let defined_by_rules: BTreeSet<&str> = rules
        .iter()
        .filter(|r| r.kind != RuleKind::Fact)
        .filter_map(|r| r.head.as_ref().map(|h| h.predicate.as_str()))
        .collect();
    let edb_predicates: BTreeSet<String> = arities
        .keys()
        .filter(|p| !defined_by_rules.contains(p.as_str()))
        .cloned()
        .collect();

    let (policy, conflicts) =
        resolve_policy(&arities, &guess_predicates, &edb_predicates, directives);
    violations.extend(conflicts);

    if violations.is_empty() {
        Ok(Checked {
            arities,
            guess_predicates,
            edb_predicates,
            graph,
            strata,
            policy,
        })
    } else {
        Err(ValidityReport { violations })
    }
}

/// Default: guesses minimized, EDB fixed, everything else varying.
/// `#minimize` replaces the minimized set; `#fix` adds to the fixed set.
fn resolve_policy(
    arities: &BTreeMap<String, usize>,
    guess_predicates: &BTreeSet<String>,
    edb_predicates: &BTreeSet<String>,
    directives: &Directives,
) -> (CircumscriptionPolicy, Vec<Violation>) {
    let mut conflicts = Vec::new();
    let mut conflict = |predicate: &str, reason: &str| {
        conflicts.push(Violation::PolicyConflict {
            predicate: predicate.to_string(),
            reason: reason.to_string(),
        })
    };

    let explicit_fix = directives.fix.clone().unwrap_or_default();
    for p in &explicit_fix {
        if !arities.contains_key(p) {
            conflict(p, "#fix names an unknown predicate");
        }
    }
    let mut fixed: BTreeSet<String> = edb_predicates.clone();
    fixed.extend(
        explicit_fix
            .iter()
            .filter(|p| arities.contains_key(*p))
            .cloned(),
    );

    let minimized: BTreeSet<String> = match &directives.minimize {
        Some(explicit) => {
            for p in explicit {
                if !arities.contains_key(p) {
                    conflict(p, "#minimize names an unknown predicate");
                } else if explicit_fix.contains(p) {
                    conflict(p, "listed in both #minimize and #fix");
                } else if edb_predicates.contains(p) {
                    conflict(p, "extensional predicates are always fixed");
                }
            }
            explicit
                .iter()
                .filter(|p| arities.contains_key(*p) && !fixed.contains(*p))
                .cloned()
                .collect()
        }
        None => guess_predicates.difference(&fixed).cloned().collect(),
    };

    let varying = arities
        .keys()
        .filter(|p| !minimized.contains(*p) && !fixed.contains(*p))
        .cloned()
        .collect();
    (
        CircumscriptionPolicy {
            minimized,
            fixed,
            varying,
        },
        conflicts,
    )
}

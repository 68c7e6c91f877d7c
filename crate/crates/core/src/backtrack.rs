//! Depth-first search over three-valued assignments of the decision atoms.
//!
//! Backtrack mode propagates denial constraints whose literals are all
//! decision atoms or EDB atoms, branches out-first so that subset-smaller
//! candidates are reached first, and cuts subtrees whose assigned-in
//! minimized atoms strictly contain the minimized part of a model already
//! found. Constraints over derived predicates are only checked at leaves.
//! Enumerate mode visits every full assignment without propagation or
//! pruning. Both modes end with the same global minimality filter as the
//! oracle, so they return identical model sets.

use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::circumscription::{self, ModelSet, Rejection};
use crate::fixpoint::Interpretation;
use crate::grounder::{AtomId, GroundProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    In,
    Out,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Branch,
    /// Forced by the ground constraint with this rule index.
    Forced(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrailEntry {
    /// Position in [`GroundProgram::decision_atoms`].
    pub atom: usize,
    pub value: Value,
    pub reason: Reason,
}

/// Assignment of in/out/undecided to every decision atom, with the trail of
/// assignments in chronological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    state: Vec<Value>,
    trail: Vec<TrailEntry>,
}

impl PartialAssignment {
    pub fn new(ground: &GroundProgram) -> Self {
        Self::with_len(ground.decision_atoms().len())
    }

    pub fn with_len(n: usize) -> Self {
        PartialAssignment {
            state: vec![Value::Undecided; n],
            trail: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn value(&self, atom: usize) -> Value {
        self.state[atom]
    }

    pub fn trail(&self) -> &[TrailEntry] {
        &self.trail
    }

    /// Assigns an undecided atom.
    pub fn assign(&mut self, atom: usize, value: Value, reason: Reason) {
        assert_eq!(
            self.state[atom],
            Value::Undecided,
            "atom {atom} already assigned"
        );
        assert_ne!(value, Value::Undecided);
        self.state[atom] = value;
        self.trail.push(TrailEntry {
            atom,
            value,
            reason,
        });
    }

    /// Unassigns everything after the first `len` trail entries.
    pub fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let e = self.trail.pop().expect("trail longer than len");
            self.state[e.atom] = Value::Undecided;
        }
    }

    pub fn is_complete(&self) -> bool {
        self.trail.len() == self.state.len()
    }

    pub fn undecided(&self) -> impl Iterator<Item = usize> + '_ {
        self.state
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Value::Undecided)
            .map(|(i, _)| i)
    }

    /// Decision atoms assigned in, as atom ids.
    pub fn in_atoms<'a>(&'a self, ground: &'a GroundProgram) -> impl Iterator<Item = AtomId> + 'a {
        self.state
            .iter()
            .zip(ground.decision_atoms())
            .filter(|(v, _)| **v == Value::In)
            .map(|(_, &id)| id)
    }

    fn candidate_bits(&self, ground: &GroundProgram) -> FixedBitSet {
        let mut bits = FixedBitSet::with_capacity(ground.num_atoms());
        for id in self.in_atoms(ground) {
            bits.insert(id.index());
        }
        bits
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub nodes_expanded: u64,
    pub constraint_prunes: u64,
    pub dominance_prunes: u64,
    pub leaves_evaluated: u64,
    /// Size of the returned model set.
    pub models_found: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Backtrack,
    Enumerate,
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMode::Backtrack => "backtrack",
            SolveMode::Enumerate => "enumerate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchOrder {
    Lexicographic,
    MostConstrainedFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveConfig {
    pub mode: SolveMode,
    pub branch_order: BranchOrder,
    pub max_models: Option<usize>,
    /// Only honoured when [`dominance_permitted`] holds for the program.
    pub dominance_pruning: bool,
}

impl SolveConfig {
    pub fn new(mode: SolveMode) -> Self {
        SolveConfig {
            mode,
            branch_order: BranchOrder::Lexicographic,
            max_models: None,
            dominance_pruning: true,
        }
    }

    pub fn backtrack() -> Self {
        Self::new(SolveMode::Backtrack)
    }

    pub fn enumerate() -> Self {
        Self::new(SolveMode::Enumerate)
    }

    /// The setting actually used for `ground`.
    pub fn effective_dominance(&self, ground: &GroundProgram) -> bool {
        self.mode == SolveMode::Backtrack && self.dominance_pruning && dominance_permitted(ground)
    }
}

/// Dominance pruning is sound when every minimized predicate is a guess
/// predicate and every fixed predicate is extensional: assigned-in decision
/// atoms are then a lower bound of the leaf's minimized projection, and all
/// leaves agree on the fixed part.
pub fn dominance_permitted(ground: &GroundProgram) -> bool {
    let policy = ground.policy();
    policy.minimized.is_subset(ground.guess_predicates())
        && policy.fixed.is_subset(ground.edb_predicates())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    /// Rule index of the violated ground constraint.
    pub constraint: usize,
    pub text: String,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "conflict on {}", self.text)
    }
}

#[derive(Debug, Clone)]
struct PropConstraint {
    rule: usize,
    /// (decision position, literal is positive)
    lits: Vec<(usize, bool)>,
}

/// Constraints over decision and EDB atoms only, with the EDB literals
/// already evaluated away.
#[derive(Debug, Clone)]
pub struct Propagator {
    constraints: Vec<PropConstraint>,
    occurs: Vec<Vec<usize>>,
}

enum Status {
    Satisfied,
    Violated,
    Unit(usize, bool),
    Open,
}

impl Propagator {
    pub fn new(ground: &GroundProgram) -> Self {
        let n = ground.decision_atoms().len();
        let mut constraints = Vec::new();
        'next: for (rule, c) in ground.constraints() {
            let mut lits: Vec<(usize, bool)> = Vec::new();
            for l in &c.body {
                if let Some(d) = ground.decision_index(l.atom) {
                    if !lits.contains(&(d, l.positive)) {
                        lits.push((d, l.positive));
                    }
                } else if ground.is_edb(l.atom) {
                    if ground.is_fact(l.atom) != l.positive {
                        // false EDB literal: the constraint can never fire
                        continue 'next;
                    }
                } else {
                    continue 'next;
                }
            }
            constraints.push(PropConstraint { rule, lits });
        }
        let mut occurs = vec![Vec::new(); n];
        for (ci, c) in constraints.iter().enumerate() {
            for &(d, _) in &c.lits {
                if occurs[d].last() != Some(&ci) {
                    occurs[d].push(ci);
                }
            }
        }
        Propagator {
            constraints,
            occurs,
        }
    }

    /// Rule indices of the propagatable constraints.
    pub fn constraint_rules(&self) -> impl Iterator<Item = usize> + '_ {
        self.constraints.iter().map(|c| c.rule)
    }

    fn status(&self, c: &PropConstraint, pa: &PartialAssignment) -> Status {
        let mut unit = None;
        let mut undecided = 0;
        for &(d, positive) in &c.lits {
            match (pa.value(d), positive) {
                (Value::In, true) | (Value::Out, false) => {}
                (Value::In, false) | (Value::Out, true) => return Status::Satisfied,
                (Value::Undecided, _) => {
                    undecided += 1;
                    unit = Some((d, positive));
                }
            }
        }
        match (undecided, unit) {
            (0, _) => Status::Violated,
            (1, Some((d, positive))) => Status::Unit(d, positive),
            _ => Status::Open,
        }
    }

    fn check(&self, ci: usize, pa: &mut PartialAssignment) -> Result<(), usize> {
        let c = &self.constraints[ci];
        match self.status(c, pa) {
            Status::Violated => Err(c.rule),
            Status::Unit(d, positive) => {
                let value = if positive { Value::Out } else { Value::In };
                pa.assign(d, value, Reason::Forced(c.rule));
                Ok(())
            }
            Status::Satisfied | Status::Open => Ok(()),
        }
    }

    /// Checks every constraint, then keeps processing trail entries from
    /// `from` onwards until nothing more is forced.
    fn run(&self, pa: &mut PartialAssignment, from: usize, full: bool) -> Result<(), usize> {
        if full {
            for ci in 0..self.constraints.len() {
                self.check(ci, pa)?;
            }
        }
        let mut head = from;
        while head < pa.trail.len() {
            let atom = pa.trail[head].atom;
            head += 1;
            for &ci in &self.occurs[atom] {
                self.check(ci, pa)?;
            }
        }
        Ok(())
    }

    /// Number of not-yet-satisfied constraints in which each decision atom
    /// occurs.
    fn open_counts(&self, pa: &PartialAssignment) -> Vec<usize> {
        let mut counts = vec![0; pa.len()];
        for c in &self.constraints {
            if matches!(self.status(c, pa), Status::Satisfied) {
                continue;
            }
            for &(d, _) in &c.lits {
                counts[d] += 1;
            }
        }
        counts
    }
}

/// Forces literals of propagatable constraints to fixpoint. On conflict the
/// assignment keeps whatever was forced before the conflict was found.
pub fn propagate(ground: &GroundProgram, pa: &mut PartialAssignment) -> Result<(), Conflict> {
    Propagator::new(ground)
        .run(pa, 0, true)
        .map_err(|rule| Conflict {
            constraint: rule,
            text: ground.display_rule(&ground.rules()[rule]),
        })
}

fn select_with(prop: &Propagator, pa: &PartialAssignment, order: BranchOrder) -> Option<usize> {
    match order {
        BranchOrder::Lexicographic => pa.undecided().next(),
        BranchOrder::MostConstrainedFirst => {
            let counts = prop.open_counts(pa);
            // max_by_key keeps the last maximum; reverse to prefer the smallest position
            pa.undecided()
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .max_by_key(|&d| counts[d])
        }
    }
}

/// Next decision atom to branch on (position in the decision-atom list).
///
/// # Panics
/// If every atom is decided.
pub fn select_branch_atom(
    ground: &GroundProgram,
    pa: &PartialAssignment,
    config: &SolveConfig,
) -> usize {
    select_with(&Propagator::new(ground), pa, config.branch_order).expect("no undecided atom")
}

/// Leaf check: the candidate is the set of atoms assigned in.
pub fn evaluate_leaf(
    ground: &GroundProgram,
    pa: &PartialAssignment,
) -> Result<Interpretation, Rejection> {
    assert!(pa.is_complete(), "leaf evaluation needs a full assignment");
    circumscription::evaluate_candidate(ground, &pa.candidate_bits(ground))
        .map(|bits| Interpretation::from_bits(ground, &bits))
        .map_err(|rule| circumscription::rejection(ground, rule))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub models: ModelSet,
    pub stats: SolverStats,
    /// The model cap stopped the search early.
    pub truncated: bool,
}

struct Search<'a> {
    ground: &'a GroundProgram,
    config: SolveConfig,
    prop: Propagator,
    dominance: bool,
    minimized_decisions: Vec<usize>,
    found_projections: Vec<Vec<usize>>,
    accepted: Vec<FixedBitSet>,
    stats: SolverStats,
    stop: bool,
}

impl Search<'_> {
    fn dominated(&self, pa: &PartialAssignment) -> bool {
        let in_count = self
            .minimized_decisions
            .iter()
            .filter(|&&d| pa.value(d) == Value::In)
            .count();
        self.found_projections
            .iter()
            .any(|f| f.len() < in_count && f.iter().all(|&d| pa.value(d) == Value::In))
    }

    fn node(&mut self, pa: &mut PartialAssignment, from: usize, root: bool) {
        self.stats.nodes_expanded += 1;
        if self.config.mode == SolveMode::Backtrack {
            if self.prop.run(pa, from, root).is_err() {
                self.stats.constraint_prunes += 1;
                return;
            }
            if self.dominance && self.dominated(pa) {
                self.stats.dominance_prunes += 1;
                return;
            }
        }
        if pa.is_complete() {
            self.leaf(pa);
            return;
        }
        let order = match self.config.mode {
            SolveMode::Backtrack => self.config.branch_order,
            SolveMode::Enumerate => BranchOrder::Lexicographic,
        };
        let atom = select_with(&self.prop, pa, order).expect("incomplete assignment");
        for value in [Value::Out, Value::In] {
            let mark = pa.trail.len();
            pa.assign(atom, value, Reason::Branch);
            self.node(pa, mark, false);
            pa.undo_to(mark);
            if self.stop {
                return;
            }
        }
    }

    fn leaf(&mut self, pa: &PartialAssignment) {
        self.stats.leaves_evaluated += 1;
        let Ok(model) =
            circumscription::evaluate_candidate(self.ground, &pa.candidate_bits(self.ground))
        else {
            return;
        };
        if self.dominance {
            let proj = self
                .minimized_decisions
                .iter()
                .copied()
                .filter(|&d| pa.value(d) == Value::In)
                .collect();
            self.found_projections.push(proj);
        }
        self.accepted.push(model);
        if self
            .config
            .max_models
            .is_some_and(|cap| self.accepted.len() >= cap)
        {
            self.stop = true;
        }
    }
}

/// Solves `ground` in the configured mode. Statistics and model order are a
/// deterministic function of the program and the configuration.
pub fn solve(ground: &GroundProgram, config: &SolveConfig) -> Solution {
    let dominance = config.effective_dominance(ground);
    let minimized_decisions = ground
        .decision_atoms()
        .iter()
        .enumerate()
        .filter(|(_, &id)| ground.is_minimized(id))
        .map(|(d, _)| d)
        .collect();
    let mut search = Search {
        ground,
        config: *config,
        prop: Propagator::new(ground),
        dominance,
        minimized_decisions,
        found_projections: Vec::new(),
        accepted: Vec::new(),
        stats: SolverStats::default(),
        stop: false,
    };
    let mut pa = PartialAssignment::new(ground);
    search.node(&mut pa, 0, true);

    let models = circumscription::minimal_models(ground, &search.accepted);
    let mut stats = search.stats;
    stats.models_found = models.len() as u64;
    Solution {
        models,
        stats,
        truncated: search.stop,
    }
}

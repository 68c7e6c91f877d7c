//! Circumscriptive semantics: which interpretations are models, which of
//! those are minimal, and the exhaustive enumeration oracle.
//!
//! A candidate is a set of decision atoms. Its model is the stratified least
//! model seeded with it, accepted when no constraint fires. An accepted model
//! `M` is dominated by `M'` when both agree on the fixed predicates and the
//! minimized part of `M'` is a strict subset of the minimized part of `M`.
//! Varying predicates are ignored by the comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fixpoint::{self, Interpretation, ViolatedConstraint};
use crate::grounder::GroundProgram;

/// Refuse exhaustive enumeration above this many decision atoms unless
/// explicitly overridden.
pub const DEFAULT_GUARD: usize = 24;

/// Accepted models, deduplicated, iterated in the lexicographic order of
/// their full canonical rendering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelSet {
    models: BTreeMap<String, Interpretation>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: Interpretation) -> bool {
        self.models.insert(model.to_string(), model).is_none()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn contains(&self, model: &Interpretation) -> bool {
        self.models.contains_key(&model.to_string())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interpretation> {
        self.models.values()
    }

    /// Full renderings, in canonical order.
    pub fn renderings(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    /// One line per model, projected to `show` (every predicate when `None`),
    /// lines sorted lexicographically. Distinct models may project to equal
    /// lines; each still gets its own line.
    pub fn render_lines(&self, show: Option<&BTreeSet<String>>) -> Vec<String> {
        let mut lines: Vec<String> = self
            .models
            .values()
            .map(|m| match show {
                Some(s) => m.project(s).to_string(),
                None => m.to_string(),
            })
            .collect();
        lines.sort();
        lines
    }
}

impl FromIterator<Interpretation> for ModelSet {
    fn from_iter<I: IntoIterator<Item = Interpretation>>(iter: I) -> Self {
        let mut set = ModelSet::new();
        for m in iter {
            set.insert(m);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rejected by constraint {constraint}")]
pub struct Rejection {
    pub constraint: ViolatedConstraint,
}

pub(crate) fn evaluate_candidate(
    ground: &GroundProgram,
    guesses: &FixedBitSet,
) -> Result<FixedBitSet, usize> {
    let model = fixpoint::eval(ground, guesses);
    match fixpoint::first_violation(ground, &model) {
        Some(c) => Err(c),
        None => Ok(model),
    }
}

pub(crate) fn rejection(ground: &GroundProgram, rule: usize) -> Rejection {
    Rejection {
        constraint: ViolatedConstraint {
            rule,
            text: ground.display_rule(&ground.rules()[rule]),
        },
    }
}

/// The model induced by `candidate`, or the first constraint it violates.
/// Atoms of `candidate` that are not decision atoms are ignored.
pub fn is_model(
    ground: &GroundProgram,
    candidate: &Interpretation,
) -> Result<Interpretation, Rejection> {
    let model = fixpoint::least_model(ground, candidate);
    match fixpoint::violates_constraints(ground, &model) {
        Some(constraint) => Err(Rejection { constraint }),
        None => Ok(model),
    }
}

fn projection(bits: &FixedBitSet, mask: &FixedBitSet) -> FixedBitSet {
    let mut p = bits.clone();
    p.intersect_with(mask);
    p
}

/// True iff `by` dominates `model`.
pub(crate) fn dominates(ground: &GroundProgram, by: &FixedBitSet, model: &FixedBitSet) -> bool {
    let fixed = ground.fixed_mask();
    if projection(by, fixed) != projection(model, fixed) {
        return false;
    }
    let min = ground.minimized_mask();
    let (a, b) = (projection(by, min), projection(model, min));
    a.is_subset(&b) && a != b
}

/// True iff no member of `accepted` dominates `model`.
pub fn is_minimal(ground: &GroundProgram, model: &Interpretation, accepted: &ModelSet) -> bool {
    let bits = model.to_bits(ground);
    !accepted
        .iter()
        .any(|other| dominates(ground, &other.to_bits(ground), &bits))
}

/// Keeps the accepted models that no other accepted model dominates.
///
/// Within each fixed-predicate class the distinct minimized projections are
/// visited by increasing size; a projection is minimal iff no minimal
/// projection already kept is a subset of it.
pub(crate) fn minimal_models(ground: &GroundProgram, accepted: &[FixedBitSet]) -> ModelSet {
    let mut classes: HashMap<FixedBitSet, Vec<usize>> = HashMap::new();
    for (i, m) in accepted.iter().enumerate() {
        classes
            .entry(projection(m, ground.fixed_mask()))
            .or_default()
            .push(i);
    }
    let mut out = ModelSet::new();
    for members in classes.values() {
        let mut projections: Vec<FixedBitSet> = members
            .iter()
            .map(|&i| projection(&accepted[i], ground.minimized_mask()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        projections.sort_by_key(|p| p.count_ones(..));
        let mut minimal: Vec<FixedBitSet> = Vec::new();
        for p in projections {
            if !minimal.iter().any(|q| q.is_subset(&p)) {
                minimal.push(p);
            }
        }
        let minimal: BTreeSet<FixedBitSet> = minimal.into_iter().collect();
        for &i in members {
            if minimal.contains(&projection(&accepted[i], ground.minimized_mask())) {
                out.insert(Interpretation::from_bits(ground, &accepted[i]));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Stop after this many accepted candidates; the result is then flagged
    /// as truncated.
    pub limit: Option<usize>,
    pub guard: usize,
    pub force: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            limit: None,
            guard: DEFAULT_GUARD,
            force: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OracleStats {
    pub tried: u64,
    pub accepted: u64,
    pub minimal: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub models: ModelSet,
    pub stats: OracleStats,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuardError {
    #[error("{atoms} decision atoms exceed the exhaustive-search bound of {bound}; pass the override flag to run anyway")]
    TooLarge { atoms: usize, bound: usize },
    #[error("{atoms} decision atoms cannot be enumerated exhaustively")]
    Unrepresentable { atoms: usize },
}

/// Checks the exhaustive-search guard for `atoms` decision atoms.
pub fn check_guard(atoms: usize, guard: usize, force: bool) -> Result<(), GuardError> {
    if atoms >= 64 {
        return Err(GuardError::Unrepresentable { atoms });
    }
    if atoms > guard && !force {
        return Err(GuardError::TooLarge {
            atoms,
            bound: guard,
        });
    }
    Ok(())
}

fn candidate_bits(ground: &GroundProgram, mask: u64) -> FixedBitSet {
    let mut bits = FixedBitSet::with_capacity(ground.num_atoms());
    for (i, id) in ground.decision_atoms().iter().enumerate() {
        if mask >> i & 1 == 1 {
            bits.insert(id.index());
        }
    }
    bits
}

/// Tries every subset of the decision atoms (bit `i` of the counter selects
/// decision atom `i`), then keeps the minimal accepted models.
///
/// Without a limit the candidate space is split across worker threads; the
/// accepted list is merged in counter order, so the result does not depend on
/// scheduling.
pub fn enumerate_bruteforce(
    ground: &GroundProgram,
    config: &OracleConfig,
) -> Result<OracleResult, GuardError> {
    let n = ground.decision_atoms().len();
    check_guard(n, config.guard, config.force)?;
    let total: u64 = 1u64 << n;

    let (accepted, tried, truncated) = match config.limit {
        None => {
            let accepted: Vec<FixedBitSet> = (0..total)
                .into_par_iter()
                .filter_map(|mask| evaluate_candidate(ground, &candidate_bits(ground, mask)).ok())
                .collect();
            (accepted, total, false)
        }
        Some(limit) => {
            let mut accepted = Vec::new();
            let mut tried = 0;
            let mut truncated = false;
            for mask in 0..total {
                if accepted.len() >= limit {
                    truncated = true;
                    break;
                }
                tried += 1;
                if let Ok(m) = evaluate_candidate(ground, &candidate_bits(ground, mask)) {
                    accepted.push(m);
                }
            }
            (accepted, tried, truncated)
        }
    };

    let models = minimal_models(ground, &accepted);
    Ok(OracleResult {
        stats: OracleStats {
            tried,
            accepted: accepted.len() as u64,
            minimal: models.len() as u64,
        },
        models,
        truncated,
    })
}

impl fmt::Display for OracleStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} candidates tried, {} accepted, {} minimal",
            self.tried, self.accepted, self.minimal
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounder::{ground_program, GroundAtom};
    use crate::parser::parse_program;

    fn ground(text: &str) -> GroundProgram {
        ground_program(&parse_program(text).unwrap())
    }

    fn interp(atoms: &[&str]) -> Interpretation {
        atoms
            .iter()
            .map(|a| GroundAtom::parse(a).unwrap())
            .collect()
    }

    const TRIANGLE: &str = "node(a). node(b). node(c). col(r). col(g). col(bl).
        edge(a,b). edge(b,c). edge(a,c).
        #guess chosen(X,C) :- node(X), col(C).
        colored(X) :- chosen(X,C).
        :- node(X), not colored(X).
        :- edge(X,Y), chosen(X,C), chosen(Y,C).";

    #[test]
    fn is_model_examples() {
        let g = ground("#guess p. :- p.");
        let r = is_model(&g, &interp(&["p"])).unwrap_err();
        assert_eq!(r.constraint.text, ":- p.");
        assert_eq!(is_model(&g, &interp(&[])).unwrap(), interp(&[]));

        let g = ground(TRIANGLE);
        let m = is_model(&g, &interp(&["chosen(a,r)", "chosen(b,g)", "chosen(c,bl)"])).unwrap();
        assert!(m.contains(&GroundAtom::parse("colored(c)").unwrap()));
        assert!(is_model(&g, &interp(&["chosen(a,r)", "chosen(b,r)", "chosen(c,g)"])).is_err());
    }

    #[test]
    fn is_minimal_examples() {
        let g = ground("#guess p.");
        let accepted: ModelSet = [interp(&[]), interp(&["p"])].into_iter().collect();
        assert!(is_minimal(&g, &interp(&[]), &accepted));
        assert!(!is_minimal(&g, &interp(&["p"]), &accepted));

        let g = ground("#guess p. #guess q.");
        let accepted: ModelSet = [interp(&["p"]), interp(&["q"])].into_iter().collect();
        assert!(is_minimal(&g, &interp(&["p"]), &accepted));
        assert!(is_minimal(&g, &interp(&["q"]), &accepted));
    }

    #[test]
    fn triangle_minimality() {
        let g = ground(TRIANGLE);
        let mut accepted = ModelSet::new();
        for mask in 0u64..512 {
            if let Ok(m) = evaluate_candidate(&g, &candidate_bits(&g, mask)) {
                accepted.insert(Interpretation::from_bits(&g, &m));
            }
        }
        for m in accepted.iter() {
            let mut per_node: BTreeMap<String, usize> = BTreeMap::new();
            for a in m.iter().filter(|a| a.predicate == "chosen") {
                *per_node.entry(a.args[0].to_string()).or_default() += 1;
            }
            let single = per_node.values().all(|&c| c == 1);
            assert_eq!(is_minimal(&g, m, &accepted), single, "{m}");
        }
    }

    #[test]
    fn oracle_small_cases() {
        let g = ground("#guess p. :- p.");
        let r = enumerate_bruteforce(&g, &OracleConfig::default()).unwrap();
        assert_eq!(r.models.renderings(), ["{}"]);
        assert_eq!((r.stats.tried, r.stats.accepted), (2, 1));

        let g = ground(TRIANGLE);
        let r = enumerate_bruteforce(&g, &OracleConfig::default()).unwrap();
        assert_eq!(r.models.len(), 6);
        assert_eq!(r.stats.tried, 512);

        let g = ground(
            "edge(a,b). edge(b,c). path(X,Y) :- edge(X,Y). path(X,Z) :- edge(X,Y), path(Y,Z).",
        );
        let r = enumerate_bruteforce(&g, &OracleConfig::default()).unwrap();
        assert_eq!(r.models.len(), 1);
        assert_eq!(
            r.models.iter().next().unwrap(),
            &fixpoint::least_model(&g, &Interpretation::new())
        );
    }

    #[test]
    fn limit_truncates_sequentially() {
        let g = ground(TRIANGLE);
        let cfg = OracleConfig {
            limit: Some(1),
            ..OracleConfig::default()
        };
        let r = enumerate_bruteforce(&g, &cfg).unwrap();
        assert!(r.truncated);
        assert_eq!(r.stats.accepted, 1);
        assert!(r.stats.tried < 512);
    }

    #[test]
    fn guard_refuses_large_domains() {
        let text: String =
            (0..25).map(|i| format!("d({i}). ")).collect::<String>() + "#guess g(X) :- d(X).";
        let g = ground(&text);
        assert_eq!(
            enumerate_bruteforce(&g, &OracleConfig::default()).unwrap_err(),
            GuardError::TooLarge {
                atoms: 25,
                bound: 24
            }
        );
        assert!(check_guard(25, 24, true).is_ok());
        assert!(check_guard(64, 24, true).is_err());
    }

    #[test]
    fn fixed_derived_predicates_split_comparison() {
        // d is derived but fixed: models with different d are incomparable.
        let g = ground("#guess p. #guess q. d :- q. #fix d.");
        let r = enumerate_bruteforce(&g, &OracleConfig::default()).unwrap();
        assert_eq!(r.models.renderings(), ["{d, q}", "{}"]);
    }

    #[test]
    fn varying_predicates_are_ignored() {
        // q is varying: {q} and {} tie on the minimized projection.
        let g = ground("#guess p. #guess q. #minimize p.");
        let r = enumerate_bruteforce(&g, &OracleConfig::default()).unwrap();
        assert_eq!(r.models.renderings(), ["{q}", "{}"]);
    }
}

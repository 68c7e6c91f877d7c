//! Bottom-up evaluation of the stratified rule layer.
//!
//! Strata are evaluated in order. Within a stratum the semi-naive evaluator
//! fires every rule once and afterwards only re-examines rules that watch an
//! atom derived in the previous round. [`least_model_naive`] recomputes the
//! immediate-consequence operator until nothing changes and exists for
//! differential testing.

use std::collections::BTreeSet;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::grounder::{AtomId, GroundAtom, GroundProgram, GroundRule};

/// A finite set of ground atoms, iterated in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interpretation {
    atoms: BTreeSet<GroundAtom>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn insert(&mut self, atom: GroundAtom) -> bool {
        self.atoms.insert(atom)
    }

    pub fn is_subset(&self, other: &Interpretation) -> bool {
        self.atoms.is_subset(&other.atoms)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundAtom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &BTreeSet<GroundAtom> {
        &self.atoms
    }

    /// Restriction to atoms whose predicate is in `predicates`.
    pub fn project<S: AsRef<str> + Ord>(&self, predicates: &BTreeSet<S>) -> Interpretation {
        self.atoms
            .iter()
            .filter(|a| predicates.iter().any(|p| p.as_ref() == a.predicate))
            .cloned()
            .collect()
    }

    pub(crate) fn from_bits(ground: &GroundProgram, bits: &FixedBitSet) -> Self {
        bits.ones().map(|i| ground.atoms()[i].clone()).collect()
    }

    /// Atoms outside the ground program's table are dropped.
    pub(crate) fn to_bits(&self, ground: &GroundProgram) -> FixedBitSet {
        let mut bits = FixedBitSet::with_capacity(ground.num_atoms());
        for a in &self.atoms {
            if let Some(id) = ground.atom_id(a) {
                bits.insert(id.index());
            }
        }
        bits
    }
}

impl FromIterator<GroundAtom> for Interpretation {
    fn from_iter<I: IntoIterator<Item = GroundAtom>>(iter: I) -> Self {
        Interpretation {
            atoms: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Interpretation {
    type Item = &'a GroundAtom;
    type IntoIter = std::collections::btree_set::Iter<'a, GroundAtom>;

    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

/// `{a, p(b,c)}`, atoms in canonical order.
impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// A ground constraint whose body holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViolatedConstraint {
    /// Index into [`GroundProgram::rules`].
    pub rule: usize,
    pub text: String,
}

impl fmt::Display for ViolatedConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[inline]
pub(crate) fn body_holds(rule: &GroundRule, model: &FixedBitSet) -> bool {
    rule.body
        .iter()
        .all(|l| model.contains(l.atom.index()) == l.positive)
}

/// Semi-naive least model seeded with the facts and `guesses`.
pub(crate) fn eval(ground: &GroundProgram, guesses: &FixedBitSet) -> FixedBitSet {
    let plan = &ground.plan;
    let rules = ground.rules();
    let mut model = plan.facts.clone();
    model.union_with(guesses);

    let mut delta: Vec<usize> = Vec::new();
    let mut next: Vec<usize> = Vec::new();
    for (s, stratum) in plan.stratum_rules.iter().enumerate() {
        delta.clear();
        for &r in stratum {
            let rule = &rules[r];
            let head = rule.head.expect("stratum rules have heads").index();
            if !model.contains(head) && body_holds(rule, &model) {
                model.insert(head);
                delta.push(head);
            }
        }
        while !delta.is_empty() {
            next.clear();
            for &atom in &delta {
                for &r in &plan.watchers[atom] {
                    if plan.rule_stratum[r] != s {
                        continue;
                    }
                    let rule = &rules[r];
                    let head = rule.head.expect("watched rules have heads").index();
                    if !model.contains(head) && body_holds(rule, &model) {
                        model.insert(head);
                        next.push(head);
                    }
                }
            }
            std::mem::swap(&mut delta, &mut next);
        }
    }
    model
}

/// One application of the immediate-consequence operator restricted to the
/// rules of stratum `s`, reading only `current`.
fn step_bits(ground: &GroundProgram, s: usize, current: &FixedBitSet) -> FixedBitSet {
    let mut out = current.clone();
    for &r in &ground.plan.stratum_rules[s] {
        let rule = &ground.rules()[r];
        if body_holds(rule, current) {
            out.insert(rule.head.expect("stratum rules have heads").index());
        }
    }
    out
}

pub(crate) fn eval_naive(ground: &GroundProgram, guesses: &FixedBitSet) -> FixedBitSet {
    let mut model = ground.plan.facts.clone();
    model.union_with(guesses);
    for s in 0..ground.plan.stratum_rules.len() {
        loop {
            let next = step_bits(ground, s, &model);
            if next == model {
                break;
            }
            model = next;
        }
    }
    model
}

pub(crate) fn first_violation(ground: &GroundProgram, model: &FixedBitSet) -> Option<usize> {
    ground
        .plan
        .constraints
        .iter()
        .copied()
        .find(|&c| body_holds(&ground.rules()[c], model))
}

fn decision_bits(ground: &GroundProgram, guesses: &Interpretation) -> FixedBitSet {
    let mut bits = guesses.to_bits(ground);
    for i in bits.clone().ones() {
        if ground.decision_index(AtomId(i as u32)).is_none() {
            bits.set(i, false);
        }
    }
    bits
}

/// `current` plus the heads of stratum rules whose positive body holds in
/// `current` and whose negated atoms are absent from it.
pub fn tp_step(
    ground: &GroundProgram,
    stratum: &BTreeSet<String>,
    current: &Interpretation,
) -> Interpretation {
    let bits = current.to_bits(ground);
    let mut out = current.clone();
    for rule in ground.rules() {
        let Some(head) = rule.head else { continue };
        if !stratum.contains(&ground.atom(head).predicate) {
            continue;
        }
        if body_holds(rule, &bits) {
            out.insert(ground.atom(head).clone());
        }
    }
    out
}

/// The stratified model of the rule layer given a guess assignment. Atoms of
/// `guesses` that are not decision atoms are ignored.
pub fn least_model(ground: &GroundProgram, guesses: &Interpretation) -> Interpretation {
    Interpretation::from_bits(ground, &eval(ground, &decision_bits(ground, guesses)))
}

/// Reference evaluator: naive iteration of the immediate-consequence
/// operator per stratum.
pub fn least_model_naive(ground: &GroundProgram, guesses: &Interpretation) -> Interpretation {
    Interpretation::from_bits(ground, &eval_naive(ground, &decision_bits(ground, guesses)))
}

/// First ground constraint, in rule order, whose body holds in `model`.
pub fn violates_constraints(
    ground: &GroundProgram,
    model: &Interpretation,
) -> Option<ViolatedConstraint> {
    first_violation(ground, &model.to_bits(ground)).map(|rule| ViolatedConstraint {
        rule,
        text: ground.display_rule(&ground.rules()[rule]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounder::ground_program;
    use crate::parser::parse_program;
    use proptest::prelude::*;

    fn ground(text: &str) -> GroundProgram {
        ground_program(&parse_program(text).unwrap())
    }

    fn interp(atoms: &[&str]) -> Interpretation {
        atoms
            .iter()
            .map(|a| GroundAtom::parse(a).unwrap())
            .collect()
    }

    fn stratum(preds: &[&str]) -> BTreeSet<String> {
        preds.iter().map(|p| p.to_string()).collect()
    }

    #[test]
    fn tp_step_examples() {
        let g = ground("p :- q. q :- r.");
        assert_eq!(
            tp_step(&g, &stratum(&["p", "q", "r"]), &interp(&["q"])),
            interp(&["q", "p"])
        );
        assert_eq!(
            tp_step(&g, &stratum(&["p", "q", "r"]), &interp(&[])),
            interp(&[])
        );

        let g = ground(
            "edge(a,b). edge(b,c). path(X,Y) :- edge(X,Y). path(X,Z) :- edge(X,Y), path(Y,Z).",
        );
        let edb = interp(&["edge(a,b)", "edge(b,c)"]);
        let once = tp_step(&g, &stratum(&["edge", "path"]), &edb);
        assert_eq!(
            once,
            interp(&["edge(a,b)", "edge(b,c)", "path(a,b)", "path(b,c)"])
        );
    }

    #[test]
    fn least_model_examples() {
        let g = ground(
            "edge(a,b). edge(b,c). path(X,Y) :- edge(X,Y). path(X,Z) :- edge(X,Y), path(Y,Z).",
        );
        assert_eq!(
            least_model(&g, &Interpretation::new()),
            interp(&[
                "edge(a,b)",
                "edge(b,c)",
                "path(a,b)",
                "path(a,c)",
                "path(b,c)"
            ])
        );

        let g = ground(
            "node(a). color(r). #guess chosen(X,C) :- node(X), color(C). colored(X) :- chosen(X,C).",
        );
        let m = least_model(&g, &interp(&["chosen(a,r)"]));
        assert!(m.contains(&GroundAtom::parse("colored(a)").unwrap()));
    }

    #[test]
    fn non_decision_guesses_ignored() {
        let g = ground("#guess g(X) :- d(X). d(a). h(b). x(X) :- g(X), h(X).");
        let m = least_model(&g, &interp(&["g(b)"]));
        assert!(!m.contains(&GroundAtom::parse("x(b)").unwrap()));
    }

    #[test]
    fn chain_of_five_has_ten_paths() {
        let g = ground(
            "edge(1,2). edge(2,3). edge(3,4). edge(4,5). \
             path(X,Y) :- edge(X,Y). path(X,Z) :- edge(X,Y), path(Y,Z).",
        );
        let m = least_model(&g, &Interpretation::new());
        assert_eq!(m.iter().filter(|a| a.predicate == "path").count(), 10);
    }

    #[test]
    fn stratified_negation() {
        let g = ground("r(a). r(b). s(a). t(X) :- r(X), not s(X). u(X) :- r(X), not t(X).");
        assert_eq!(
            least_model(&g, &Interpretation::new()),
            interp(&["r(a)", "r(b)", "s(a)", "t(b)", "u(a)"])
        );
    }

    #[test]
    fn constraint_examples() {
        let g = ground("#guess p. :- p.");
        let v = violates_constraints(&g, &interp(&["p"])).unwrap();
        assert_eq!(v.text, ":- p.");

        let g = ground("#guess p. #guess q. :- p, not q.");
        assert_eq!(violates_constraints(&g, &interp(&["p", "q"])), None);
    }

    #[test]
    fn fixpoint_is_stable() {
        let g = ground("e(a,b). e(b,c). e(c,a). p(X,Y) :- e(X,Y). p(X,Z) :- p(X,Y), e(Y,Z). q(X) :- e(X,Y), not p(Y,X).");
        let m = least_model(&g, &Interpretation::new());
        for layer in g.strata().layers() {
            assert_eq!(tp_step(&g, layer, &m), m);
        }
    }

    const SHUFFLE_SOURCE: [&str; 7] = [
        "e(a,b). e(b,c). e(c,d).",
        "p(X,Y) :- e(X,Y).",
        "p(X,Z) :- p(X,Y), e(Y,Z).",
        "n(X) :- e(X,Y).",
        "n(Y) :- e(X,Y).",
        "u(X,Y) :- n(X), n(Y), not p(X,Y).",
        "w(X) :- u(X,X).",
    ];

    proptest! {
        #[test]
        fn rule_order_does_not_change_model(perm in Just((0..SHUFFLE_SOURCE.len()).collect::<Vec<_>>()).prop_shuffle()) {
            let base = ground(&SHUFFLE_SOURCE.join("\n"));
            let text: Vec<&str> = perm.iter().map(|&i| SHUFFLE_SOURCE[i]).collect();
            let shuffled = ground(&text.join("\n"));
            prop_assert_eq!(
                least_model(&base, &Interpretation::new()),
                least_model(&shuffled, &Interpretation::new())
            );
            prop_assert_eq!(
                least_model(&shuffled, &Interpretation::new()),
                least_model_naive(&shuffled, &Interpretation::new())
            );
        }

        #[test]
        fn guesses_are_monotone_without_negation(a in proptest::collection::vec(any::<bool>(), 6), b in proptest::collection::vec(any::<bool>(), 6)) {
            let g = ground(
                "v(1). v(2). v(3). e(1,2). e(2,3). e(3,1). \
                 #guess on(X,Y) :- v(X), v(Y). \
                 r(X,Y) :- on(X,Y), e(X,Y). r(X,Z) :- r(X,Y), r(Y,Z). hit(X) :- r(X,Y).",
            );
            let ids = g.decision_atoms();
            let small: Interpretation = ids.iter().take(6).zip(&a)
                .filter(|(_, &on)| on).map(|(&id, _)| g.atom(id).clone()).collect();
            let big: Interpretation = ids.iter().take(6).zip(a.iter().zip(&b))
                .filter(|(_, (&x, &y))| x || y).map(|(&id, _)| g.atom(id).clone()).collect();
            prop_assert!(least_model(&g, &small).is_subset(&least_model(&g, &big)));
        }

        #[test]
        fn tp_step_is_monotone(a in proptest::collection::vec(any::<bool>(), 9), b in proptest::collection::vec(any::<bool>(), 9)) {
            let g = ground(
                "v(1). v(2). v(3). #guess e(X,Y) :- v(X), v(Y). \
                 p(X,Y) :- e(X,Y). p(X,Z) :- p(X,Y), e(Y,Z).",
            );
            let s = g.strata().layers().iter().find(|l| l.contains("p")).unwrap().clone();
            let atoms: Vec<GroundAtom> = g.atoms().iter().filter(|x| x.predicate != "v").cloned().collect();
            let small: Interpretation = atoms.iter().zip(&a).filter(|(_, &on)| on).map(|(x, _)| x.clone()).collect();
            let big: Interpretation = atoms.iter().zip(a.iter().zip(&b)).filter(|(_, (&x, &y))| x || y).map(|(x, _)| x.clone()).collect();
            prop_assert!(tp_step(&g, &s, &small).is_subset(&tp_step(&g, &s, &big)));
        }
    }
}

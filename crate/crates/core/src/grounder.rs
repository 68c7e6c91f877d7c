//! Instantiation of a validated program over its active Herbrand universe.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use fixedbitset::FixedBitSet;

use crate::analysis::Strata;
use crate::ast::{Atom, CircumscriptionPolicy, Constant, Program, Rule, RuleKind, Term};
use crate::fixpoint;

/// A variable-free atom. The derived order (predicate, then arguments) is the
/// canonical order used for atom tables, models and rendering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Constant>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: Vec<Constant>) -> Self {
        GroundAtom {
            predicate: predicate.to_string(),
            args,
        }
    }

    /// Parses the rendered form `pred(c1,...,ck)` back into an atom.
    pub fn parse(text: &str) -> Option<GroundAtom> {
        let tokens = crate::parser::tokenize(text).ok()?;
        let mut it = tokens.into_iter();
        let head = it.next()?;
        if head.kind != crate::parser::TokenKind::Identifier {
            return None;
        }
        let mut atom = GroundAtom::new(&head.text, Vec::new());
        let Some(open) = it.next() else {
            return Some(atom);
        };
        if open.text != "(" {
            return None;
        }
        loop {
            let t = it.next()?;
            atom.args.push(match t.kind {
                crate::parser::TokenKind::Identifier => Constant::Sym(t.text),
                crate::parser::TokenKind::Integer => Constant::Int(t.text.parse().ok()?),
                _ => return None,
            });
            match it.next()?.text.as_str() {
                "," => continue,
                ")" => break,
                _ => return None,
            }
        }
        it.next().is_none().then_some(atom)
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Index into the atom table of a [`GroundProgram`]. Ids are assigned in
/// canonical atom order, so comparing ids compares atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub(crate) u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroundLiteral {
    pub atom: AtomId,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundRule {
    pub kind: RuleKind,
    pub head: Option<AtomId>,
    pub body: Vec<GroundLiteral>,
    /// Index of the source statement in [`Program::rules`].
    pub source: usize,
}

impl GroundRule {
    pub fn positive_body(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.body.iter().filter(|l| l.positive).map(|l| l.atom)
    }

    pub fn negative_body(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.body.iter().filter(|l| !l.positive).map(|l| l.atom)
    }
}

/// Per-stratum rule lists and positive-occurrence watch lists used by the
/// semi-naive evaluator.
#[derive(Debug, Clone, Default)]
pub(crate) struct EvalPlan {
    pub stratum_rules: Vec<Vec<usize>>,
    pub rule_stratum: Vec<usize>,
    pub watchers: Vec<Vec<usize>>,
    pub constraints: Vec<usize>,
    pub facts: FixedBitSet,
}

/// A variable-free program together with its decision-atom set.
#[derive(Debug, Clone)]
pub struct GroundProgram {
    universe: Vec<Constant>,
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
    rules: Vec<GroundRule>,
    decision_atoms: Vec<AtomId>,
    decision_pos: Vec<Option<usize>>,
    policy: CircumscriptionPolicy,
    strata: Strata,
    show: Option<BTreeSet<String>>,
    guess_predicates: BTreeSet<String>,
    edb_predicates: BTreeSet<String>,
    minimized_mask: FixedBitSet,
    fixed_mask: FixedBitSet,
    edb_mask: FixedBitSet,
    pub(crate) plan: EvalPlan,
}

impl PartialEq for GroundProgram {
    fn eq(&self, other: &Self) -> bool {
        self.universe == other.universe
            && self.atoms == other.atoms
            && self.rules == other.rules
            && self.decision_atoms == other.decision_atoms
            && self.policy == other.policy
            && self.strata == other.strata
            && self.show == other.show
    }
}

impl GroundProgram {
    pub fn universe(&self) -> &[Constant] {
        &self.universe
    }

    /// The atom table in canonical order.
    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.index()]
    }

    pub fn atom_id(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn rules(&self) -> &[GroundRule] {
        &self.rules
    }

    pub fn constraints(&self) -> impl Iterator<Item = (usize, &GroundRule)> {
        self.plan.constraints.iter().map(|&i| (i, &self.rules[i]))
    }

    /// Decision atoms in canonical order.
    pub fn decision_atoms(&self) -> &[AtomId] {
        &self.decision_atoms
    }

    /// Position of `id` in [`decision_atoms`](Self::decision_atoms).
    pub fn decision_index(&self, id: AtomId) -> Option<usize> {
        self.decision_pos[id.index()]
    }

    pub fn policy(&self) -> &CircumscriptionPolicy {
        &self.policy
    }

    pub fn strata(&self) -> &Strata {
        &self.strata
    }

    pub fn show(&self) -> Option<&BTreeSet<String>> {
        self.show.as_ref()
    }

    pub fn guess_predicates(&self) -> &BTreeSet<String> {
        &self.guess_predicates
    }

    pub fn edb_predicates(&self) -> &BTreeSet<String> {
        &self.edb_predicates
    }

    pub fn is_edb(&self, id: AtomId) -> bool {
        self.edb_mask.contains(id.index())
    }

    /// True iff `id` is the head of some ground fact.
    pub fn is_fact(&self, id: AtomId) -> bool {
        self.plan.facts.contains(id.index())
    }

    pub fn is_minimized(&self, id: AtomId) -> bool {
        self.minimized_mask.contains(id.index())
    }

    pub(crate) fn minimized_mask(&self) -> &FixedBitSet {
        &self.minimized_mask
    }

    pub(crate) fn fixed_mask(&self) -> &FixedBitSet {
        &self.fixed_mask
    }

    pub fn display_rule(&self, rule: &GroundRule) -> String {
        let body: Vec<String> = rule
            .body
            .iter()
            .map(|l| {
                let a = self.atom(l.atom);
                if l.positive {
                    a.to_string()
                } else {
                    format!("not {a}")
                }
            })
            .collect();
        match (rule.head, body.is_empty()) {
            (Some(h), true) => format!("{}.", self.atom(h)),
            (Some(h), false) => format!("{} :- {}.", self.atom(h), body.join(", ")),
            (None, _) => format!(":- {}.", body.join(", ")),
        }
    }
}

/// Constants occurring in the program, integers first (by value), then
/// identifiers.
pub fn herbrand_universe(program: &Program) -> BTreeSet<Constant> {
    program
        .rules()
        .iter()
        .flat_map(Rule::atoms)
        .flat_map(|a| a.args.iter())
        .filter_map(|t| match t {
            Term::Const(c) => Some(c.clone()),
            Term::Var(_) => None,
        })
        .collect()
}

/// Instances of the guess heads whose range body holds in the least model
/// computed with every guess predicate empty.
pub fn guess_domain(program: &Program) -> BTreeSet<GroundAtom> {
    let ground = ground_program(program);
    ground
        .decision_atoms()
        .iter()
        .map(|&id| ground.atom(id).clone())
        .collect()
}

#[derive(Debug, Clone)]
enum Slot {
    Const(Constant),
    Var(usize),
}

#[derive(Debug, Clone)]
struct Pattern {
    predicate: String,
    args: Vec<Slot>,
}

impl Pattern {
    fn compile(atom: &Atom, vars: &[&str]) -> Self {
        Pattern {
            predicate: atom.predicate.clone(),
            args: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => Slot::Const(c.clone()),
                    Term::Var(v) => Slot::Var(
                        vars.iter()
                            .position(|x| x == v)
                            .expect("variable collected"),
                    ),
                })
                .collect(),
        }
    }

    /// Number of leading variables that must be bound before this pattern is
    /// ground.
    fn ready_depth(&self) -> usize {
        self.args
            .iter()
            .filter_map(|s| match s {
                Slot::Var(i) => Some(i + 1),
                Slot::Const(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn ground(&self, binding: &[Constant]) -> GroundAtom {
        GroundAtom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|s| match s {
                    Slot::Const(c) => c.clone(),
                    Slot::Var(i) => binding[*i].clone(),
                })
                .collect(),
        }
    }
}

struct Instance {
    head: Option<GroundAtom>,
    body: Vec<(GroundAtom, bool)>,
}

/// Enumerates the substitutions of `rule` over `universe` in lexicographic
/// order (variables by first occurrence), dropping those that make a positive
/// EDB body atom absent from `edb_facts`. Filters are applied as soon as the
/// atom is fully bound, which yields the same instances as filtering after
/// full instantiation.
fn instantiate(
    rule: &Rule,
    universe: &[Constant],
    edb: &BTreeSet<String>,
    edb_facts: &HashSet<GroundAtom>,
) -> Vec<Instance> {
    let vars = rule.variables();
    let head = rule.head.as_ref().map(|h| Pattern::compile(h, &vars));
    let body: Vec<(Pattern, bool)> = rule
        .body
        .iter()
        .map(|l| (Pattern::compile(&l.atom, &vars), l.is_positive()))
        .collect();

    let mut checks: Vec<Vec<usize>> = vec![Vec::new(); vars.len() + 1];
    for (i, (pat, positive)) in body.iter().enumerate() {
        if *positive && edb.contains(&pat.predicate) {
            checks[pat.ready_depth()].push(i);
        }
    }

    let mut out = Vec::new();
    let mut binding: Vec<Constant> = Vec::with_capacity(vars.len());
    extend(
        &mut binding,
        vars.len(),
        universe,
        &body,
        &checks,
        edb_facts,
        &mut |b| {
            out.push(Instance {
                head: head.as_ref().map(|h| h.ground(b)),
                body: body.iter().map(|(p, pos)| (p.ground(b), *pos)).collect(),
            })
        },
    );
    out
}

fn extend(
    binding: &mut Vec<Constant>,
    nvars: usize,
    universe: &[Constant],
    body: &[(Pattern, bool)],
    checks: &[Vec<usize>],
    edb_facts: &HashSet<GroundAtom>,
    emit: &mut dyn FnMut(&[Constant]),
) {
    let depth = binding.len();
    if !checks[depth]
        .iter()
        .all(|&i| edb_facts.contains(&body[i].0.ground(binding)))
    {
        return;
    }
    if depth == nvars {
        emit(binding);
        return;
    }
    for c in universe {
        binding.push(c.clone());
        extend(binding, nvars, universe, body, checks, edb_facts, emit);
        binding.pop();
    }
}

/// Grounds every statement in source order, instances in substitution order.
pub fn ground_program(program: &Program) -> GroundProgram {
    let universe: Vec<Constant> = herbrand_universe(program).into_iter().collect();
    let edb = program.edb_predicates();
    let edb_facts: HashSet<GroundAtom> = program
        .facts()
        .filter_map(|r| r.head.as_ref())
        .filter(|h| edb.contains(&h.predicate))
        .map(|h| Pattern::compile(h, &[]).ground(&[]))
        .collect();

    let mut pending: Vec<(RuleKind, usize, Instance)> = Vec::new();
    let mut guess_instances: Vec<Instance> = Vec::new();
    for (source, rule) in program.rules().iter().enumerate() {
        let instances = instantiate(rule, &universe, edb, &edb_facts);
        if rule.kind == RuleKind::Guess {
            guess_instances.extend(instances);
        } else {
            pending.extend(instances.into_iter().map(|i| (rule.kind, source, i)));
        }
    }

    let mut table: BTreeSet<GroundAtom> = BTreeSet::new();
    for inst in pending
        .iter()
        .map(|(_, _, i)| i)
        .chain(guess_instances.iter())
    {
        table.extend(inst.head.iter().cloned());
        table.extend(inst.body.iter().map(|(a, _)| a.clone()));
    }
    let atoms: Vec<GroundAtom> = table.into_iter().collect();
    let index: HashMap<GroundAtom, AtomId> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), AtomId(i as u32)))
        .collect();
    let lower = |inst: &Instance| -> (Option<AtomId>, Vec<GroundLiteral>) {
        (
            inst.head.as_ref().map(|h| index[h]),
            inst.body
                .iter()
                .map(|(a, positive)| GroundLiteral {
                    atom: index[a],
                    positive: *positive,
                })
                .collect(),
        )
    };

    let rules: Vec<GroundRule> = pending
        .iter()
        .map(|(kind, source, inst)| {
            let (head, body) = lower(inst);
            GroundRule {
                kind: *kind,
                head,
                body,
                source: *source,
            }
        })
        .collect();
    let guesses: Vec<(Option<AtomId>, Vec<GroundLiteral>)> =
        guess_instances.iter().map(lower).collect();

    let n = atoms.len();
    let mask = |pred: &dyn Fn(&str) -> bool| -> FixedBitSet {
        let mut m = FixedBitSet::with_capacity(n);
        for (i, a) in atoms.iter().enumerate() {
            if pred(&a.predicate) {
                m.insert(i);
            }
        }
        m
    };
    let policy = program.policy().clone();
    let minimized_mask = mask(&|p| policy.minimized.contains(p));
    let fixed_mask = mask(&|p| policy.fixed.contains(p));
    let edb_mask = mask(&|p| edb.contains(p));

    let strata = program.strata().clone();
    let plan = build_plan(&rules, &atoms, &strata, n);

    let mut ground = GroundProgram {
        universe,
        atoms,
        index,
        rules,
        decision_atoms: Vec::new(),
        decision_pos: vec![None; n],
        policy,
        strata,
        show: program.show().cloned(),
        guess_predicates: program.guess_predicates().clone(),
        edb_predicates: edb.clone(),
        minimized_mask,
        fixed_mask,
        edb_mask,
        plan,
    };

    let base = fixpoint::eval(&ground, &FixedBitSet::with_capacity(n));
    let mut decisions: BTreeSet<AtomId> = BTreeSet::new();
    for (head, body) in guesses {
        if body
            .iter()
            .all(|l| base.contains(l.atom.index()) == l.positive)
        {
            decisions.extend(head);
        }
    }
    ground.decision_atoms = decisions.into_iter().collect();
    for (pos, id) in ground.decision_atoms.iter().enumerate() {
        ground.decision_pos[id.index()] = Some(pos);
    }
    ground
}

fn build_plan(rules: &[GroundRule], atoms: &[GroundAtom], strata: &Strata, n: usize) -> EvalPlan {
    let mut plan = EvalPlan {
        stratum_rules: vec![Vec::new(); strata.len()],
        rule_stratum: vec![usize::MAX; rules.len()],
        watchers: vec![Vec::new(); n],
        constraints: Vec::new(),
        facts: FixedBitSet::with_capacity(n),
    };
    for (i, rule) in rules.iter().enumerate() {
        let Some(head) = rule.head else {
            plan.constraints.push(i);
            continue;
        };
        if rule.kind == RuleKind::Fact {
            plan.facts.insert(head.index());
        }
        let s = strata
            .index_of(&atoms[head.index()].predicate)
            .expect("every predicate is stratified");
        plan.rule_stratum[i] = s;
        plan.stratum_rules[s].push(i);
        for a in rule.positive_body() {
            if plan.watchers[a.index()].last() != Some(&i) {
                plan.watchers[a.index()].push(i);
            }
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn sym(s: &str) -> Constant {
        Constant::Sym(s.into())
    }

    fn atom(text: &str) -> GroundAtom {
        GroundAtom::parse(text).unwrap()
    }

    #[test]
    fn universe_examples() {
        let p = parse_program("edge(a,b). edge(b,c).").unwrap();
        assert_eq!(
            herbrand_universe(&p).into_iter().collect::<Vec<_>>(),
            vec![sym("a"), sym("b"), sym("c")]
        );
        let p = parse_program("p. q :- p.").unwrap();
        assert!(herbrand_universe(&p).is_empty());
        let p = parse_program("n(10). n(2). n(1). n(x).").unwrap();
        assert_eq!(
            herbrand_universe(&p).into_iter().collect::<Vec<_>>(),
            vec![
                Constant::Int(1),
                Constant::Int(2),
                Constant::Int(10),
                sym("x")
            ]
        );
    }

    #[test]
    fn grounding_with_relevance_filter() {
        let p = parse_program("p(X) :- q(X). q(a). q(b).").unwrap();
        let g = ground_program(&p);
        let rendered: Vec<String> = g
            .rules()
            .iter()
            .filter(|r| r.kind == RuleKind::Rule)
            .map(|r| g.display_rule(r))
            .collect();
        assert_eq!(rendered, ["p(a) :- q(a).", "p(b) :- q(b)."]);

        let p = parse_program("p(X) :- q(X). r(a). q(z) :- r(z).").unwrap();
        let g = ground_program(&p);
        // q is derived, so p's instances are not filtered; r(z) is EDB and absent.
        let first: Vec<String> = g
            .rules()
            .iter()
            .filter(|r| r.source == 0)
            .map(|r| g.display_rule(r))
            .collect();
        assert_eq!(first, ["p(a) :- q(a).", "p(z) :- q(z)."]);
        assert!(g.rules().iter().all(|r| r.source != 2));

        let p = parse_program("p(X) :- q(X). r(a).").unwrap();
        let g = ground_program(&p);
        assert!(g.rules().iter().all(|r| r.source != 0));
    }

    #[test]
    fn guess_domain_examples() {
        let p = parse_program("#guess pick(X) :- item(X). item(a). item(b).").unwrap();
        assert_eq!(
            guess_domain(&p),
            BTreeSet::from([atom("pick(a)"), atom("pick(b)")])
        );

        let p = parse_program("#guess flag.").unwrap();
        assert_eq!(guess_domain(&p), BTreeSet::from([atom("flag")]));

        let p =
            parse_program("#guess pick(X) :- item(X), not banned(X). item(a). item(b). banned(b).")
                .unwrap();
        assert_eq!(guess_domain(&p), BTreeSet::from([atom("pick(a)")]));
    }

    #[test]
    fn guess_range_over_derived_predicate() {
        let p = parse_program(
            "e(a,b). e(b,c). r(X,Y) :- e(X,Y). r(X,Z) :- e(X,Y), r(Y,Z). #guess cut(X,Y) :- r(X,Y).",
        )
        .unwrap();
        assert_eq!(guess_domain(&p).len(), 3);
    }

    #[test]
    fn ids_follow_canonical_order() {
        let p = parse_program("z(b). z(a). a(10). a(2).").unwrap();
        let g = ground_program(&p);
        let mut sorted = g.atoms().to_vec();
        sorted.sort();
        assert_eq!(sorted, g.atoms());
        assert_eq!(g.atoms()[0], GroundAtom::new("a", vec![Constant::Int(2)]));
    }

    #[test]
    fn ground_atom_parse_roundtrip() {
        for text in ["p", "p(a)", "q(1,b,30)"] {
            assert_eq!(atom(text).to_string(), text);
        }
        assert!(GroundAtom::parse("p(X)").is_none());
        assert!(GroundAtom::parse("p(a").is_none());
    }
}

//! Test-side reference semantics and random program generators.
//!
//! The reference evaluator works on the non-ground rules directly, matching
//! substitutions against the current fact set. It shares no code with the
//! grounder, the fixpoint module or the solvers.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use sky_core::ast::{Atom, Constant, Literal, Polarity, RuleKind, Term};
use sky_core::{GroundAtom, Program, Rule};

pub type Facts = BTreeSet<GroundAtom>;
type Subst = BTreeMap<String, Constant>;

fn instantiate(atom: &Atom, s: &Subst) -> Option<GroundAtom> {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Some(c.clone()),
            Term::Var(v) => s.get(v).cloned(),
        })
        .collect::<Option<Vec<_>>>()?;
    Some(GroundAtom::new(&atom.predicate, args))
}

fn unify(atom: &Atom, fact: &GroundAtom, s: &Subst) -> Option<Subst> {
    if atom.predicate != fact.predicate || atom.args.len() != fact.args.len() {
        return None;
    }
    let mut s = s.clone();
    for (t, c) in atom.args.iter().zip(&fact.args) {
        match t {
            Term::Const(k) if k != c => return None,
            Term::Const(_) => {}
            Term::Var(v) => match s.get(v) {
                Some(bound) if bound != c => return None,
                Some(_) => {}
                None => {
                    s.insert(v.clone(), c.clone());
                }
            },
        }
    }
    Some(s)
}

/// Every substitution that makes `body` true in `facts`. Positive literals
/// are joined first; negative ones are checked once everything is bound.
pub fn matches(body: &[Literal], facts: &Facts) -> Vec<Subst> {
    let pos: Vec<&Atom> = body
        .iter()
        .filter(|l| l.polarity == Polarity::Positive)
        .map(|l| &l.atom)
        .collect();
    let mut subs = vec![Subst::new()];
    for atom in pos {
        let mut next = Vec::new();
        for s in &subs {
            for f in facts {
                if let Some(s2) = unify(atom, f, s) {
                    next.push(s2);
                }
            }
        }
        subs = next;
    }
    subs.into_iter()
        .filter(|s| {
            body.iter()
                .filter(|l| l.polarity == Polarity::Negated)
                .all(|l| !facts.contains(&instantiate(&l.atom, s).expect("safe rule")))
        })
        .collect()
}

/// Stratum level per predicate, computed by relaxation. Guess predicates are
/// inputs and sit at level 0.
fn levels(program: &Program) -> BTreeMap<String, usize> {
    let mut level: BTreeMap<String, usize> = BTreeMap::new();
    for r in program.rules() {
        for a in r.atoms() {
            level.entry(a.predicate.clone()).or_insert(0);
        }
    }
    loop {
        let mut changed = false;
        for r in program.rules() {
            if r.kind != RuleKind::Rule {
                continue;
            }
            let head = &r.head.as_ref().unwrap().predicate;
            let need = r
                .body
                .iter()
                .map(|l| level[&l.atom.predicate] + usize::from(l.polarity == Polarity::Negated))
                .max()
                .unwrap_or(0);
            if level[head] < need {
                level.insert(head.clone(), need);
                changed = true;
            }
        }
        if !changed {
            return level;
        }
    }
}

/// Least model of the program with the guess atoms `guesses`, by naive
/// iteration stratum by stratum.
pub fn reference_model(program: &Program, guesses: &Facts) -> Facts {
    let level = levels(program);
    let mut facts: Facts = guesses.clone();
    for r in program.facts() {
        facts.insert(instantiate(r.head.as_ref().unwrap(), &Subst::new()).unwrap());
    }
    let top = level.values().copied().max().unwrap_or(0);
    for l in 0..=top {
        let rules: Vec<&Rule> = program
            .rules()
            .iter()
            .filter(|r| r.kind == RuleKind::Rule && level[&r.head.as_ref().unwrap().predicate] == l)
            .collect();
        loop {
            let mut new = Vec::new();
            for r in &rules {
                for s in matches(&r.body, &facts) {
                    let h = instantiate(r.head.as_ref().unwrap(), &s).expect("safe head");
                    if !facts.contains(&h) {
                        new.push(h);
                    }
                }
            }
            if new.is_empty() {
                break;
            }
            facts.extend(new);
        }
    }
    facts
}

/// Guess heads whose range holds when nothing is guessed.
pub fn reference_decisions(program: &Program) -> Facts {
    let base = reference_model(program, &Facts::new());
    let mut out = Facts::new();
    for r in program.guesses() {
        for s in matches(&r.body, &base) {
            out.insert(instantiate(r.head.as_ref().unwrap(), &s).unwrap());
        }
    }
    out
}

/// Independent acceptance check for a candidate model.
pub fn reference_is_model(program: &Program, candidate: &Facts) -> Result<(), String> {
    let decisions = reference_decisions(program);
    let guesses: Facts = candidate
        .iter()
        .filter(|a| program.guess_predicates().contains(&a.predicate))
        .cloned()
        .collect();
    if let Some(a) = guesses.iter().find(|a| !decisions.contains(a)) {
        return Err(format!("{a} is not a decision atom"));
    }
    let model = reference_model(program, &guesses);
    if &model != candidate {
        return Err("candidate is not the least model of its guesses".into());
    }
    for c in program.constraints() {
        if !matches(&c.body, &model).is_empty() {
            return Err(format!("violates {c}"));
        }
    }
    Ok(())
}

pub fn project(m: &Facts, preds: &BTreeSet<String>) -> Facts {
    m.iter()
        .filter(|a| preds.contains(&a.predicate))
        .cloned()
        .collect()
}

/// `a` strictly dominates `b` under the program's policy.
pub fn dominates(program: &Program, a: &Facts, b: &Facts) -> bool {
    let p = program.policy();
    if project(a, &p.fixed) != project(b, &p.fixed) {
        return false;
    }
    let (pa, pb) = (project(a, &p.minimized), project(b, &p.minimized));
    pa.is_subset(&pb) && pa != pb
}

pub fn is_antichain(program: &Program, models: &[Facts]) -> bool {
    models
        .iter()
        .all(|a| models.iter().all(|b| !dominates(program, a, b)))
}

/// Every accepted candidate, by brute force over the reference decision atoms.
pub fn reference_accepted_models(program: &Program) -> Vec<Facts> {
    let decisions: Vec<GroundAtom> = reference_decisions(program).into_iter().collect();
    assert!(
        decisions.len() <= 16,
        "reference brute force is for small programs"
    );
    let mut accepted = Vec::new();
    for mask in 0u32..(1 << decisions.len()) {
        let guesses: Facts = decisions
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, a)| a.clone())
            .collect();
        let model = reference_model(program, &guesses);
        if program
            .constraints()
            .all(|c| matches(&c.body, &model).is_empty())
        {
            accepted.push(model);
        }
    }
    accepted
}

/// All minimal models by brute force over the reference decision atoms.
pub fn reference_minimal_models(program: &Program) -> BTreeSet<Facts> {
    let accepted = reference_accepted_models(program);
    accepted
        .iter()
        .filter(|m| !accepted.iter().any(|o| dominates(program, o, m)))
        .cloned()
        .collect()
}

pub fn facts_of(models: &sky_core::ModelSet) -> Vec<Facts> {
    models.iter().map(|m| m.atoms().clone()).collect()
}

// ---------------------------------------------------------------------------
// generators

const CONSTANTS: [&str; 4] = ["a", "b", "c", "d"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

fn term<R: Rng>(rng: &mut R, consts: &[&str], vars: &[&str]) -> String {
    if !vars.is_empty() && rng.gen_bool(0.8) {
        vars.choose(rng).unwrap().to_string()
    } else {
        consts.choose(rng).unwrap().to_string()
    }
}

fn atom_text(pred: &str, args: &[String]) -> String {
    if args.is_empty() {
        pred.to_string()
    } else {
        format!("{pred}({})", args.join(","))
    }
}

fn vars_in(args: &[String]) -> Vec<String> {
    args.iter()
        .filter(|a| a.starts_with(char::is_uppercase))
        .cloned()
        .collect()
}

/// Builds a safe body: `pos` positive literals over `pos_preds`, then up to
/// `neg` negated literals over `neg_preds` using only bound variables.
/// Returns the literals and the bound variables.
fn safe_body<R: Rng>(
    rng: &mut R,
    consts: &[&str],
    pos_preds: &[(String, usize)],
    neg_preds: &[(String, usize)],
    pos: usize,
    neg: usize,
) -> (Vec<String>, Vec<String>) {
    let mut lits = Vec::new();
    let mut bound: BTreeSet<String> = BTreeSet::new();
    for _ in 0..pos {
        let (p, k) = pos_preds.choose(rng).unwrap();
        let args: Vec<String> = (0..*k).map(|_| term(rng, consts, &VARS)).collect();
        bound.extend(vars_in(&args));
        lits.push(atom_text(p, &args));
    }
    let bound: Vec<String> = bound.into_iter().collect();
    let bound_refs: Vec<&str> = bound.iter().map(String::as_str).collect();
    if !neg_preds.is_empty() {
        for _ in 0..neg {
            let (p, k) = neg_preds.choose(rng).unwrap();
            let args: Vec<String> = (0..*k).map(|_| term(rng, consts, &bound_refs)).collect();
            lits.push(format!("not {}", atom_text(p, &args)));
        }
    }
    (lits, bound)
}

fn facts_text<R: Rng>(
    rng: &mut R,
    consts: &[&str],
    edb: &[(String, usize)],
    n: usize,
) -> Vec<String> {
    (0..n)
        .map(|_| {
            let (p, k) = edb.choose(rng).unwrap();
            let args: Vec<String> = (0..*k)
                .map(|_| consts.choose(rng).unwrap().to_string())
                .collect();
            format!("{}.", atom_text(p, &args))
        })
        .collect()
}

/// A safe, stratified, guess-free program over at most four constants with
/// at most eight rules besides its facts. IDB predicate `pI` may depend
/// positively on `pJ` for J ≤ I and negatively only for J < I.
pub fn random_stratified_program<R: Rng>(rng: &mut R) -> String {
    let consts = &CONSTANTS[..rng.gen_range(1..=4)];
    let edb: Vec<(String, usize)> = vec![("e".into(), 2), ("u".into(), 1)];
    let idb: Vec<(String, usize)> = (0..4)
        .map(|i| (format!("p{i}"), rng.gen_range(0..=2)))
        .collect();
    let nfacts = rng.gen_range(1..=6);
    let mut lines = facts_text(rng, consts, &edb, nfacts);
    for _ in 0..rng.gen_range(1..=8) {
        let i = rng.gen_range(0..idb.len());
        let pos_preds: Vec<_> = edb.iter().chain(&idb[..=i]).cloned().collect();
        let neg_preds: Vec<_> = edb.iter().chain(&idb[..i]).cloned().collect();
        let npos = rng.gen_range(1..=3);
        let nneg = rng.gen_range(0..=1);
        let (body, bound) = safe_body(rng, consts, &pos_preds, &neg_preds, npos, nneg);
        let bound_refs: Vec<&str> = bound.iter().map(String::as_str).collect();
        let (h, k) = &idb[i];
        let args: Vec<String> = (0..*k).map(|_| term(rng, consts, &bound_refs)).collect();
        lines.push(format!("{} :- {}.", atom_text(h, &args), body.join(", ")));
    }
    lines.join("\n")
}

/// A program with guesses over a small domain plus derived predicates,
/// constraints and sometimes an explicit policy.
pub fn random_guess_program<R: Rng>(rng: &mut R) -> String {
    let consts = &CONSTANTS[..rng.gen_range(2..=4)];
    let mut lines: Vec<String> = consts.iter().map(|c| format!("d({c}).")).collect();
    for _ in 0..rng.gen_range(1..=6) {
        let a = consts.choose(rng).unwrap();
        let b = consts.choose(rng).unwrap();
        lines.push(format!("e({a},{b})."));
    }
    lines.push("e(zz,zz).".into());
    lines.push("#guess g(X) :- d(X).".into());
    let with_h = rng.gen_bool(0.6);
    if with_h {
        lines.push("#guess h(X,Y) :- e(X,Y).".into());
    }
    let edb: Vec<(String, usize)> = vec![("d".into(), 1), ("e".into(), 2)];
    let mut guess: Vec<(String, usize)> = vec![("g".into(), 1)];
    if with_h {
        guess.push(("h".into(), 2));
    }
    let derived: Vec<(String, usize)> = vec![("r".into(), 1), ("s".into(), 1)];

    let base: Vec<_> = edb.iter().chain(&guess).cloned().collect();
    // r and s start from a guess literal; s may also negate r.
    for (i, (h, _)) in derived.iter().enumerate() {
        for _ in 0..rng.gen_range(1..=2) {
            let neg: Vec<_> = base.iter().chain(&derived[..i]).cloned().collect();
            let (npos, nneg) = (rng.gen_range(1..=2), rng.gen_range(0..=1));
            let (mut body, mut bound) = safe_body(rng, consts, &guess, &neg, 1, nneg);
            let (extra, more) = safe_body(rng, consts, &base, &[], npos - 1, 0);
            body.extend(extra);
            bound.extend(more);
            let bound_refs: Vec<&str> = bound.iter().map(String::as_str).collect();
            let x = term(rng, consts, &bound_refs);
            lines.push(format!("{h}({x}) :- {}.", body.join(", ")));
        }
    }
    let all: Vec<_> = base.iter().chain(&derived).cloned().collect();
    let intensional: Vec<_> = guess.iter().chain(&derived).cloned().collect();
    if rng.gen_bool(0.4) {
        lines.push(":- e(X,Y), d(X), d(Y), not g(X), not g(Y).".into());
    }
    for _ in 0..rng.gen_range(0..=3) {
        let (npos, nneg) = (rng.gen_range(1..=2), usize::from(rng.gen_bool(0.4)));
        // constraints over EDB atoms alone would reject every candidate
        let (body, _) = safe_body(rng, consts, &intensional, &all, npos, nneg);
        lines.push(format!(":- {}.", body.join(", ")));
    }
    match rng.gen_range(0..6) {
        0 => lines.push("#minimize g.".into()),
        1 => lines.push("#minimize g, r.".into()),
        2 => lines.push("#fix r.".into()),
        3 if with_h => lines.push("#fix h.".into()),
        _ => {}
    }
    lines.join("\n")
}

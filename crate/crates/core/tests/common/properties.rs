//! Property checkers shared by the proptest suite and the acceptance
//! harness. Each returns the violations it found.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svc_compose::agents::manager::{manager_refine, Competences, KnowledgeBase};
use svc_compose::conjecture::StepRef;
use svc_compose::planner::validate_plan;
use svc_compose::{Conjecture, Fragment, MatchDegree, Ontology, Problem, Term};

use super::{random_problem, BOUND};

pub const LINEARIZATION_LIMIT: usize = 6;

pub fn concept(i: usize) -> String {
    format!("k{i}")
}

/// `n` concepts in one partition; each edge `(child, parent)` is kept only
/// when `parent < child`, which keeps the graph acyclic.
pub fn dag_ontology(n: usize, edges: &[(usize, usize)]) -> (Ontology, Vec<(usize, usize)>) {
    let mut o = Ontology::new();
    o.add_partition("p");
    for i in 0..n {
        o.add_concept(&concept(i), "p").unwrap();
    }
    let mut kept = Vec::new();
    for &(c, p) in edges {
        let (c, p) = (c % n, p % n);
        if p < c {
            o.add_subsumption(&concept(c), &concept(p)).unwrap();
            kept.push((c, p));
        }
    }
    (o, kept)
}

fn reachable(n: usize, edges: &[(usize, usize)], from: usize, to: usize) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        if x == to {
            return true;
        }
        if !std::mem::replace(&mut seen[x], true) {
            stack.extend(edges.iter().filter(|e| e.0 == x).map(|e| e.1));
        }
    }
    false
}

/// Reflexivity, PlugIn/Subsume duality, chaining implies subsumption, and
/// subsumption against a plain graph search, for the pair `(a, b)`.
pub fn match_law_violations(n: usize, edges: &[(usize, usize)], a: usize, b: usize) -> Vec<String> {
    let (o, kept) = dag_ontology(n, edges);
    let (a, b) = (a % n, b % n);
    let (ca, cb) = (concept(a), concept(b));
    let mut bad = Vec::new();
    if o.match_degree(&ca, &ca).unwrap() != MatchDegree::Exact {
        bad.push(format!("{ca} does not match itself exactly"));
    }
    let ab = o.match_degree(&ca, &cb).unwrap();
    let ba = o.match_degree(&cb, &ca).unwrap();
    if (ab == MatchDegree::PlugIn) != (ba == MatchDegree::Subsume) {
        bad.push(format!("degree({ca},{cb})={ab:?} but degree({cb},{ca})={ba:?}"));
    }
    let sub = o.is_subsumed(&ca, &cb).unwrap();
    if o.compatible_for_chaining(&ca, &cb).unwrap() && !sub {
        bad.push(format!("{ca} chains into {cb} without being subsumed"));
    }
    if sub != reachable(n, &kept, a, b) {
        bad.push(format!("is_subsumed({ca},{cb})={sub} disagrees with graph search"));
    }
    bad
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WalkStats {
    pub conjectures: usize,
    pub solutions: usize,
    pub linearizations: usize,
}

fn lifted_step(rng: &mut ChaCha8Rng, p: &Problem, pred: &str) -> Option<Fragment> {
    let ops: Vec<_> = p
        .domain
        .operators
        .iter()
        .filter(|o| o.add.iter().any(|a| a.pred == pred))
        .collect();
    let op = ops.choose(rng)?;
    let args: Vec<Term> = op.params.iter().map(|v| Term::Var(v.clone())).collect();
    Some(Fragment {
        steps: vec![op.instantiate(&args).ok()?],
        ..Fragment::default()
    })
}

fn ground_step(rng: &mut ChaCha8Rng, p: &Problem, c: &Conjecture, h: &svc_compose::Hypothesis) -> Option<Fragment> {
    let target = c.bindings().resolve(&h.atom);
    let actions: Vec<_> = p
        .ground_actions()
        .into_iter()
        .filter(|a| a.add.contains(&target))
        .collect();
    let a = actions.choose(rng)?.clone();
    Some(Fragment {
        steps: vec![a],
        links: vec![(StepRef::New(0), target, StepRef::Existing(h.consumer))],
        ..Fragment::default()
    })
}

/// One random refinement sequence. Moves mix manager proposals, lifted and
/// ground step insertion, direct links and arbitrary orderings, with flaw
/// resolution applied only some of the time. Every conjecture reached that
/// passes `is_solution` has all its linearizations validated.
pub fn refinement_walk(seed: u64, stats: &mut WalkStats) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_problem(&mut rng, true);
    let competences = Competences {
        operators: p.domain.operators.clone(),
        methods: vec![],
        constants: p.domain.constants.clone(),
    };
    let kb = KnowledgeBase::new(p.initial.iter().cloned()).unwrap();
    let mut c = Conjecture::initial(&p);
    let mut bad = Vec::new();
    for _ in 0..10 {
        let hyps = c.hypotheses();
        let next = match hyps.choose(&mut rng) {
            None => c.resolve_flaws(),
            Some(h) => match rng.gen_range(0..6) {
                0 | 1 => {
                    let props = manager_refine(&c, &competences, &kb, BOUND);
                    props.choose(&mut rng).and_then(|x| x.apply(&c).ok())
                }
                2 => lifted_step(&mut rng, &p, &h.atom.pred).and_then(|f| c.graft(std::slice::from_ref(h), &f).ok()),
                3 => ground_step(&mut rng, &p, &c, h).and_then(|f| c.graft(&[], &f).ok()),
                4 => {
                    let producers: Vec<_> = c.steps().map(|(id, _)| id).collect();
                    let from = *producers.choose(&mut rng).unwrap();
                    c.add_causal_link(from, &h.atom, h.consumer).ok()
                }
                _ => {
                    let real: Vec<_> = c.real_steps().collect();
                    match (real.choose(&mut rng), real.choose(&mut rng)) {
                        (Some(&a), Some(&b)) if a != b => c.add_order(a, b).ok(),
                        _ => None,
                    }
                }
            },
        };
        let Some(mut next) = next else { continue };
        if rng.gen_bool(0.7) {
            if let Some(r) = next.resolve_flaws() {
                next = r;
            }
        }
        c = next;
        stats.conjectures += 1;
        if !c.is_solution() {
            continue;
        }
        stats.solutions += 1;
        if c.real_steps().count() <= LINEARIZATION_LIMIT {
            let mut seen = BTreeSet::new();
            c.for_each_linearization(|plan| {
                stats.linearizations += 1;
                if !validate_plan(&p, &plan) && seen.insert(plan.lines()) {
                    bad.push(format!("seed {seed}: invalid linearization {:?}", plan.lines()));
                }
                true
            });
        } else {
            match c.linearize() {
                Ok(plan) if validate_plan(&p, &plan) => {}
                _ => bad.push(format!("seed {seed}: invalid linearization of a large solution")),
            }
        }
        break;
    }
    bad
}

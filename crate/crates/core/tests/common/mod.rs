//! Seeded generators and helpers shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use svc_compose::agents::composer::{composer_run, ComposerConfig};
use svc_compose::agents::manager::{Competences, KnowledgeBase, ManagerAgent};
use svc_compose::agents::Outcome;
use svc_compose::logic::{Condition, Term};
use svc_compose::runtime::Bus;
use svc_compose::service_model::{AtomicProcess, Process};
use svc_compose::{Atom, Domain, Operator, Problem, ServiceDescription, State};

pub mod properties;

pub const BOUND: usize = 6;

pub fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn scenario_path(name: &str) -> PathBuf {
    manifest_path(&format!("scenarios/{name}"))
}

/// A small random STRIPS domain: up to three constants, a handful of
/// predicates of arity at most two and two to four operators.
#[derive(Debug, Clone)]
pub struct RandomDomain {
    pub constants: Vec<String>,
    pub predicates: Vec<(String, usize)>,
    pub operators: Vec<Operator>,
}

impl RandomDomain {
    pub fn domain(&self) -> Domain {
        Domain::new(self.operators.clone(), vec![], self.constants.iter().cloned().collect()).unwrap()
    }

    /// Every ground atom over the declared predicates.
    pub fn ground_atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for (p, arity) in &self.predicates {
            for args in tuples(&self.constants, *arity) {
                out.push(Atom::new(p.clone(), args.into_iter().map(Term::Const).collect()));
            }
        }
        out
    }

    pub fn ground_action_count(&self) -> usize {
        self.operators
            .iter()
            .map(|o| self.constants.len().pow(o.params.len() as u32))
            .sum()
    }
}

fn tuples(items: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                items.iter().map(move |i| {
                    let mut t = t.clone();
                    t.push(i.clone());
                    t
                })
            })
            .collect();
    }
    out
}

fn random_atom(rng: &mut ChaCha8Rng, preds: &[(String, usize)], params: &[String]) -> Option<Atom> {
    let candidates: Vec<&(String, usize)> = preds.iter().filter(|(_, a)| *a == 0 || !params.is_empty()).collect();
    let (p, arity) = candidates.choose(rng)?;
    let args = (0..*arity)
        .map(|_| Term::Var(params.choose(rng).expect("non-empty").clone()))
        .collect();
    Some(Atom::new(p.clone(), args))
}

fn random_atoms(rng: &mut ChaCha8Rng, preds: &[(String, usize)], params: &[String], n: usize) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::new();
    for _ in 0..n {
        if let Some(a) = random_atom(rng, preds, params) {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

pub fn random_domain(rng: &mut ChaCha8Rng, negative_preconditions: bool) -> RandomDomain {
    loop {
        let constants: Vec<String> = (0..rng.gen_range(2..=3)).map(|i| format!("c{i}")).collect();
        let predicates: Vec<(String, usize)> = (0..rng.gen_range(3..=5))
            .map(|i| (format!("p{i}"), rng.gen_range(0..=2)))
            .collect();
        let mut operators = Vec::new();
        for i in 0..rng.gen_range(2..=4) {
            let params: Vec<String> = ["?x", "?y"][..rng.gen_range(0..=2)]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let n_pre = rng.gen_range(0..=2);
            let pre = random_atoms(rng, &predicates, &params, n_pre);
            let neg = if negative_preconditions && rng.gen_bool(0.25) {
                random_atoms(rng, &predicates, &params, 1)
                    .into_iter()
                    .filter(|a| !pre.contains(a))
                    .collect()
            } else {
                vec![]
            };
            let n_add = rng.gen_range(1..=2);
            let add = random_atoms(rng, &predicates, &params, n_add);
            let del: Vec<Atom> = if rng.gen_bool(0.5) && !pre.is_empty() {
                vec![pre.choose(rng).unwrap().clone()]
                    .into_iter()
                    .filter(|a| !add.contains(a))
                    .collect()
            } else {
                vec![]
            };
            if let Ok(op) = Operator::new(format!("op{i}"), params, pre, neg, add, del) {
                operators.push(op);
            }
        }
        let d = RandomDomain {
            constants,
            predicates,
            operators,
        };
        if d.operators.len() >= 2 && d.ground_action_count() <= 64 {
            return d;
        }
    }
}

/// A random problem whose goal atoms are all false initially.
pub fn random_problem(rng: &mut ChaCha8Rng, negative_preconditions: bool) -> Problem {
    loop {
        let d = random_domain(rng, negative_preconditions);
        let declared: BTreeSet<String> = d.domain().predicates().into_iter().map(str::to_string).collect();
        let atoms: Vec<Atom> = d
            .ground_atoms()
            .into_iter()
            .filter(|a| declared.contains(&a.pred))
            .collect();
        let s0: Vec<Atom> = atoms.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
        let open: Vec<&Atom> = atoms.iter().filter(|a| !s0.contains(a)).collect();
        if open.is_empty() {
            continue;
        }
        let n = rng.gen_range(1..=2).min(open.len());
        let goal: Vec<Atom> = open.choose_multiple(rng, n).map(|a| (*a).clone()).collect();
        if let Ok(p) = Problem::new(State::new(s0).unwrap(), goal, d.domain()) {
            return p;
        }
    }
}

/// A request whose entry process carries `s0` as preconditions and `goal`
/// as effects.
pub fn goal_description(s0: &State, goal: &[Atom]) -> ServiceDescription {
    let entry = AtomicProcess {
        name: "Request".into(),
        preconditions: s0.iter().cloned().map(Condition::pos).collect(),
        add_effects: goal.iter().cloned().map(Condition::pos).collect(),
        ..AtomicProcess::default()
    };
    ServiceDescription {
        service: "request".into(),
        owner_subontology: "domain".into(),
        described_by: "Request".into(),
        processes: BTreeMap::from([("Request".to_string(), Process::Atomic(entry))]),
    }
}

/// Composes over one manager that holds the whole domain and knows `s0`.
pub fn compose_single(p: &Problem, seed: u64, max_cycles: usize) -> Outcome {
    let competences = Competences {
        operators: p.domain.operators.clone(),
        methods: vec![],
        constants: p.domain.constants.clone(),
    };
    let kb = KnowledgeBase::new(p.initial.iter().cloned()).unwrap();
    let manager = ManagerAgent::new("solo", "domain", competences, kb).with_bound(BOUND);
    let mut bus = Bus::new(vec![manager], seed);
    let config = ComposerConfig {
        max_cycles,
        max_steps: Some(BOUND),
    };
    let goal: Vec<Atom> = p.goal.iter().cloned().collect();
    composer_run(
        &goal_description(&p.initial, &goal),
        &["solo".to_string()],
        &mut bus,
        config,
    )
    .unwrap()
}

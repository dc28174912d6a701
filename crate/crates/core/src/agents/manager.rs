//! Manager agents: each wraps one service, a private knowledge base and the
//! operators translated from the service description.
//!
//! Refinement looks at the open hypotheses of a conjecture, consumer by
//! consumer. The manager plans from a local view (initial facts, its own
//! kb, and effects of steps that may precede the consumer) towards the
//! hypotheses it can address. Each plan becomes a totally ordered fragment
//! whose preconditions are linked to their latest producer. When no plan
//! exists, the manager plans again while assuming the predicates it cannot
//! produce itself; those preconditions stay open as new hypotheses.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::request::request_problem;
use crate::agents::{AgentError, AgentId, FailureReport, Outcome};
use crate::conjecture::{Conjecture, ConjectureError, Fragment, Hypothesis, StepId, StepRef, GOAL, INIT};
use crate::logic::Atom;
use crate::planner::{solve, solve_over, Action, Domain, Operator, Plan, PlannerError, Problem, State};
use crate::runtime::bus::{DispatchBody, Envelope, Kind, ProposalsBody, RefineBody, ResultBody};
use crate::service_model::{translate_to_domain, Method, ServiceDescription, ServiceError};

/// Search depth used when a manager is built without an explicit bound.
pub const DEFAULT_BOUND: usize = 6;

/// Ground facts private to one manager.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeBase {
    pub facts: State,
}

impl KnowledgeBase {
    pub fn new(facts: impl IntoIterator<Item = Atom>) -> Result<Self, PlannerError> {
        Ok(KnowledgeBase {
            facts: State::new(facts)?,
        })
    }
}

/// What a manager can do: its operators, methods and known objects.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Competences {
    pub operators: Vec<Operator>,
    pub methods: Vec<Method>,
    pub constants: BTreeSet<String>,
}

impl Competences {
    pub fn from_description(desc: &ServiceDescription) -> Result<Self, ServiceError> {
        let t = translate_to_domain(desc)?;
        Ok(Competences {
            operators: t.operators,
            methods: t.methods,
            constants: BTreeSet::new(),
        })
    }

    pub fn adds(&self, pred: &str) -> bool {
        self.operators.iter().any(|o| o.add.iter().any(|a| a.pred == pred))
    }

    fn domain(&self, extra: impl IntoIterator<Item = String>) -> Result<Domain, PlannerError> {
        let mut constants = self.constants.clone();
        constants.extend(extra);
        Domain::new(self.operators.clone(), self.methods.clone(), constants)
    }
}

/// A refinement: graft `fragment` so that it supplies `targets`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub targets: Vec<Hypothesis>,
    pub fragment: Fragment,
}

impl Proposal {
    /// Grafts the fragment and orders away threats.
    pub fn apply(&self, c: &Conjecture) -> Result<Conjecture, ConjectureError> {
        c.graft(&self.targets, &self.fragment)?
            .resolve_flaws()
            .ok_or(ConjectureError::UnresolvableFlaws)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManagerAgent {
    pub id: AgentId,
    pub subontology: String,
    pub competences: Competences,
    pub kb: KnowledgeBase,
    pub bound: usize,
}

impl ManagerAgent {
    pub fn new(id: &str, subontology: &str, competences: Competences, kb: KnowledgeBase) -> Self {
        ManagerAgent {
            id: id.to_string(),
            subontology: subontology.to_string(),
            competences,
            kb,
            bound: DEFAULT_BOUND,
        }
    }

    pub fn with_bound(mut self, bound: usize) -> Self {
        self.bound = bound;
        self
    }

    pub fn refine(&self, c: &Conjecture) -> Vec<Proposal> {
        manager_refine(c, &self.competences, &self.kb, self.bound)
    }

    /// Plans an atomic request from its initial facts plus the kb.
    pub fn plan_request(&self, desc: &ServiceDescription) -> Result<Outcome, AgentError> {
        let (s0, goal) = request_problem(desc)?;
        let initial = State::new(s0.iter().chain(self.kb.facts.iter()).cloned()).expect("ground facts");
        let problem = match self.competences.domain([]).and_then(|d| Problem::new(initial, goal, d)) {
            Ok(p) => p,
            Err(e) => {
                return Ok(Outcome::Failure(FailureReport {
                    detail: Some(e.to_string()),
                    ..FailureReport::new("no-plan")
                }))
            }
        };
        Ok(match solve(&problem, self.bound) {
            Some(plan) => Outcome::Plan(plan),
            None => Outcome::Failure(FailureReport::new("no-plan")),
        })
    }

    /// Reacts to one envelope; replies go back to the sender.
    pub fn handle(&self, e: &Envelope) -> Result<Vec<(Kind, Value)>, AgentError> {
        match e.kind {
            Kind::InitialConjecture | Kind::Refinement => {
                let body: RefineBody = e.body()?;
                let reply = ProposalsBody {
                    cycle: body.cycle,
                    basis: body.conjecture_id,
                    proposals: self.refine(&body.conjecture),
                };
                Ok(vec![(Kind::Refinement, value(&reply))])
            }
            Kind::Dispatch => {
                let body: DispatchBody = e.body()?;
                Ok(vec![match self.plan_request(&body.description)? {
                    Outcome::Plan(plan) => (Kind::Result, value(&ResultBody { plan })),
                    Outcome::Failure(r) => (Kind::Failure, value(&r)),
                }])
            }
            other => Err(AgentError::Protocol(format!("{} cannot handle {other}", self.id))),
        }
    }
}

fn value(x: &impl Serialize) -> Value {
    serde_json::to_value(x).expect("payload serializes")
}

/// Facts available to `consumer`, each with the step that provides it.
struct LocalView {
    state: BTreeSet<Atom>,
    source: BTreeMap<Atom, StepId>,
    from_kb: BTreeSet<Atom>,
}

fn local_view(c: &Conjecture, consumer: StepId, kb: &KnowledgeBase) -> LocalView {
    let mut view = LocalView {
        state: BTreeSet::new(),
        source: BTreeMap::new(),
        from_kb: BTreeSet::new(),
    };
    for (id, _) in c.steps() {
        if id == GOAL || id == consumer || (id != INIT && c.precedes(consumer, id)) {
            continue;
        }
        for a in c.resolved_adds(id).into_iter().filter(Atom::is_ground) {
            view.state.insert(a.clone());
            view.source.insert(a, id);
        }
    }
    for f in kb.facts.iter() {
        if view.state.insert(f.clone()) {
            view.source.insert(f.clone(), INIT);
            view.from_kb.insert(f.clone());
        }
    }
    view
}

/// Proposals for every hypothesis this manager can address, consumers in
/// ascending order. A joint proposal covering all of a consumer's
/// hypotheses is preferred; otherwise each hypothesis is tried alone.
pub fn manager_refine(c: &Conjecture, comp: &Competences, kb: &KnowledgeBase, bound: usize) -> Vec<Proposal> {
    let mut by_consumer: BTreeMap<StepId, Vec<Hypothesis>> = BTreeMap::new();
    for h in c.hypotheses() {
        by_consumer.entry(h.consumer).or_default().push(h);
    }
    let mut out: Vec<Proposal> = Vec::new();
    let push = |p: Proposal, out: &mut Vec<Proposal>| {
        if !out.contains(&p) {
            out.push(p);
        }
    };
    for (consumer, hyps) in by_consumer {
        let view = local_view(c, consumer, kb);
        let addressable: Vec<Hypothesis> = hyps
            .iter()
            .filter(|h| {
                let g = c.bindings().resolve(&h.atom);
                g.is_ground() && (view.state.contains(&g) || comp.adds(&g.pred))
            })
            .cloned()
            .collect();
        if addressable.is_empty() {
            continue;
        }
        if addressable.len() == hyps.len() {
            if let Some(p) = propose(c, consumer, &addressable, comp, kb, &view, bound) {
                push(p, &mut out);
                continue;
            }
            if hyps.len() == 1 {
                continue;
            }
        }
        for h in &addressable {
            if let Some(p) = propose(c, consumer, std::slice::from_ref(h), comp, kb, &view, bound) {
                push(p, &mut out);
            }
        }
    }
    out
}

fn propose(
    c: &Conjecture,
    consumer: StepId,
    goals: &[Hypothesis],
    comp: &Competences,
    kb: &KnowledgeBase,
    view: &LocalView,
    bound: usize,
) -> Option<Proposal> {
    let goal_atoms: Vec<Atom> = goals.iter().map(|h| c.bindings().resolve(&h.atom)).collect();
    let constants = view
        .state
        .iter()
        .chain(&goal_atoms)
        .flat_map(|a| a.args.iter().map(|t| t.as_str().to_string()));
    let domain = comp.domain(constants).ok()?;
    let initial = State::new(view.state.iter().cloned()).ok()?;
    let problem = Problem::new(initial, goal_atoms.clone(), domain).ok()?;
    let actions = problem.ground_actions();
    let plan = solve_over(&actions, &problem.initial, &problem.goal, bound, &BTreeSet::new())
        .or_else(|| relaxed_plan(comp, kb, &actions, &problem, bound))?;
    let proposal = fragment_from_plan(consumer, goals, &goal_atoms, &plan, view);
    proposal.apply(c).ok().map(|_| proposal)
}

/// Plans while treating as satisfied the preconditions over predicates this
/// manager neither produces nor holds in its kb. Operators with a parameter
/// fixed only by such preconditions are left out, so that no value is
/// guessed.
fn relaxed_plan(
    comp: &Competences,
    kb: &KnowledgeBase,
    actions: &[Action],
    problem: &Problem,
    bound: usize,
) -> Option<Plan> {
    let goal_preds: BTreeSet<&str> = problem.goal.iter().map(|g| g.pred.as_str()).collect();
    let known: BTreeSet<&str> = kb.facts.iter().map(|a| a.pred.as_str()).collect();
    let assumed: BTreeSet<String> = comp
        .operators
        .iter()
        .flat_map(|o| o.pre_pos.iter().map(|a| a.pred.clone()))
        .filter(|p| !comp.adds(p) && !known.contains(p.as_str()) && !goal_preds.contains(p.as_str()))
        .collect();
    if assumed.is_empty() {
        return None;
    }
    let admissible: BTreeSet<&str> = comp
        .operators
        .iter()
        .filter(|o| {
            o.params.iter().all(|v| {
                let mentions = |a: &Atom| a.vars().any(|x| x == v);
                o.pre_pos.iter().any(|a| !assumed.contains(&a.pred) && mentions(a))
                    || o.add
                        .iter()
                        .any(|a| goal_preds.contains(a.pred.as_str()) && mentions(a))
            })
        })
        .map(|o| o.name.as_str())
        .collect();
    let usable: Vec<Action> = actions
        .iter()
        .filter(|a| admissible.contains(a.name.as_str()))
        .cloned()
        .collect();
    solve_over(&usable, &problem.initial, &problem.goal, bound, &assumed).filter(|p| !p.is_empty())
}

fn fragment_from_plan(
    consumer: StepId,
    goals: &[Hypothesis],
    goal_atoms: &[Atom],
    plan: &Plan,
    view: &LocalView,
) -> Proposal {
    let mut producer: BTreeMap<Atom, StepRef> = view
        .source
        .iter()
        .map(|(a, &id)| (a.clone(), StepRef::Existing(id)))
        .collect();
    let mut frag = Fragment {
        steps: plan.steps.clone(),
        ..Fragment::default()
    };
    let mut kb_used: BTreeSet<Atom> = BTreeSet::new();
    let mut note_kb = |a: &Atom, r: StepRef| {
        if r == StepRef::Existing(INIT) && view.from_kb.contains(a) {
            kb_used.insert(a.clone());
        }
    };
    for (i, a) in plan.steps.iter().enumerate() {
        if i > 0 {
            frag.order.push((StepRef::New(i - 1), StepRef::New(i)));
        }
        for q in &a.pre_pos {
            if let Some(&r) = producer.get(q) {
                note_kb(q, r);
                frag.links.push((r, q.clone(), StepRef::New(i)));
            }
        }
        for d in &a.del {
            producer.remove(d);
        }
        for x in &a.add {
            producer.insert(x.clone(), StepRef::New(i));
        }
    }
    for (h, g) in goals.iter().zip(goal_atoms) {
        if let Some(&r @ StepRef::Existing(_)) = producer.get(g) {
            note_kb(g, r);
            frag.links.push((r, h.atom.clone(), StepRef::Existing(consumer)));
        }
    }
    frag.init_facts = kb_used.into_iter().collect();
    Proposal {
        targets: goals.to_vec(),
        fragment: frag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::*;

    fn airways() -> Competences {
        Competences {
            operators: vec![reserve_flight()],
            ..Competences::default()
        }
    }

    fn bank() -> Competences {
        Competences {
            operators: vec![pay()],
            ..Competences::default()
        }
    }

    fn airways_kb() -> KnowledgeBase {
        KnowledgeBase::new(atoms(&[
            "route(Lyon,Paris)",
            "route(Paris,Tokyo)",
            "fare(Lyon,Paris,150)",
            "fare(Paris,Tokyo,645)",
        ]))
        .unwrap()
    }

    fn bank_kb() -> KnowledgeBase {
        KnowledgeBase::new(atoms(&["funds-ok"])).unwrap()
    }

    fn root() -> Conjecture {
        Conjecture::from_goal(
            &state(&["at(Lyon)", "settled(Lyon)"]),
            &atoms(&["at(Tokyo)", "settled(Tokyo)"]),
        )
    }

    fn names(c: &Conjecture) -> Vec<String> {
        c.real_steps().map(|s| c.ground_step(s).to_string()).collect()
    }

    #[test]
    fn airways_proposes_both_legs_and_leaves_payment_open() {
        let c = root();
        let props = manager_refine(&c, &airways(), &airways_kb(), 6);
        assert_eq!(props.len(), 1);
        let next = props[0].apply(&c).unwrap();
        assert_eq!(
            names(&next),
            ["ReserveFlight(Lyon,Paris,150)", "ReserveFlight(Paris,Tokyo,645)"]
        );
        let open: Vec<String> = next.hypotheses().iter().map(ToString::to_string).collect();
        assert_eq!(open, ["settled(Tokyo)@a-goal", "settled(Paris)@3"]);
        // route and fare facts travel with the proposal
        assert!(next
            .init_facts()
            .iter()
            .any(|a| a.to_string() == "fare(Paris,Tokyo,645)"));
    }

    #[test]
    fn bank_cannot_start_without_a_debt() {
        assert!(manager_refine(&root(), &bank(), &bank_kb(), 6).is_empty());
    }

    #[test]
    fn bank_pays_each_leg() {
        let c = root();
        let legs = manager_refine(&c, &airways(), &airways_kb(), 6)[0].apply(&c).unwrap();
        let props = manager_refine(&legs, &bank(), &bank_kb(), 6);
        assert_eq!(props.len(), 2);
        let steps: Vec<String> = props.iter().map(|p| p.fragment.steps[0].to_string()).collect();
        assert_eq!(steps, ["Pay(Paris,Tokyo,645)", "Pay(Lyon,Paris,150)"]);
        let once = props[0].apply(&legs).unwrap();
        let again = manager_refine(&once, &bank(), &bank_kb(), 6);
        assert_eq!(again.len(), 1);
        let done = again[0].apply(&once).unwrap();
        assert!(done.is_solution());
        assert_eq!(
            done.linearize().unwrap().lines(),
            [
                "ReserveFlight(Lyon,Paris,150)",
                "Pay(Lyon,Paris,150)",
                "ReserveFlight(Paris,Tokyo,645)",
                "Pay(Paris,Tokyo,645)"
            ]
        );
    }

    #[test]
    fn outside_competences_yields_nothing() {
        let c = Conjecture::from_goal(&state(&[]), &atoms(&["booked(Hotel1)"]));
        assert!(manager_refine(&c, &airways(), &airways_kb(), 6).is_empty());
    }

    #[test]
    fn kb_fact_supplies_a_hypothesis_by_link() {
        let c = Conjecture::from_goal(&state(&[]), &atoms(&["funds-ok"]));
        let props = manager_refine(&c, &bank(), &bank_kb(), 6);
        assert_eq!(props.len(), 1);
        assert!(props[0].fragment.steps.is_empty());
        let done = props[0].apply(&c).unwrap();
        assert!(done.is_solution());
        assert!(done.linearize().unwrap().is_empty());
    }
}

//! Conjectures: partial-order partial plans exchanged during composition.
//!
//! A conjecture holds a set of steps (actions with unique ids), order
//! constraints, instantiation constraints over step variables and causal
//! links. Two virtual steps frame every conjecture: [`INIT`] produces the
//! initial facts and [`GOAL`] consumes the goal. Every unsupported positive
//! precondition is an open [`Hypothesis`].
//!
//! All operations are persistent: they return a new conjecture and leave
//! the input untouched, including on error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, Term};
use crate::planner::{Action, Plan, Problem, State};

pub type StepId = u32;

/// Virtual step providing the initial facts as effects.
pub const INIT: StepId = 0;
/// Virtual step requiring the goal as preconditions.
pub const GOAL: StepId = 1;

pub const INIT_NAME: &str = "a-init";
pub const GOAL_NAME: &str = "a-goal";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConjectureError {
    #[error("unknown step {0}")]
    UnknownStep(StepId),
    #[error("{0} cannot be unified with an effect of the producer and a precondition of the consumer")]
    NotUnifiable(String),
    #[error("ordering {0} before {1} introduces a cycle")]
    CycleIntroduced(StepId, StepId),
    #[error("merging the sub-conjecture breaks acyclicity")]
    MergeBreaksAcyclicity,
    #[error("inconsistent instantiation constraints: {0}")]
    InconsistentInstantiation(String),
    #[error("fragment does not supply {0}")]
    NotSupplied(String),
    #[error("malformed conjecture: {0}")]
    Malformed(String),
    #[error("conjecture is not a solution")]
    NotASolution,
    #[error("a threat or negative-precondition flaw cannot be fixed by ordering")]
    UnresolvableFlaws,
}

/// `producer --atom--> consumer`; `atom` is the consumer's precondition as
/// written in the consumer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CausalLink {
    pub producer: StepId,
    pub atom: Atom,
    pub consumer: StepId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Hypothesis {
    pub consumer: StepId,
    pub atom: Atom,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.consumer {
            GOAL => write!(f, "{}@{}", self.atom, GOAL_NAME),
            id => write!(f, "{}@{}", self.atom, id),
        }
    }
}

/// Equality classes over terms plus a disequality set.
///
/// Constants are always class representatives, so a class holds at most one
/// constant exactly when the store is consistent.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    parent: BTreeMap<Term, Term>,
    neqs: BTreeSet<(Term, Term)>,
}

impl PartialEq for Bindings {
    fn eq(&self, other: &Self) -> bool {
        self.classes() == other.classes() && self.neqs == other.neqs
    }
}

impl Eq for Bindings {}

impl Bindings {
    /// Non-trivial equality classes, independent of union order.
    pub fn classes(&self) -> BTreeSet<BTreeSet<Term>> {
        let mut by_root: BTreeMap<Term, BTreeSet<Term>> = BTreeMap::new();
        for (a, b) in &self.parent {
            for t in [a, b] {
                by_root.entry(self.find(t)).or_default().insert(t.clone());
            }
        }
        by_root.into_values().collect()
    }

    pub fn find(&self, t: &Term) -> Term {
        let mut cur = t;
        while let Some(p) = self.parent.get(cur) {
            cur = p;
        }
        cur.clone()
    }

    /// Merges the classes of `a` and `b`.
    pub fn unify_terms(&mut self, a: &Term, b: &Term) -> Result<(), String> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return Ok(());
        }
        match (&ra, &rb) {
            (Term::Const(x), Term::Const(y)) => return Err(format!("{x} = {y}")),
            (Term::Const(_), Term::Var(_)) => {
                self.parent.insert(rb, ra);
            }
            _ => {
                self.parent.insert(ra, rb);
            }
        }
        self.check_neqs()
    }

    pub fn add_neq(&mut self, a: &Term, b: &Term) -> Result<(), String> {
        let pair = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        self.neqs.insert(pair);
        self.check_neqs()
    }

    fn check_neqs(&self) -> Result<(), String> {
        for (a, b) in &self.neqs {
            if self.find(a) == self.find(b) {
                return Err(format!("{a} != {b}"));
            }
        }
        Ok(())
    }

    pub fn unify_atoms(&mut self, a: &Atom, b: &Atom) -> Result<(), String> {
        if a.pred != b.pred || a.args.len() != b.args.len() {
            return Err(format!("{a} vs {b}"));
        }
        for (x, y) in a.args.iter().zip(&b.args) {
            self.unify_terms(x, y)?;
        }
        Ok(())
    }

    pub fn resolve(&self, atom: &Atom) -> Atom {
        Atom::new(atom.pred.clone(), atom.args.iter().map(|t| self.find(t)).collect())
    }

    pub fn is_satisfiable(&self) -> bool {
        self.check_neqs().is_ok()
    }

    /// Constraint triples `(x, "=", y)` / `(x, "!=", y)`.
    pub fn triples(&self) -> Vec<(Term, String, Term)> {
        self.parent
            .iter()
            .map(|(a, b)| (a.clone(), "=".to_string(), b.clone()))
            .chain(self.neqs.iter().map(|(a, b)| (a.clone(), "!=".to_string(), b.clone())))
            .collect()
    }

    pub fn from_triples(triples: &[(Term, String, Term)]) -> Result<Self, String> {
        let mut b = Bindings::default();
        for (x, rel, y) in triples {
            match rel.as_str() {
                "=" => b.unify_terms(x, y)?,
                "!=" => b.add_neq(x, y)?,
                other => return Err(format!("unknown relation `{other}`")),
            }
        }
        Ok(b)
    }
}

/// A partial plan `(A, <, I, C)` with virtual init/goal steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConjectureDoc", into = "ConjectureDoc")]
pub struct Conjecture {
    steps: BTreeMap<StepId, Action>,
    order: BTreeSet<(StepId, StepId)>,
    bindings: Bindings,
    links: BTreeSet<CausalLink>,
    next_id: StepId,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ConjectureDoc {
    steps: Vec<StepDoc>,
    order: Vec<(StepId, StepId)>,
    constraints: Vec<(Term, String, Term)>,
    links: Vec<(StepId, Atom, StepId)>,
    next_id: StepId,
}

#[derive(Serialize, Deserialize)]
struct StepDoc {
    id: StepId,
    action: Action,
}

impl From<Conjecture> for ConjectureDoc {
    fn from(c: Conjecture) -> Self {
        ConjectureDoc {
            steps: c.steps.into_iter().map(|(id, action)| StepDoc { id, action }).collect(),
            order: c.order.into_iter().collect(),
            constraints: c.bindings.triples(),
            links: c.links.into_iter().map(|l| (l.producer, l.atom, l.consumer)).collect(),
            next_id: c.next_id,
        }
    }
}

impl TryFrom<ConjectureDoc> for Conjecture {
    type Error = ConjectureError;

    fn try_from(d: ConjectureDoc) -> Result<Self, Self::Error> {
        let c = Conjecture {
            steps: d.steps.into_iter().map(|s| (s.id, s.action)).collect(),
            order: d.order.into_iter().collect(),
            bindings: Bindings::from_triples(&d.constraints).map_err(ConjectureError::InconsistentInstantiation)?,
            links: d
                .links
                .into_iter()
                .map(|(producer, atom, consumer)| CausalLink {
                    producer,
                    atom,
                    consumer,
                })
                .collect(),
            next_id: d.next_id,
        };
        c.check()?;
        Ok(c)
    }
}

/// Reference to a step from inside a [`Fragment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRef {
    /// A step already in the target conjecture.
    Existing(StepId),
    /// The n-th step of the fragment.
    New(usize),
}

/// A sub-conjecture proposed as a refinement. New steps are grafted with
/// fresh ids; links and orderings may also mention existing steps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Fragment {
    #[serde(default)]
    pub steps: Vec<Action>,
    #[serde(default)]
    pub order: Vec<(StepRef, StepRef)>,
    #[serde(default)]
    pub links: Vec<(StepRef, Atom, StepRef)>,
    /// Equalities `x = y`; variables are read in the scope of the given step.
    #[serde(default)]
    pub bindings: Vec<(StepRef, Term, Term)>,
    /// Facts justified by the proposer, exposed as extra initial effects.
    #[serde(default)]
    pub init_facts: Vec<Atom>,
}

/// Causal link endangered by a step that may fall between its ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Threat {
    pub link: CausalLink,
    pub threat: StepId,
}

/// Ways a conjecture can still be unsound besides open hypotheses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Flaw {
    Threat(Threat),
    /// A step touching `atom` is unordered with a step requiring `¬atom`.
    Unordered {
        consumer: StepId,
        atom: Atom,
        toucher: StepId,
    },
    /// Steps touching `atom` before `consumer` are not totally ordered.
    Ambiguous {
        consumer: StepId,
        atom: Atom,
        first: StepId,
        second: StepId,
    },
    /// The last step before `consumer` touching `atom` leaves it true.
    Asserted {
        consumer: StepId,
        atom: Atom,
    },
}

impl Conjecture {
    /// The first conjecture: `a-init < a-goal`, with every goal atom already
    /// true initially linked from `a-init`.
    pub fn initial(p: &Problem) -> Conjecture {
        Conjecture::from_goal(&p.initial, &p.goal)
    }

    /// Same as [`Conjecture::initial`] without a domain.
    pub fn from_goal<'a>(initial: &State, goal: impl IntoIterator<Item = &'a Atom>) -> Conjecture {
        let targets: BTreeSet<Atom> = goal.into_iter().cloned().collect();
        let init = Action {
            name: INIT_NAME.to_string(),
            args: vec![],
            pre_pos: vec![],
            pre_neg: vec![],
            add: initial.iter().cloned().collect(),
            del: vec![],
        };
        let goal = Action {
            name: GOAL_NAME.to_string(),
            args: vec![],
            pre_pos: targets.iter().cloned().collect(),
            pre_neg: vec![],
            add: vec![],
            del: vec![],
        };
        let links = targets
            .iter()
            .filter(|g| initial.contains(g))
            .map(|g| CausalLink {
                producer: INIT,
                atom: g.clone(),
                consumer: GOAL,
            })
            .collect();
        Conjecture {
            steps: BTreeMap::from([(INIT, init), (GOAL, goal)]),
            order: BTreeSet::from([(INIT, GOAL)]),
            bindings: Bindings::default(),
            links,
            next_id: 2,
        }
    }

    pub fn step(&self, id: StepId) -> Option<&Action> {
        self.steps.get(&id)
    }

    /// All steps including the virtual ones.
    pub fn steps(&self) -> impl Iterator<Item = (StepId, &Action)> {
        self.steps.iter().map(|(id, a)| (*id, a))
    }

    /// Real (non-virtual) step ids.
    pub fn real_steps(&self) -> impl Iterator<Item = StepId> + '_ {
        self.steps.keys().copied().filter(|&id| id != INIT && id != GOAL)
    }

    pub fn order(&self) -> &BTreeSet<(StepId, StepId)> {
        &self.order
    }

    pub fn links(&self) -> &BTreeSet<CausalLink> {
        &self.links
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    pub fn init_facts(&self) -> &[Atom] {
        &self.steps[&INIT].add
    }

    pub fn goal_atoms(&self) -> &[Atom] {
        &self.steps[&GOAL].pre_pos
    }

    /// Effects of a step under the current bindings.
    pub fn resolved_adds(&self, id: StepId) -> Vec<Atom> {
        self.steps[&id].add.iter().map(|a| self.bindings.resolve(a)).collect()
    }

    fn require(&self, id: StepId) -> Result<&Action, ConjectureError> {
        self.steps.get(&id).ok_or(ConjectureError::UnknownStep(id))
    }

    /// Transitive successors of every step.
    fn successors(&self) -> BTreeMap<StepId, BTreeSet<StepId>> {
        let mut direct: BTreeMap<StepId, Vec<StepId>> = BTreeMap::new();
        for &(a, b) in &self.order {
            direct.entry(a).or_default().push(b);
        }
        self.steps
            .keys()
            .map(|&s| {
                let mut seen = BTreeSet::new();
                let mut stack: Vec<StepId> = direct.get(&s).cloned().unwrap_or_default();
                while let Some(n) = stack.pop() {
                    if seen.insert(n) {
                        stack.extend(direct.get(&n).into_iter().flatten());
                    }
                }
                (s, seen)
            })
            .collect()
    }

    /// Strict precedence in the transitive closure of `<`.
    pub fn precedes(&self, a: StepId, b: StepId) -> bool {
        let mut stack = vec![a];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            for &(x, y) in self.order.range((n, StepId::MIN)..=(n, StepId::MAX)) {
                debug_assert_eq!(x, n);
                if y == b {
                    return true;
                }
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        false
    }

    fn is_acyclic(&self) -> bool {
        self.successors().iter().all(|(s, succ)| !succ.contains(s))
    }

    /// Checks every structural invariant.
    pub fn check(&self) -> Result<(), ConjectureError> {
        let bad = |m: String| Err(ConjectureError::Malformed(m));
        if self.steps.get(&INIT).map(|a| a.name.as_str()) != Some(INIT_NAME)
            || self.steps.get(&GOAL).map(|a| a.name.as_str()) != Some(GOAL_NAME)
        {
            return bad("missing virtual steps".into());
        }
        if self.steps.keys().any(|&id| id >= self.next_id) {
            return bad("step id beyond next id".into());
        }
        for &(a, b) in &self.order {
            if !self.steps.contains_key(&a) || !self.steps.contains_key(&b) {
                return bad(format!("order ({a},{b}) names an unknown step"));
            }
        }
        if !self.is_acyclic() {
            return bad("order is cyclic".into());
        }
        let succ = self.successors();
        for id in self.real_steps() {
            if !succ[&INIT].contains(&id) || !succ[&id].contains(&GOAL) {
                return bad(format!("step {id} is not framed by a-init and a-goal"));
            }
        }
        if !self.bindings.is_satisfiable() {
            return Err(ConjectureError::InconsistentInstantiation("stored constraints".into()));
        }
        for l in &self.links {
            let (Some(p), Some(c)) = (self.steps.get(&l.producer), self.steps.get(&l.consumer)) else {
                return bad(format!("link names an unknown step: {l:?}"));
            };
            if !succ[&l.producer].contains(&l.consumer) {
                return bad(format!("link {} -> {} is not ordered", l.producer, l.consumer));
            }
            let want = self.bindings.resolve(&l.atom);
            if !c.pre_pos.contains(&l.atom) {
                return bad(format!("{} is not a precondition of step {}", l.atom, l.consumer));
            }
            if !p.add.iter().any(|e| self.bindings.resolve(e) == want) {
                return bad(format!("{} is not an effect of step {}", l.atom, l.producer));
            }
        }
        Ok(())
    }

    /// Open preconditions in creation order (by consumer id, then by
    /// position in the consumer's precondition list).
    pub fn hypotheses(&self) -> Vec<Hypothesis> {
        let mut out = Vec::new();
        for (&id, a) in &self.steps {
            let mut seen = BTreeSet::new();
            for p in &a.pre_pos {
                if !seen.insert(p) {
                    continue;
                }
                let supported = self.links.iter().any(|l| l.consumer == id && &l.atom == p);
                if !supported {
                    out.push(Hypothesis {
                        consumer: id,
                        atom: p.clone(),
                    });
                }
            }
        }
        out
    }

    /// Adds a step framed by the virtual steps; its variables are renamed
    /// apart using the new id.
    pub fn add_step(&self, action: &Action) -> (Conjecture, StepId) {
        let mut next = self.clone();
        let id = next.insert_step(action);
        (next, id)
    }

    fn insert_step(&mut self, action: &Action) -> StepId {
        let id = self.next_id;
        self.next_id += 1;
        self.steps.insert(id, scope_vars(action, id));
        self.order.insert((INIT, id));
        self.order.insert((id, GOAL));
        id
    }

    /// Adds `before < after`.
    pub fn add_order(&self, before: StepId, after: StepId) -> Result<Conjecture, ConjectureError> {
        let mut next = self.clone();
        next.insert_order(before, after)?;
        Ok(next)
    }

    fn insert_order(&mut self, before: StepId, after: StepId) -> Result<(), ConjectureError> {
        self.require(before)?;
        self.require(after)?;
        if before == after || self.precedes(after, before) {
            return Err(ConjectureError::CycleIntroduced(before, after));
        }
        self.order.insert((before, after));
        Ok(())
    }

    pub fn add_causal_link(&self, producer: StepId, p: &Atom, consumer: StepId) -> Result<Conjecture, ConjectureError> {
        let mut next = self.clone();
        next.insert_link(producer, p, consumer)?;
        Ok(next)
    }

    fn insert_link(&mut self, producer: StepId, p: &Atom, consumer: StepId) -> Result<(), ConjectureError> {
        let prod = self.require(producer)?.clone();
        let cons = self.require(consumer)?.clone();
        let unify_with = |base: &Bindings| -> Option<(Bindings, Atom)> {
            for pre in &cons.pre_pos {
                for eff in &prod.add {
                    let mut b = base.clone();
                    if b.unify_atoms(p, pre).is_ok() && b.unify_atoms(p, eff).is_ok() {
                        return Some((b, pre.clone()));
                    }
                }
            }
            None
        };
        let Some((bindings, pre)) = unify_with(&self.bindings) else {
            return Err(if unify_with(&Bindings::default()).is_some() {
                ConjectureError::InconsistentInstantiation(format!("linking {p}"))
            } else {
                ConjectureError::NotUnifiable(p.to_string())
            });
        };
        if producer == consumer || self.precedes(consumer, producer) {
            return Err(ConjectureError::CycleIntroduced(producer, consumer));
        }
        self.bindings = bindings;
        self.order.insert((producer, consumer));
        self.links.insert(CausalLink {
            producer,
            atom: pre,
            consumer,
        });
        Ok(())
    }

    /// Grafts `frag` so that it supplies `h`.
    pub fn graft_subconjecture(&self, h: &Hypothesis, frag: &Fragment) -> Result<Conjecture, ConjectureError> {
        self.graft(std::slice::from_ref(h), frag)
    }

    /// Grafts `frag` so that it supplies every hypothesis in `targets`. Each
    /// target is linked from the last fragment step adding it, or from
    /// `a-init` when no fragment step does.
    pub fn graft(&self, targets: &[Hypothesis], frag: &Fragment) -> Result<Conjecture, ConjectureError> {
        let mut next = self.clone();
        for fact in &frag.init_facts {
            let init = next.steps.get_mut(&INIT).expect("init step");
            if !init.add.contains(fact) {
                init.add.push(fact.clone());
            }
        }
        let base = next.next_id;
        let ids: Vec<StepId> = frag.steps.iter().map(|a| next.insert_step(a)).collect();
        let resolve = |r: StepRef| -> Result<StepId, ConjectureError> {
            match r {
                StepRef::Existing(id) => Ok(id),
                StepRef::New(i) => ids
                    .get(i)
                    .copied()
                    .ok_or_else(|| ConjectureError::Malformed(format!("fragment step {i} does not exist"))),
            }
        };
        for (r, x, y) in &frag.bindings {
            let id = resolve(*r)?;
            let scoped = |t: &Term| match (t, id >= base) {
                (Term::Var(v), true) => Term::Var(scope_var(v, id)),
                _ => t.clone(),
            };
            next.bindings
                .unify_terms(&scoped(x), &scoped(y))
                .map_err(ConjectureError::InconsistentInstantiation)?;
        }
        let acyclic = |e: ConjectureError| match e {
            ConjectureError::CycleIntroduced(..) => ConjectureError::MergeBreaksAcyclicity,
            other => other,
        };
        for &(a, b) in &frag.order {
            next.insert_order(resolve(a)?, resolve(b)?).map_err(acyclic)?;
        }
        for (p, atom, c) in &frag.links {
            let (p, c) = (resolve(*p)?, resolve(*c)?);
            let atom = if c >= base { scope_atom(atom, c) } else { atom.clone() };
            if next
                .links
                .iter()
                .any(|l| l.producer == p && l.consumer == c && l.atom == atom)
            {
                continue;
            }
            next.insert_link(p, &atom, c).map_err(acyclic)?;
        }
        for h in targets {
            next.require(h.consumer)?;
            for &id in &ids {
                if id != h.consumer && !next.precedes(id, h.consumer) {
                    next.insert_order(id, h.consumer).map_err(acyclic)?;
                }
            }
            if next.links.iter().any(|l| l.consumer == h.consumer && l.atom == h.atom) {
                continue;
            }
            let supplier = ids
                .iter()
                .rev()
                .copied()
                .chain(std::iter::once(INIT))
                .find(|&id| {
                    next.steps[&id]
                        .add
                        .iter()
                        .any(|e| next.bindings.clone().unify_atoms(e, &h.atom).is_ok())
                })
                .ok_or_else(|| ConjectureError::NotSupplied(h.to_string()))?;
            next.insert_link(supplier, &h.atom, h.consumer).map_err(acyclic)?;
        }
        next.check().map_err(|e| match e {
            ConjectureError::Malformed(m) if m.contains("cyclic") => ConjectureError::MergeBreaksAcyclicity,
            other => other,
        })?;
        Ok(next)
    }

    /// Threats and negative-precondition flaws, in a deterministic order.
    pub fn flaws(&self) -> Vec<Flaw> {
        let succ = self.successors();
        let before = |a: StepId, b: StepId| succ[&a].contains(&b);
        let mut out = Vec::new();
        for l in &self.links {
            let q = self.bindings.resolve(&l.atom);
            for (&t, action) in &self.steps {
                if t == l.producer || t == l.consumer {
                    continue;
                }
                if before(t, l.producer) || before(l.consumer, t) {
                    continue;
                }
                if self.removes(action, &q) {
                    out.push(Flaw::Threat(Threat {
                        link: l.clone(),
                        threat: t,
                    }));
                }
            }
        }
        for (&c, action) in &self.steps {
            for neg in &action.pre_neg {
                let q = self.bindings.resolve(neg);
                let touchers: Vec<StepId> = self
                    .steps
                    .iter()
                    .filter(|(&t, a)| t != c && self.touches(a, &q))
                    .map(|(&t, _)| t)
                    .collect();
                if let Some(&t) = touchers.iter().find(|&&t| !before(t, c) && !before(c, t)) {
                    out.push(Flaw::Unordered {
                        consumer: c,
                        atom: q.clone(),
                        toucher: t,
                    });
                    continue;
                }
                let earlier: Vec<StepId> = touchers.into_iter().filter(|&t| before(t, c)).collect();
                let last = earlier
                    .iter()
                    .copied()
                    .find(|&m| earlier.iter().all(|&o| o == m || before(o, m)));
                match last {
                    None if earlier.is_empty() => {}
                    None => {
                        let (first, second) = incomparable_pair(&earlier, &before).expect("no maximum");
                        out.push(Flaw::Ambiguous {
                            consumer: c,
                            atom: q.clone(),
                            first,
                            second,
                        });
                    }
                    Some(m) if self.removes(&self.steps[&m], &q) => {}
                    Some(_) => out.push(Flaw::Asserted {
                        consumer: c,
                        atom: q.clone(),
                    }),
                }
            }
        }
        out
    }

    pub fn threats(&self) -> Vec<Threat> {
        self.flaws()
            .into_iter()
            .filter_map(|f| match f {
                Flaw::Threat(t) => Some(t),
                _ => None,
            })
            .collect()
    }

    fn removes(&self, a: &Action, q: &Atom) -> bool {
        let del = a.del.iter().any(|d| &self.bindings.resolve(d) == q);
        let add = a.add.iter().any(|d| &self.bindings.resolve(d) == q);
        del && !add
    }

    fn touches(&self, a: &Action, q: &Atom) -> bool {
        a.add.iter().chain(&a.del).any(|d| &self.bindings.resolve(d) == q)
    }

    /// Tries ordering additions (promotion/demotion) until no flaw remains.
    /// Returns `None` when some flaw cannot be fixed by ordering alone.
    pub fn resolve_flaws(&self) -> Option<Conjecture> {
        self.resolve_flaws_within(64)
    }

    fn resolve_flaws_within(&self, budget: usize) -> Option<Conjecture> {
        let Some(flaw) = self.flaws().into_iter().next() else {
            return Some(self.clone());
        };
        if budget == 0 {
            return None;
        }
        let options: Vec<(StepId, StepId)> = match flaw {
            Flaw::Threat(t) => vec![(t.threat, t.link.producer), (t.link.consumer, t.threat)],
            Flaw::Unordered { consumer, toucher, .. } => vec![(consumer, toucher), (toucher, consumer)],
            Flaw::Ambiguous { first, second, .. } => vec![(first, second), (second, first)],
            Flaw::Asserted { .. } => vec![],
        };
        options
            .into_iter()
            .filter_map(|(a, b)| self.add_order(a, b).ok())
            .find_map(|c| c.resolve_flaws_within(budget - 1))
    }

    /// Every variable mentioned by any step, resolved through the bindings.
    fn unbound_vars(&self) -> Vec<Term> {
        self.steps
            .values()
            .flat_map(|a| {
                a.args.iter().chain(
                    a.pre_pos
                        .iter()
                        .chain(&a.pre_neg)
                        .chain(&a.add)
                        .chain(&a.del)
                        .flat_map(|x| &x.args),
                )
            })
            .map(|t| self.bindings.find(t))
            .filter(Term::is_var)
            .collect()
    }

    /// No open hypothesis, no flaw and every variable bound to a constant.
    pub fn is_solution(&self) -> bool {
        self.check().is_ok()
            && self.hypotheses().is_empty()
            && self.bindings.is_satisfiable()
            && self.unbound_vars().is_empty()
            && self.flaws().is_empty()
    }

    /// Ground action of a step under the bindings.
    pub fn ground_step(&self, id: StepId) -> Action {
        let a = &self.steps[&id];
        let r = |xs: &[Atom]| xs.iter().map(|x| self.bindings.resolve(x)).collect();
        Action {
            name: a.name.clone(),
            args: a.args.iter().map(|t| self.bindings.find(t)).collect(),
            pre_pos: r(&a.pre_pos),
            pre_neg: r(&a.pre_neg),
            add: r(&a.add),
            del: r(&a.del),
        }
    }

    /// Topological order of the real steps, smallest id first among ready
    /// steps.
    pub fn linearize(&self) -> Result<Plan, ConjectureError> {
        if !self.is_solution() {
            return Err(ConjectureError::NotASolution);
        }
        let mut indeg: BTreeMap<StepId, usize> = self.steps.keys().map(|&s| (s, 0)).collect();
        for &(_, b) in &self.order {
            *indeg.get_mut(&b).expect("known step") += 1;
        }
        let mut ready: BTreeSet<StepId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&s, _)| s).collect();
        let mut out = Vec::new();
        while let Some(s) = ready.pop_first() {
            if s != INIT && s != GOAL {
                out.push(self.ground_step(s));
            }
            for &(_, b) in self.order.range((s, StepId::MIN)..=(s, StepId::MAX)) {
                let d = indeg.get_mut(&b).expect("known step");
                *d -= 1;
                if *d == 0 {
                    ready.insert(b);
                }
            }
        }
        Ok(Plan::new(out))
    }

    /// Calls `f` with every topological order of the real steps, as ground
    /// plans. Stops early when `f` returns false. Exponential; meant for
    /// small conjectures.
    pub fn for_each_linearization(&self, mut f: impl FnMut(Plan) -> bool) {
        let real: Vec<StepId> = self.real_steps().collect();
        let succ = self.successors();
        let mut placed: Vec<StepId> = Vec::new();
        fn go(
            c: &Conjecture,
            real: &[StepId],
            succ: &BTreeMap<StepId, BTreeSet<StepId>>,
            placed: &mut Vec<StepId>,
            f: &mut dyn FnMut(Plan) -> bool,
        ) -> bool {
            if placed.len() == real.len() {
                return f(Plan::new(placed.iter().map(|&s| c.ground_step(s)).collect()));
            }
            for &s in real {
                if placed.contains(&s) {
                    continue;
                }
                let ready = real
                    .iter()
                    .all(|&o| o == s || placed.contains(&o) || !succ[&o].contains(&s));
                if !ready {
                    continue;
                }
                placed.push(s);
                let more = go(c, real, succ, placed, f);
                placed.pop();
                if !more {
                    return false;
                }
            }
            true
        }
        go(self, &real, &succ, &mut placed, &mut f);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("conjecture serializes")
    }
}

fn incomparable_pair(ids: &[StepId], before: &dyn Fn(StepId, StepId) -> bool) -> Option<(StepId, StepId)> {
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if !before(a, b) && !before(b, a) {
                return Some((a, b));
            }
        }
    }
    None
}

fn scope_var(v: &str, id: StepId) -> String {
    match v.split_once('#') {
        Some((base, _)) => format!("{base}#{id}"),
        None => format!("{v}#{id}"),
    }
}

fn scope_atom(a: &Atom, id: StepId) -> Atom {
    a.map_vars(|v| scope_var(v, id))
}

fn scope_vars(a: &Action, id: StepId) -> Action {
    let r = |xs: &[Atom]| xs.iter().map(|x| scope_atom(x, id)).collect();
    Action {
        name: a.name.clone(),
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => Term::Var(scope_var(v, id)),
                Term::Const(_) => t.clone(),
            })
            .collect(),
        pre_pos: r(&a.pre_pos),
        pre_neg: r(&a.pre_neg),
        add: r(&a.add),
        del: r(&a.del),
    }
}

/// Free functions mirroring the methods, for callers that prefer them.
pub fn initial_conjecture(p: &Problem) -> Conjecture {
    Conjecture::initial(p)
}

pub fn hypotheses_of(c: &Conjecture) -> Result<Vec<Hypothesis>, ConjectureError> {
    c.check()?;
    Ok(c.hypotheses())
}

pub fn add_causal_link(
    c: &Conjecture,
    producer: StepId,
    p: &Atom,
    consumer: StepId,
) -> Result<Conjecture, ConjectureError> {
    c.add_causal_link(producer, p, consumer)
}

pub fn graft_subconjecture(c: &Conjecture, h: &Hypothesis, frag: &Fragment) -> Result<Conjecture, ConjectureError> {
    c.graft_subconjecture(h, frag)
}

pub fn is_solution(c: &Conjecture) -> bool {
    c.is_solution()
}

pub fn linearize(c: &Conjecture) -> Result<Plan, ConjectureError> {
    c.linearize()
}

//! STRIPS planning core: operators, ground actions, state transitions,
//! bounded forward search and plan validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, Substitution, Term};
use crate::service_model::Method;

/// Largest grounded instance `oracle_solve` accepts.
pub const ORACLE_MAX_ACTIONS: usize = 64;
/// Longest plan `oracle_solve` enumerates.
pub const ORACLE_MAX_BOUND: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("action {0} is not fully ground")]
    UnboundVariable(String),
    #[error("action {0} is not applicable")]
    NotApplicable(String),
    #[error("instance too large for the oracle: {actions} ground actions, bound {bound}")]
    InstanceTooLarge { actions: usize, bound: usize },
    #[error("operator `{op}` uses variable {var} that is not a parameter")]
    UndeclaredVariable { op: String, var: String },
    #[error("duplicate operator `{0}`")]
    DuplicateOperator(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("operator `{op}` expects {expected} arguments, got {got}")]
    Arity { op: String, expected: usize, got: usize },
    #[error("goal predicate `{0}` is not declared in the domain")]
    UndeclaredGoal(String),
    #[error("initial state atom {0} is not ground")]
    NonGroundState(String),
    #[error("invalid problem document: {0}")]
    Syntax(String),
}

/// A STRIPS operator `name(params)` with positive/negative preconditions
/// and add/delete lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operator {
    pub name: String,
    pub params: Vec<String>,
    #[serde(default)]
    pub pre_pos: Vec<Atom>,
    #[serde(default)]
    pub pre_neg: Vec<Atom>,
    #[serde(default)]
    pub add: Vec<Atom>,
    #[serde(default)]
    pub del: Vec<Atom>,
}

impl Operator {
    pub fn new(
        name: impl Into<String>,
        params: Vec<String>,
        pre_pos: Vec<Atom>,
        pre_neg: Vec<Atom>,
        add: Vec<Atom>,
        del: Vec<Atom>,
    ) -> Result<Self, PlannerError> {
        let op = Operator {
            name: name.into(),
            params,
            pre_pos,
            pre_neg,
            add,
            del,
        };
        op.check()?;
        Ok(op)
    }

    /// Every variable used in a condition must be a parameter.
    pub fn check(&self) -> Result<(), PlannerError> {
        for atom in self.conditions() {
            for v in atom.vars() {
                if !self.params.iter().any(|p| p == v) {
                    return Err(PlannerError::UndeclaredVariable {
                        op: self.name.clone(),
                        var: v.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn conditions(&self) -> impl Iterator<Item = &Atom> {
        self.pre_pos
            .iter()
            .chain(&self.pre_neg)
            .chain(&self.add)
            .chain(&self.del)
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Binds parameters positionally. Arguments may themselves be variables.
    pub fn instantiate(&self, args: &[Term]) -> Result<Action, PlannerError> {
        if args.len() != self.params.len() {
            return Err(PlannerError::Arity {
                op: self.name.clone(),
                expected: self.params.len(),
                got: args.len(),
            });
        }
        let subst: Substitution = self.params.iter().cloned().zip(args.iter().cloned()).collect();
        let sub = |atoms: &[Atom]| atoms.iter().map(|a| a.substitute(&subst)).collect();
        Ok(Action {
            name: self.name.clone(),
            args: args.to_vec(),
            pre_pos: sub(&self.pre_pos),
            pre_neg: sub(&self.pre_neg),
            add: sub(&self.add),
            del: sub(&self.del),
        })
    }
}

/// An instance of an operator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub args: Vec<Term>,
    #[serde(default)]
    pub pre_pos: Vec<Atom>,
    #[serde(default)]
    pub pre_neg: Vec<Atom>,
    #[serde(default)]
    pub add: Vec<Atom>,
    #[serde(default)]
    pub del: Vec<Atom>,
}

impl Action {
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
            && self
                .pre_pos
                .iter()
                .chain(&self.pre_neg)
                .chain(&self.add)
                .chain(&self.del)
                .all(Atom::is_ground)
    }

    pub fn adds(&self, atom: &Atom) -> bool {
        self.add.contains(atom)
    }

    /// Deletes `atom` without re-adding it.
    pub fn removes(&self, atom: &Atom) -> bool {
        self.del.contains(atom) && !self.add.contains(atom)
    }

    /// Applies the action to a transient state; assumes applicability.
    fn transition(&self, s: &State) -> State {
        let mut atoms = s.atoms.clone();
        for d in &self.del {
            atoms.remove(d);
        }
        atoms.extend(self.add.iter().cloned());
        State { atoms }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Atom::new(self.name.clone(), self.args.clone()))
    }
}

/// A closed-world set of ground atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State {
    pub atoms: BTreeSet<Atom>,
}

impl State {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, PlannerError> {
        let atoms: BTreeSet<Atom> = atoms.into_iter().collect();
        if let Some(a) = atoms.iter().find(|a| !a.is_ground()) {
            return Err(PlannerError::NonGroundState(a.to_string()));
        }
        Ok(State { atoms })
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn satisfies<'a>(&self, goal: impl IntoIterator<Item = &'a Atom>) -> bool {
        goal.into_iter().all(|g| self.atoms.contains(g))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl FromIterator<Atom> for State {
    /// Panics on non-ground atoms; use [`State::new`] for checked input.
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        State::new(iter).expect("ground atoms")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub operators: Vec<Operator>,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub constants: BTreeSet<String>,
}

impl Domain {
    pub fn new(
        operators: Vec<Operator>,
        methods: Vec<Method>,
        constants: BTreeSet<String>,
    ) -> Result<Self, PlannerError> {
        let mut seen = BTreeSet::new();
        for op in &operators {
            op.check()?;
            if !seen.insert(op.name.as_str()) {
                return Err(PlannerError::DuplicateOperator(op.name.clone()));
            }
        }
        Ok(Domain {
            operators,
            methods,
            constants,
        })
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name == name)
    }

    /// Predicates mentioned anywhere in the operators.
    pub fn predicates(&self) -> BTreeSet<&str> {
        self.operators
            .iter()
            .flat_map(|o| o.conditions())
            .map(|a| a.pred.as_str())
            .collect()
    }
}

/// Initial state, goal and domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub initial: State,
    pub goal: BTreeSet<Atom>,
    pub domain: Domain,
}

#[derive(Debug, Deserialize)]
struct ProblemDoc {
    initial: Vec<Atom>,
    goal: Vec<Atom>,
    #[serde(default)]
    constants: Vec<String>,
}

impl Problem {
    /// Builds a problem; constants found in the initial state and the goal
    /// are added to the domain's constant set.
    pub fn new(initial: State, goal: impl IntoIterator<Item = Atom>, mut domain: Domain) -> Result<Self, PlannerError> {
        let goal: BTreeSet<Atom> = goal.into_iter().collect();
        let declared: BTreeSet<String> = domain
            .predicates()
            .into_iter()
            .map(str::to_string)
            .chain(initial.iter().map(|a| a.pred.clone()))
            .collect();
        for g in &goal {
            if !g.is_ground() {
                return Err(PlannerError::NonGroundState(g.to_string()));
            }
            if !declared.contains(&g.pred) {
                return Err(PlannerError::UndeclaredGoal(g.pred.clone()));
            }
        }
        for atom in initial.iter().chain(&goal) {
            domain
                .constants
                .extend(atom.args.iter().map(|t| t.as_str().to_string()));
        }
        Ok(Problem { initial, goal, domain })
    }

    /// Parses `{"initial": [...], "goal": [...], "constants": [...]}` against
    /// a domain.
    pub fn from_json(text: &str, mut domain: Domain) -> Result<Self, PlannerError> {
        let doc: ProblemDoc = serde_json::from_str(text).map_err(|e| PlannerError::Syntax(e.to_string()))?;
        domain.constants.extend(doc.constants);
        Problem::new(State::new(doc.initial)?, doc.goal, domain)
    }

    /// All ground actions of the domain, sorted by (operator name, arguments).
    pub fn ground_actions(&self) -> Vec<Action> {
        let mut ops: Vec<&Operator> = self.domain.operators.iter().collect();
        ops.sort_by(|a, b| a.name.cmp(&b.name));
        ops.into_iter()
            .flat_map(|op| ground(op, &self.domain.constants))
            .collect()
    }
}

/// A totally ordered sequence of actions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan {
    pub steps: Vec<Action>,
}

impl Plan {
    pub fn new(steps: Vec<Action>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One action per line.
    pub fn lines(&self) -> Vec<String> {
        self.steps.iter().map(ToString::to_string).collect()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

fn require_ground(a: &Action) -> Result<(), PlannerError> {
    if a.is_ground() {
        Ok(())
    } else {
        Err(PlannerError::UnboundVariable(a.to_string()))
    }
}

/// `precond⁺(a) ⊆ s` and `precond⁻(a) ∩ s = ∅`.
pub fn is_applicable(a: &Action, s: &State) -> Result<bool, PlannerError> {
    require_ground(a)?;
    Ok(applicable_assuming(a, s, &BTreeSet::new()))
}

fn applicable_assuming(a: &Action, s: &State, assumed: &BTreeSet<String>) -> bool {
    a.pre_pos.iter().all(|p| s.contains(p) || assumed.contains(&p.pred)) && a.pre_neg.iter().all(|p| !s.contains(p))
}

/// `(s − del(a)) ∪ add(a)`; the input state is left untouched.
pub fn apply(a: &Action, s: &State) -> Result<State, PlannerError> {
    if !is_applicable(a, s)? {
        return Err(PlannerError::NotApplicable(a.to_string()));
    }
    Ok(a.transition(s))
}

/// Every total binding of the operator's parameters to `constants`, in
/// lexicographic order of the argument tuple.
pub fn ground(op: &Operator, constants: &BTreeSet<String>) -> Vec<Action> {
    let consts: Vec<&String> = constants.iter().collect();
    let k = op.arity();
    let mut out = Vec::new();
    if k > 0 && consts.is_empty() {
        return out;
    }
    let mut idx = vec![0usize; k];
    loop {
        let args: Vec<Term> = idx.iter().map(|&i| Term::Const(consts[i].clone())).collect();
        out.push(op.instantiate(&args).expect("arity matches"));
        // odometer increment, last position fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < consts.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Bounded forward search. Returns a shortest plan of length `<= bound`.
pub fn solve(p: &Problem, bound: usize) -> Option<Plan> {
    solve_assuming(p, bound, &BTreeSet::new())
}

/// Like [`solve`], but positive preconditions over the `assumed` predicates
/// are treated as satisfied. Used by managers to plan around properties
/// they know nothing about.
pub fn solve_assuming(p: &Problem, bound: usize, assumed: &BTreeSet<String>) -> Option<Plan> {
    let actions = p.ground_actions();
    solve_over(&actions, &p.initial, &p.goal, bound, assumed)
}

/// Iterative deepening over pre-grounded actions; tie-break is the order of
/// `actions`.
pub fn solve_over(
    actions: &[Action],
    initial: &State,
    goal: &BTreeSet<Atom>,
    bound: usize,
    assumed: &BTreeSet<String>,
) -> Option<Plan> {
    let goal_holds = |s: &State| goal.iter().all(|g| s.contains(g) || assumed.contains(&g.pred));
    if goal_holds(initial) {
        return Some(Plan::default());
    }
    for depth in 1..=bound {
        // state -> largest remaining depth it was expanded with
        let mut seen: HashMap<State, usize> = HashMap::new();
        let mut path = Vec::new();
        if dfs(actions, initial, depth, &goal_holds, assumed, &mut seen, &mut path) {
            return Some(Plan::new(path.into_iter().map(|i| actions[i].clone()).collect()));
        }
    }
    None
}

fn dfs(
    actions: &[Action],
    s: &State,
    remaining: usize,
    goal_holds: &dyn Fn(&State) -> bool,
    assumed: &BTreeSet<String>,
    seen: &mut HashMap<State, usize>,
    path: &mut Vec<usize>,
) -> bool {
    if goal_holds(s) {
        return true;
    }
    if remaining == 0 {
        return false;
    }
    match seen.get(s) {
        Some(&r) if r >= remaining => return false,
        _ => {
            seen.insert(s.clone(), remaining);
        }
    }
    for (i, a) in actions.iter().enumerate() {
        if !applicable_assuming(a, s, assumed) {
            continue;
        }
        let next = a.transition(s);
        path.push(i);
        if dfs(actions, &next, remaining - 1, goal_holds, assumed, seen, path) {
            return true;
        }
        path.pop();
    }
    false
}

/// Executes `plan` from the initial state, re-instantiating each step from
/// the domain, and checks the goal in the final state.
pub fn validate_plan(p: &Problem, plan: &Plan) -> bool {
    let mut s = p.initial.clone();
    for step in &plan.steps {
        let Some(op) = p.domain.operator(&step.name) else {
            return false;
        };
        let Ok(action) = op.instantiate(&step.args) else {
            return false;
        };
        match apply(&action, &s) {
            Ok(next) => s = next,
            Err(_) => return false,
        }
    }
    s.satisfies(&p.goal)
}

/// Exhaustive breadth-first search used as a test oracle. Shares no search
/// code with [`solve`].
pub fn oracle_solve(p: &Problem, bound: usize) -> Result<Option<Plan>, PlannerError> {
    let actions = p.ground_actions();
    if actions.len() > ORACLE_MAX_ACTIONS || bound > ORACLE_MAX_BOUND {
        return Err(PlannerError::InstanceTooLarge {
            actions: actions.len(),
            bound,
        });
    }
    // Each queue entry is an executable action sequence; a state is only
    // expanded the first time it is reached, at its minimal depth.
    let mut queue: VecDeque<(State, Vec<usize>)> = VecDeque::new();
    let mut reached: HashSet<State> = HashSet::new();
    reached.insert(p.initial.clone());
    queue.push_back((p.initial.clone(), Vec::new()));
    while let Some((state, seq)) = queue.pop_front() {
        if p.goal.iter().all(|g| state.atoms.contains(g)) {
            let steps = seq.iter().map(|&i| actions[i].clone()).collect();
            return Ok(Some(Plan::new(steps)));
        }
        if seq.len() == bound {
            continue;
        }
        for (i, a) in actions.iter().enumerate() {
            let pos_ok = a.pre_pos.iter().all(|q| state.atoms.contains(q));
            let neg_ok = a.pre_neg.iter().all(|q| !state.atoms.contains(q));
            if !(pos_ok && neg_ok) {
                continue;
            }
            let mut atoms: BTreeSet<Atom> = state.atoms.iter().filter(|x| !a.del.contains(x)).cloned().collect();
            atoms.extend(a.add.iter().cloned());
            let next = State { atoms };
            if reached.insert(next.clone()) {
                let mut longer = seq.clone();
                longer.push(i);
                queue.push_back((next, longer));
            }
        }
    }
    Ok(None)
}

/// Operators grouped by name, handy for lookups in hot loops.
pub fn operator_index(ops: &[Operator]) -> BTreeMap<&str, &Operator> {
    ops.iter().map(|o| (o.name.as_str(), o)).collect()
}

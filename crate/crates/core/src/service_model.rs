//! Service descriptions (atomic and composite processes with their inputs,
//! outputs, preconditions and effects) and their translation into planning
//! operators and methods.
//!
//! Descriptions are read from JSON:
//!
//! ```json
//! {"service": "BravoAir", "ownerSubontology": "air-transport",
//!  "describedBy": "BravoAir_Process",
//!  "processes": {
//!    "Login": {"kind": "atomic", "inputs": [{"name": "AcctName", "concept": "AcctName"}],
//!              "preconditions": [{"pred": "account", "args": ["?AcctName"]}]},
//!    "BravoAir_Process": {"kind": "composite",
//!              "body": {"construct": "sequence", "children": [{"ref": "Login"}]}}}}
//! ```
//!
//! Translation starts at the `describedBy` process: an atomic process
//! becomes an operator, a composite one becomes a method whose task network
//! mirrors its control construct, after translating its participants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, Condition, Polarity};
use crate::ontology::Ontology;
use crate::planner::Operator;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown concept `{concept}` on parameter `{parameter}` of `{process}`")]
    UnknownConcept {
        process: String,
        parameter: String,
        concept: String,
    },
    #[error("dangling process reference `{0}`")]
    DanglingReference(String),
    #[error("parameter `{parameter}` uses concept `{concept}` outside sub-ontology `{subontology}`")]
    ForeignConcept {
        parameter: String,
        concept: String,
        subontology: String,
    },
    #[error("predicate `{pred}` used with arities {first} and {second}")]
    ArityMismatch { pred: String, first: usize, second: usize },
    #[error("entry point `{0}` is not defined")]
    UnreachableEntryPoint(String),
    #[error("process `{0}` contains itself")]
    RecursiveProcessCycle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub concept: String,
    #[serde(skip)]
    pub direction: Option<Direction>,
    /// Value supplied by a user request, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl Parameter {
    pub fn input(name: &str, concept: &str) -> Self {
        Parameter {
            name: name.to_string(),
            concept: concept.to_string(),
            direction: Some(Direction::Input),
            value: None,
        }
    }

    pub fn output(name: &str, concept: &str) -> Self {
        Parameter {
            direction: Some(Direction::Output),
            ..Parameter::input(name, concept)
        }
    }

    pub fn with_value(mut self, value: impl Into<String>) -> Self {
        self.value = Some(value.into());
        self
    }

    pub fn variable(&self) -> String {
        format!("?{}", self.name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AtomicProcess {
    #[serde(skip)]
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<Parameter>,
    #[serde(default)]
    pub outputs: Vec<Parameter>,
    #[serde(default)]
    pub preconditions: Vec<Condition>,
    #[serde(default)]
    pub add_effects: Vec<Condition>,
    #[serde(default)]
    pub del_effects: Vec<Condition>,
    /// Service family this step belongs to when it differs from the
    /// description's owner (used by composed requests).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subontology: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompositeProcess {
    #[serde(skip)]
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<Parameter>,
    #[serde(default)]
    pub outputs: Vec<Parameter>,
    /// Surfaced as method guards.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preconditions: Vec<Condition>,
    /// Goals a composite request wants to reach.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add_effects: Vec<Condition>,
    pub body: ControlConstruct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "construct", rename_all = "kebab-case")]
pub enum ControlConstruct {
    Sequence {
        children: Vec<ProcessNode>,
    },
    Split {
        children: Vec<ProcessNode>,
    },
    Choice {
        children: Vec<ProcessNode>,
    },
    IfThenElse {
        condition: Condition,
        then: Box<ProcessNode>,
        #[serde(rename = "else")]
        otherwise: Box<ProcessNode>,
    },
}

impl ControlConstruct {
    fn children(&self) -> Vec<&ProcessNode> {
        match self {
            ControlConstruct::Sequence { children }
            | ControlConstruct::Split { children }
            | ControlConstruct::Choice { children } => children.iter().collect(),
            ControlConstruct::IfThenElse { then, otherwise, .. } => vec![then, otherwise],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProcessNode {
    Ref {
        #[serde(rename = "ref")]
        name: String,
    },
    Construct(ControlConstruct),
}

impl ProcessNode {
    pub fn reference(name: &str) -> Self {
        ProcessNode::Ref { name: name.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Process {
    Atomic(AtomicProcess),
    Composite(CompositeProcess),
}

impl Process {
    pub fn name(&self) -> &str {
        match self {
            Process::Atomic(p) => &p.name,
            Process::Composite(p) => &p.name,
        }
    }

    pub fn inputs(&self) -> &[Parameter] {
        match self {
            Process::Atomic(p) => &p.inputs,
            Process::Composite(p) => &p.inputs,
        }
    }

    pub fn outputs(&self) -> &[Parameter] {
        match self {
            Process::Atomic(p) => &p.outputs,
            Process::Composite(p) => &p.outputs,
        }
    }

    pub fn preconditions(&self) -> &[Condition] {
        match self {
            Process::Atomic(p) => &p.preconditions,
            Process::Composite(p) => &p.preconditions,
        }
    }

    pub fn add_effects(&self) -> &[Condition] {
        match self {
            Process::Atomic(p) => &p.add_effects,
            Process::Composite(p) => &p.add_effects,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Process::Atomic(_))
    }

    fn set_name(&mut self, name: &str) {
        match self {
            Process::Atomic(p) => p.name = name.to_string(),
            Process::Composite(p) => p.name = name.to_string(),
        }
    }

    fn conditions(&self) -> Vec<&Condition> {
        match self {
            Process::Atomic(p) => p
                .preconditions
                .iter()
                .chain(&p.add_effects)
                .chain(&p.del_effects)
                .collect(),
            Process::Composite(p) => {
                let mut out: Vec<&Condition> = p.preconditions.iter().chain(&p.add_effects).collect();
                collect_guards(&p.body, &mut out);
                out
            }
        }
    }
}

fn collect_guards<'a>(c: &'a ControlConstruct, out: &mut Vec<&'a Condition>) {
    if let ControlConstruct::IfThenElse { condition, .. } = c {
        out.push(condition);
    }
    for child in c.children() {
        if let ProcessNode::Construct(inner) = child {
            collect_guards(inner, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceDescription {
    pub service: String,
    pub owner_subontology: String,
    pub described_by: String,
    pub processes: BTreeMap<String, Process>,
}

impl ServiceDescription {
    pub fn entry_point(&self) -> &str {
        &self.described_by
    }

    pub fn entry(&self) -> Option<&Process> {
        self.processes.get(&self.described_by)
    }

    pub fn process(&self, name: &str) -> Option<&Process> {
        self.processes.get(name)
    }

    /// Renames a process and every reference to it.
    pub fn rename_process(&mut self, from: &str, to: &str) {
        if let Some(mut p) = self.processes.remove(from) {
            p.set_name(to);
            self.processes.insert(to.to_string(), p);
        }
        if self.described_by == from {
            self.described_by = to.to_string();
        }
        for p in self.processes.values_mut() {
            if let Process::Composite(c) = p {
                rename_refs(&mut c.body, from, to);
            }
        }
    }

    /// Every parameter of every process, with its owning process name.
    pub fn parameters(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.processes
            .values()
            .flat_map(|p| p.inputs().iter().chain(p.outputs()).map(move |param| (p.name(), param)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("description serializes")
    }

    pub(crate) fn fill_names(&mut self) {
        for (name, p) in self.processes.iter_mut() {
            p.set_name(name);
            let (inputs, outputs) = match p {
                Process::Atomic(a) => (&mut a.inputs, &mut a.outputs),
                Process::Composite(c) => (&mut c.inputs, &mut c.outputs),
            };
            for i in inputs.iter_mut() {
                i.direction = Some(Direction::Input);
            }
            for o in outputs.iter_mut() {
                o.direction = Some(Direction::Output);
            }
        }
    }

    /// Structural checks that do not need an ontology.
    pub fn check(&self) -> Result<(), ServiceError> {
        if !self.processes.contains_key(&self.described_by) {
            return Err(ServiceError::DanglingReference(self.described_by.clone()));
        }
        for p in self.processes.values() {
            if let Process::Composite(c) = p {
                check_construct(&c.body, &self.processes)?;
            }
        }
        let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
        for p in self.processes.values() {
            for c in p.conditions() {
                let n = c.atom.args.len();
                match arities.get(c.atom.pred.as_str()) {
                    Some(&m) if m != n => {
                        return Err(ServiceError::ArityMismatch {
                            pred: c.atom.pred.clone(),
                            first: m,
                            second: n,
                        })
                    }
                    _ => {
                        arities.insert(&c.atom.pred, n);
                    }
                }
            }
            if let Process::Atomic(a) = p {
                if a.add_effects
                    .iter()
                    .chain(&a.del_effects)
                    .any(|e| e.polarity == Polarity::Neg)
                {
                    return Err(ServiceError::Syntax(format!(
                        "effects of `{}` must be positive atoms",
                        a.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn rename_refs(c: &mut ControlConstruct, from: &str, to: &str) {
    let nodes: Vec<&mut ProcessNode> = match c {
        ControlConstruct::Sequence { children }
        | ControlConstruct::Split { children }
        | ControlConstruct::Choice { children } => children.iter_mut().collect(),
        ControlConstruct::IfThenElse { then, otherwise, .. } => vec![then.as_mut(), otherwise.as_mut()],
    };
    for n in nodes {
        match n {
            ProcessNode::Ref { name } if name == from => *name = to.to_string(),
            ProcessNode::Ref { .. } => {}
            ProcessNode::Construct(inner) => rename_refs(inner, from, to),
        }
    }
}

fn check_construct(c: &ControlConstruct, procs: &BTreeMap<String, Process>) -> Result<(), ServiceError> {
    if let ControlConstruct::Sequence { children }
    | ControlConstruct::Split { children }
    | ControlConstruct::Choice { children } = c
    {
        if children.is_empty() {
            return Err(ServiceError::Syntax("control construct without children".into()));
        }
    }
    for child in c.children() {
        match child {
            ProcessNode::Ref { name } if !procs.contains_key(name) => {
                return Err(ServiceError::DanglingReference(name.clone()))
            }
            ProcessNode::Ref { .. } => {}
            ProcessNode::Construct(inner) => check_construct(inner, procs)?,
        }
    }
    Ok(())
}

/// Parses and fully resolves a JSON service description. Every process
/// referenced by a control construct must be defined in the same document.
pub fn parse_service_description(document: &str, onto: &Ontology) -> Result<ServiceDescription, ServiceError> {
    let mut desc: ServiceDescription =
        serde_json::from_str(document).map_err(|e| ServiceError::Syntax(e.to_string()))?;
    desc.fill_names();
    desc.check()?;
    for (process, param) in desc.parameters() {
        if !onto.contains(&param.concept) {
            return Err(ServiceError::UnknownConcept {
                process: process.to_string(),
                parameter: param.name.clone(),
                concept: param.concept.clone(),
            });
        }
    }
    Ok(desc)
}

/// Every parameter concept must belong to the description's sub-ontology.
pub fn validate_against_subontology(desc: &ServiceDescription, onto: &Ontology) -> Result<(), ServiceError> {
    for (_, param) in desc.parameters() {
        if onto.owner(&param.concept) != Some(desc.owner_subontology.as_str()) {
            return Err(ServiceError::ForeignConcept {
                parameter: param.name.clone(),
                concept: param.concept.clone(),
                subontology: desc.owner_subontology.clone(),
            });
        }
    }
    Ok(())
}

/// A reference to a sub-task: `(!Op ?x ?y)` for operators, `(Method ?x)`
/// for methods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRef {
    pub name: String,
    pub primitive: bool,
    pub args: Vec<String>,
}

impl fmt::Display for TaskRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{}", if self.primitive { "!" } else { "" }, self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskNode {
    Task(TaskRef),
    Network(TaskNetwork),
}

/// Task network of a method, mirroring the source control construct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskNetwork {
    Ordered(Vec<TaskNode>),
    Unordered(Vec<TaskNode>),
    /// Exactly one alternative is executed.
    Choice(Vec<TaskNode>),
    Branch {
        guard: Condition,
        then: Box<TaskNode>,
        otherwise: Box<TaskNode>,
    },
}

impl TaskNetwork {
    /// Number of direct children.
    pub fn width(&self) -> usize {
        match self {
            TaskNetwork::Ordered(c) | TaskNetwork::Unordered(c) | TaskNetwork::Choice(c) => c.len(),
            TaskNetwork::Branch { .. } => 2,
        }
    }

    pub fn is_ordered(&self) -> bool {
        matches!(self, TaskNetwork::Ordered(_))
    }

    pub fn tasks(&self) -> Vec<&TaskRef> {
        let mut out = Vec::new();
        self.collect_tasks(&mut out);
        out
    }

    fn collect_tasks<'a>(&'a self, out: &mut Vec<&'a TaskRef>) {
        let visit = |n: &'a TaskNode, out: &mut Vec<&'a TaskRef>| match n {
            TaskNode::Task(t) => out.push(t),
            TaskNode::Network(net) => net.collect_tasks(out),
        };
        match self {
            TaskNetwork::Ordered(c) | TaskNetwork::Unordered(c) | TaskNetwork::Choice(c) => {
                for n in c {
                    visit(n, out);
                }
            }
            TaskNetwork::Branch { then, otherwise, .. } => {
                visit(then, out);
                visit(otherwise, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub params: Vec<String>,
    #[serde(default)]
    pub guards: Vec<Condition>,
    pub network: TaskNetwork,
}

/// Operators and methods produced from one description.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translation {
    pub operators: Vec<Operator>,
    pub methods: Vec<Method>,
}

impl Translation {
    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.name == name)
    }

    /// Depth-first expansion of `task` down to operator names.
    pub fn flatten(&self, task: &str) -> Vec<String> {
        match self.method(task) {
            None => vec![task.to_string()],
            Some(m) => m
                .network
                .tasks()
                .into_iter()
                .flat_map(|t| {
                    if t.primitive {
                        vec![t.name.clone()]
                    } else {
                        self.flatten(&t.name)
                    }
                })
                .collect(),
        }
    }
}

/// Recursive translation starting at the entry point.
pub fn translate_to_domain(desc: &ServiceDescription) -> Result<Translation, ServiceError> {
    if desc.entry().is_none() {
        return Err(ServiceError::UnreachableEntryPoint(desc.described_by.clone()));
    }
    let mut out = Translation::default();
    let mut done = BTreeSet::new();
    let mut stack = Vec::new();
    translate_process(desc, &desc.described_by, &mut out, &mut done, &mut stack)?;
    Ok(out)
}

fn translate_process(
    desc: &ServiceDescription,
    name: &str,
    out: &mut Translation,
    done: &mut BTreeSet<String>,
    stack: &mut Vec<String>,
) -> Result<(), ServiceError> {
    if stack.iter().any(|s| s == name) {
        return Err(ServiceError::RecursiveProcessCycle(name.to_string()));
    }
    if done.contains(name) {
        return Ok(());
    }
    let process = desc
        .process(name)
        .ok_or_else(|| ServiceError::DanglingReference(name.to_string()))?;
    match process {
        Process::Atomic(a) => {
            out.operators.push(atomic_to_operator(a)?);
        }
        Process::Composite(c) => {
            stack.push(name.to_string());
            let network = translate_construct(desc, &c.body, out, done, stack)?;
            stack.pop();
            out.methods.push(Method {
                name: c.name.clone(),
                params: c.inputs.iter().map(Parameter::variable).collect(),
                guards: c.preconditions.clone(),
                network,
            });
        }
    }
    done.insert(name.to_string());
    Ok(())
}

fn translate_construct(
    desc: &ServiceDescription,
    c: &ControlConstruct,
    out: &mut Translation,
    done: &mut BTreeSet<String>,
    stack: &mut Vec<String>,
) -> Result<TaskNetwork, ServiceError> {
    let mut node = |n: &ProcessNode, out: &mut Translation| -> Result<TaskNode, ServiceError> {
        match n {
            ProcessNode::Ref { name } => {
                translate_process(desc, name, out, done, stack)?;
                let p = desc.process(name).expect("checked above");
                let args = match p {
                    Process::Atomic(_) => out.operator(name).expect("translated").params.clone(),
                    Process::Composite(_) => out.method(name).expect("translated").params.clone(),
                };
                Ok(TaskNode::Task(TaskRef {
                    name: name.clone(),
                    primitive: p.is_atomic(),
                    args,
                }))
            }
            ProcessNode::Construct(inner) => Ok(TaskNode::Network(translate_construct(desc, inner, out, done, stack)?)),
        }
    };
    Ok(match c {
        ControlConstruct::Sequence { children } => {
            TaskNetwork::Ordered(children.iter().map(|n| node(n, out)).collect::<Result<_, _>>()?)
        }
        ControlConstruct::Split { children } => {
            TaskNetwork::Unordered(children.iter().map(|n| node(n, out)).collect::<Result<_, _>>()?)
        }
        ControlConstruct::Choice { children } => {
            TaskNetwork::Choice(children.iter().map(|n| node(n, out)).collect::<Result<_, _>>()?)
        }
        ControlConstruct::IfThenElse {
            condition,
            then,
            otherwise,
        } => {
            let then = Box::new(node(then, out)?);
            let otherwise = Box::new(node(otherwise, out)?);
            TaskNetwork::Branch {
                guard: condition.clone(),
                then,
                otherwise,
            }
        }
    })
}

/// Parameters are the inputs, then any other variable of the conditions in
/// order of first appearance.
fn atomic_to_operator(a: &AtomicProcess) -> Result<Operator, ServiceError> {
    let mut params: Vec<String> = a.inputs.iter().map(Parameter::variable).collect();
    let conds = a.preconditions.iter().chain(&a.add_effects).chain(&a.del_effects);
    for c in conds {
        for v in c.atom.vars() {
            if !params.iter().any(|p| p == v) {
                params.push(v.to_string());
            }
        }
    }
    let split = |pol: Polarity| -> Vec<Atom> {
        a.preconditions
            .iter()
            .filter(|c| c.polarity == pol)
            .map(|c| c.atom.clone())
            .collect()
    };
    let atoms = |cs: &[Condition]| cs.iter().map(|c| c.atom.clone()).collect();
    Operator::new(
        a.name.clone(),
        params,
        split(Polarity::Pos),
        split(Polarity::Neg),
        atoms(&a.add_effects),
        atoms(&a.del_effects),
    )
    .map_err(|e| ServiceError::Syntax(e.to_string()))
}

/// Left-to-right leaf order of the construct tree under `process`.
pub fn leaf_order(desc: &ServiceDescription, process: &str) -> Vec<String> {
    fn walk(desc: &ServiceDescription, n: &ProcessNode, out: &mut Vec<String>) {
        match n {
            ProcessNode::Ref { name } => match desc.process(name) {
                Some(Process::Composite(c)) => {
                    for child in c.body.children() {
                        walk(desc, child, out);
                    }
                }
                _ => out.push(name.clone()),
            },
            ProcessNode::Construct(c) => {
                for child in c.children() {
                    walk(desc, child, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(desc, &ProcessNode::reference(process), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BRAVO_AIR: &str = r#"{
      "service": "BravoAir",
      "ownerSubontology": "air-transport",
      "describedBy": "BravoAir_Process",
      "processes": {
        "BravoAir_Process": {"kind": "composite",
          "body": {"construct": "sequence", "children": [
            {"ref": "GetDesiredFlightDetails"}, {"ref": "SelectAvailableFlight"}, {"ref": "BookFlight"}]}},
        "BookFlight": {"kind": "composite",
          "body": {"construct": "sequence", "children": [{"ref": "Login"}, {"ref": "ConfirmReservation"}]}},
        "GetDesiredFlightDetails": {"kind": "atomic",
          "inputs": [{"name": "From", "concept": "Airport"}, {"name": "To", "concept": "Airport"}],
          "addEffects": [{"pred": "wants", "args": ["?From", "?To"]}]},
        "SelectAvailableFlight": {"kind": "atomic",
          "inputs": [{"name": "From", "concept": "Airport"}, {"name": "To", "concept": "Airport"}],
          "outputs": [{"name": "Flight", "concept": "Flight"}],
          "preconditions": [{"pred": "wants", "args": ["?From", "?To"]}, {"pred": "ExistTGV", "args": ["?From", "?To"], "polarity": "neg"}],
          "addEffects": [{"pred": "selected", "args": ["?From", "?To"]}]},
        "Login": {"kind": "atomic",
          "inputs": [{"name": "AcctName", "concept": "AcctName"}, {"name": "Password", "concept": "Password"}],
          "addEffects": [{"pred": "logged-in", "args": ["?AcctName"]}]},
        "ConfirmReservation": {"kind": "atomic",
          "inputs": [{"name": "AcctName", "concept": "AcctName"}],
          "preconditions": [{"pred": "logged-in", "args": ["?AcctName"]}, {"pred": "selected", "args": ["?From", "?To"]}],
          "addEffects": [{"pred": "booked", "args": ["?From", "?To"]}]}
      }
    }"#;

    pub(crate) fn air_ontology() -> Ontology {
        Ontology::from_json(
            r#"{"partitions": {"air-transport": ["Airport", "Flight", "AcctName", "Password", "City", "Date", "FlightID", "CreditCard"],
                               "hotels": ["Hotel", "Room"]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_bravo_air() {
        let d = parse_service_description(BRAVO_AIR, &air_ontology()).unwrap();
        let atomic = d.processes.values().filter(|p| p.is_atomic()).count();
        assert_eq!((atomic, d.processes.len() - atomic), (4, 2));
        assert_eq!(d.entry_point(), "BravoAir_Process");
        assert_eq!(
            d.process("Login").unwrap().inputs()[0].direction,
            Some(Direction::Input)
        );
    }

    #[test]
    fn parse_errors() {
        let onto = air_ontology();
        let missing = BRAVO_AIR.replace(r#""describedBy": "BravoAir_Process""#, r#""describedBy": "Nope""#);
        assert_eq!(
            parse_service_description(&missing, &onto),
            Err(ServiceError::DanglingReference("Nope".into()))
        );
        let dangling = BRAVO_AIR.replace(r#"{"ref": "Login"}"#, r#"{"ref": "LogOn"}"#);
        assert_eq!(
            parse_service_description(&dangling, &onto),
            Err(ServiceError::DanglingReference("LogOn".into()))
        );
        let unknown = BRAVO_AIR.replace(r#""concept": "Flight""#, r#""concept": "Plane""#);
        assert!(matches!(
            parse_service_description(&unknown, &onto),
            Err(ServiceError::UnknownConcept { .. })
        ));
        assert!(matches!(
            parse_service_description("{", &onto),
            Err(ServiceError::Syntax(_))
        ));
        let arity = BRAVO_AIR.replace(
            r#"{"pred": "logged-in", "args": ["?AcctName"]}]"#,
            r#"{"pred": "logged-in", "args": ["?AcctName", "x"]}]"#,
        );
        assert!(matches!(
            parse_service_description(&arity, &onto),
            Err(ServiceError::ArityMismatch { .. })
        ));
        let empty = BRAVO_AIR.replace(
            r#""children": [{"ref": "Login"}, {"ref": "ConfirmReservation"}]"#,
            r#""children": []"#,
        );
        assert!(matches!(
            parse_service_description(&empty, &onto),
            Err(ServiceError::Syntax(_))
        ));
    }

    fn single(onto: &Ontology, concept: &str) -> ServiceDescription {
        let text = format!(
            r#"{{"service": "S", "ownerSubontology": "air-transport", "describedBy": "P",
                "processes": {{"P": {{"kind": "atomic", "inputs": [{{"name": "x", "concept": "{concept}"}}]}}}}}}"#
        );
        parse_service_description(&text, onto).unwrap()
    }

    #[test]
    fn single_process_description() {
        let onto = air_ontology();
        let mut d = single(&onto, "Flight");
        assert_eq!(d.processes.len(), 1);
        assert_eq!(d.entry_point(), "P");
        d.rename_process("P", "Q");
        assert_eq!(d.entry_point(), "Q");
        assert_eq!(d.entry().unwrap().name(), "Q");
    }

    #[test]
    fn subontology_validation() {
        let onto = air_ontology();
        assert!(validate_against_subontology(&single(&onto, "Flight"), &onto).is_ok());
        assert_eq!(
            validate_against_subontology(&single(&onto, "Hotel"), &onto),
            Err(ServiceError::ForeignConcept {
                parameter: "x".into(),
                concept: "Hotel".into(),
                subontology: "air-transport".into()
            })
        );
        let mut empty = single(&onto, "Flight");
        if let Some(Process::Atomic(a)) = empty.processes.get_mut("P") {
            a.inputs.clear();
        }
        assert!(validate_against_subontology(&empty, &onto).is_ok());
    }

    #[test]
    fn translates_bravo_air() {
        let d = parse_service_description(BRAVO_AIR, &air_ontology()).unwrap();
        let t = translate_to_domain(&d).unwrap();
        assert_eq!(t.operators.len(), 4);
        assert_eq!(t.methods.len(), 2);
        let outer = t.method("BravoAir_Process").unwrap();
        assert!(outer.network.is_ordered());
        assert_eq!(outer.network.width(), 3);
        let inner = t.method("BookFlight").unwrap();
        assert!(inner.network.is_ordered());
        assert_eq!(inner.network.width(), 2);
        assert_eq!(
            t.flatten("BravoAir_Process"),
            vec![
                "GetDesiredFlightDetails",
                "SelectAvailableFlight",
                "Login",
                "ConfirmReservation"
            ]
        );
        assert_eq!(t.flatten("BravoAir_Process"), leaf_order(&d, "BravoAir_Process"));

        // free variables of conditions follow the inputs
        let confirm = t.operator("ConfirmReservation").unwrap();
        assert_eq!(confirm.params, vec!["?AcctName", "?From", "?To"]);
        let select = t.operator("SelectAvailableFlight").unwrap();
        assert_eq!(select.pre_neg[0].to_string(), "ExistTGV(?From,?To)");
        assert_eq!(translate_to_domain(&d).unwrap(), t);
    }

    #[test]
    fn agent_flight_reservation_method() {
        let onto = air_ontology();
        let text = r#"{"service": "AgentFlight", "ownerSubontology": "air-transport", "describedBy": "AgentFlightReservation",
          "processes": {
            "AgentFlightReservation": {"kind": "composite",
              "inputs": [{"name": "AFR_From", "concept": "City"}, {"name": "AFR_Date", "concept": "Date"},
                         {"name": "AFR_To", "concept": "City"}, {"name": "AFR_CC", "concept": "CreditCard"}],
              "body": {"construct": "sequence", "children": [{"ref": "SearchFlight"}, {"ref": "MakeReservation"}]}},
            "SearchFlight": {"kind": "atomic",
              "inputs": [{"name": "AFR_From", "concept": "City"}, {"name": "AFR_To", "concept": "City"}, {"name": "AFR_Date", "concept": "Date"}],
              "outputs": [{"name": "FlightID", "concept": "FlightID"}]},
            "MakeReservation": {"kind": "atomic",
              "inputs": [{"name": "FlightID", "concept": "FlightID"}, {"name": "AFR_CC", "concept": "CreditCard"}]}
          }}"#;
        let d = parse_service_description(text, &onto).unwrap();
        let t = translate_to_domain(&d).unwrap();
        assert_eq!((t.operators.len(), t.methods.len()), (2, 1));
        let m = &t.methods[0];
        assert_eq!(m.params, vec!["?AFR_From", "?AFR_Date", "?AFR_To", "?AFR_CC"]);
        let tasks: Vec<String> = m.network.tasks().iter().map(|t| t.to_string()).collect();
        assert_eq!(
            tasks,
            vec![
                "(!SearchFlight ?AFR_From ?AFR_To ?AFR_Date)",
                "(!MakeReservation ?FlightID ?AFR_CC)"
            ]
        );
    }

    #[test]
    fn atomic_hotel_reservation() {
        let onto = air_ontology();
        let text = r#"{"service": "Hotel", "ownerSubontology": "hotels", "describedBy": "AgentHotelReservation",
          "processes": {"AgentHotelReservation": {"kind": "atomic",
            "inputs": [{"name": "Hotel", "concept": "Hotel"}],
            "preconditions": [{"pred": "free", "args": ["?Hotel", "?Room"]}],
            "addEffects": [{"pred": "booked", "args": ["?Room"]}],
            "delEffects": [{"pred": "free", "args": ["?Hotel", "?Room"]}]}}}"#;
        let d = parse_service_description(text, &onto).unwrap();
        let t = translate_to_domain(&d).unwrap();
        assert_eq!((t.operators.len(), t.methods.len()), (1, 0));
        let op = &t.operators[0];
        assert_eq!(op.name, "AgentHotelReservation");
        assert_eq!(op.params, vec!["?Hotel", "?Room"]);
        assert_eq!(op.add.len(), 1);
        assert_eq!(op.del.len(), 1);
    }

    #[test]
    fn split_choice_and_branch() {
        let onto = air_ontology();
        let text = r#"{"service": "S", "ownerSubontology": "air-transport", "describedBy": "Top",
          "processes": {
            "Top": {"kind": "composite", "body": {"construct": "split", "children": [
              {"ref": "A"},
              {"construct": "choice", "children": [{"ref": "B"}, {"ref": "C"}]},
              {"construct": "if-then-else", "condition": {"pred": "cheap"}, "then": {"ref": "A"}, "else": {"ref": "C"}}]}},
            "A": {"kind": "atomic"}, "B": {"kind": "atomic"}, "C": {"kind": "atomic"}
          }}"#;
        let d = parse_service_description(text, &onto).unwrap();
        let t = translate_to_domain(&d).unwrap();
        assert_eq!((t.operators.len(), t.methods.len()), (3, 1));
        let net = &t.methods[0].network;
        let TaskNetwork::Unordered(children) = net else {
            panic!("split -> unordered")
        };
        assert!(matches!(children[1], TaskNode::Network(TaskNetwork::Choice(_))));
        assert!(matches!(children[2], TaskNode::Network(TaskNetwork::Branch { .. })));
    }

    #[test]
    fn rejects_recursive_processes() {
        let onto = air_ontology();
        let text = r#"{"service": "S", "ownerSubontology": "air-transport", "describedBy": "A",
          "processes": {
            "A": {"kind": "composite", "body": {"construct": "sequence", "children": [{"ref": "B"}]}},
            "B": {"kind": "composite", "body": {"construct": "sequence", "children": [{"ref": "A"}]}}}}"#;
        let d = parse_service_description(text, &onto).unwrap();
        assert_eq!(
            translate_to_domain(&d),
            Err(ServiceError::RecursiveProcessCycle("A".into()))
        );

        let mut orphan = d.clone();
        orphan.described_by = "Z".into();
        assert_eq!(
            translate_to_domain(&orphan),
            Err(ServiceError::UnreachableEntryPoint("Z".into()))
        );
    }
}

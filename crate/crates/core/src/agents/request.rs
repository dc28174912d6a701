//! Request constructor: turns a customer XML request into a service
//! description.
//!
//! A tag with child tags is a class; its leaf children are attributes, valued
//! when their text is non-empty. Valued attributes become inputs, empty ones
//! outputs. Classes spread over several sub-ontologies yield a composite
//! process with one atomic child per sub-ontology, in document order.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use thiserror::Error;

use crate::logic::{Atom, Condition, Polarity, Substitution, Term};
use crate::ontology::Ontology;
use crate::planner::State;
use crate::service_model::{
    AtomicProcess, CompositeProcess, ControlConstruct, Parameter, Process, ProcessNode, ServiceDescription,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("class `{0}` is not a concept of the ontology")]
    UnknownClassConcept(String),
    #[error("template atom `{0}` mentions a variable with no request value")]
    UnboundTemplate(String),
    #[error("request description is not usable: {0}")]
    BadDescription(String),
}

/// Owned XML element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub tag: String,
    pub attributes: BTreeMap<String, String>,
    pub children: Vec<Element>,
    pub text: String,
}

impl Element {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn from_node(node: roxmltree::Node<'_, '_>) -> Element {
        let text = node
            .children()
            .filter(|c| c.is_text())
            .filter_map(|c| c.text())
            .collect::<String>()
            .trim()
            .to_string();
        Element {
            tag: node.tag_name().name().to_string(),
            attributes: node
                .attributes()
                .map(|a| (a.name().to_string(), a.value().to_string()))
                .collect(),
            children: node
                .children()
                .filter(|c| c.is_element())
                .map(Element::from_node)
                .collect(),
            text,
        }
    }
}

/// A parsed request. XML attributes are kept on the tree but take no part
/// in class extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestDocument {
    pub root: Element,
}

impl FromStr for RequestDocument {
    type Err = RequestError;

    fn from_str(xml: &str) -> Result<Self, Self::Err> {
        let doc = roxmltree::Document::parse(xml).map_err(|e| RequestError::MalformedDocument(e.to_string()))?;
        Ok(RequestDocument {
            root: Element::from_node(doc.root_element()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInstance {
    pub class: String,
    pub attributes: Vec<Attribute>,
}

impl ClassInstance {
    /// `None` if the attribute is missing, `Some(None)` if it is requested.
    pub fn get(&self, name: &str) -> Option<Option<&str>> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.value.as_deref())
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter().filter(|a| a.value.is_some())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter().filter(|a| a.value.is_none())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceKind {
    Simple,
    Composed,
}

/// One instance per tag having child tags, in document (pre-)order.
pub fn rc_cross_xml(doc: &RequestDocument) -> Result<Vec<ClassInstance>, RequestError> {
    fn walk(e: &Element, out: &mut Vec<ClassInstance>) {
        if e.is_leaf() {
            return;
        }
        out.push(ClassInstance {
            class: e.tag.clone(),
            attributes: e
                .children
                .iter()
                .filter(|c| c.is_leaf())
                .map(|c| Attribute {
                    name: c.tag.clone(),
                    value: (!c.text.is_empty()).then(|| c.text.clone()),
                })
                .collect(),
        });
        for c in &e.children {
            walk(c, out);
        }
    }
    let mut out = Vec::new();
    walk(&doc.root, &mut out);
    if out.is_empty() {
        return Err(RequestError::MalformedDocument(format!(
            "root `{}` has no child tags, no class can form",
            doc.root.tag
        )));
    }
    Ok(out)
}

/// Classes holding attributes, grouped by owning sub-ontology in order of
/// first appearance. Attribute-less classes only nest other classes.
fn partitions<'a>(
    instances: &'a [ClassInstance],
    onto: &Ontology,
) -> Result<Vec<(String, Vec<&'a ClassInstance>)>, RequestError> {
    let mut groups: Vec<(String, Vec<&ClassInstance>)> = Vec::new();
    for inst in instances.iter().filter(|i| !i.attributes.is_empty()) {
        let owner = onto
            .owner(&inst.class)
            .ok_or_else(|| RequestError::UnknownClassConcept(inst.class.clone()))?;
        match groups.iter_mut().find(|(p, _)| p == owner) {
            Some((_, members)) => members.push(inst),
            None => groups.push((owner.to_string(), vec![inst])),
        }
    }
    Ok(groups)
}

pub fn rc_classify_service(instances: &[ClassInstance], onto: &Ontology) -> Result<ServiceKind, RequestError> {
    Ok(if partitions(instances, onto)?.len() > 1 {
        ServiceKind::Composed
    } else {
        ServiceKind::Simple
    })
}

/// Name of the composite entry process of a composed request.
pub const COMPOSED_ENTRY: &str = "Request";

pub fn rc_produce_description(
    instances: &[ClassInstance],
    kind: ServiceKind,
    onto: &Ontology,
) -> Result<ServiceDescription, RequestError> {
    let groups = partitions(instances, onto)?;
    let Some((first_owner, _)) = groups.first() else {
        return Err(RequestError::MalformedDocument("no class carries attributes".into()));
    };
    let mut used = BTreeSet::new();
    let mut atomic: Vec<AtomicProcess> = Vec::new();
    for (owner, members) in &groups {
        let mut p = AtomicProcess {
            name: members.iter().map(|m| m.class.as_str()).collect::<Vec<_>>().join("_"),
            subontology: Some(owner.clone()),
            ..AtomicProcess::default()
        };
        for inst in members {
            for attr in &inst.attributes {
                let concept = if onto.contains(&attr.name) {
                    &attr.name
                } else {
                    &inst.class
                };
                let name = if used.insert(attr.name.clone()) {
                    attr.name.clone()
                } else {
                    format!("{}_{}", inst.class, attr.name)
                };
                used.insert(name.clone());
                match &attr.value {
                    Some(v) => p.inputs.push(Parameter::input(&name, concept).with_value(v.clone())),
                    None => p.outputs.push(Parameter::output(&name, concept)),
                }
            }
        }
        atomic.push(p);
    }
    let mut processes = BTreeMap::new();
    let described_by = match kind {
        ServiceKind::Simple => {
            let mut merged = atomic.remove(0);
            for other in atomic {
                merged.name = format!("{}_{}", merged.name, other.name);
                merged.inputs.extend(other.inputs);
                merged.outputs.extend(other.outputs);
            }
            merged.subontology = None;
            let name = merged.name.clone();
            processes.insert(name.clone(), Process::Atomic(merged));
            name
        }
        ServiceKind::Composed => {
            let composite = CompositeProcess {
                name: COMPOSED_ENTRY.to_string(),
                inputs: atomic.iter().flat_map(|a| a.inputs.clone()).collect(),
                outputs: atomic.iter().flat_map(|a| a.outputs.clone()).collect(),
                preconditions: vec![],
                add_effects: vec![],
                body: ControlConstruct::Sequence {
                    children: atomic.iter().map(|a| ProcessNode::reference(&a.name)).collect(),
                },
            };
            for a in atomic {
                processes.insert(a.name.clone(), Process::Atomic(a));
            }
            processes.insert(COMPOSED_ENTRY.to_string(), Process::Composite(composite));
            COMPOSED_ENTRY.to_string()
        }
    };
    let mut desc = ServiceDescription {
        service: "request".to_string(),
        owner_subontology: first_owner.clone(),
        described_by,
        processes,
    };
    desc.fill_names();
    desc.check().map_err(|e| RequestError::BadDescription(e.to_string()))?;
    Ok(desc)
}

/// Instantiates the initial-state and goal templates with the request's
/// input values and stores them on the entry process, as preconditions and
/// add effects respectively.
pub fn bind_request(
    desc: &ServiceDescription,
    initial: &[Atom],
    goal: &[Atom],
) -> Result<ServiceDescription, RequestError> {
    let entry = desc
        .entry()
        .ok_or_else(|| RequestError::BadDescription(format!("no entry process `{}`", desc.described_by)))?;
    let subst: Substitution = entry
        .inputs()
        .iter()
        .filter_map(|p| p.value.as_ref().map(|v| (p.variable(), Term::Const(v.clone()))))
        .collect();
    let bind = |atoms: &[Atom]| -> Result<Vec<Condition>, RequestError> {
        atoms
            .iter()
            .map(|a| {
                let g = a.substitute(&subst);
                if g.is_ground() {
                    Ok(Condition::pos(g))
                } else {
                    Err(RequestError::UnboundTemplate(a.to_string()))
                }
            })
            .collect()
    };
    let (pre, add) = (bind(initial)?, bind(goal)?);
    let mut out = desc.clone();
    match out.processes.get_mut(&desc.described_by).expect("entry exists") {
        Process::Atomic(a) => {
            a.preconditions = pre;
            a.add_effects = add;
        }
        Process::Composite(c) => {
            c.preconditions = pre;
            c.add_effects = add;
        }
    }
    Ok(out)
}

/// Reads back the initial state and goal of a bound request.
pub fn request_problem(desc: &ServiceDescription) -> Result<(State, Vec<Atom>), RequestError> {
    let entry = desc
        .entry()
        .ok_or_else(|| RequestError::BadDescription(format!("no entry process `{}`", desc.described_by)))?;
    let mut initial = Vec::new();
    for c in entry.preconditions() {
        if c.polarity == Polarity::Neg {
            return Err(RequestError::BadDescription(format!(
                "negative initial fact `{}`",
                c.atom
            )));
        }
        initial.push(c.atom.clone());
    }
    let state = State::new(initial).map_err(|e| RequestError::BadDescription(e.to_string()))?;
    let goal = entry.add_effects().iter().map(|c| c.atom.clone()).collect::<Vec<_>>();
    if let Some(g) = goal.iter().find(|g| !g.is_ground()) {
        return Err(RequestError::BadDescription(format!("goal `{g}` is not ground")));
    }
    Ok((state, goal))
}

//! Scenario files and the registry they populate.
//!
//! A scenario is a JSON document whose paths are relative to its own
//! directory:
//!
//! ```json
//! {"ontology": "ontology.json",
//!  "services": ["airways.json", "bank.json"],
//!  "agents": [{"id": "airways", "role": "manager", "subontology": "air-transport",
//!              "service": "Airways", "kb": ["route(Lyon,Paris)"]}],
//!  "selectionTable": [{"group": "1", "service": "Air transport",
//!                      "subontology": "air-transport", "agents": ["airways"]}],
//!  "request": {"document": "trip.xml", "initial": ["at(?From)"], "goal": ["at(?To)"]},
//!  "seed": 7, "maxCycles": 32, "planBound": 6}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::agents::composer::DEFAULT_MAX_CYCLES;
use crate::agents::general_manager::{SelectionRow, SelectionTable};
use crate::agents::manager::{Competences, KnowledgeBase, ManagerAgent, DEFAULT_BOUND};
use crate::agents::request::RequestDocument;
use crate::agents::AgentId;
use crate::logic::Atom;
use crate::ontology::Ontology;
use crate::service_model::{parse_service_description, validate_against_subontology, ServiceDescription};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("dangling reference: {0}")]
    Dangling(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Manager,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRecord {
    pub role: Role,
    pub subontology: String,
    pub service: String,
    pub kb: KnowledgeBase,
}

/// Services by name and agents by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    pub services: BTreeMap<String, ServiceDescription>,
    pub agents: BTreeMap<AgentId, AgentRecord>,
}

/// The request: an XML document plus initial-state and goal templates over
/// its attribute variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestSpec {
    pub document: RequestDocument,
    pub initial: Vec<Atom>,
    pub goal: Vec<Atom>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub ontology: Ontology,
    pub registry: Registry,
    /// Manager ids in roster (file) order.
    pub roster: Vec<AgentId>,
    pub table: SelectionTable,
    pub request: RequestSpec,
    pub seed: u64,
    pub max_cycles: usize,
    pub plan_bound: usize,
}

impl Scenario {
    /// Manager agents in roster order.
    pub fn managers(&self) -> Result<Vec<ManagerAgent>, ScenarioError> {
        self.roster
            .iter()
            .map(|id| {
                let rec = &self.registry.agents[id];
                let service = &self.registry.services[&rec.service];
                let competences = Competences::from_description(service)
                    .map_err(|e| ScenarioError::Dangling(format!("service {}: {e}", rec.service)))?;
                Ok(ManagerAgent::new(id, &rec.subontology, competences, rec.kb.clone()).with_bound(self.plan_bound))
            })
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ScenarioDoc {
    ontology: PathBuf,
    #[serde(default)]
    services: Vec<PathBuf>,
    #[serde(default)]
    agents: Vec<AgentDoc>,
    #[serde(default)]
    selection_table: Vec<SelectionRow>,
    request: RequestDoc,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_cycles")]
    max_cycles: usize,
    #[serde(default = "default_bound")]
    plan_bound: usize,
}

fn default_cycles() -> usize {
    DEFAULT_MAX_CYCLES
}

fn default_bound() -> usize {
    DEFAULT_BOUND
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentDoc {
    id: AgentId,
    role: Role,
    subontology: String,
    service: String,
    #[serde(default)]
    kb: Vec<Atom>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestDoc {
    document: PathBuf,
    #[serde(default)]
    initial: Vec<Atom>,
    #[serde(default)]
    goal: Vec<Atom>,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn schema(path: &Path, message: impl ToString) -> ScenarioError {
    ScenarioError::Schema {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Reads a scenario and every file it references, checking all
/// cross-references.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let doc: ScenarioDoc = serde_json::from_str(&read(path)?).map_err(|e| schema(path, e))?;

    let onto_path = dir.join(&doc.ontology);
    let ontology = Ontology::from_json(&read(&onto_path)?).map_err(|e| schema(&onto_path, e))?;

    let mut registry = Registry::default();
    for rel in &doc.services {
        let p = dir.join(rel);
        let desc = parse_service_description(&read(&p)?, &ontology).map_err(|e| schema(&p, e))?;
        if ontology.partition(&desc.owner_subontology).is_none() {
            return Err(ScenarioError::Dangling(format!(
                "service {} names unknown sub-ontology {}",
                desc.service, desc.owner_subontology
            )));
        }
        validate_against_subontology(&desc, &ontology).map_err(|e| schema(&p, e))?;
        registry.services.insert(desc.service.clone(), desc);
    }

    let mut roster = Vec::new();
    for a in doc.agents {
        let Some(service) = registry.services.get(&a.service) else {
            return Err(ScenarioError::Dangling(format!(
                "agent {} uses unknown service {}",
                a.id, a.service
            )));
        };
        if ontology.partition(&a.subontology).is_none() {
            return Err(ScenarioError::Dangling(format!(
                "agent {} owns unknown sub-ontology {}",
                a.id, a.subontology
            )));
        }
        if service.owner_subontology != a.subontology {
            return Err(schema(
                path,
                format!(
                    "agent {} owns {} but its service belongs to {}",
                    a.id, a.subontology, service.owner_subontology
                ),
            ));
        }
        let kb = KnowledgeBase::new(a.kb).map_err(|e| schema(path, format!("agent {}: {e}", a.id)))?;
        if registry.agents.contains_key(&a.id) {
            return Err(schema(path, format!("duplicate agent {}", a.id)));
        }
        roster.push(a.id.clone());
        registry.agents.insert(
            a.id,
            AgentRecord {
                role: a.role,
                subontology: a.subontology,
                service: a.service,
                kb,
            },
        );
    }

    let mut subontologies = BTreeSet::new();
    for row in &doc.selection_table {
        if let Some(a) = row.agents.iter().find(|a| !registry.agents.contains_key(*a)) {
            return Err(ScenarioError::Dangling(format!(
                "selection table group {} lists unknown agent {a}",
                row.group
            )));
        }
        if ontology.partition(&row.subontology).is_none() {
            return Err(ScenarioError::Dangling(format!(
                "selection table group {} names unknown sub-ontology {}",
                row.group, row.subontology
            )));
        }
        if !subontologies.insert(row.subontology.clone()) {
            return Err(schema(
                path,
                format!("two selection-table rows serve {}", row.subontology),
            ));
        }
    }
    let table = SelectionTable::new(doc.selection_table).map_err(|e| schema(path, e))?;

    let req_path = dir.join(&doc.request.document);
    let document: RequestDocument = read(&req_path)?.parse().map_err(|e| schema(&req_path, e))?;

    Ok(Scenario {
        ontology,
        registry,
        roster,
        table,
        request: RequestSpec {
            document,
            initial: doc.request.initial,
            goal: doc.request.goal,
        },
        seed: doc.seed,
        max_cycles: doc.max_cycles,
        plan_bound: doc.plan_bound,
    })
}

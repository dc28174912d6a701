//! Concepts, subsumption and semantic matching of service parameters.
//!
//! The ontology is a DAG of named concepts, partitioned into sub-ontologies
//! (one per service family). Matching compares a *provided* concept (for
//! example the output of one service) against a *required* one (the input
//! slot of the next service).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("concept `{0}` already exists")]
    DuplicateName(String),
    #[error("unknown sub-ontology `{0}`")]
    UnknownPartition(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("subsumption {child} -> {parent} would introduce a cycle")]
    CycleIntroduced { child: String, parent: String },
    #[error("invalid ontology document: {0}")]
    Syntax(String),
}

/// Result of comparing a provided concept with a required one.
///
/// Variants are declared from worst to best so the derived `Ord` is the
/// preference order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchDegree {
    Fail,
    Subsume,
    PlugIn,
    Exact,
}

impl MatchDegree {
    /// Exact and PlugIn are total matches; only those allow chaining.
    pub fn is_total(self) -> bool {
        matches!(self, MatchDegree::Exact | MatchDegree::PlugIn)
    }
}

#[derive(Debug, Default)]
pub struct Ontology {
    owners: BTreeMap<String, String>,
    partitions: BTreeMap<String, BTreeSet<String>>,
    parents: BTreeMap<String, BTreeSet<String>>,
    closure: OnceLock<BTreeMap<String, BTreeSet<String>>>,
}

impl Clone for Ontology {
    fn clone(&self) -> Self {
        Ontology {
            owners: self.owners.clone(),
            partitions: self.partitions.clone(),
            parents: self.parents.clone(),
            closure: OnceLock::new(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OntologyDoc {
    partitions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    subsumption: Vec<(String, String)>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses the JSON form:
    /// `{"partitions": {"<id>": ["<concept>", ...]}, "subsumption": [["child","parent"], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let doc: OntologyDoc = serde_json::from_str(text).map_err(|e| OntologyError::Syntax(e.to_string()))?;
        let mut onto = Ontology::new();
        for (id, concepts) in &doc.partitions {
            onto.add_partition(id);
            for c in concepts {
                onto.add_concept(c, id)?;
            }
        }
        for (child, parent) in &doc.subsumption {
            onto.add_subsumption(child, parent)?;
        }
        Ok(onto)
    }

    pub fn to_json(&self) -> String {
        let doc = OntologyDoc {
            partitions: self
                .partitions
                .iter()
                .map(|(id, cs)| (id.clone(), cs.iter().cloned().collect()))
                .collect(),
            subsumption: self
                .parents
                .iter()
                .flat_map(|(c, ps)| ps.iter().map(move |p| (c.clone(), p.clone())))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("ontology serializes")
    }

    /// Declares a (possibly empty) sub-ontology. Idempotent.
    pub fn add_partition(&mut self, id: &str) {
        self.partitions.entry(id.to_string()).or_default();
    }

    pub fn add_concept(&mut self, name: &str, owner: &str) -> Result<(), OntologyError> {
        if self.owners.contains_key(name) {
            return Err(OntologyError::DuplicateName(name.to_string()));
        }
        let part = self
            .partitions
            .get_mut(owner)
            .ok_or_else(|| OntologyError::UnknownPartition(owner.to_string()))?;
        part.insert(name.to_string());
        self.owners.insert(name.to_string(), owner.to_string());
        self.closure = OnceLock::new();
        Ok(())
    }

    pub fn add_subsumption(&mut self, child: &str, parent: &str) -> Result<(), OntologyError> {
        self.require(child)?;
        self.require(parent)?;
        // The edge closes a cycle iff child is already reachable from parent.
        if self.reaches(parent, child) {
            return Err(OntologyError::CycleIntroduced {
                child: child.to_string(),
                parent: parent.to_string(),
            });
        }
        self.parents
            .entry(child.to_string())
            .or_default()
            .insert(parent.to_string());
        self.closure = OnceLock::new();
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.owners.contains_key(name)
    }

    /// Sub-ontology owning `name`.
    pub fn owner(&self, name: &str) -> Option<&str> {
        self.owners.get(name).map(String::as_str)
    }

    pub fn partition(&self, id: &str) -> Option<&BTreeSet<String>> {
        self.partitions.get(id)
    }

    pub fn partition_ids(&self) -> impl Iterator<Item = &str> {
        self.partitions.keys().map(String::as_str)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.owners.keys().map(String::as_str)
    }

    pub fn direct_parents(&self, name: &str) -> impl Iterator<Item = &str> {
        self.parents.get(name).into_iter().flatten().map(String::as_str)
    }

    /// Reflexive-transitive subsumption: `child ⊑ ancestor`.
    pub fn is_subsumed(&self, child: &str, ancestor: &str) -> Result<bool, OntologyError> {
        self.require(child)?;
        self.require(ancestor)?;
        Ok(self.ancestors()[child].contains(ancestor))
    }

    pub fn match_degree(&self, provided: &str, required: &str) -> Result<MatchDegree, OntologyError> {
        self.require(provided)?;
        self.require(required)?;
        let up = self.ancestors();
        Ok(if provided == required {
            MatchDegree::Exact
        } else if up[provided].contains(required) {
            MatchDegree::PlugIn
        } else if up[required].contains(provided) {
            MatchDegree::Subsume
        } else {
            MatchDegree::Fail
        })
    }

    pub fn compatible_for_chaining(&self, provided: &str, required: &str) -> Result<bool, OntologyError> {
        Ok(self.match_degree(provided, required)?.is_total())
    }

    fn require(&self, name: &str) -> Result<(), OntologyError> {
        if self.contains(name) {
            Ok(())
        } else {
            Err(OntologyError::UnknownConcept(name.to_string()))
        }
    }

    fn reaches(&self, from: &str, to: &str) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if c == to {
                return true;
            }
            if seen.insert(c) {
                stack.extend(self.direct_parents(c));
            }
        }
        false
    }

    fn ancestors(&self) -> &BTreeMap<String, BTreeSet<String>> {
        self.closure.get_or_init(|| {
            let mut memo: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for c in self.owners.keys() {
                self.collect_ancestors(c, &mut memo);
            }
            memo
        })
    }

    fn collect_ancestors(&self, c: &str, memo: &mut BTreeMap<String, BTreeSet<String>>) {
        if memo.contains_key(c) {
            return;
        }
        let mut set = BTreeSet::from([c.to_string()]);
        let parents: Vec<String> = self.direct_parents(c).map(str::to_string).collect();
        for p in parents {
            self.collect_ancestors(&p, memo);
            set.extend(memo[&p].iter().cloned());
        }
        memo.insert(c.to_string(), set);
    }
}

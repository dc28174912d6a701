//! Routing of requests through the selection table.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentError, AgentId, Outcome, GENERAL_MANAGER};
use crate::runtime::bus::{Bus, DispatchBody, Kind, ResultBody};
use crate::service_model::{leaf_order, Process, ServiceDescription};

/// One service family with its agents, best performer first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub group: String,
    pub service: String,
    pub subontology: String,
    pub agents: Vec<AgentId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SelectionTable {
    rows: Vec<SelectionRow>,
}

impl SelectionTable {
    /// Every row needs at least one agent and no agent may serve two rows.
    pub fn new(rows: Vec<SelectionRow>) -> Result<Self, AgentError> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if r.agents.is_empty() {
                return Err(AgentError::BadTable(format!("group {} has no agents", r.group)));
            }
            for a in &r.agents {
                if !seen.insert(a.as_str()) {
                    return Err(AgentError::BadTable(format!("agent {a} appears in two rows")));
                }
            }
        }
        Ok(SelectionTable { rows })
    }

    pub fn rows(&self) -> &[SelectionRow] {
        &self.rows
    }

    pub fn row_for(&self, subontology: &str) -> Option<&SelectionRow> {
        self.rows.iter().find(|r| r.subontology == subontology)
    }

    /// The best agent of the row serving `subontology`.
    pub fn best(&self, subontology: &str) -> Result<&AgentId, AgentError> {
        self.row_for(subontology)
            .map(|r| &r.agents[0])
            .ok_or_else(|| AgentError::NoMatchingRow(subontology.to_string()))
    }
}

impl<'de> Deserialize<'de> for SelectionTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<SelectionRow>::deserialize(d)?;
        SelectionTable::new(rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Route {
    Manager(AgentId),
    Composer(Vec<AgentId>),
}

fn family<'a>(desc: &'a ServiceDescription, process: &'a str) -> &'a str {
    match desc.process(process) {
        Some(Process::Atomic(a)) => a.subontology.as_deref().unwrap_or(&desc.owner_subontology),
        _ => &desc.owner_subontology,
    }
}

/// Atomic entry points go to one manager; composite ones to the composer
/// with the best agent of every sub-ontology the leaves belong to.
pub fn gm_route(desc: &ServiceDescription, table: &SelectionTable) -> Result<Route, AgentError> {
    let entry = desc
        .entry()
        .ok_or_else(|| AgentError::Protocol(format!("no entry process `{}`", desc.described_by)))?;
    if entry.is_atomic() {
        return Ok(Route::Manager(table.best(family(desc, entry.name()))?.clone()));
    }
    let mut group: Vec<AgentId> = Vec::new();
    for leaf in leaf_order(desc, entry.name()) {
        let agent = table.best(family(desc, &leaf))?;
        if !group.contains(agent) {
            group.push(agent.clone());
        }
    }
    Ok(Route::Composer(group))
}

/// Sends an atomic request to `agent` and relays its answer.
pub fn gm_dispatch_atomic(desc: &ServiceDescription, agent: &str, bus: &mut Bus) -> Result<Outcome, AgentError> {
    if !bus.is_registered(agent) {
        return Err(AgentError::AgentUnreachable(agent.to_string()));
    }
    let order = bus.post(
        GENERAL_MANAGER,
        agent,
        Kind::Dispatch,
        DispatchBody {
            description: desc.clone(),
        },
    );
    let replies = bus.deliver(&order)?;
    let reply = replies
        .first()
        .ok_or_else(|| AgentError::Protocol(format!("{agent} did not answer")))?;
    match reply.kind {
        Kind::Result => Ok(Outcome::Plan(reply.body::<ResultBody>()?.plan)),
        Kind::Failure => Ok(Outcome::Failure(reply.body()?)),
        other => Err(AgentError::Protocol(format!("unexpected {other} from {agent}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service_model::{AtomicProcess, CompositeProcess, ControlConstruct, ProcessNode};
    use std::collections::BTreeMap;

    fn table() -> SelectionTable {
        let row = |g: &str, s: &str, o: &str, a: &[&str]| SelectionRow {
            group: g.into(),
            service: s.into(),
            subontology: o.into(),
            agents: a.iter().map(|x| x.to_string()).collect(),
        };
        SelectionTable::new(vec![
            row("1", "Air transport", "air-transport", &["a1", "a12", "a24"]),
            row("2", "Reservation of hotels", "hotels", &["a34"]),
            row("3", "Payment service", "payment", &["a101", "a3", "a2"]),
        ])
        .unwrap()
    }

    fn atomic(service: &str, owner: &str, name: &str) -> ServiceDescription {
        ServiceDescription {
            service: service.into(),
            owner_subontology: owner.into(),
            described_by: name.into(),
            processes: BTreeMap::from([(
                name.to_string(),
                Process::Atomic(AtomicProcess {
                    name: name.into(),
                    ..AtomicProcess::default()
                }),
            )]),
        }
    }

    #[test]
    fn atomic_goes_to_best_agent() {
        let d = atomic("Accounts", "payment", "LogIn");
        assert_eq!(gm_route(&d, &table()).unwrap(), Route::Manager("a101".into()));
    }

    #[test]
    fn missing_family() {
        let d = atomic("Cars", "car-rental", "Rent");
        assert_eq!(
            gm_route(&d, &table()),
            Err(AgentError::NoMatchingRow("car-rental".into()))
        );
    }

    #[test]
    fn composite_groups_by_family() {
        let mut d = atomic("request", "air-transport", "Flight");
        let hotel = AtomicProcess {
            name: "Hotel".into(),
            subontology: Some("hotels".into()),
            ..AtomicProcess::default()
        };
        d.processes.insert("Hotel".into(), Process::Atomic(hotel));
        d.processes.insert(
            "Request".into(),
            Process::Composite(CompositeProcess {
                name: "Request".into(),
                inputs: vec![],
                outputs: vec![],
                preconditions: vec![],
                add_effects: vec![],
                body: ControlConstruct::Sequence {
                    children: vec![ProcessNode::reference("Flight"), ProcessNode::reference("Hotel")],
                },
            }),
        );
        d.described_by = "Request".into();
        assert_eq!(
            gm_route(&d, &table()).unwrap(),
            Route::Composer(vec!["a1".into(), "a34".into()])
        );
    }

    #[test]
    fn table_invariants() {
        let row = |a: &[&str]| SelectionRow {
            group: "g".into(),
            service: "s".into(),
            subontology: "o".into(),
            agents: a.iter().map(|x| x.to_string()).collect(),
        };
        assert!(SelectionTable::new(vec![row(&[])]).is_err());
        assert!(SelectionTable::new(vec![row(&["a"]), row(&["a"])]).is_err());
        let parsed: Result<SelectionTable, _> =
            serde_json::from_str(r#"[{"group":"1","service":"s","subontology":"o","agents":[]}]"#);
        assert!(parsed.is_err());
    }
}

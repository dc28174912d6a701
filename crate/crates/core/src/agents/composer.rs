//! The composer: drives the dialogue cycle over a storage board.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::agents::manager::Proposal;
use crate::agents::request::request_problem;
use crate::agents::{AgentError, AgentId, FailureReport, Outcome, COMPOSER, GENERAL_MANAGER};
use crate::conjecture::Conjecture;
use crate::runtime::bus::{Bus, Envelope, Kind, ProposalsBody, RefineBody, ResultBody};
use crate::service_model::ServiceDescription;

pub const DEFAULT_MAX_CYCLES: usize = 32;

pub type ConjectureId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposerConfig {
    pub max_cycles: usize,
    /// Board entries with more real steps than this are discarded.
    pub max_steps: Option<usize>,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        ComposerConfig {
            max_cycles: DEFAULT_MAX_CYCLES,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoardEntry {
    pub conjecture: Conjecture,
    pub origin: AgentId,
    pub cycle: usize,
    pub hypotheses: usize,
    pub solution: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub id: ConjectureId,
    pub origin: AgentId,
    pub cycle: usize,
    pub steps: usize,
    pub hypotheses: usize,
}

/// Board state after one dialogue cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardSnapshot {
    pub cycle: usize,
    pub selected: Option<ConjectureId>,
    pub added: Vec<EntrySummary>,
    pub frontier: Vec<ConjectureId>,
}

/// Append-only store of conjectures. Ids are insertion indices; the
/// frontier keeps unexplored ids in insertion order.
#[derive(Debug, Clone, Default)]
pub struct StorageBoard {
    entries: Vec<BoardEntry>,
    frontier: Vec<ConjectureId>,
    seen: HashSet<String>,
}

impl StorageBoard {
    /// Stores `c` unless an identical conjecture is already on the board.
    pub fn add(&mut self, c: Conjecture, origin: &str, cycle: usize) -> Option<ConjectureId> {
        if !self.seen.insert(c.to_json()) {
            return None;
        }
        let id = self.entries.len() as ConjectureId;
        self.entries.push(BoardEntry {
            hypotheses: c.hypotheses().len(),
            solution: c.is_solution(),
            conjecture: c,
            origin: origin.to_string(),
            cycle,
        });
        self.frontier.push(id);
        Some(id)
    }

    /// Applies `proposals` to entry `basis` and stores the results that
    /// graft cleanly and respect `max_steps`.
    pub fn absorb(
        &mut self,
        basis: ConjectureId,
        proposals: &[Proposal],
        origin: &str,
        cycle: usize,
        max_steps: Option<usize>,
    ) -> Result<Vec<ConjectureId>, AgentError> {
        let base = self
            .get(basis)
            .ok_or_else(|| AgentError::Protocol(format!("unknown conjecture {basis}")))?
            .conjecture
            .clone();
        let mut added = Vec::new();
        for p in proposals {
            let Ok(next) = p.apply(&base) else { continue };
            if max_steps.is_some_and(|m| next.real_steps().count() > m) {
                continue;
            }
            added.extend(self.add(next, origin, cycle));
        }
        Ok(added)
    }

    /// Removes and returns the frontier entry with the fewest hypotheses,
    /// the oldest among equals.
    pub fn select(&mut self) -> Option<ConjectureId> {
        let (pos, _) = self
            .frontier
            .iter()
            .enumerate()
            .min_by_key(|(i, &id)| (self.entries[id as usize].hypotheses, *i))?;
        Some(self.frontier.remove(pos))
    }

    pub fn get(&self, id: ConjectureId) -> Option<&BoardEntry> {
        self.entries.get(id as usize)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frontier(&self) -> &[ConjectureId] {
        &self.frontier
    }

    pub fn summary(&self, id: ConjectureId) -> EntrySummary {
        let e = &self.entries[id as usize];
        EntrySummary {
            id,
            origin: e.origin.clone(),
            cycle: e.cycle,
            steps: e.conjecture.real_steps().count(),
            hypotheses: e.hypotheses,
        }
    }

    pub fn summaries(&self) -> Vec<EntrySummary> {
        (0..self.entries.len() as ConjectureId)
            .map(|id| self.summary(id))
            .collect()
    }

    pub fn snapshot(&self, cycle: usize, selected: Option<ConjectureId>, added: &[ConjectureId]) -> BoardSnapshot {
        BoardSnapshot {
            cycle,
            selected,
            added: added.iter().map(|&id| self.summary(id)).collect(),
            frontier: self.frontier.clone(),
        }
    }
}

fn finish(bus: &mut Bus, board: &StorageBoard, id: ConjectureId) -> Outcome {
    let plan = board.entries[id as usize]
        .conjecture
        .linearize()
        .expect("solutions linearize");
    bus.post(
        COMPOSER,
        GENERAL_MANAGER,
        Kind::Result,
        ResultBody { plan: plan.clone() },
    );
    Outcome::Plan(plan)
}

/// Runs the dialogue for the request `goal` with the managers in `group`.
///
/// Each cycle the selected conjecture goes to every member in scheduler
/// order; their proposals are grafted onto it and stored. The run ends at
/// the first stored solution, when the frontier empties, or after
/// `max_cycles` cycles.
pub fn composer_run(
    goal: &ServiceDescription,
    group: &[AgentId],
    bus: &mut Bus,
    config: ComposerConfig,
) -> Result<Outcome, AgentError> {
    if group.is_empty() {
        return Err(AgentError::NoAgents);
    }
    if let Some(a) = group.iter().find(|a| !bus.is_registered(a)) {
        return Err(AgentError::AgentUnreachable(a.clone()));
    }
    let (s0, g) = request_problem(goal)?;
    let mut board = StorageBoard::default();
    let root = board
        .add(Conjecture::from_goal(&s0, &g), COMPOSER, 0)
        .expect("empty board");
    if board.entries[0].solution {
        bus.snapshot(board.snapshot(0, None, &[root]));
        return Ok(finish(bus, &board, root));
    }
    let members = bus.ordered(group);
    let mut selected = board.select();
    let mut cycle = 0;
    while cycle < config.max_cycles {
        let Some(basis) = selected else { break };
        let kind = if cycle == 0 {
            Kind::InitialConjecture
        } else {
            Kind::Refinement
        };
        let body = RefineBody {
            cycle,
            conjecture_id: basis,
            conjecture: board.entries[basis as usize].conjecture.clone(),
        };
        let orders: Vec<Envelope> = members.iter().map(|m| bus.post(COMPOSER, m, kind, &body)).collect();
        let mut added = Vec::new();
        for order in &orders {
            for reply in bus.deliver(order)? {
                if reply.kind != Kind::Refinement {
                    return Err(AgentError::Protocol(format!(
                        "unexpected {} from {}",
                        reply.kind, reply.from
                    )));
                }
                let p: ProposalsBody = reply.body()?;
                added.extend(board.absorb(p.basis, &p.proposals, &reply.from, cycle + 1, config.max_steps)?);
            }
        }
        bus.snapshot(board.snapshot(cycle, Some(basis), &added));
        cycle += 1;
        if let Some(&sol) = added.iter().find(|&&id| board.entries[id as usize].solution) {
            return Ok(finish(bus, &board, sol));
        }
        selected = board.select();
    }
    let reason = if selected.is_none() {
        "frontier-exhausted"
    } else {
        "cycle-budget-exhausted"
    };
    let report = FailureReport {
        board: board.summaries(),
        ..FailureReport::new(reason)
    };
    bus.post(COMPOSER, GENERAL_MANAGER, Kind::Failure, &report);
    Ok(Outcome::Failure(report))
}

//! Deterministic simulation of a composition run: scenario loading, the
//! request pipeline over the bus, transcripts and replay.

pub mod bus;
pub mod scenario;

use thiserror::Error;

use crate::agents::composer::{composer_run, ComposerConfig, StorageBoard};
use crate::agents::general_manager::{gm_dispatch_atomic, gm_route, Route};
use crate::agents::request::{
    bind_request, rc_classify_service, rc_cross_xml, rc_produce_description, request_problem,
};
use crate::agents::{AgentError, FailureReport, Outcome, COMPOSER, GENERAL_MANAGER, REQUEST_CONSTRUCTOR};
use crate::conjecture::Conjecture;

pub use bus::{Bus, Envelope, Kind, Line, Transcript};
pub use scenario::{load_scenario, Registry, Scenario, ScenarioError};

use bus::{ComposeBody, ProposalsBody, RefineBody, RequestBody, ResultBody};

/// Addressee of the final outcome envelope.
pub const USER: &str = "user";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub outcome: Outcome,
    pub transcript: Transcript,
}

/// Request constructor, general manager, then either one manager or the
/// composer with its group. Agent errors end the run as a failure.
pub fn run(s: &Scenario) -> Result<RunOutput, ScenarioError> {
    let mut bus = Bus::new(s.managers()?, s.seed);
    let outcome = pipeline(s, &mut bus).unwrap_or_else(|e| Outcome::Failure(FailureReport::from(&e)));
    match &outcome {
        Outcome::Plan(plan) => bus.post(GENERAL_MANAGER, USER, Kind::Result, ResultBody { plan: plan.clone() }),
        Outcome::Failure(r) => bus.post(GENERAL_MANAGER, USER, Kind::Failure, r),
    };
    Ok(RunOutput {
        outcome,
        transcript: bus.into_transcript(),
    })
}

fn pipeline(s: &Scenario, bus: &mut Bus) -> Result<Outcome, AgentError> {
    if s.roster.is_empty() {
        return Err(AgentError::NoAgents);
    }
    let instances = rc_cross_xml(&s.request.document)?;
    let kind = rc_classify_service(&instances, &s.ontology)?;
    let produced = rc_produce_description(&instances, kind, &s.ontology)?;
    let desc = bind_request(&produced, &s.request.initial, &s.request.goal)?;
    bus.post(
        REQUEST_CONSTRUCTOR,
        GENERAL_MANAGER,
        Kind::Request,
        RequestBody {
            description: desc.clone(),
        },
    );
    match gm_route(&desc, &s.table)? {
        Route::Manager(agent) => gm_dispatch_atomic(&desc, &agent, bus),
        Route::Composer(group) => {
            let config = ComposerConfig {
                max_cycles: s.max_cycles,
                max_steps: Some(s.plan_bound),
            };
            bus.post(
                GENERAL_MANAGER,
                COMPOSER,
                Kind::Dispatch,
                ComposeBody {
                    description: desc.clone(),
                    group: group.clone(),
                    max_cycles: config.max_cycles,
                    max_steps: config.max_steps,
                },
            );
            composer_run(&desc, &group, bus, config)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("corrupt transcript: {0}")]
    Corrupt(String),
}

fn corrupt(m: impl Into<String>) -> ReplayError {
    ReplayError::Corrupt(m.into())
}

fn decode_outcome(e: &Envelope) -> Result<Outcome, ReplayError> {
    let bad = |err: AgentError| corrupt(err.to_string());
    match e.kind {
        Kind::Result => Ok(Outcome::Plan(e.body::<ResultBody>().map_err(bad)?.plan)),
        Kind::Failure => Ok(Outcome::Failure(e.body().map_err(bad)?)),
        other => Err(corrupt(format!("#{} is {other}, not an outcome", e.seq))),
    }
}

/// Re-derives the outcome of a recorded run from its messages alone.
///
/// For compositions the board is rebuilt by grafting the recorded proposals
/// and checked against every snapshot; no planner is invoked.
pub fn replay(t: &Transcript) -> Result<Outcome, ReplayError> {
    if t.lines.is_empty() {
        return Err(corrupt("empty transcript"));
    }
    for (i, e) in t.envelopes().enumerate() {
        if e.seq != i as u64 {
            return Err(corrupt(format!("expected seq {i}, found {}", e.seq)));
        }
    }
    let last = match t.lines.last() {
        Some(Line::Envelope(e)) if e.to == USER && matches!(e.kind, Kind::Result | Kind::Failure) => e,
        _ => return Err(corrupt("truncated: no final outcome")),
    };
    let recorded = decode_outcome(last)?;
    let dispatch = t
        .envelopes()
        .find(|e| e.kind == Kind::Dispatch && e.from == GENERAL_MANAGER);
    let derived = match dispatch {
        None if matches!(recorded, Outcome::Failure(_)) => recorded.clone(),
        None => return Err(corrupt("a plan without any dispatch")),
        Some(d) if d.to == COMPOSER => replay_composition(t, d)?,
        Some(d) => {
            let reply = t
                .envelopes()
                .find(|e| e.seq > d.seq && e.from == d.to && e.to == GENERAL_MANAGER)
                .ok_or_else(|| corrupt(format!("no answer from {}", d.to)))?;
            decode_outcome(reply)?
        }
    };
    if derived != recorded {
        return Err(corrupt("replayed outcome differs from the recorded one"));
    }
    Ok(derived)
}

fn replay_composition(t: &Transcript, dispatch: &Envelope) -> Result<Outcome, ReplayError> {
    let body: ComposeBody = dispatch.body().map_err(|e| corrupt(e.to_string()))?;
    let (s0, goal) = request_problem(&body.description).map_err(|e| corrupt(e.to_string()))?;
    let mut board = StorageBoard::default();
    let root = board.add(Conjecture::from_goal(&s0, &goal), COMPOSER, 0).expect("empty board");
    let start = t
        .lines
        .iter()
        .position(|l| matches!(l, Line::Envelope(e) if e.seq == dispatch.seq))
        .expect("dispatch is in the transcript");
    let mut basis = None;
    let mut added = if board.get(root).is_some_and(|e| e.solution) {
        vec![root]
    } else {
        Vec::new()
    };
    for line in &t.lines[start + 1..] {
        match line {
            Line::Envelope(e) if e.from == COMPOSER && matches!(e.kind, Kind::InitialConjecture | Kind::Refinement) => {
                let order: RefineBody = e.body().map_err(|x| corrupt(x.to_string()))?;
                if basis != Some(order.conjecture_id) {
                    let next = board.select();
                    if next != Some(order.conjecture_id) {
                        return Err(corrupt(format!(
                            "#{} refines {} but the board selects {next:?}",
                            e.seq, order.conjecture_id
                        )));
                    }
                    basis = next;
                }
                if board.get(order.conjecture_id).map(|x| &x.conjecture) != Some(&order.conjecture) {
                    return Err(corrupt(format!("#{} carries a conjecture not on the board", e.seq)));
                }
            }
            Line::Envelope(e) if e.to == COMPOSER && e.kind == Kind::Refinement => {
                let p: ProposalsBody = e.body().map_err(|x| corrupt(x.to_string()))?;
                let ids = board
                    .absorb(p.basis, &p.proposals, &e.from, p.cycle + 1, body.max_steps)
                    .map_err(|x| corrupt(x.to_string()))?;
                added.extend(ids);
            }
            Line::Envelope(e) if e.from == COMPOSER => break,
            Line::Envelope(_) => {}
            Line::Snapshot(s) => {
                if s != &board.snapshot(s.cycle, s.selected, &added) {
                    return Err(corrupt(format!("board differs from snapshot of cycle {}", s.cycle)));
                }
                added.clear();
            }
        }
    }
    let solved = (0..board.len() as u32).find(|&id| board.get(id).is_some_and(|e| e.solution));
    Ok(match solved {
        Some(id) => Outcome::Plan(
            board
                .get(id)
                .expect("known id")
                .conjecture
                .linearize()
                .map_err(|e| corrupt(e.to_string()))?,
        ),
        None => {
            let reason = if board.select().is_none() {
                "frontier-exhausted"
            } else {
                "cycle-budget-exhausted"
            };
            Outcome::Failure(FailureReport {
                board: board.summaries(),
                ..FailureReport::new(reason)
            })
        }
    })
}

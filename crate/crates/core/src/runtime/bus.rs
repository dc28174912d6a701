//! In-process message bus and the transcript it records.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::composer::BoardSnapshot;
use crate::agents::manager::{ManagerAgent, Proposal};
use crate::agents::{AgentError, AgentId};
use crate::conjecture::Conjecture;
use crate::planner::Plan;
use crate::service_model::ServiceDescription;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Request,
    InitialConjecture,
    Refinement,
    Dispatch,
    Result,
    Failure,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub from: AgentId,
    pub to: AgentId,
    pub kind: Kind,
    pub payload: Value,
}

impl Envelope {
    /// Decodes the payload into the schema of its kind.
    pub fn body<T: DeserializeOwned>(&self) -> Result<T, AgentError> {
        serde_json::from_value(self.payload.clone())
            .map_err(|e| AgentError::Protocol(format!("{} #{}: {e}", self.kind, self.seq)))
    }
}

// Payload schemas, one per (kind, direction).

/// `Request`: request constructor to general manager.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestBody {
    pub description: ServiceDescription,
}

/// `Dispatch` to a manager: plan this atomic request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchBody {
    pub description: ServiceDescription,
}

/// `Dispatch` to the composer: compose with this group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComposeBody {
    pub description: ServiceDescription,
    pub group: Vec<AgentId>,
    pub max_cycles: usize,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

/// `InitialConjecture` or `Refinement` from the composer: refine this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RefineBody {
    pub cycle: usize,
    pub conjecture_id: u32,
    pub conjecture: Conjecture,
}

/// `Refinement` from a manager: proposals against `basis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalsBody {
    pub cycle: usize,
    pub basis: u32,
    pub proposals: Vec<Proposal>,
}

/// `Result`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBody {
    pub plan: Plan,
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Line {
    Envelope(Envelope),
    Snapshot(BoardSnapshot),
}

/// Envelopes in seq order interleaved with per-cycle board snapshots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    pub lines: Vec<Line>,
}

impl Transcript {
    pub fn envelopes(&self) -> impl Iterator<Item = &Envelope> {
        self.lines.iter().filter_map(|l| match l {
            Line::Envelope(e) => Some(e),
            Line::Snapshot(_) => None,
        })
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &BoardSnapshot> {
        self.lines.iter().filter_map(|l| match l {
            Line::Snapshot(s) => Some(s),
            Line::Envelope(_) => None,
        })
    }

    /// JSON-lines, one line per entry, newline terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&serde_json::to_string(l).expect("transcript line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Transcript, serde_json::Error> {
        let lines = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Transcript { lines })
    }

    /// Final `Result` or `Failure` envelope addressed to `to`.
    pub fn outcome_envelope(&self, to: &str) -> Option<&Envelope> {
        self.envelopes()
            .filter(|e| e.to == to && matches!(e.kind, Kind::Result | Kind::Failure))
            .last()
    }
}

/// Delivers envelopes to registered managers in a fixed order.
///
/// The roster is shuffled once with the seed; broadcasts then follow that
/// order and every reply is stamped with the next sequence number.
#[derive(Debug)]
pub struct Bus {
    managers: BTreeMap<AgentId, ManagerAgent>,
    schedule: Vec<AgentId>,
    transcript: Transcript,
    next_seq: u64,
}

impl Bus {
    pub fn new(roster: Vec<ManagerAgent>, seed: u64) -> Bus {
        let mut schedule: Vec<AgentId> = roster.iter().map(|m| m.id.clone()).collect();
        schedule.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Bus {
            managers: roster.into_iter().map(|m| (m.id.clone(), m)).collect(),
            schedule,
            transcript: Transcript::default(),
            next_seq: 0,
        }
    }

    pub fn schedule(&self) -> &[AgentId] {
        &self.schedule
    }

    pub fn is_registered(&self, id: &str) -> bool {
        self.managers.contains_key(id)
    }

    pub fn manager(&self, id: &str) -> Option<&ManagerAgent> {
        self.managers.get(id)
    }

    /// `group` in scheduler order.
    pub fn ordered(&self, group: &[AgentId]) -> Vec<AgentId> {
        self.schedule.iter().filter(|a| group.contains(a)).cloned().collect()
    }

    pub fn post(&mut self, from: &str, to: &str, kind: Kind, payload: impl Serialize) -> Envelope {
        let e = Envelope {
            seq: self.next_seq,
            from: from.to_string(),
            to: to.to_string(),
            kind,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        };
        self.next_seq += 1;
        self.transcript.lines.push(Line::Envelope(e.clone()));
        e
    }

    /// Hands `e` to its addressee and posts the replies.
    pub fn deliver(&mut self, e: &Envelope) -> Result<Vec<Envelope>, AgentError> {
        let agent = self
            .managers
            .get(&e.to)
            .ok_or_else(|| AgentError::AgentUnreachable(e.to.clone()))?;
        let replies = agent.handle(e)?;
        Ok(replies
            .into_iter()
            .map(|(kind, payload)| self.post(&e.to, &e.from, kind, payload))
            .collect())
    }

    pub fn snapshot(&mut self, s: BoardSnapshot) {
        self.transcript.lines.push(Line::Snapshot(s));
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}

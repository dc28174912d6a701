//! The agent roles: request constructor, general manager, composer and
//! managers.

pub mod composer;
pub mod general_manager;
pub mod manager;
pub mod request;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::Plan;

pub type AgentId = String;

pub const REQUEST_CONSTRUCTOR: &str = "request-constructor";
pub const GENERAL_MANAGER: &str = "general-manager";
pub const COMPOSER: &str = "composer";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("no manager agents to compose with")]
    NoAgents,
    #[error("agent `{0}` is not registered")]
    AgentUnreachable(String),
    #[error("no selection-table row serves sub-ontology `{0}`")]
    NoMatchingRow(String),
    #[error("invalid selection table: {0}")]
    BadTable(String),
    #[error(transparent)]
    Request(#[from] request::RequestError),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl AgentError {
    /// Short kebab-case name of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            AgentError::NoAgents => "no-agents",
            AgentError::AgentUnreachable(_) => "agent-unreachable",
            AgentError::NoMatchingRow(_) => "no-matching-row",
            AgentError::BadTable(_) => "bad-table",
            AgentError::Request(request::RequestError::MalformedDocument(_)) => "malformed-document",
            AgentError::Request(request::RequestError::UnknownClassConcept(_)) => "unknown-class-concept",
            AgentError::Request(_) => "bad-request",
            AgentError::Protocol(_) => "protocol",
        }
    }
}

/// Why a composition or dispatch produced no plan, with the final board.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default)]
    pub board: Vec<composer::EntrySummary>,
}

impl FailureReport {
    pub fn new(reason: impl Into<String>) -> Self {
        FailureReport {
            reason: reason.into(),
            detail: None,
            board: Vec::new(),
        }
    }
}

impl From<&AgentError> for FailureReport {
    fn from(e: &AgentError) -> Self {
        FailureReport {
            detail: Some(e.to_string()),
            ..FailureReport::new(e.code())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Plan(Plan),
    Failure(FailureReport),
}

impl Outcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            Outcome::Plan(p) => Some(p),
            Outcome::Failure(_) => None,
        }
    }
}

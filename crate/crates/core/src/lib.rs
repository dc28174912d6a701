//! Service composition through dialectic plan synthesis.
//!
//! A composer agent and a group of manager agents co-construct a
//! partial-order plan (a *conjecture*) by exchanging refinements and open
//! hypotheses. The building blocks are:
//!
//! * [`ontology`]: concepts, subsumption and the four-degree matcher.
//! * [`service_model`]: service descriptions and their translation into
//!   planning operators and methods.
//! * [`planner`]: a STRIPS core (applicability, transitions, bounded search,
//!   validation, and an exhaustive oracle).
//! * [`conjecture`]: partial plans with causal links and instantiation
//!   constraints.
//! * [`agents`]: request construction, routing, composer and manager roles.
//! * [`runtime`]: the deterministic bus, scenarios, transcripts and replay.

pub mod agents;
pub mod conjecture;
pub mod logic;
pub mod ontology;
pub mod planner;
pub mod runtime;
pub mod service_model;

#[cfg(test)]
pub(crate) mod testing;

pub use conjecture::{CausalLink, Conjecture, Fragment, Hypothesis, StepId};
pub use logic::{Atom, Condition, Polarity, Term};
pub use ontology::{MatchDegree, Ontology};
pub use planner::{Action, Domain, Operator, Plan, Problem, State};
pub use service_model::ServiceDescription;

//! Shared fixtures for unit tests.

use std::collections::BTreeSet;

use crate::logic::Atom;
use crate::planner::{Domain, Operator, Problem, State};

pub fn atom(s: &str) -> Atom {
    s.parse().unwrap()
}

pub fn atoms(items: &[&str]) -> Vec<Atom> {
    items.iter().map(|s| atom(s)).collect()
}

pub fn state(items: &[&str]) -> State {
    State::new(atoms(items)).unwrap()
}

pub fn op(name: &str, params: &[&str], pre: &[&str], neg: &[&str], add: &[&str], del: &[&str]) -> Operator {
    Operator::new(
        name,
        params.iter().map(|s| s.to_string()).collect(),
        atoms(pre),
        atoms(neg),
        atoms(add),
        atoms(del),
    )
    .unwrap()
}

pub fn reserve_flight() -> Operator {
    op(
        "ReserveFlight",
        &["?From", "?To", "?Fare"],
        &[
            "at(?From)",
            "route(?From,?To)",
            "fare(?From,?To,?Fare)",
            "settled(?From)",
        ],
        &[],
        &["at(?To)", "owes(?From,?To,?Fare)"],
        &["at(?From)"],
    )
}

pub fn pay() -> Operator {
    op(
        "Pay",
        &["?From", "?To", "?Fare"],
        &["owes(?From,?To,?Fare)", "funds-ok"],
        &[],
        &["paid(?From,?To,?Fare)", "settled(?To)"],
        &["owes(?From,?To,?Fare)"],
    )
}

pub fn travel_domain() -> Domain {
    Domain::new(vec![reserve_flight(), pay()], vec![], BTreeSet::new()).unwrap()
}

pub const TRAVEL_INIT: &[&str] = &[
    "at(Lyon)",
    "settled(Lyon)",
    "funds-ok",
    "route(Lyon,Paris)",
    "route(Paris,Tokyo)",
    "fare(Lyon,Paris,150)",
    "fare(Paris,Tokyo,645)",
];

pub fn travel_problem() -> Problem {
    Problem::new(
        state(TRAVEL_INIT),
        atoms(&["at(Tokyo)", "settled(Tokyo)"]),
        travel_domain(),
    )
    .unwrap()
}

//! Terms, atoms and conditions shared by the planner, the service model and
//! conjectures.
//!
//! Atoms have a compact text form, `pred(arg1,arg2)` or a bare `pred` for
//! zero arity. Tokens starting with `?` are variables; anything else is a
//! constant.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AtomSyntaxError {
    #[error("empty atom")]
    Empty,
    #[error("malformed atom `{0}`")]
    Malformed(String),
}

/// A variable (`?x`) or a constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    /// Classifies a raw token.
    pub fn parse(token: &str) -> Term {
        if token.starts_with('?') {
            Term::Var(token.to_string())
        } else {
            Term::Const(token.to_string())
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_str(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }

    pub fn substitute(&self, subst: &Substitution) -> Term {
        match self {
            Term::Var(v) => subst.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(Term::parse(&raw))
    }
}

/// Variable name (including the leading `?`) to term.
pub type Substitution = BTreeMap<String, Term>;

/// A predicate applied to terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    /// Builds a ground atom from constant names.
    pub fn ground(pred: &str, args: &[&str]) -> Self {
        Atom::new(pred, args.iter().map(|a| Term::Const((*a).to_string())).collect())
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    pub fn substitute(&self, subst: &Substitution) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|t| t.substitute(subst)).collect(),
        }
    }

    /// Renames every variable with `f`.
    pub fn map_vars(&self, f: impl Fn(&str) -> String) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Var(f(v)),
                    Term::Const(_) => t.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl FromStr for Atom {
    type Err = AtomSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(AtomSyntaxError::Empty);
        }
        let bad = || AtomSyntaxError::Malformed(s.to_string());
        let Some(open) = s.find('(') else {
            if s.contains(|c: char| c == ')' || c == ',' || c.is_whitespace()) {
                return Err(bad());
            }
            return Ok(Atom::new(s, Vec::new()));
        };
        if !s.ends_with(')') {
            return Err(bad());
        }
        let pred = s[..open].trim();
        if pred.is_empty() || pred.starts_with('?') {
            return Err(bad());
        }
        let inner = &s[open + 1..s.len() - 1];
        if inner.contains(['(', ')']) {
            return Err(bad());
        }
        let args = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|a| {
                    let a = a.trim();
                    if a.is_empty() {
                        Err(bad())
                    } else {
                        Ok(Term::parse(a))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(Atom::new(pred, args))
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[serde(alias = "positive")]
    Pos,
    #[serde(alias = "negative")]
    Neg,
}

/// An atom with a polarity, as found in preconditions.
///
/// JSON form: `{"pred": "ExistTGV", "args": ["?From", "?To"], "polarity": "pos"}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "ConditionDoc", into = "ConditionDoc")]
pub struct Condition {
    pub atom: Atom,
    pub polarity: Polarity,
}

impl Condition {
    pub fn pos(atom: Atom) -> Self {
        Condition {
            atom,
            polarity: Polarity::Pos,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Condition {
            atom,
            polarity: Polarity::Neg,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ConditionDoc {
    pred: String,
    #[serde(default)]
    args: Vec<Term>,
    #[serde(default = "default_polarity")]
    polarity: Polarity,
}

fn default_polarity() -> Polarity {
    Polarity::Pos
}

impl From<ConditionDoc> for Condition {
    fn from(d: ConditionDoc) -> Self {
        Condition {
            atom: Atom::new(d.pred, d.args),
            polarity: d.polarity,
        }
    }
}

impl From<Condition> for ConditionDoc {
    fn from(c: Condition) -> Self {
        ConditionDoc {
            pred: c.atom.pred,
            args: c.atom.args,
            polarity: c.polarity,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Pos => write!(f, "{}", self.atom),
            Polarity::Neg => write!(f, "not {}", self.atom),
        }
    }
}

/// Parses a list of atom strings, failing on the first malformed one.
pub fn parse_atoms<'a>(items: impl IntoIterator<Item = &'a str>) -> Result<Vec<Atom>, AtomSyntaxError> {
    items.into_iter().map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_atoms() {
        let a: Atom = "route(Lyon, Paris)".parse().unwrap();
        assert_eq!(a, Atom::ground("route", &["Lyon", "Paris"]));
        assert_eq!(a.to_string(), "route(Lyon,Paris)");

        let b: Atom = "funds-ok".parse().unwrap();
        assert!(b.args.is_empty());
        assert_eq!(b.to_string(), "funds-ok");

        let c: Atom = "at(?From)".parse().unwrap();
        assert!(!c.is_ground());
        assert_eq!(c.vars().collect::<Vec<_>>(), vec!["?From"]);
    }

    #[test]
    fn rejects_malformed_atoms() {
        for bad in ["", "at(Lyon", "at(,x)", "(x)", "a b", "at(x(y))", "?p(x)"] {
            assert!(bad.parse::<Atom>().is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn condition_json() {
        let c: Condition =
            serde_json::from_str(r#"{"pred":"ExistTGV","args":["?From","?To"],"polarity":"pos"}"#).unwrap();
        assert_eq!(c, Condition::pos("ExistTGV(?From,?To)".parse().unwrap()));
        let n: Condition = serde_json::from_str(r#"{"pred":"paid","args":["t1"],"polarity":"neg"}"#).unwrap();
        assert_eq!(n.polarity, Polarity::Neg);
        let d: Condition = serde_json::from_str(r#"{"pred":"funds-ok"}"#).unwrap();
        assert_eq!(d.polarity, Polarity::Pos);
        let back: Condition = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn substitution_leaves_unbound_vars() {
        let a: Atom = "owes(?f,?t)".parse().unwrap();
        let mut s = Substitution::new();
        s.insert("?f".into(), Term::Const("Lyon".into()));
        assert_eq!(a.substitute(&s).to_string(), "owes(Lyon,?t)");
    }
}

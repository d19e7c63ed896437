use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;

/// The set of possible outcomes `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeSpace {
    /// `n >= 2` distinct labelled outcomes.
    Finite { labels: Vec<String> },
    /// A closed interval of the real line; a missing end is unbounded.
    Interval {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
}

impl OutcomeSpace {
    pub fn finite(labels: Vec<String>) -> Result<Self> {
        let space = OutcomeSpace::Finite { labels };
        space.validate()?;
        Ok(space)
    }

    /// Outcomes labelled `1..=n`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::finite((1..=n).map(|i| i.to_string()).collect())
    }

    pub fn real_line() -> Self {
        OutcomeSpace::Interval { lo: None, hi: None }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let space = OutcomeSpace::Interval {
            lo: Some(lo),
            hi: Some(hi),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OutcomeSpace::Finite { labels } => {
                if labels.len() < 2 {
                    return Err(Error::InvalidOutcomeSpace(
                        "a finite outcome space needs at least two outcomes".into(),
                    ));
                }
                let mut sorted: Vec<&String> = labels.iter().collect();
                sorted.sort();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidOutcomeSpace(
                        "outcome labels must be distinct".into(),
                    ));
                }
                Ok(())
            }
            OutcomeSpace::Interval { lo, hi } => {
                if lo.is_some_and(|v| !v.is_finite()) || hi.is_some_and(|v| !v.is_finite()) {
                    return Err(Error::InvalidOutcomeSpace(
                        "interval ends must be finite (omit an end for an unbounded side)".into(),
                    ));
                }
                if let (Some(a), Some(b)) = (lo, hi) {
                    if a >= b {
                        return Err(Error::InvalidOutcomeSpace(format!(
                            "empty interval [{a}, {b}]"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, OutcomeSpace::Finite { .. })
    }

    /// Number of outcomes for a finite space.
    pub fn len(&self) -> Option<usize> {
        match self {
            OutcomeSpace::Finite { labels } => Some(labels.len()),
            OutcomeSpace::Interval { .. } => None,
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        match self {
            OutcomeSpace::Finite { labels } => Some(labels),
            OutcomeSpace::Interval { .. } => None,
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels()?.iter().position(|l| l == label)
    }

    /// Interval ends as extended reals.
    pub fn interval_ends(&self) -> Option<(ExtReal, ExtReal)> {
        match self {
            OutcomeSpace::Interval { lo, hi } => Some((
                lo.map_or(ExtReal::NegInf, ExtReal::Finite),
                hi.map_or(ExtReal::PosInf, ExtReal::Finite),
            )),
            OutcomeSpace::Finite { .. } => None,
        }
    }

    pub fn contains(&self, y: &Outcome) -> bool {
        match (self, y) {
            (OutcomeSpace::Finite { labels }, Outcome::Label(i)) => *i < labels.len(),
            (OutcomeSpace::Interval { lo, hi }, Outcome::Real(v)) => {
                v.is_finite() && lo.is_none_or(|a| *v >= a) && hi.is_none_or(|b| *v <= b)
            }
            _ => false,
        }
    }

    pub fn check(&self, y: &Outcome) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(Error::InvalidOutcome(y.to_string()))
        }
    }

    pub fn outcomes(&self) -> Option<impl Iterator<Item = Outcome>> {
        self.len().map(|n| (0..n).map(Outcome::Label))
    }
}

/// A single outcome: an index into a finite space or a real number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Label(usize),
    Real(f64),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Label(i) => write!(f, "#{i}"),
            Outcome::Real(y) => write!(f, "{y}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_space_rejects_duplicates_and_singletons() {
        assert!(OutcomeSpace::finite(vec!["a".into()]).is_err());
        assert!(OutcomeSpace::finite(vec!["a".into(), "a".into()]).is_err());
        assert_eq!(OutcomeSpace::numbered(3).unwrap().len(), Some(3));
    }

    #[test]
    fn interval_membership() {
        let unit = OutcomeSpace::interval(0.0, 1.0).unwrap();
        assert!(unit.contains(&Outcome::Real(0.0)));
        assert!(!unit.contains(&Outcome::Real(1.5)));
        assert!(!unit.contains(&Outcome::Label(0)));
        assert!(OutcomeSpace::real_line().contains(&Outcome::Real(-1e9)));
    }
}

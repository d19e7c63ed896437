//! Verdicts, witnesses and reports produced by every checker.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::Error;
use crate::ext::ExtReal;
use crate::outcome::Outcome;
use crate::scoring::Report;

/// Strictness margin separating strict inequalities from numerical ties.
pub const STRICT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Ic,
    Pi,
    Wcl,
    Arb,
    Tn,
    Pn,
    Wn,
    Btb,
    Convexity,
    Open,
    QuasiOpen,
    PriceBound,
    Subgroup,
}

impl Check {
    pub const AXIOMS: [Check; 8] = [
        Check::Ic,
        Check::Pi,
        Check::Wcl,
        Check::Arb,
        Check::Tn,
        Check::Pn,
        Check::Wn,
        Check::Btb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Ic => "IC",
            Check::Pi => "PI",
            Check::Wcl => "WCL",
            Check::Arb => "ARB",
            Check::Tn => "TN",
            Check::Pn => "PN",
            Check::Wn => "WN",
            Check::Btb => "BTB",
            Check::Convexity => "convexity",
            Check::Open => "open",
            Check::QuasiOpen => "quasi-open",
            Check::PriceBound => "price-bound",
            Check::Subgroup => "subgroup",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = Check::AXIOMS.into_iter().chain([
            Check::Convexity,
            Check::Open,
            Check::QuasiOpen,
            Check::PriceBound,
            Check::Subgroup,
        ]);
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        all.into_iter()
            .find(|c| c.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::InvalidSearch(format!("unknown check '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Holds over a finite universe that was enumerated completely, or by a
    /// closed-form argument.
    Holds,
    /// Holds on every sampled case; the universe was not exhausted.
    HoldsAtBudget,
    Fails,
    /// The search neither confirmed nor refuted the claim.
    Inconclusive,
}

impl Verdict {
    pub fn is_positive(self) -> bool {
        matches!(self, Verdict::Holds | Verdict::HoldsAtBudget)
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsAtBudget => "holds-at-budget",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Combines per-case verdicts: any failure fails, then any inconclusive
    /// case, then any budget-limited case.
    pub fn aggregate(items: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Holds;
        for v in items {
            out = match (out, v) {
                (Verdict::Fails, _) | (_, Verdict::Fails) => Verdict::Fails,
                (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
                (Verdict::HoldsAtBudget, _) | (_, Verdict::HoldsAtBudget) => Verdict::HoldsAtBudget,
                _ => Verdict::Holds,
            };
        }
        out
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "holds" => Ok(Verdict::Holds),
            "holds-at-budget" => Ok(Verdict::HoldsAtBudget),
            "fails" => Ok(Verdict::Fails),
            "inconclusive" => Ok(Verdict::Inconclusive),
            other => Err(Error::InvalidSearch(format!("unknown verdict '{other}'"))),
        }
    }
}

/// How a verdict was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Basis {
    Exhaustive,
    ClosedForm(String),
    Search,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Exhaustive => f.write_str("exhaustive"),
            Basis::ClosedForm(why) => write!(f, "closed-form ({why})"),
            Basis::Search => f.write_str("search"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityTest {
    Midpoint,
    Subgradient,
    Monotone,
    Gradient,
}

/// A concrete, re-checkable instance behind a verdict. `margin` is always
/// the size of the violation (positive when the witness refutes the claim).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Convexity {
        test: ConvexityTest,
        x: Vec<f64>,
        x2: Vec<f64>,
        margin: f64,
    },
    Arbitrage {
        from: Report,
        to: Report,
        margin: f64,
    },
    Mismatch {
        belief: Belief,
        best: Report,
        property: Report,
        margin: f64,
    },
    /// Maker losses `F(to_i | from)(y_i)` growing without bound.
    Divergence {
        from: Report,
        to: Vec<Report>,
        outcomes: Vec<Outcome>,
        losses: Vec<f64>,
    },
    Neutralization {
        check: Check,
        held: Vec<(Report, Report)>,
        state: Report,
        candidate: Report,
        base_inf: ExtReal,
        best_inf: ExtReal,
        blocking: Vec<Outcome>,
        margin: f64,
    },
    Budget {
        state: Report,
        belief: Belief,
        epsilon: f64,
        best: Option<Report>,
        margin: f64,
    },
    PathIndependence {
        index: usize,
        outcome: Outcome,
        margin: f64,
    },
    Subgroup {
        d: Vec<f64>,
        d2: Option<Vec<f64>>,
        margin: f64,
    },
    Gradient {
        q: Vec<f64>,
        gradient: Vec<f64>,
        margin: f64,
    },
    QuasiOpen {
        q: Vec<f64>,
        v: Vec<f64>,
        margin: f64,
    },
    PriceBound {
        q: Vec<f64>,
        v: Vec<f64>,
        margin: f64,
    },
}

impl Witness {
    pub fn margin(&self) -> f64 {
        match self {
            Witness::Convexity { margin, .. }
            | Witness::Arbitrage { margin, .. }
            | Witness::Mismatch { margin, .. }
            | Witness::Neutralization { margin, .. }
            | Witness::Budget { margin, .. }
            | Witness::PathIndependence { margin, .. }
            | Witness::Subgroup { margin, .. }
            | Witness::Gradient { margin, .. }
            | Witness::QuasiOpen { margin, .. }
            | Witness::PriceBound { margin, .. } => *margin,
            Witness::Divergence { losses, .. } => losses.last().copied().unwrap_or(0.0),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Witness::Convexity { .. } => "convexity",
            Witness::Arbitrage { .. } => "arbitrage",
            Witness::Mismatch { .. } => "mismatch",
            Witness::Divergence { .. } => "divergence",
            Witness::Neutralization { .. } => "neutralization",
            Witness::Budget { .. } => "budget",
            Witness::PathIndependence { .. } => "path-independence",
            Witness::Subgroup { .. } => "subgroup",
            Witness::Gradient { .. } => "gradient",
            Witness::QuasiOpen { .. } => "quasi-open",
            Witness::PriceBound { .. } => "price-bound",
        }
    }
}

/// Whether a replayed margin reproduces a stored one: still a violation, and
/// within a factor of ten.
pub fn reproduces(stored: f64, replayed: f64) -> bool {
    if stored.is_infinite() || replayed.is_infinite() {
        return stored == replayed;
    }
    replayed > 0.0 && replayed <= 10.0 * stored && replayed >= stored / 10.0
}

/// Outcome of one scenario inside a check, keyed so that related checks on
/// the same scenario list can be compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub key: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub check: Check,
    pub verdict: Verdict,
    pub basis: Basis,
    /// Check-specific figure: the loss bound for WCL, the smallest slack
    /// for inequality checks, the largest deviation for IC.
    pub margin: Option<ExtReal>,
    /// Number of cases evaluated.
    pub budget: usize,
    pub witnesses: Vec<Witness>,
    pub scenarios: Vec<ScenarioOutcome>,
    pub notes: Vec<String>,
}

impl AxiomReport {
    pub fn new(check: Check, verdict: Verdict, basis: Basis) -> Self {
        AxiomReport {
            check,
            verdict,
            basis,
            margin: None,
            budget: 0,
            witnesses: Vec::new(),
            scenarios: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_margin(mut self, m: impl Into<ExtReal>) -> Self {
        self.margin = Some(m.into());
        self
    }

    pub fn with_budget(mut self, n: usize) -> Self {
        self.budget = n;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn scenario(&self, key: &str) -> Option<Verdict> {
        self.scenarios
            .iter()
            .find(|s| s.key == key)
            .map(|s| s.verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_prefers_failure() {
        use Verdict::*;
        assert_eq!(Verdict::aggregate([Holds, HoldsAtBudget]), HoldsAtBudget);
        assert_eq!(Verdict::aggregate([Holds, Inconclusive, Fails]), Fails);
        assert_eq!(Verdict::aggregate([Holds, Inconclusive]), Inconclusive);
        assert_eq!(Verdict::aggregate([]), Holds);
    }

    #[test]
    fn names_round_trip() {
        for c in Check::AXIOMS {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
        }
        assert_eq!("quasi_open".parse::<Check>().unwrap(), Check::QuasiOpen);
        assert_eq!(
            "holds-at-budget".parse::<Verdict>().unwrap(),
            Verdict::HoldsAtBudget
        );
    }

    #[test]
    fn replay_tolerance() {
        assert!(reproduces(1.0, 1.0));
        assert!(reproduces(1.0, 5.0));
        assert!(!reproduces(1.0, 20.0));
        assert!(!reproduces(1.0, -1.0));
    }
}

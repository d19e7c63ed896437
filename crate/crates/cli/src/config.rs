//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use srmkit::axioms::SearchConfig;
use srmkit::belief::Belief;
use srmkit::costmarket::CostSpec;
use srmkit::outcome::{Outcome, OutcomeSpace};
use srmkit::scoring::{
    ExpectationRule, ExpectileRule, FiniteRule, QuantileRule, RatioRule, Report, ScoringRule,
};
use srmkit::verdict::Verdict;

use crate::error::CliError;

/// A market: one of the scoring-rule families, a cost-function market, or
/// the mode shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MarketSpec {
    /// `S(r, y) = 1{y = r}` on outcomes `1..=n`.
    Mode {
        n: usize,
    },
    Finite(FiniteRule),
    Expectation(ExpectationRule),
    Quantile(QuantileRule),
    Expectile(ExpectileRule),
    Ratio(RatioRule),
    Cost(CostSpec),
}

impl MarketSpec {
    pub fn rule(&self) -> Result<ScoringRule, CliError> {
        let rule = match self.clone() {
            MarketSpec::Mode { n } => ScoringRule::mode(n)?,
            MarketSpec::Finite(f) => ScoringRule::Finite(f),
            MarketSpec::Expectation(e) => ScoringRule::Expectation(e),
            MarketSpec::Quantile(q) => ScoringRule::Quantile(q),
            MarketSpec::Expectile(x) => ScoringRule::Expectile(x),
            MarketSpec::Ratio(r) => ScoringRule::Ratio(r),
            MarketSpec::Cost(c) => ScoringRule::Cost(c),
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// A report as written in a config: a report label, a number, or a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportSpec {
    Label(String),
    Scalar(f64),
    Point(Vec<f64>),
}

impl ReportSpec {
    pub fn resolve(&self, rule: &ScoringRule) -> Result<Report, CliError> {
        let r = match (self, rule.report_labels()) {
            (ReportSpec::Label(name), Some(labels)) => Report::Label(
                labels
                    .iter()
                    .position(|l| l == name)
                    .ok_or_else(|| CliError::Config(format!("no report labelled '{name}'")))?,
            ),
            (ReportSpec::Label(name), None) => {
                return Err(CliError::Config(format!(
                    "'{name}': this market takes numeric reports"
                )))
            }
            (ReportSpec::Scalar(x), Some(_)) => {
                return Err(CliError::Config(format!(
                    "{x}: this market takes report labels"
                )))
            }
            (ReportSpec::Scalar(x), None) => Report::scalar(*x),
            (ReportSpec::Point(p), _) => Report::Point(p.clone()),
        };
        rule.check_report(&r)?;
        Ok(r)
    }
}

/// An outcome as written in a config: a label or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutcomeSpec {
    Label(String),
    Value(f64),
}

impl OutcomeSpec {
    pub fn resolve(&self, space: &OutcomeSpace) -> Result<Outcome, CliError> {
        let y = match (self, space) {
            (OutcomeSpec::Label(l), OutcomeSpace::Finite { .. }) => Outcome::Label(
                space
                    .label_index(l)
                    .ok_or_else(|| CliError::Config(format!("no outcome labelled '{l}'")))?,
            ),
            (OutcomeSpec::Value(v), OutcomeSpace::Interval { .. }) => Outcome::Real(*v),
            (other, _) => {
                return Err(CliError::Config(format!(
                    "{other:?} does not name an outcome of {space:?}"
                )))
            }
        };
        space.check(&y)?;
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraderSpec {
    pub name: String,
    pub belief: Belief,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub outcome: OutcomeSpec,
    pub traders: Vec<TraderSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSpec {
    pub step: f64,
    #[serde(default = "unit_window")]
    pub window: [f64; 2],
}

fn unit_window() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_trials() -> usize {
    1000
}

fn default_samples() -> usize {
    200
}

fn default_ledger() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub market: MarketSpec,
    /// Checks to run: the axioms (`ic`, `pi`, `wcl`, `arb`, `tn`, `pn`,
    /// `wn`, `btb`) and the market checks (`open`, `quasi_open`,
    /// `price_bound`, `subgroup`, `convexity`).
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub search: SearchConfig,
    /// Market state for WCL and sessions; the middle of the grid by default.
    #[serde(default)]
    pub initial: Option<ReportSpec>,
    /// Trials for the price-bound check.
    #[serde(default = "default_trials")]
    pub price_trials: usize,
    /// Samples for the openness and convexity checks.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Length of the random ledger used for PI.
    #[serde(default = "default_ledger")]
    pub ledger_length: usize,
    /// Expected verdicts, by check name (and `extract`).
    #[serde(default)]
    pub expect: BTreeMap<String, String>,
    #[serde(default)]
    pub session: Option<SessionSpec>,
    #[serde(default)]
    pub extract: Option<ExtractSpec>,
}

pub const CHECKS: [&str; 13] = [
    "ic",
    "pi",
    "wcl",
    "arb",
    "tn",
    "pn",
    "wn",
    "btb",
    "open",
    "quasi_open",
    "price_bound",
    "subgroup",
    "convexity",
];

/// Expected outcomes other than verdicts.
pub const EXTRACT_KEY: &str = "extract";

/// A parsed config with the hash of its source text.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub sha256: String,
}

impl Loaded {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(Loaded {
            config,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        for c in &self.checks {
            if !CHECKS.contains(&c.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown check '{c}' (known: {})",
                    CHECKS.join(", ")
                )));
            }
        }
        for (k, v) in &self.expect {
            if k != EXTRACT_KEY && !CHECKS.contains(&k.as_str()) {
                return Err(CliError::Config(format!(
                    "expectation for unknown check '{k}'"
                )));
            }
            v.parse::<Verdict>()
                .map_err(|e| CliError::Config(format!("expect.{k}: {e}")))?;
        }
        self.search.validate()?;
        self.market.rule()?;
        Ok(())
    }

    /// The expectation for a check, if any.
    pub fn expected(&self, check: &str) -> Option<Verdict> {
        self.expect.get(check).and_then(|v| v.parse().ok())
    }
}

/// Reads a golden verdict file: a TOML table of `check = "verdict"`.
pub fn read_expectations(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

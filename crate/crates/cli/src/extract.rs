//! The `extract` subcommand: recover a cost-function market from a rule on
//! a report grid, or report the step at which that is impossible.

use std::fmt::Write as _;
use std::path::Path;

use srmkit::costmarket::{check_rule_subgroup, extract_cost_market, Extraction};
use srmkit::error::Error;
use srmkit::scoring::Report;
use srmkit::verdict::{Verdict, Witness};

use crate::config::{Loaded, EXTRACT_KEY};
use crate::error::CliError;
use crate::report::{header, num, witness_block};

/// Largest convexity gap accepted as numerical noise.
const CONVEXITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum ExtractOutcome {
    Extracted(Box<Extraction>),
    Failed {
        step: String,
        detail: String,
        witnesses: Vec<Witness>,
    },
}

#[derive(Debug, Clone)]
pub struct ExtractRun {
    pub seed: u64,
    pub grid: Vec<Report>,
    pub outcome: ExtractOutcome,
    pub expected: Verdict,
}

impl ExtractRun {
    pub fn verdict(&self) -> Verdict {
        match &self.outcome {
            ExtractOutcome::Extracted(x) if x.convexity_gap <= CONVEXITY_TOL => Verdict::Holds,
            _ => Verdict::Fails,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.verdict() == self.expected {
            0
        } else {
            1
        }
    }
}

pub fn run_extract(loaded: &Loaded, seed: Option<u64>) -> Result<ExtractRun, CliError> {
    let cfg = &loaded.config;
    let spec = cfg
        .extract
        .as_ref()
        .ok_or_else(|| CliError::Config("the config has no [extract] table".into()))?;
    let rule = cfg.market.rule()?;
    let grid = rule.report_grid(spec.step, (spec.window[0], spec.window[1]))?;
    let outcome = match extract_cost_market(&rule, &grid) {
        Ok(x) => ExtractOutcome::Extracted(Box::new(x)),
        Err(Error::Extraction { step, detail }) => {
            let witnesses = if step == "subgroup" && rule.has_finite_reports() {
                check_rule_subgroup(&rule, &grid)?.witnesses
            } else {
                Vec::new()
            };
            ExtractOutcome::Failed {
                step,
                detail,
                witnesses,
            }
        }
        Err(e) => return Err(e.into()),
    };
    Ok(ExtractRun {
        seed: seed.unwrap_or(cfg.seed),
        grid,
        outcome,
        expected: cfg.expected(EXTRACT_KEY).unwrap_or(Verdict::Holds),
    })
}

fn row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| num(*v))
        .collect::<Vec<_>>()
        .join("\t")
}

/// Writes `extract.txt`.
pub fn write_extract(run: &ExtractRun, loaded: &Loaded, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let mut text = header("extraction report", loaded, run.seed);
    let _ = writeln!(text, "# grid: {} reports", run.grid.len());
    let _ = writeln!(text, "# verdict: {}", run.verdict().name());
    let _ = writeln!(text, "# expected: {}", run.expected.name());
    match &run.outcome {
        ExtractOutcome::Failed {
            step,
            detail,
            witnesses,
        } => {
            let _ = writeln!(text, "# failed-step: {step}");
            let _ = writeln!(text, "# detail: {detail}");
            text.push('\n');
            text.push_str(&witness_block(witnesses));
        }
        ExtractOutcome::Extracted(x) => {
            let _ = writeln!(text, "# rank: {}", x.rank);
            let _ = writeln!(
                text,
                "# decomposition-residual: {}",
                num(x.decomposition_residual)
            );
            let _ = writeln!(
                text,
                "# round-trip-residual: {}",
                num(x.round_trip_residual)
            );
            let _ = writeln!(text, "# convexity-gap: {}", num(x.convexity_gap));
            if let Some(d) = x.conjugate_deviation {
                let _ = writeln!(text, "# conjugate-deviation: {}", num(d));
            }
            let labels = x.market.outcomes.labels().unwrap_or_default();
            text.push_str("\n[phi]\noutcome");
            for i in 0..x.rank {
                let _ = write!(text, "\tphi{i}");
            }
            text.push('\n');
            for (y, r) in x.market.phi.iter().enumerate() {
                let name = labels.get(y).map_or(y.to_string(), Clone::clone);
                let _ = writeln!(text, "{name}\t{}", row(r));
            }
            text.push_str("\n[shares]\nreport");
            for i in 0..x.rank {
                let _ = write!(text, "\tv{i}");
            }
            text.push_str("\tcost\n");
            for ((r, v), c) in x.reports.iter().zip(&x.shares).zip(&x.costs) {
                let _ = writeln!(text, "{r}\t{}\t{}", row(v), num(*c));
            }
        }
    }
    std::fs::write(out.join("extract.txt"), text)?;
    Ok(())
}

//! Text reports: a `# key: value` header followed by tab-separated blocks.

use std::fmt::Write as _;

use srmkit::ext::ExtReal;
use srmkit::verdict::{AxiomReport, Verdict, Witness};

use crate::config::Loaded;

pub const TOOL: &str = concat!("srmkit ", env!("CARGO_PKG_VERSION"));

/// Provenance header shared by every report and data file.
pub fn header(kind: &str, loaded: &Loaded, seed: u64) -> String {
    format!(
        "# srmkit {kind}\n# tool: {TOOL}\n# config: {}\n# config-sha256: {}\n# seed: {seed}\n",
        loaded.config.name, loaded.sha256
    )
}

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn ext(x: ExtReal) -> String {
    x.finite().map_or_else(|| x.to_string(), num)
}

/// One row per witness component: index, kind, field, JSON value.
pub fn witness_block(witnesses: &[Witness]) -> String {
    let mut out = String::from("[witnesses]\nwitness\tkind\tcomponent\tvalue\n");
    for (i, w) in witnesses.iter().enumerate() {
        let value = serde_json::to_value(w).expect("witnesses serialize");
        if let serde_json::Value::Object(fields) = value {
            for (k, v) in fields.iter().filter(|(k, _)| k.as_str() != "kind") {
                let _ = writeln!(out, "{i}\t{}\t{k}\t{v}", w.kind());
            }
        }
    }
    out
}

/// Result of replaying one stored witness.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub stored: f64,
    pub replayed: f64,
    pub reproduced: bool,
}

pub fn replay_block(replays: &[Replay]) -> String {
    let mut out = String::from("[replay]\nwitness\tstored_margin\treplayed_margin\treproduced\n");
    for (i, r) in replays.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i}\t{}\t{}\t{}",
            num(r.stored),
            num(r.replayed),
            r.reproduced
        );
    }
    out
}

fn tally(report: &AxiomReport) -> String {
    let count = |v: Verdict| report.scenarios.iter().filter(|s| s.verdict == v).count();
    format!(
        "{} (holds {}, holds-at-budget {}, fails {}, inconclusive {})",
        report.scenarios.len(),
        count(Verdict::Holds),
        count(Verdict::HoldsAtBudget),
        count(Verdict::Fails),
        count(Verdict::Inconclusive)
    )
}

/// The body of an axiom report, after the provenance header.
pub fn axiom_body(report: &AxiomReport, expected: Option<Verdict>, replays: &[Replay]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# check: {}", report.check);
    let _ = writeln!(out, "# verdict: {}", report.verdict.name());
    if let Some(e) = expected {
        let status = if e == report.verdict {
            "match"
        } else {
            "MISMATCH"
        };
        let _ = writeln!(out, "# expected: {} ({status})", e.name());
    }
    let _ = writeln!(out, "# basis: {}", report.basis);
    if let Some(m) = report.margin {
        let _ = writeln!(out, "# margin: {}", ext(m));
    }
    let _ = writeln!(out, "# budget: {}", report.budget);
    if !report.scenarios.is_empty() {
        let _ = writeln!(out, "# scenarios: {}", tally(report));
    }
    for n in &report.notes {
        let _ = writeln!(out, "# note: {n}");
    }
    out.push('\n');
    out.push_str(&witness_block(&report.witnesses));
    if !replays.is_empty() {
        out.push('\n');
        out.push_str(&replay_block(replays));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use srmkit::scoring::Report;

    #[test]
    fn witness_rows_are_one_per_component() {
        let w = Witness::Arbitrage {
            from: Report::Label(0),
            to: Report::Label(1),
            margin: 1.0,
        };
        let block = witness_block(&[w]);
        let rows: Vec<&str> = block.lines().skip(2).collect();
        assert_eq!(
            rows,
            [
                "0\tarbitrage\tfrom\t0",
                "0\tarbitrage\tmargin\t1.0",
                "0\tarbitrage\tto\t1"
            ]
        );
    }
}

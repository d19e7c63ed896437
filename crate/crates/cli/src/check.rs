//! The `check` subcommand: run the configured checks, cross-check the
//! neutralization chain and replay every failing witness.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use srmkit::axioms::{
    check_arb, check_btb, check_ic, check_pn, check_tn, check_wcl, check_wn, portfolio_scenarios,
    random_beliefs, random_btb_cases, replay_witness, trade_scenarios, SearchConfig, Subject,
};
use srmkit::convex::ConvexFn;
use srmkit::costmarket::{check_rule_subgroup, CostSpec};
use srmkit::engine::MarketSession;
use srmkit::scoring::{Report, ScoringRule};
use srmkit::verdict::{AxiomReport, Verdict};

use crate::config::Loaded;
use crate::error::CliError;
use crate::report::{axiom_body, header, Replay};

/// Everything a check run produces, in the order the checks were listed.
#[derive(Debug, Clone)]
pub struct CheckRun {
    pub seed: u64,
    pub results: Vec<CheckResult>,
    /// Scenario keys where a stronger neutralization verdict holds and a
    /// weaker one fails.
    pub chain_violations: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub report: AxiomReport,
    pub expected: Option<Verdict>,
    pub replays: Vec<Replay>,
}

impl CheckResult {
    pub fn matches(&self) -> bool {
        self.expected.is_none_or(|e| e == self.report.verdict)
    }
}

impl CheckRun {
    pub fn mismatches(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .results
            .iter()
            .filter(|r| !r.matches())
            .map(|r| {
                format!(
                    "{}: expected {}, got {}",
                    r.name,
                    r.expected.map_or("-", |e| e.name()),
                    r.report.verdict.name()
                )
            })
            .collect();
        out.extend(
            self.results
                .iter()
                .filter(|r| r.replays.iter().any(|p| !p.reproduced))
                .map(|r| format!("{}: a failing witness did not replay", r.name)),
        );
        out.extend(
            self.chain_violations
                .iter()
                .map(|k| format!("implication chain violated at {k}")),
        );
        out
    }

    pub fn exit_code(&self) -> i32 {
        if self.mismatches().is_empty() {
            0
        } else {
            1
        }
    }
}

/// Shared inputs for every check of one run.
struct Context {
    rule: ScoringRule,
    grid: Vec<Report>,
    initial: Report,
    search: SearchConfig,
    seed: u64,
    samples: usize,
    price_trials: usize,
    ledger_length: usize,
}

impl Context {
    fn cost_spec(&self, check: &str) -> Result<&CostSpec, CliError> {
        match &self.rule {
            ScoringRule::Cost(c) => Ok(c),
            other => Err(CliError::Config(format!(
                "'{check}' needs a cost market, not a {} rule",
                other.family()
            ))),
        }
    }

    fn potential(&self) -> Result<&ConvexFn, CliError> {
        match &self.rule {
            ScoringRule::Expectation(e) => Ok(&e.potential),
            ScoringRule::Ratio(r) => Ok(&r.potential),
            ScoringRule::Cost(c) => Ok(&c.cost),
            other => Err(CliError::Config(format!(
                "a {} rule has no convex potential to check",
                other.family()
            ))),
        }
    }

    /// A seeded random ledger over the grid.
    fn random_session(&self) -> Result<MarketSession, CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut s = MarketSession::open(self.rule.clone(), self.initial.clone())?;
        for i in 0..self.ledger_length {
            let to = self.grid[rng.gen_range(0..self.grid.len())].clone();
            s.execute_trade(&format!("t{}", i % 3), to)?;
        }
        Ok(s)
    }

    fn run(&self, check: &str) -> Result<(AxiomReport, Vec<Replay>), CliError> {
        let (rule, grid, cfg, seed) = (&self.rule, &self.grid, &self.search, self.seed);
        let rule_subject = Subject::Rule {
            rule,
            reports: grid,
        };
        let mut session = None;
        let (report, subject) = match check {
            "ic" => (
                check_ic(rule, &random_beliefs(rule, cfg.beliefs, cfg, seed)?, cfg)?,
                rule_subject,
            ),
            "arb" => (check_arb(rule, grid, cfg)?, rule_subject),
            "wcl" => (check_wcl(rule, &self.initial, grid, cfg)?, rule_subject),
            "wn" => (
                check_wn(rule, grid, &trade_scenarios(grid, cfg.scenarios, seed), cfg)?,
                rule_subject,
            ),
            "tn" => (
                check_tn(rule, grid, &trade_scenarios(grid, cfg.scenarios, seed), cfg)?,
                rule_subject,
            ),
            "pn" => {
                let set = portfolio_scenarios(grid, cfg.portfolio_size, cfg.scenarios, seed);
                (check_pn(rule, grid, &set, cfg)?, rule_subject)
            }
            "btb" => {
                let cases = random_btb_cases(rule, grid, cfg.beliefs, cfg, seed)?;
                (check_btb(rule, grid, &cases, cfg)?, rule_subject)
            }
            "subgroup" => (check_rule_subgroup(rule, grid)?, rule_subject),
            "open" => {
                let spec = self.cost_spec(check)?;
                (spec.check_open(self.samples, seed), Subject::Market(spec))
            }
            "quasi_open" => {
                let spec = self.cost_spec(check)?;
                (
                    spec.check_quasi_open(self.samples, seed),
                    Subject::Market(spec),
                )
            }
            "price_bound" => {
                let spec = self.cost_spec(check)?;
                (
                    spec.price_bound_check(self.price_trials, seed),
                    Subject::Market(spec),
                )
            }
            "convexity" => {
                let g = self.potential()?;
                (g.check_convexity(self.samples, seed), Subject::Potential(g))
            }
            "pi" => {
                let s = session.insert(self.random_session()?);
                (s.verify_path_independence(), Subject::Session(s))
            }
            other => return Err(CliError::Config(format!("unknown check '{other}'"))),
        };
        let mut replays = Vec::new();
        if report.verdict == Verdict::Fails {
            for w in &report.witnesses {
                let (replayed, reproduced) = replay_witness(subject, w, cfg)?;
                replays.push(Replay {
                    stored: w.margin(),
                    replayed,
                    reproduced,
                });
            }
        }
        Ok((report, replays))
    }
}

/// Pairs `(stronger, weaker)` of the neutralization chain.
const CHAIN: [(&str, &str); 2] = [("tn", "wn"), ("pn", "tn")];

fn chain_violations(results: &[CheckResult]) -> Vec<String> {
    let find = |name: &str| results.iter().find(|r| r.name == name).map(|r| &r.report);
    let mut out = Vec::new();
    for (strong, weak) in CHAIN {
        let (Some(s), Some(w)) = (find(strong), find(weak)) else {
            continue;
        };
        for sc in s.scenarios.iter().filter(|sc| sc.verdict.is_positive()) {
            if w.scenario(&sc.key) == Some(Verdict::Fails) {
                out.push(format!("{} holds, {} fails: {}", s.check, w.check, sc.key));
            }
        }
    }
    out
}

/// Runs every check listed in the config. `seed` overrides the config seed;
/// `extra` expectations override the config's.
pub fn run_check(
    loaded: &Loaded,
    seed: Option<u64>,
    extra: &BTreeMap<String, String>,
) -> Result<CheckRun, CliError> {
    let cfg = &loaded.config;
    let seed = seed.unwrap_or(cfg.seed);
    let rule = cfg.market.rule()?;
    let search = SearchConfig {
        seed,
        ..cfg.search.clone()
    };
    let grid = search.grid(&rule)?;
    let initial = match &cfg.initial {
        Some(r) => r.resolve(&rule)?,
        None => grid[grid.len() / 2].clone(),
    };
    let mut expect = cfg.expect.clone();
    for (k, v) in extra {
        v.parse::<Verdict>()
            .map_err(|e| CliError::Config(format!("expectation {k}: {e}")))?;
        expect.insert(k.clone(), v.clone());
    }
    let ctx = Context {
        rule,
        grid,
        initial,
        search,
        seed,
        samples: cfg.samples,
        price_trials: cfg.price_trials,
        ledger_length: cfg.ledger_length,
    };
    let results = cfg
        .checks
        .par_iter()
        .map(|name| {
            let (report, replays) = ctx.run(name)?;
            Ok(CheckResult {
                name: name.clone(),
                expected: expect.get(name).and_then(|v| v.parse().ok()),
                report,
                replays,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(CheckRun {
        seed,
        chain_violations: chain_violations(&results),
        results,
    })
}

/// Writes `<check>.txt` for every check and a `summary.txt`.
pub fn write_check(run: &CheckRun, loaded: &Loaded, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let head = header("check report", loaded, run.seed);
    let mut summary = head.clone();
    summary.push_str("\ncheck\tverdict\texpected\tbasis\tbudget\n");
    for r in &run.results {
        std::fs::write(
            out.join(format!("{}.txt", r.name)),
            format!("{head}{}", axiom_body(&r.report, r.expected, &r.replays)),
        )?;
        summary.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.name,
            r.report.verdict.name(),
            r.expected.map_or("-", |e| e.name()),
            r.report.basis,
            r.report.budget
        ));
    }
    summary.push_str("\n[chain]\n");
    if run.chain_violations.is_empty() {
        summary.push_str("consistent\n");
    }
    for v in &run.chain_violations {
        summary.push_str(&format!("{v}\n"));
    }
    let mismatches = run.mismatches();
    summary.push_str(&format!(
        "\n# status: {}\n",
        if mismatches.is_empty() {
            "ok"
        } else {
            "mismatch"
        }
    ));
    for m in mismatches {
        summary.push_str(&format!("# {m}\n"));
    }
    std::fs::write(out.join("summary.txt"), summary)?;
    Ok(())
}

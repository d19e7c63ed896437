//! The `session` subcommand: scripted traders each move the market to their
//! best response, then the market settles.

use std::fmt::Write as _;
use std::path::Path;

use srmkit::engine::{MarketSession, Settlement};
use srmkit::verdict::AxiomReport;

use crate::config::Loaded;
use crate::error::CliError;
use crate::report::{header, witness_block};

#[derive(Debug, Clone)]
pub struct SessionRun {
    pub seed: u64,
    pub session: MarketSession,
    pub settlement: Settlement,
    pub path_independence: AxiomReport,
}

impl SessionRun {
    pub fn exit_code(&self) -> i32 {
        if self.path_independence.verdict.is_positive() {
            0
        } else {
            1
        }
    }
}

pub fn run_session(loaded: &Loaded, seed: Option<u64>) -> Result<SessionRun, CliError> {
    let cfg = &loaded.config;
    let spec = cfg
        .session
        .as_ref()
        .ok_or_else(|| CliError::Config("the config has no [session] table".into()))?;
    let rule = cfg.market.rule()?;
    let initial = match &cfg.initial {
        Some(r) => r.resolve(&rule)?,
        None => {
            let grid = cfg.search.grid(&rule)?;
            grid[grid.len() / 2].clone()
        }
    };
    let outcome = spec.outcome.resolve(rule.outcomes())?;
    let mut session = MarketSession::open(rule, initial)?;
    for t in &spec.traders {
        let to = t
            .belief
            .validate()
            .and_then(|_| t.belief.check_space(session.rule().outcomes()))
            .and_then(|_| session.rule().best_response(&t.belief))
            .map_err(|e| CliError::Config(format!("trader {}: {e}", t.name)))?;
        session.execute_trade(&t.name, to)?;
    }
    let settlement = session.settle(&outcome)?;
    let path_independence = session.verify_path_independence();
    Ok(SessionRun {
        seed: seed.unwrap_or(cfg.seed),
        session,
        settlement,
        path_independence,
    })
}

/// Writes `session.txt` (settlement report) and `ledger.jsonl`.
pub fn write_session(run: &SessionRun, loaded: &Loaded, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let s = &run.session;
    let mut text = header("session report", loaded, run.seed);
    let _ = writeln!(text, "# initial: {}", s.initial());
    let _ = writeln!(text, "# final: {}", s.current());
    let _ = writeln!(text, "# outcome: {}", run.settlement.outcome);
    let _ = writeln!(text, "# maker-loss: {}", run.settlement.maker_loss);
    let _ = writeln!(text, "# telescoped: {}", run.settlement.telescoped);
    let _ = writeln!(
        text,
        "# path-independence: {}",
        run.path_independence.verdict.name()
    );
    text.push_str("\n[ledger]\nindex\ttrader\tfrom\tto\tpayoff\n");
    for t in s.ledger() {
        let pay = t.contract.eval(&run.settlement.outcome)?;
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{pay}",
            t.index, t.trader, t.from, t.to
        );
    }
    text.push_str("\n[payoffs]\ntrader\tpayoff\n");
    for (name, v) in &run.settlement.payoffs {
        let _ = writeln!(text, "{name}\t{v}");
    }
    text.push('\n');
    text.push_str(&witness_block(&run.path_independence.witnesses));
    std::fs::write(out.join("session.txt"), text)?;
    std::fs::write(out.join("ledger.jsonl"), s.ledger_lines())?;
    Ok(())
}

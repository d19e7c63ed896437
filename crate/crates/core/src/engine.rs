//! The sequential market mechanism: each trader moves the market report and
//! is paid the score difference.

use serde::{Deserialize, Serialize};

use crate::contract::Contract;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::outcome::Outcome;
use crate::scoring::{Report, ScoringRule};
use crate::verdict::{AxiomReport, Basis, Check, Verdict, Witness};

/// Absolute tolerance for the telescoping identities, scaled by the size
/// of the payoffs being compared.
pub const PI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub index: usize,
    pub trader: String,
    pub from: Report,
    pub to: Report,
    /// The contract handed to the trader, `S(to, .) - S(from, .)`.
    pub contract: Contract,
}

/// One line of the serialized ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LedgerLine {
    index: usize,
    trader: String,
    from: Report,
    to: Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub outcome: Outcome,
    /// Net payoff per trader, in order of first arrival.
    pub payoffs: Vec<(String, f64)>,
    /// Sum of the stored contracts at the outcome.
    pub maker_loss: f64,
    /// `S(r_T, y) - S(r_0, y)`.
    pub telescoped: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSession {
    rule: ScoringRule,
    initial: Report,
    current: Report,
    ledger: Vec<TradeRecord>,
}

impl MarketSession {
    pub fn open(rule: ScoringRule, r0: Report) -> Result<Self> {
        rule.validate()?;
        rule.check_report(&r0)?;
        Ok(MarketSession {
            rule,
            current: r0.clone(),
            initial: r0,
            ledger: Vec::new(),
        })
    }

    pub fn rule(&self) -> &ScoringRule {
        &self.rule
    }

    pub fn initial(&self) -> &Report {
        &self.initial
    }

    pub fn current(&self) -> &Report {
        &self.current
    }

    pub fn ledger(&self) -> &[TradeRecord] {
        &self.ledger
    }

    /// Moves the market to `to` and returns the trader's contract.
    pub fn execute_trade(&mut self, trader: &str, to: Report) -> Result<Contract> {
        self.rule.check_report(&to)?;
        let contract = self.rule.trade_contract(&self.current, &to)?;
        self.ledger.push(TradeRecord {
            index: self.ledger.len(),
            trader: trader.to_string(),
            from: self.current.clone(),
            to: to.clone(),
            contract: contract.clone(),
        });
        self.current = to;
        Ok(contract)
    }

    /// What the maker owes in total: the sum of every stored contract.
    pub fn maker_position(&self) -> Result<Contract> {
        let all: Vec<&Contract> = self.ledger.iter().map(|t| &t.contract).collect();
        if all.is_empty() {
            return Ok(Contract::zero(self.rule.outcomes()));
        }
        Contract::combine(&all, &vec![1.0; all.len()])
    }

    pub fn settle(&self, y: &Outcome) -> Result<Settlement> {
        self.rule.outcomes().check(y)?;
        let mut payoffs: Vec<(String, f64)> = Vec::new();
        let mut total = 0.0;
        for t in &self.ledger {
            let v = t.contract.eval(y)?;
            total += v;
            match payoffs.iter_mut().find(|(name, _)| *name == t.trader) {
                Some(entry) => entry.1 += v,
                None => payoffs.push((t.trader.clone(), v)),
            }
        }
        let telescoped = self.rule.score(&self.current, y)? - self.rule.score(&self.initial, y)?;
        Ok(Settlement {
            outcome: *y,
            payoffs,
            maker_loss: total,
            telescoped,
        })
    }

    /// `sup_y` of the maker's cumulative payout at the current state.
    pub fn worst_case_loss(&self) -> Result<ExtReal> {
        Ok(self
            .rule
            .trade_contract(&self.initial, &self.current)?
            .sup())
    }

    /// Checks `F(r | h) = F(r' | h) + F(r | h, r')` for every consecutive
    /// pair of trades, that each stored contract matches the rule, and that
    /// the ledger telescopes to `S(r_T) - S(r_0)`.
    pub fn verify_path_independence(&self) -> AxiomReport {
        let mut witnesses = Vec::new();
        let mut worst = 0.0_f64;
        let mut cases = 0;
        let mut compare = |index: usize,
                           lhs: &Contract,
                           rhs: &Contract,
                           witnesses: &mut Vec<Witness>|
         -> Result<()> {
            let diff = lhs.sub(rhs)?;
            for y in diff.probe_outcomes() {
                cases += 1;
                let scale = 1.0 + lhs.eval(&y)?.abs().max(rhs.eval(&y)?.abs());
                let gap = diff.eval(&y)?.abs();
                worst = worst.max(gap / scale);
                if gap > PI_TOL * scale && witnesses.len() < 8 {
                    witnesses.push(Witness::PathIndependence {
                        index,
                        outcome: y,
                        margin: gap,
                    });
                }
            }
            Ok(())
        };
        let mut run = |witnesses: &mut Vec<Witness>| -> Result<()> {
            for t in &self.ledger {
                compare(
                    t.index,
                    &t.contract,
                    &self.rule.trade_contract(&t.from, &t.to)?,
                    witnesses,
                )?;
            }
            for pair in self.ledger.windows(2) {
                let direct = self.rule.trade_contract(&pair[0].from, &pair[1].to)?;
                let split = pair[0].contract.add(&pair[1].contract)?;
                compare(pair[1].index, &direct, &split, witnesses)?;
            }
            let total = self.maker_position()?;
            compare(
                self.ledger.len(),
                &total,
                &self.rule.trade_contract(&self.initial, &self.current)?,
                witnesses,
            )
        };
        if let Err(e) = run(&mut witnesses) {
            return AxiomReport::new(Check::Pi, Verdict::Inconclusive, Basis::Exhaustive)
                .with_note(e.to_string());
        }
        let verdict = if witnesses.is_empty() {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        let mut r = AxiomReport::new(Check::Pi, verdict, Basis::Exhaustive)
            .with_budget(cases)
            .with_margin(worst)
            .with_note("checked at every outcome or breakpoint probe of this ledger");
        r.witnesses = witnesses;
        r
    }

    /// One JSON object per trade: index, trader, old and new report.
    pub fn ledger_lines(&self) -> String {
        let mut out = String::new();
        for t in &self.ledger {
            let line = LedgerLine {
                index: t.index,
                trader: t.trader.clone(),
                from: t.from.clone(),
                to: t.to.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("ledger lines serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a session from serialized ledger lines, checking that each
    /// line continues from the previous state.
    pub fn replay(rule: ScoringRule, r0: Report, lines: &str) -> Result<Self> {
        let mut s = MarketSession::open(rule, r0)?;
        for (i, raw) in lines.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let line: LedgerLine = serde_json::from_str(raw)
                .map_err(|e| Error::Ledger(format!("line {}: {e}", i + 1)))?;
            if line.index != i || line.from != s.current {
                return Err(Error::Ledger(format!(
                    "line {} does not continue the ledger (expected index {i} from {})",
                    i + 1,
                    s.current
                )));
            }
            s.execute_trade(&line.trader, line.to)?;
        }
        Ok(s)
    }
}

/// `sup_r sup_y F(r | r0)` over a grid of reports: the maker's worst loss
/// after any single move away from `r0`, which by telescoping is the worst
/// loss after any sequence of moves ending on the grid.
pub fn grid_loss_bound(rule: &ScoringRule, r0: &Report, grid: &[Report]) -> Result<ExtReal> {
    let mut best = ExtReal::Finite(0.0);
    for r in grid {
        best = best.max(rule.trade_contract(r0, r)?.sup());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::OutcomeSpace;
    use crate::transform::Transform;

    #[test]
    fn mode_trades_and_settlement() {
        let mut s = MarketSession::open(ScoringRule::mode(3).unwrap(), Report::Label(0)).unwrap();
        let c = s.execute_trade("a", Report::Label(1)).unwrap();
        assert_eq!(c.as_finite().unwrap(), &[-1.0, 1.0, 0.0]);
        s.execute_trade("b", Report::Label(2)).unwrap();
        let st = s.settle(&Outcome::Label(2)).unwrap();
        assert_eq!(st.maker_loss, 1.0);
        assert_eq!(st.telescoped, 1.0);
        assert_eq!(
            st.payoffs,
            vec![("a".to_string(), 0.0), ("b".to_string(), 1.0)]
        );
        assert_eq!(s.verify_path_independence().verdict, Verdict::Holds);
        assert_eq!(s.worst_case_loss().unwrap(), ExtReal::Finite(1.0));
    }

    #[test]
    fn mean_trade_contract() {
        let mut s = MarketSession::open(
            ScoringRule::mean(OutcomeSpace::real_line()).unwrap(),
            Report::scalar(0.0),
        )
        .unwrap();
        let c = s.execute_trade("a", Report::scalar(2.0)).unwrap();
        for y in [-1.0, 0.0, 0.5, 3.0] {
            assert_eq!(c.eval(&Outcome::Real(y)).unwrap(), -4.0 + 4.0 * y);
        }
        assert_eq!(s.worst_case_loss().unwrap(), ExtReal::PosInf);
        let z = s.execute_trade("a", Report::scalar(2.0)).unwrap();
        assert_eq!(z.bounds(), (ExtReal::ZERO, ExtReal::ZERO));
    }

    #[test]
    fn round_trip_pays_nothing() {
        let mut s = MarketSession::open(
            ScoringRule::mean(OutcomeSpace::interval(0.0, 1.0).unwrap()).unwrap(),
            Report::scalar(0.0),
        )
        .unwrap();
        s.execute_trade("a", Report::scalar(1.0)).unwrap();
        s.execute_trade("a", Report::scalar(0.0)).unwrap();
        let st = s.settle(&Outcome::Real(0.37)).unwrap();
        assert!(st.payoffs[0].1.abs() < 1e-15);
        assert!(s.settle(&Outcome::Real(2.0)).is_err());
    }

    #[test]
    fn quantile_path_independence_on_breakpoints() {
        let rule =
            ScoringRule::quantile(OutcomeSpace::real_line(), 0.5, Transform::Identity).unwrap();
        let mut s = MarketSession::open(rule, Report::scalar(0.0)).unwrap();
        s.execute_trade("a", Report::scalar(1.0)).unwrap();
        s.execute_trade("b", Report::scalar(-1.0)).unwrap();
        let r = s.verify_path_independence();
        assert_eq!(r.verdict, Verdict::Holds, "{:?}", r.witnesses);
    }

    #[test]
    fn ledger_replays_bit_for_bit() {
        let mut s = MarketSession::open(ScoringRule::mode(3).unwrap(), Report::Label(0)).unwrap();
        for (t, r) in [("a", 2), ("b", 1), ("a", 0)] {
            s.execute_trade(t, Report::Label(r)).unwrap();
        }
        let lines = s.ledger_lines();
        let back = MarketSession::replay(s.rule().clone(), Report::Label(0), &lines).unwrap();
        assert_eq!(back, s);
        let broken = lines.replacen("\"from\":2", "\"from\":1", 1);
        assert!(matches!(
            MarketSession::replay(s.rule().clone(), Report::Label(0), &broken),
            Err(Error::Ledger(_))
        ));
    }

    #[test]
    fn invalid_reports_are_rejected() {
        let rule = ScoringRule::mode(3).unwrap();
        assert!(MarketSession::open(rule.clone(), Report::Label(3)).is_err());
        let mut s = MarketSession::open(rule, Report::Label(0)).unwrap();
        assert!(s.execute_trade("a", Report::scalar(0.5)).is_err());
        assert!(s.ledger().is_empty());
    }
}

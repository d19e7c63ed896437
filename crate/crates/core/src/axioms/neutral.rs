//! Weak, trade and portfolio neutralization: can a trader holding some
//! trades make one more trade from the current state that raises their
//! worst-case payoff (WN), or turns the whole position into cash above its
//! worst case (TN for one trade, PN for several)?

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::contract::Contract;
use crate::costmarket::ShareSpace;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::outcome::{Outcome, OutcomeSpace};
use crate::scoring::{Report, ScoringRule};
use crate::verdict::{AxiomReport, Basis, Check, ScenarioOutcome, Verdict, Witness};

use super::SearchConfig;

/// Tolerance for calling a position constant, relative to its level.
const CONSTANT_TOL: f64 = 1e-9;

/// Held trades `(from, to)` plus the market state the trader now faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub held: Vec<(Report, Report)>,
    pub state: Report,
}

impl Scenario {
    pub fn single(from: Report, to: Report, state: Report) -> Self {
        Scenario {
            held: vec![(from, to)],
            state,
        }
    }

    /// `a>b+c>d@s`, shared by the checks so that their per-scenario
    /// verdicts can be compared.
    pub fn key(&self) -> String {
        let held: Vec<String> = self.held.iter().map(|(a, b)| format!("{a}>{b}")).collect();
        format!("{}@{}", held.join("+"), self.state)
    }

    /// `sum_i F(to_i | from_i)`.
    pub fn position(&self, rule: &ScoringRule) -> Result<Contract> {
        let mut total = Contract::zero(rule.outcomes());
        for (a, b) in &self.held {
            total = total.add(&rule.trade_contract(a, b)?)?;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    /// Whether every scenario over the grid is present.
    pub exhaustive: bool,
}

/// Single-trade scenarios `(r1 -> r1', state)` over the grid with
/// `r1 != r1'`: all of them when there are at most `count`, otherwise
/// `count` distinct ones drawn with the seed.
pub fn trade_scenarios(grid: &[Report], count: usize, seed: u64) -> ScenarioSet {
    let m = grid.len();
    let total = m * m.saturating_sub(1) * m;
    let make = |i: usize, j: usize, s: usize| {
        Scenario::single(grid[i].clone(), grid[j].clone(), grid[s].clone())
    };
    if total <= count {
        let mut scenarios = Vec::with_capacity(total);
        for i in 0..m {
            for j in (0..m).filter(|j| *j != i) {
                for s in 0..m {
                    scenarios.push(make(i, j, s));
                }
            }
        }
        return ScenarioSet {
            scenarios,
            exhaustive: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut scenarios = Vec::with_capacity(count);
    while scenarios.len() < count {
        let i = rng.gen_range(0..m);
        let j = rng.gen_range(0..m);
        let s = rng.gen_range(0..m);
        if i != j && seen.insert((i, j, s)) {
            scenarios.push(make(i, j, s));
        }
    }
    ScenarioSet {
        scenarios,
        exhaustive: false,
    }
}

/// The single-trade scenarios plus `count` random portfolios of two to
/// `max_size` trades.
pub fn portfolio_scenarios(
    grid: &[Report],
    max_size: usize,
    count: usize,
    seed: u64,
) -> ScenarioSet {
    let mut set = trade_scenarios(grid, count, seed);
    if max_size < 2 || grid.len() < 2 {
        return set;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let m = grid.len();
    for _ in 0..count {
        let size = rng.gen_range(2..=max_size);
        let held = (0..size)
            .map(|_| {
                let i = rng.gen_range(0..m);
                let mut j = rng.gen_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                (grid[i].clone(), grid[j].clone())
            })
            .collect();
        set.scenarios.push(Scenario {
            held,
            state: grid[rng.gen_range(0..m)].clone(),
        });
    }
    set.exhaustive = false;
    set
}

/// The quantile characterization: after one held trade `r1 -> r1'`, no
/// trade from `s` can raise the worst case when the held trade went up and
/// `s <= r1`, or went down and `s >= r1`.
pub fn quantile_wn_blocked(r1: f64, r1_to: f64, s: f64) -> bool {
    (r1_to > r1 && s <= r1) || (r1_to < r1 && s >= r1)
}

/// `(base + delta) - inf` in the extended reals: how far a candidate falls
/// short of strictly raising the worst case.
pub(crate) fn shortfall(base: ExtReal, inf: ExtReal, delta: f64) -> ExtReal {
    match (base, inf) {
        (_, ExtReal::PosInf) => ExtReal::NegInf,
        (ExtReal::NegInf, ExtReal::NegInf) => ExtReal::PosInf,
        (ExtReal::NegInf, _) => ExtReal::NegInf,
        (_, ExtReal::NegInf) => ExtReal::PosInf,
        (ExtReal::Finite(b), ExtReal::Finite(i)) => ExtReal::Finite(b + delta - i),
        (ExtReal::PosInf, _) => ExtReal::PosInf,
    }
}

/// How far a candidate position is from constant cash above the base.
fn tn_violation(base: ExtReal, pos: &Contract, delta: f64) -> ExtReal {
    let inf = pos.inf();
    let spread = match inf.finite() {
        Some(i) => pos.spread().add_finite(-CONSTANT_TOL * (1.0 + i.abs())),
        None => ExtReal::PosInf,
    };
    spread.max(shortfall(base, inf, delta))
}

#[derive(Debug, Clone)]
struct Best {
    candidate: Report,
    inf: ExtReal,
    score: ExtReal,
    position: Contract,
}

impl Best {
    fn offer(slot: &mut Option<Best>, candidate: &Report, position: Contract, score: ExtReal) {
        if slot.as_ref().is_none_or(|b| score < b.score) {
            *slot = Some(Best {
                candidate: candidate.clone(),
                inf: position.inf(),
                score,
                position,
            });
        }
    }
}

/// Search results for one scenario.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub base: ExtReal,
    pub degenerate: bool,
    wn: Option<Best>,
    tn: Option<Best>,
    /// Closed-form WN answer, where one applies.
    wn_certificate: Option<bool>,
    /// Closed-form TN answer, where one applies.
    tn_certificate: Option<(bool, &'static str)>,
    pub candidates: usize,
}

impl Evaluation {
    pub fn wn_shortfall(&self) -> ExtReal {
        self.wn.as_ref().map_or(ExtReal::PosInf, |b| b.score)
    }

    pub fn tn_violation(&self) -> ExtReal {
        self.tn.as_ref().map_or(ExtReal::PosInf, |b| b.score)
    }
}

/// Whether a constant position forces the share-matching trade: true when
/// the constant, the denominator (for ratios) and the securities are
/// linearly independent, so that only zero net shares cancel.
fn constant_needs_matching(rule: &ScoringRule) -> bool {
    let columns: Vec<Vec<f64>> = match rule {
        ScoringRule::Expectation(e) => match &e.phi {
            Some(phi) => transpose(phi),
            None => return true,
        },
        ScoringRule::Cost(c) => transpose(&c.phi),
        ScoringRule::Ratio(r) => {
            let mut cols = vec![r.denominator.clone()];
            cols.extend(transpose(&r.phi));
            cols
        }
        _ => return false,
    };
    let n = columns[0].len();
    let mut all = vec![vec![1.0; n]];
    all.extend(columns);
    let m = DMatrix::from_fn(n, all.len(), |i, j| all[j][i]);
    m.rank(1e-9) == all.len()
}

fn transpose(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect()
}

/// The share-matching trade (net shares back to zero) and small steps from
/// the state along the held share change in both directions.
fn matching_line(rule: &ScoringRule, sc: &Scenario) -> (Option<Report>, Vec<Report>) {
    let Some(theta_s) = rule.shares(&sc.state) else {
        return (None, Vec::new());
    };
    let mut net = vec![0.0; theta_s.len()];
    for (a, b) in &sc.held {
        let (Some(ta), Some(tb)) = (rule.shares(a), rule.shares(b)) else {
            return (None, Vec::new());
        };
        for i in 0..net.len() {
            net[i] += tb[i] - ta[i];
        }
    }
    let along = |t: f64| {
        // snap cancellation residue so an exact match stays exact
        let theta: Vec<f64> = theta_s
            .iter()
            .zip(&net)
            .map(|(s, d)| {
                let v = s - t * d;
                if v.abs() <= 1e-12 * (s.abs() + (t * d).abs()) {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        rule.report_from_shares(&theta).ok()
    };
    let line = (0..=20)
        .flat_map(|j| [0.5f64.powi(j), -(0.5f64.powi(j))])
        .filter_map(along)
        .collect();
    (along(1.0), line)
}

/// Reports strictly between the state and `r1`, approaching the state.
fn quantile_line(sc: &Scenario) -> Vec<Report> {
    let (Some(s), Some(r1)) = (sc.state.as_scalar(), sc.held[0].0.as_scalar()) else {
        return Vec::new();
    };
    (1..=20)
        .map(|j| Report::scalar(s - 0.5f64.powi(j) * (s - r1)))
        .collect()
}

pub(crate) struct Searcher<'a> {
    rule: &'a ScoringRule,
    grid: &'a [Report],
    scores: Vec<Contract>,
    delta: f64,
    needs_matching: bool,
    /// Candidates cover every report: finite rules over their full grid.
    pub exhaustive: bool,
}

impl<'a> Searcher<'a> {
    pub fn new(rule: &'a ScoringRule, grid: &'a [Report], delta: f64) -> Result<Self> {
        let scores = grid
            .par_iter()
            .map(|r| rule.score_contract(r))
            .collect::<Result<Vec<_>>>()?;
        let exhaustive = match rule {
            ScoringRule::Finite(f) => grid.len() == f.reports.len(),
            ScoringRule::Cost(c) => matches!(c.shares, ShareSpace::Lattice { .. }),
            _ => false,
        };
        Ok(Searcher {
            rule,
            grid,
            scores,
            delta,
            needs_matching: constant_needs_matching(rule),
            exhaustive,
        })
    }

    pub fn evaluate(&self, sc: &Scenario) -> Result<Evaluation> {
        let rule = self.rule;
        let held = sc.position(rule)?;
        let base = held.inf();
        let degenerate = held
            .constant_value(CONSTANT_TOL * (1.0 + base.finite().map_or(0.0, f64::abs)))
            .is_some();
        let pre = held.sub(&rule.score_contract(&sc.state)?)?;
        let mut wn = None;
        let mut tn = None;
        let mut visit = |c: &Report, score: &Contract| -> Result<()> {
            let pos = pre.add(score)?;
            let inf = pos.inf();
            Best::offer(&mut wn, c, pos.clone(), shortfall(base, inf, self.delta));
            let v = tn_violation(base, &pos, self.delta);
            Best::offer(&mut tn, c, pos, v);
            Ok(())
        };
        for (c, s) in self.grid.iter().zip(&self.scores) {
            visit(c, s)?;
        }
        let (matched, line) = matching_line(rule, sc);
        let mut extra: Vec<Report> = sc
            .held
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        extra.push(sc.state.clone());
        extra.extend(line);
        let single_quantile = matches!(rule, ScoringRule::Quantile(_)) && sc.held.len() == 1;
        if single_quantile {
            extra.extend(quantile_line(sc));
        }
        for c in &extra {
            if let Ok(s) = rule.score_contract(c) {
                visit(c, &s)?;
            }
        }
        let candidates = self.grid.len() + extra.len();

        let wn_certificate = if single_quantile {
            let (a, b) = &sc.held[0];
            let (r1, r1_to, s) = (
                a.as_scalar().unwrap(),
                b.as_scalar().unwrap(),
                sc.state.as_scalar().unwrap(),
            );
            Some(!quantile_wn_blocked(r1, r1_to, s))
        } else {
            None
        };
        let tn_certificate = if wn_certificate == Some(false) {
            Some((false, "implied by WN failure"))
        } else if self.needs_matching {
            // only the full share match can cancel every security
            let ok = match &matched {
                Some(c) => {
                    let pos = pre.add(&rule.score_contract(c)?)?;
                    tn_violation(base, &pos, self.delta) < ExtReal::ZERO
                }
                _ => false,
            };
            let why = if matches!(rule, ScoringRule::Ratio(_)) {
                "constant positions need zero net shares and zero denominator exposure"
            } else {
                "constant positions need zero net shares"
            };
            Some((ok, why))
        } else {
            None
        };
        Ok(Evaluation {
            base,
            degenerate,
            wn,
            tn,
            wn_certificate,
            tn_certificate,
            candidates,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Which {
    Wn,
    Tn,
}

/// Verdict and basis for one scenario, reconciling search with any
/// closed-form answer.
fn judge(ev: &Evaluation, which: Which, exhaustive: bool) -> (Verdict, Basis) {
    let (found, cert) = match which {
        Which::Wn => (
            ev.wn_shortfall() < ExtReal::ZERO,
            ev.wn_certificate.map(|c| (c, "quantile characterization")),
        ),
        Which::Tn => (ev.tn_violation() < ExtReal::ZERO, ev.tn_certificate),
    };
    // a TN success is also a WN success, so the TN answer can settle WN
    let cert = match (which, cert, ev.tn_certificate) {
        (Which::Wn, None, Some((true, _))) => {
            Some((true, "neutralized by the share-matching trade"))
        }
        (_, c, _) => c,
    };
    match cert {
        Some((claimed, why)) if claimed == found => {
            let v = if found {
                Verdict::Holds
            } else {
                Verdict::Fails
            };
            (v, Basis::ClosedForm(why.into()))
        }
        Some(_) => (Verdict::Inconclusive, Basis::Search),
        None if found => (Verdict::Holds, Basis::Search),
        None if exhaustive => (Verdict::Fails, Basis::Exhaustive),
        None => (Verdict::Fails, Basis::Search),
    }
}

fn blocking(pos: &Contract, level: ExtReal) -> Vec<Outcome> {
    let mut out: Vec<Outcome> = pos
        .probe_outcomes()
        .into_iter()
        .filter(|y| pos.eval(y).is_ok_and(|v| ExtReal::Finite(v) <= level))
        .collect();
    out.truncate(8);
    out
}

fn run(
    check: Check,
    rule: &ScoringRule,
    grid: &[Report],
    set: &ScenarioSet,
    cfg: &SearchConfig,
) -> Result<AxiomReport> {
    cfg.validate()?;
    if set.scenarios.is_empty() {
        return Err(Error::InvalidSearch("no scenarios to check".into()));
    }
    let searcher = Searcher::new(rule, grid, cfg.delta)?;
    let which = if check == Check::Wn {
        Which::Wn
    } else {
        Which::Tn
    };
    let evals: Vec<Result<Evaluation>> = set
        .scenarios
        .par_iter()
        .map(|sc| searcher.evaluate(sc))
        .collect();

    let complete = set.exhaustive && searcher.exhaustive;
    let mut verdicts = Vec::new();
    let mut report = AxiomReport::new(check, Verdict::Holds, Basis::Search);
    let mut fail_basis: Option<Basis> = None;
    let mut worst = ExtReal::NegInf;
    let mut degenerate = 0;
    let mut budget = 0;
    for (sc, ev) in set.scenarios.iter().zip(evals) {
        let ev = ev?;
        budget += ev.candidates;
        if ev.degenerate {
            degenerate += 1;
            continue;
        }
        let (v, basis) = judge(&ev, which, searcher.exhaustive);
        let best = match which {
            Which::Wn => ev.wn.as_ref(),
            Which::Tn => ev.tn.as_ref(),
        };
        let score = best.map_or(ExtReal::PosInf, |b| b.score);
        worst = worst.max(score);
        if v == Verdict::Fails {
            if fail_basis
                .as_ref()
                .is_none_or(|b| *b == Basis::Search && basis != Basis::Search)
            {
                fail_basis = Some(basis.clone());
            }
            if report.witnesses.len() < cfg.max_witnesses {
                let b = best.expect("grid is nonempty");
                report.witnesses.push(Witness::Neutralization {
                    check,
                    held: sc.held.clone(),
                    state: sc.state.clone(),
                    candidate: b.candidate.clone(),
                    base_inf: ev.base,
                    best_inf: b.inf,
                    blocking: blocking(&b.position, ev.base.add_finite(cfg.delta)),
                    margin: score.finite().unwrap_or(f64::INFINITY),
                });
            }
        }
        let v = match v {
            Verdict::Holds if !complete => Verdict::HoldsAtBudget,
            other => other,
        };
        verdicts.push(v);
        report.scenarios.push(ScenarioOutcome {
            key: sc.key(),
            verdict: v,
        });
    }
    report.verdict = if verdicts.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::aggregate(verdicts)
    };
    report.basis = match (report.verdict, fail_basis) {
        (Verdict::Fails, Some(b)) => b,
        (Verdict::Holds, _) => Basis::Exhaustive,
        _ => Basis::Search,
    };
    report.budget = budget;
    report.margin = Some(worst);
    let unsettled: Vec<&str> = report
        .scenarios
        .iter()
        .filter(|s| s.verdict == Verdict::Inconclusive)
        .map(|s| s.key.as_str())
        .take(4)
        .collect();
    if !unsettled.is_empty() {
        report.notes.push(format!(
            "search and closed form disagree at {}",
            unsettled.join(", ")
        ));
    }
    if degenerate > 0 {
        report.notes.push(format!(
            "{degenerate} degenerate-constant positions skipped: the held trades already pay cash"
        ));
    }
    if matches!(rule.outcomes(), OutcomeSpace::Interval { .. }) {
        report
            .notes
            .push("infima are exact over each contract's pieces".into());
    }
    Ok(report)
}

/// WN: some trade from the state strictly raises the worst case of the
/// held position.
pub fn check_wn(
    rule: &ScoringRule,
    grid: &[Report],
    set: &ScenarioSet,
    cfg: &SearchConfig,
) -> Result<AxiomReport> {
    run(Check::Wn, rule, grid, set, cfg)
}

/// TN: some trade from the state turns one held trade into constant cash
/// above its worst case.
pub fn check_tn(
    rule: &ScoringRule,
    grid: &[Report],
    set: &ScenarioSet,
    cfg: &SearchConfig,
) -> Result<AxiomReport> {
    if set.scenarios.iter().any(|s| s.held.len() != 1) {
        return Err(Error::InvalidSearch(
            "TN scenarios hold exactly one trade".into(),
        ));
    }
    run(Check::Tn, rule, grid, set, cfg)
}

/// PN: as TN for a whole portfolio of held trades.
pub fn check_pn(
    rule: &ScoringRule,
    grid: &[Report],
    set: &ScenarioSet,
    cfg: &SearchConfig,
) -> Result<AxiomReport> {
    run(Check::Pn, rule, grid, set, cfg)
}

/// Re-runs the search for one scenario: `(base inf, WN shortfall, TN
/// violation)`.
pub(crate) fn rerun(
    rule: &ScoringRule,
    grid: &[Report],
    sc: &Scenario,
    delta: f64,
) -> Result<(ExtReal, ExtReal, ExtReal)> {
    let ev = Searcher::new(rule, grid, delta)?.evaluate(sc)?;
    Ok((ev.base, ev.wn_shortfall(), ev.tn_violation()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::ConvexFn;
    use crate::scoring::ExpectationRule;
    use crate::transform::Transform;

    fn cfg() -> SearchConfig {
        SearchConfig::default()
    }

    #[test]
    fn shortfall_in_the_extended_reals() {
        use ExtReal::*;
        assert_eq!(shortfall(NegInf, NegInf, 1e-9), PosInf);
        assert_eq!(shortfall(NegInf, Finite(-3.0), 1e-9), NegInf);
        assert_eq!(shortfall(Finite(-1.0), NegInf, 1e-9), PosInf);
        assert_eq!(shortfall(Finite(-1.0), Finite(0.0), 0.0), Finite(-1.0));
    }

    #[test]
    fn scenario_enumeration() {
        let grid: Vec<Report> = (0..7).map(Report::Label).collect();
        let set = trade_scenarios(&grid, 300, 1);
        assert!(set.exhaustive);
        assert_eq!(set.scenarios.len(), 294);
        let set = trade_scenarios(&grid, 100, 1);
        assert!(!set.exhaustive);
        let keys: HashSet<String> = set.scenarios.iter().map(Scenario::key).collect();
        assert_eq!(keys.len(), 100);
        assert_eq!(set, trade_scenarios(&grid, 100, 1));
    }

    #[test]
    fn mode_scenario_cannot_be_improved() {
        let rule = ScoringRule::mode(3).unwrap();
        let grid = cfg().grid(&rule).unwrap();
        let sc = Scenario::single(Report::Label(0), Report::Label(1), Report::Label(2));
        let (base, wn, tn) = rerun(&rule, &grid, &sc, 1e-9).unwrap();
        assert_eq!(base, ExtReal::Finite(-1.0));
        assert!(wn > ExtReal::ZERO && tn > ExtReal::ZERO);
        let set = ScenarioSet {
            scenarios: vec![sc],
            exhaustive: false,
        };
        let r = check_wn(&rule, &grid, &set, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        assert_eq!(r.basis, Basis::Exhaustive);
        let Witness::Neutralization {
            best_inf, blocking, ..
        } = &r.witnesses[0]
        else {
            panic!()
        };
        assert_eq!(*best_inf, ExtReal::Finite(-1.0));
        assert!(!blocking.is_empty());
    }

    #[test]
    fn mean_scenario_neutralizes_to_twelve() {
        let rule = ScoringRule::Expectation(ExpectationRule {
            outcomes: OutcomeSpace::interval(0.0, 1.0).unwrap(),
            phi: None,
            potential: ConvexFn::quadratic(1),
        });
        let grid = cfg().grid(&rule).unwrap();
        let sc = Scenario::single(
            Report::scalar(0.0),
            Report::scalar(2.0),
            Report::scalar(5.0),
        );
        let set = ScenarioSet {
            scenarios: vec![sc.clone()],
            exhaustive: false,
        };
        let r = check_tn(&rule, &grid, &set, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsAtBudget);
        let ev = Searcher::new(&rule, &grid, 1e-9)
            .unwrap()
            .evaluate(&sc)
            .unwrap();
        let best = ev.tn.unwrap();
        assert_eq!(best.candidate, Report::scalar(3.0));
        assert_eq!(best.position.constant_value(1e-12), Some(12.0));
        assert_eq!(ev.base, ExtReal::Finite(-4.0));
    }

    #[test]
    fn quantile_characterization_is_respected() {
        let rule =
            ScoringRule::quantile(OutcomeSpace::real_line(), 0.5, Transform::Identity).unwrap();
        let grid = SearchConfig {
            report_step: 0.1,
            ..cfg()
        }
        .grid(&rule)
        .unwrap();
        let blocked = Scenario::single(
            Report::scalar(1.0),
            Report::scalar(2.0),
            Report::scalar(0.0),
        );
        let open = Scenario::single(
            Report::scalar(1.0),
            Report::scalar(2.0),
            Report::scalar(1.5),
        );
        let set = ScenarioSet {
            scenarios: vec![blocked, open.clone()],
            exhaustive: false,
        };
        let r = check_wn(&rule, &grid, &set, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        assert!(matches!(r.basis, Basis::ClosedForm(_)));
        assert_eq!(r.scenarios[1].verdict, Verdict::HoldsAtBudget);
        assert!(quantile_wn_blocked(1.0, 0.0, 1.0));
        assert!(!quantile_wn_blocked(1.0, 0.0, 0.5));
    }

    #[test]
    fn expectile_slopes_cancel() {
        let rule = ScoringRule::expectile(OutcomeSpace::real_line(), 0.3).unwrap();
        let grid = SearchConfig {
            report_step: 0.5,
            ..cfg()
        }
        .grid(&rule)
        .unwrap();
        let sc = Scenario::single(
            Report::scalar(0.0),
            Report::scalar(1.0),
            Report::scalar(0.0),
        );
        let ev = Searcher::new(&rule, &grid, 1e-9)
            .unwrap()
            .evaluate(&sc)
            .unwrap();
        assert_eq!(ev.base, ExtReal::NegInf);
        let best = ev.wn.unwrap();
        assert_eq!(best.score, ExtReal::NegInf);
        assert!(best.inf.is_finite());
        assert_eq!(best.candidate, Report::scalar(-1.0));
    }
}

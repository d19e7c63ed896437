//! Checkers for the market axioms. Each returns an [`AxiomReport`] with a
//! verdict, the basis for it, and re-checkable witnesses when it fails.

mod budget;
mod neutral;
mod replay;

pub use budget::{check_btb, random_btb_cases, BudgetCase};
pub use neutral::{
    check_pn, check_tn, check_wn, portfolio_scenarios, quantile_wn_blocked, trade_scenarios,
    Scenario, ScenarioSet,
};
pub use replay::{replay_witness, Subject};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::contract::Contract;
use crate::engine::grid_loss_bound;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::outcome::{Outcome, OutcomeSpace};
use crate::scoring::{Report, ScoringRule};
use crate::verdict::{AxiomReport, Basis, Check, Verdict, Witness, STRICT_MARGIN};

/// Grids, budgets and tolerances shared by the search-based checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Spacing of report grids on continuous report spaces.
    pub report_step: f64,
    /// Range used for unbounded report axes.
    pub report_window: [f64; 2],
    /// Range used for random beliefs on unbounded outcome spaces.
    pub outcome_window: [f64; 2],
    /// Strictness margin separating strict inequalities from ties.
    pub delta: f64,
    /// Number of trade scenarios for WN and TN.
    pub scenarios: usize,
    /// Largest portfolio for PN.
    pub portfolio_size: usize,
    /// Number of random beliefs for IC and BTB.
    pub beliefs: usize,
    /// Largest number of reports used for pairwise checks.
    pub max_pair_reports: usize,
    pub epsilons: Vec<f64>,
    pub max_witnesses: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            report_step: 0.01,
            report_window: [-5.0, 5.0],
            outcome_window: [-3.0, 3.0],
            delta: STRICT_MARGIN,
            scenarios: 200,
            portfolio_size: 3,
            beliefs: 100,
            max_pair_reports: 200,
            epsilons: vec![0.5, 0.1, 0.05, 0.01],
            max_witnesses: 8,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSearch(m.into()));
        if !(self.report_step > 0.0) {
            return bad("report_step must be positive");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if !(self.report_window[0] < self.report_window[1])
            || !(self.outcome_window[0] < self.outcome_window[1])
        {
            return bad("windows must be nonempty");
        }
        if self.scenarios == 0 || self.beliefs == 0 || self.max_pair_reports < 2 {
            return bad("budgets must be positive");
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("budgets epsilon must be positive");
        }
        Ok(())
    }

    pub fn grid(&self, rule: &ScoringRule) -> Result<Vec<Report>> {
        let g = rule.report_grid(
            self.report_step,
            (self.report_window[0], self.report_window[1]),
        )?;
        if g.is_empty() {
            return Err(Error::InvalidSearch("the report grid is empty".into()));
        }
        Ok(g)
    }
}

/// Evenly spaced subsample of at most `max` items, keeping both ends.
pub(crate) fn thin<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max)
        .map(|i| items[(i * (items.len() - 1)) / (max - 1)].clone())
        .collect()
}

/// Random beliefs suited to the rule: full-support pmfs on finite spaces,
/// piecewise-linear CDFs with two to four pieces on the real line.
pub fn random_beliefs(
    rule: &ScoringRule,
    count: usize,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<Vec<Belief>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let b = match rule.outcomes() {
            OutcomeSpace::Finite { labels } => {
                let w: Vec<f64> = (0..labels.len())
                    .map(|_| rng.gen_range(0.05..1.0))
                    .collect();
                let s: f64 = w.iter().sum();
                Belief::pmf(w.into_iter().map(|v| v / s).collect())?
            }
            OutcomeSpace::Interval { lo, hi } => {
                let a = lo.unwrap_or(cfg.outcome_window[0]);
                let b = hi.unwrap_or(cfg.outcome_window[1]);
                let pieces = rng.gen_range(2..=4);
                let mut xs: Vec<f64> = (0..=pieces).map(|_| rng.gen_range(a..b)).collect();
                xs.sort_by(f64::total_cmp);
                let mut fs: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.0..1.0)).collect();
                fs.sort_by(f64::total_cmp);
                fs.insert(0, 0.0);
                fs.push(1.0);
                match Belief::cdf(xs, fs) {
                    Ok(b) => b,
                    Err(_) => continue,
                }
            }
        };
        if rule.property_value(&b).is_ok() {
            out.push(b);
        }
    }
    Ok(out)
}

fn expected(rule: &ScoringRule, r: &Report, p: &Belief) -> Result<f64> {
    rule.expected_score(r, p)
}

/// IC: the grid maximizer of expected trade payoff, from several market
/// states, and the optimizer's best response both agree with the property.
pub fn check_ic(rule: &ScoringRule, beliefs: &[Belief], cfg: &SearchConfig) -> Result<AxiomReport> {
    cfg.validate()?;
    let grid = cfg.grid(rule)?;
    let use_grid = grid.len() <= 20_000;
    let states: Vec<Report> = [0, grid.len() / 2, grid.len() - 1]
        .iter()
        .map(|i| grid[*i].clone())
        .collect();
    let grid_tol = cfg.report_step * 1.01;
    let scores: Vec<Contract> = if use_grid {
        grid.iter()
            .map(|r| rule.score_contract(r))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let per_belief: Vec<Result<(Verdict, Option<Witness>, f64, Option<String>)>> = beliefs
        .par_iter()
        .map(|p| {
            let props = rule.property_value(p)?;
            let prop = props[0].clone();
            let within = |r: &Report, tol: f64| props.iter().any(|q| r.distance(q) <= tol);
            let best = rule.best_response(p)?;
            let exact = rule.has_finite_reports();
            let tol = if exact {
                0.0
            } else {
                1e-6 * (1.0 + prop.distance(&zero_like(&prop)))
            };
            let mut worst = best_gap(&props, &best);
            let mut candidates = vec![best.clone()];
            let mut note = None;
            if use_grid {
                let values: Vec<f64> = scores
                    .iter()
                    .map(|s| s.expected_payoff(p))
                    .collect::<Result<_>>()?;
                let mut picks = Vec::new();
                for s in &states {
                    let base = expected(rule, s, p)?;
                    let (i, _) = values.iter().map(|v| v - base).enumerate().fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
                    );
                    picks.push(i);
                }
                if picks.iter().any(|i| *i != picks[0]) {
                    note = Some(format!(
                        "grid maximizer depends on the market state for belief {p:?}"
                    ));
                }
                let g = grid[picks[0]].clone();
                let in_window = prop_in_grid_hull(&grid, &prop);
                if in_window {
                    let gtol = if exact { 0.0 } else { grid_tol };
                    if !within(&g, gtol) {
                        worst = worst.max(best_gap(&props, &g));
                        candidates.push(g);
                    }
                }
            }
            if within(&best, tol) && candidates.len() == 1 {
                return Ok((Verdict::HoldsAtBudget, None, worst, note));
            }
            // a disagreement refutes IC only if the other report scores strictly higher
            let prop_value = expected(rule, &prop, p)?;
            let mut top: Option<(Report, f64)> = None;
            for c in candidates.iter().filter(|c| !within(c, tol)) {
                let adv = expected(rule, c, p)? - prop_value;
                if top.as_ref().is_none_or(|t| adv > t.1) {
                    top = Some((c.clone(), adv));
                }
            }
            match top {
                Some((c, adv)) if adv > cfg.delta => Ok((
                    Verdict::Fails,
                    Some(Witness::Mismatch {
                        belief: p.clone(),
                        best: c,
                        property: prop,
                        margin: adv,
                    }),
                    worst,
                    note,
                )),
                Some(_) => Ok((
                    Verdict::Inconclusive,
                    None,
                    worst,
                    Some(format!(
                        "optimizer disagrees with the property without a better score for {p:?}"
                    )),
                )),
                None => Ok((Verdict::HoldsAtBudget, None, worst, note)),
            }
        })
        .collect();

    let mut verdicts = Vec::new();
    let mut report =
        AxiomReport::new(Check::Ic, Verdict::Holds, Basis::Search).with_budget(beliefs.len());
    let mut worst = 0.0_f64;
    for r in per_belief {
        let (v, w, gap, note) = r?;
        verdicts.push(v);
        worst = worst.max(gap);
        if let Some(w) = w {
            if report.witnesses.len() < cfg.max_witnesses {
                report.witnesses.push(w);
            }
        }
        if let Some(n) = note {
            if report.notes.len() < 4 {
                report.notes.push(n);
            }
        }
    }
    report.verdict = Verdict::aggregate(verdicts);
    if beliefs.is_empty() {
        report.verdict = Verdict::Inconclusive;
    }
    Ok(report.with_margin(worst))
}

fn zero_like(r: &Report) -> Report {
    match r {
        Report::Label(_) => r.clone(),
        Report::Point(p) => Report::Point(vec![0.0; p.len()]),
    }
}

fn best_gap(props: &[Report], r: &Report) -> f64 {
    props
        .iter()
        .map(|q| q.distance(r))
        .fold(f64::INFINITY, f64::min)
}

fn prop_in_grid_hull(grid: &[Report], prop: &Report) -> bool {
    let Some(p) = prop.as_point() else {
        return true;
    };
    (0..p.len()).all(|i| {
        let lo = grid
            .iter()
            .filter_map(|g| g.as_point())
            .map(|g| g[i])
            .fold(f64::INFINITY, f64::min);
        let hi = grid
            .iter()
            .filter_map(|g| g.as_point())
            .map(|g| g[i])
            .fold(f64::NEG_INFINITY, f64::max);
        lo <= p[i] && p[i] <= hi
    })
}

/// ARB: no trade between grid reports pays strictly positive in every
/// outcome.
pub fn check_arb(rule: &ScoringRule, grid: &[Report], cfg: &SearchConfig) -> Result<AxiomReport> {
    cfg.validate()?;
    let reports = thin(grid, cfg.max_pair_reports);
    let complete = reports.len() == grid.len();
    let scores: Vec<Contract> = reports
        .iter()
        .map(|r| rule.score_contract(r))
        .collect::<Result<_>>()?;
    let rows: Vec<Result<(ExtReal, Vec<Witness>)>> = (0..reports.len())
        .into_par_iter()
        .map(|i| {
            let mut top = ExtReal::NegInf;
            let mut found = Vec::new();
            for j in 0..reports.len() {
                let inf = scores[j].sub(&scores[i])?.inf();
                top = top.max(inf);
                if inf > ExtReal::Finite(cfg.delta) {
                    found.push(Witness::Arbitrage {
                        from: reports[i].clone(),
                        to: reports[j].clone(),
                        margin: inf.finite().unwrap_or(f64::INFINITY),
                    });
                }
            }
            Ok((top, found))
        })
        .collect();
    let mut top = ExtReal::NegInf;
    let mut witnesses = Vec::new();
    for r in rows {
        let (t, w) = r?;
        top = top.max(t);
        witnesses.extend(w);
    }
    witnesses.truncate(cfg.max_witnesses);
    let exhaustive = matches!(rule, ScoringRule::Finite(_)) && complete;
    let verdict = match (witnesses.is_empty(), exhaustive) {
        (false, _) => Verdict::Fails,
        (true, true) => Verdict::Holds,
        (true, false) => Verdict::HoldsAtBudget,
    };
    let basis = if rule.has_finite_reports() && complete {
        Basis::Exhaustive
    } else {
        Basis::Search
    };
    let mut r = AxiomReport::new(Check::Arb, verdict, basis)
        .with_budget(reports.len() * reports.len())
        .with_margin(top);
    r.witnesses = witnesses;
    Ok(r)
}

/// `sup_y [sup_r S(r, y) - S(r0, y)]` from the family's closed-form
/// self-score. `None` when no closed form applies; the flag marks an upper
/// bound rather than the exact value.
pub fn self_score_bound(rule: &ScoringRule, r0: &Report) -> Result<Option<(ExtReal, bool)>> {
    let s0 = rule.score_contract(r0)?;
    match rule {
        ScoringRule::Finite(f) => {
            let v = s0.as_finite().expect("finite");
            let gap = (0..v.len())
                .map(|y| {
                    f.payoffs
                        .iter()
                        .map(|row| row[y])
                        .fold(f64::NEG_INFINITY, f64::max)
                        - v[y]
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(Some((ExtReal::Finite(gap), false)))
        }
        ScoringRule::Expectation(e) => match &e.phi {
            Some(phi) => {
                let v = s0.as_finite().expect("finite");
                let dom = e.potential.domain();
                let mut gap = f64::NEG_INFINITY;
                for (row, s) in phi.iter().zip(v) {
                    if !dom.contains_closure(row) {
                        return Ok(None);
                    }
                    gap = gap.max(e.potential.closure_value(row)? - s);
                }
                Ok(Some((ExtReal::Finite(gap), false)))
            }
            None => {
                let (lo, hi) = match &e.outcomes {
                    OutcomeSpace::Interval { lo, hi } => (*lo, *hi),
                    OutcomeSpace::Finite { .. } => unreachable!("validated"),
                };
                let (Some(lo), Some(hi)) = (lo, hi) else {
                    return Ok(Some((ExtReal::PosInf, false)));
                };
                // the gap is a Bregman divergence in y, convex, so maximal at an end
                let mut gap = f64::NEG_INFINITY;
                for y in [lo, hi] {
                    gap = gap.max(e.potential.closure_value(&[y])? - s0.eval(&Outcome::Real(y))?);
                }
                Ok(Some((ExtReal::Finite(gap), false)))
            }
        },
        // scores are nonpositive and vanish when the report equals the outcome
        ScoringRule::Quantile(_) | ScoringRule::Expectile(_) => Ok(Some((s0.inf().neg(), false))),
        ScoringRule::Ratio(rr) => {
            let v = s0.as_finite().expect("finite");
            let dom = rr.potential.domain();
            let mut gap = f64::NEG_INFINITY;
            for ((row, b), s) in rr.phi.iter().zip(&rr.denominator).zip(v) {
                let psi: Vec<f64> = row.iter().map(|x| x / b).collect();
                if !dom.contains_closure(&psi) {
                    return Ok(None);
                }
                gap = gap.max(b * rr.potential.closure_value(&psi)? - s);
            }
            Ok(Some((ExtReal::Finite(gap), false)))
        }
        ScoringRule::Cost(c) => {
            let v = s0.as_finite().expect("finite");
            let mut gap = ExtReal::NegInf;
            for (row, s) in c.phi.iter().zip(v) {
                let t = match c.cost.conjugate_sup(row) {
                    Ok(t) => t,
                    Err(_) => return Ok(None),
                };
                gap = gap.max(t.add_finite(-s));
            }
            let bound = matches!(c.shares, crate::costmarket::ShareSpace::Lattice { .. });
            Ok(Some((gap, bound)))
        }
    }
}

/// Outcomes and trades along which the maker's loss from `r0` diverges, or
/// `None` when neither end of the outcome space is unbounded.
pub fn divergence_probe(rule: &ScoringRule, r0: &Report) -> Result<Option<Witness>> {
    let OutcomeSpace::Interval { lo, hi } = rule.outcomes() else {
        return Ok(None);
    };
    let x0 = r0
        .as_scalar()
        .ok_or_else(|| Error::InvalidSearch("divergence probes need scalar reports".into()))?;
    let mut best: Option<(Vec<Report>, Vec<Outcome>, Vec<f64>)> = None;
    for (dir, open) in [(1.0, hi.is_none()), (-1.0, lo.is_none())] {
        if !open {
            continue;
        }
        let mut to = Vec::new();
        let mut ys = Vec::new();
        let mut losses = Vec::new();
        for i in 1..=10 {
            let (target, y) = match rule {
                // a fixed trade whose payoff grows linearly in the outcome
                ScoringRule::Expectation(_) => (x0 + dir, x0 + dir * i as f64),
                // reporting the outcome itself
                _ => {
                    let y = x0 + dir * 2f64.powi(i);
                    (y, y)
                }
            };
            let t = Report::scalar(target);
            let y = Outcome::Real(y);
            losses.push(rule.trade_contract(r0, &t)?.eval(&y)?);
            to.push(t);
            ys.push(y);
        }
        let growing = losses.windows(2).all(|w| w[1] > w[0]);
        if growing && best.as_ref().is_none_or(|b| losses[9] > b.2[9]) {
            best = Some((to, ys, losses));
        }
    }
    Ok(best.map(|(to, outcomes, losses)| Witness::Divergence {
        from: r0.clone(),
        to,
        outcomes,
        losses,
    }))
}

/// WCL: the maker's worst loss over every reachable state, from the
/// closed-form self-score where available and the report grid otherwise.
pub fn check_wcl(
    rule: &ScoringRule,
    r0: &Report,
    grid: &[Report],
    cfg: &SearchConfig,
) -> Result<AxiomReport> {
    cfg.validate()?;
    let on_grid = grid_loss_bound(rule, r0, grid)?;
    let closed = self_score_bound(rule, r0)?;
    let mut report = match closed {
        Some((ExtReal::Finite(b), upper)) => {
            let mut r = AxiomReport::new(
                Check::Wcl,
                Verdict::Holds,
                Basis::ClosedForm("self-score bound".into()),
            )
            .with_margin(b);
            if upper {
                r = r
                    .with_note("bound from the full share space; the lattice loss is at most this");
            }
            if on_grid > ExtReal::Finite(b + 1e-9 * (1.0 + b.abs())) {
                r.verdict = Verdict::Inconclusive;
                r = r.with_note(format!(
                    "grid loss {on_grid} exceeds the closed-form bound {b}"
                ));
            }
            r
        }
        Some((_, _)) => {
            let mut r = AxiomReport::new(
                Check::Wcl,
                Verdict::Fails,
                Basis::ClosedForm("unbounded self-score".into()),
            )
            .with_margin(ExtReal::PosInf);
            match divergence_probe(rule, r0)? {
                Some(w) => r.witnesses.push(w),
                None => {
                    r.verdict = Verdict::Inconclusive;
                    r = r.with_note("no diverging outcome sequence found");
                }
            }
            r
        }
        None => {
            let mut r = AxiomReport::new(Check::Wcl, Verdict::HoldsAtBudget, Basis::Search)
                .with_margin(on_grid);
            if on_grid == ExtReal::PosInf {
                r.verdict = Verdict::Fails;
                if let Some(w) = divergence_probe(rule, r0)? {
                    r.witnesses.push(w);
                }
            }
            r
        }
    };
    report.budget = grid.len();
    report.notes.push(format!(
        "largest loss after one move on the grid: {on_grid}"
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::Transform;

    fn cfg() -> SearchConfig {
        SearchConfig::default()
    }

    #[test]
    fn thinning_keeps_ends() {
        let v: Vec<usize> = (0..10).collect();
        assert_eq!(thin(&v, 4), vec![0, 3, 6, 9]);
        assert_eq!(thin(&v, 20), v);
    }

    #[test]
    fn mode_wcl_bound_is_one() {
        let rule = ScoringRule::mode(3).unwrap();
        let grid = cfg().grid(&rule).unwrap();
        let r = check_wcl(&rule, &Report::Label(0), &grid, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.margin, Some(ExtReal::Finite(1.0)));
    }

    #[test]
    fn mean_on_the_line_diverges() {
        let rule = ScoringRule::mean(OutcomeSpace::real_line()).unwrap();
        let grid = cfg().grid(&rule).unwrap();
        let r = check_wcl(&rule, &Report::scalar(0.0), &grid, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        let Witness::Divergence {
            losses, outcomes, ..
        } = &r.witnesses[0]
        else {
            panic!()
        };
        assert_eq!(outcomes[0], Outcome::Real(1.0));
        assert_eq!(losses[..3], [1.0, 3.0, 5.0]);
    }

    #[test]
    fn sigmoid_quantile_loss_is_bounded() {
        let rule =
            ScoringRule::quantile(OutcomeSpace::real_line(), 0.5, Transform::Sigmoid).unwrap();
        let grid = cfg().grid(&rule).unwrap();
        let r = check_wcl(&rule, &Report::scalar(0.0), &grid, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let b = r.margin.unwrap().finite().unwrap();
        assert!((b - 0.25).abs() < 1e-12 && b <= 1.0);
    }

    #[test]
    fn dominated_report_is_an_arbitrage() {
        let rule = ScoringRule::Finite(crate::scoring::FiniteRule {
            outcomes: OutcomeSpace::numbered(2).unwrap(),
            reports: vec!["a".into(), "b".into()],
            payoffs: vec![vec![1.0, 0.0], vec![2.0, 1.0]],
        });
        let grid = cfg().grid(&rule).unwrap();
        let r = check_arb(&rule, &grid, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        assert_eq!(
            r.witnesses[0],
            Witness::Arbitrage {
                from: Report::Label(0),
                to: Report::Label(1),
                margin: 1.0
            }
        );
        let mode = ScoringRule::mode(3).unwrap();
        let r = check_arb(&mode, &cfg().grid(&mode).unwrap(), &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.margin, Some(ExtReal::ZERO));
    }

    #[test]
    fn ic_on_mode_and_mean() {
        let mode = ScoringRule::mode(3).unwrap();
        let p = vec![Belief::pmf(vec![0.2, 0.5, 0.3]).unwrap()];
        assert!(check_ic(&mode, &p, &cfg()).unwrap().verdict.is_positive());
        let mean = ScoringRule::mean(OutcomeSpace::interval(0.0, 1.0).unwrap()).unwrap();
        let c = SearchConfig {
            report_window: [0.0, 1.0],
            ..cfg()
        };
        let p = vec![Belief::cdf(vec![0.4, 1.0], vec![0.0, 1.0]).unwrap()];
        let r = check_ic(&mean, &p, &c).unwrap();
        assert!(r.verdict.is_positive(), "{r:?}");
    }
}

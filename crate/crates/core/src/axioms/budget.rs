//! Bounded trader budget: from any state and belief, for every budget
//! `eps`, some trade risks less than `eps` and has positive expected
//! payoff.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::scoring::{Report, ScoringRule};
use crate::verdict::{AxiomReport, Basis, Check, Verdict, Witness};

use super::{random_beliefs, SearchConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetCase {
    pub state: Report,
    pub belief: Belief,
}

/// `count` random (state, belief) pairs with states drawn from the grid.
pub fn random_btb_cases(
    rule: &ScoringRule,
    grid: &[Report],
    count: usize,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<Vec<BudgetCase>> {
    if grid.is_empty() {
        return Err(Error::InvalidSearch("the report grid is empty".into()));
    }
    let beliefs = random_beliefs(rule, count, cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
    Ok(beliefs
        .into_iter()
        .map(|belief| BudgetCase {
            state: grid[rng.gen_range(0..grid.len())].clone(),
            belief,
        })
        .collect())
}

/// Candidate trades from the state: every report for finite report
/// spaces, otherwise steps `2^-j` of the way towards the property value.
pub(crate) fn budget_candidates(
    rule: &ScoringRule,
    grid: &[Report],
    state: &Report,
    target: &Report,
) -> Vec<Report> {
    if rule.has_finite_reports() {
        return grid.iter().filter(|r| *r != state).cloned().collect();
    }
    let (Some(s), Some(g)) = (state.as_point(), target.as_point()) else {
        return Vec::new();
    };
    (0..=60)
        .map(|j| {
            let t = 0.5f64.powi(j);
            Report::Point(s.iter().zip(g).map(|(a, b)| a + t * (b - a)).collect())
        })
        .filter(|r| r != state && rule.check_report(r).is_ok())
        .collect()
}

/// The first candidate with worst case above `-eps` and positive expected
/// payoff, or the smallest risk among those with positive expectation.
pub(crate) fn search_case(
    rule: &ScoringRule,
    grid: &[Report],
    case: &BudgetCase,
    eps: f64,
    delta: f64,
) -> Result<(bool, Option<Report>, f64)> {
    let target = rule.property_report(&case.belief)?;
    let base = rule.score_contract(&case.state)?;
    let mut riskiest: Option<(Report, f64)> = None;
    for c in budget_candidates(rule, grid, &case.state, &target) {
        let f = rule.score_contract(&c)?.sub(&base)?;
        let gain = f.expected_payoff(&case.belief)?;
        if gain <= 0.0 {
            continue;
        }
        let inf = match f.inf() {
            ExtReal::Finite(v) => v,
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::PosInf => f64::INFINITY,
        };
        if inf > -eps {
            return Ok((true, Some(c), -eps + delta - inf));
        }
        if riskiest.as_ref().is_none_or(|(_, b)| inf > *b) {
            riskiest = Some((c, inf));
        }
    }
    Ok(match riskiest {
        Some((c, inf)) => (false, Some(c), -eps + delta - inf),
        None => (false, None, f64::INFINITY),
    })
}

/// BTB over the cases, at every budget in the config.
pub fn check_btb(
    rule: &ScoringRule,
    grid: &[Report],
    cases: &[BudgetCase],
    cfg: &SearchConfig,
) -> Result<AxiomReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, f64)> = (0..cases.len())
        .flat_map(|i| cfg.epsilons.iter().map(move |e| (i, *e)))
        .collect();
    let results: Vec<Result<Option<(bool, Option<Report>, f64)>>> = jobs
        .par_iter()
        .map(|(i, eps)| {
            let case = &cases[*i];
            let target = rule.property_report(&case.belief)?;
            if target.distance(&case.state) <= 1e-12 {
                return Ok(None);
            }
            search_case(rule, grid, case, *eps, cfg.delta).map(Some)
        })
        .collect();
    let mut verdicts = Vec::new();
    let mut report = AxiomReport::new(Check::Btb, Verdict::HoldsAtBudget, Basis::Search);
    let mut skipped = 0;
    let mut worst = f64::NEG_INFINITY;
    for ((i, eps), res) in jobs.iter().zip(results) {
        let Some((ok, best, margin)) = res? else {
            skipped += 1;
            continue;
        };
        worst = worst.max(margin);
        if ok {
            verdicts.push(Verdict::HoldsAtBudget);
        } else {
            verdicts.push(Verdict::Fails);
            if report.witnesses.len() < cfg.max_witnesses {
                report.witnesses.push(Witness::Budget {
                    state: cases[*i].state.clone(),
                    belief: cases[*i].belief.clone(),
                    epsilon: *eps,
                    best,
                    margin,
                });
            }
        }
    }
    report.verdict = if verdicts.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::aggregate(verdicts)
    };
    if report.verdict == Verdict::Fails && rule.has_finite_reports() {
        report.basis = Basis::Exhaustive;
    }
    report.budget = jobs.len() - skipped;
    if worst.is_finite() {
        report.margin = Some(ExtReal::Finite(worst));
    }
    if skipped > 0 {
        report.notes.push(format!(
            "{skipped} cases skipped: the state already equals the property value"
        ));
    }
    report.notes.push(format!("budgets {:?}", cfg.epsilons));
    Ok(report)
}

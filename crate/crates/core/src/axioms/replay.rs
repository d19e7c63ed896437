//! Independent re-evaluation of stored witnesses.

use crate::convex::{invert_gradient_numeric, ConvexFn, Membership};
use crate::costmarket::{difference_sample, score_sample, CostSpec};
use crate::engine::MarketSession;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::numeric;
use crate::scoring::{Report, ScoringRule};
use crate::verdict::{reproduces, Witness};

use super::budget::{search_case, BudgetCase};
use super::neutral::{rerun, Scenario};
use super::SearchConfig;

/// What a witness is replayed against.
#[derive(Debug, Clone, Copy)]
pub enum Subject<'a> {
    /// A rule and the report grid its checks searched.
    Rule {
        rule: &'a ScoringRule,
        reports: &'a [Report],
    },
    Market(&'a CostSpec),
    Potential(&'a ConvexFn),
    Session(&'a MarketSession),
}

fn mismatch(w: &Witness) -> Error {
    Error::InvalidSearch(format!(
        "a {} witness cannot be replayed against this subject",
        w.kind()
    ))
}

fn finite_or_inf(x: ExtReal) -> f64 {
    match x {
        ExtReal::Finite(v) => v,
        ExtReal::NegInf => f64::NEG_INFINITY,
        ExtReal::PosInf => f64::INFINITY,
    }
}

/// Recomputes the violated inequality behind `w` from scratch and returns
/// the replayed margin and whether it reproduces the stored one.
pub fn replay_witness(
    subject: Subject<'_>,
    w: &Witness,
    cfg: &SearchConfig,
) -> Result<(f64, bool)> {
    let margin = match (subject, w) {
        (Subject::Rule { rule, .. }, Witness::Arbitrage { from, to, .. }) => {
            finite_or_inf(rule.trade_contract(from, to)?.inf())
        }
        (
            Subject::Rule { rule, .. },
            Witness::Mismatch {
                belief,
                best,
                property,
                ..
            },
        ) => rule.expected_score(best, belief)? - rule.expected_score(property, belief)?,
        (
            Subject::Rule { rule, .. },
            Witness::Divergence {
                from,
                to,
                outcomes,
                losses,
            },
        ) => {
            let mut again = Vec::with_capacity(losses.len());
            for (t, y) in to.iter().zip(outcomes) {
                again.push(rule.trade_contract(from, t)?.eval(y)?);
            }
            let same = again.len() == losses.len()
                && again
                    .iter()
                    .zip(losses)
                    .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            let growing = again.windows(2).all(|p| p[1] > p[0]);
            let last = again.last().copied().unwrap_or(0.0);
            return Ok((last, same && growing && last > 0.0));
        }
        (
            Subject::Rule { rule, reports },
            Witness::Neutralization {
                check,
                held,
                state,
                candidate,
                base_inf,
                best_inf,
                ..
            },
        ) => {
            let sc = Scenario {
                held: held.clone(),
                state: state.clone(),
            };
            let (base, wn, tn) = rerun(rule, reports, &sc, cfg.delta)?;
            let pos = sc
                .position(rule)?
                .sub(&rule.score_contract(state)?)?
                .add(&rule.score_contract(candidate)?)?;
            let consistent = base == *base_inf && close(pos.inf(), *best_inf);
            let m = finite_or_inf(if *check == crate::verdict::Check::Wn {
                wn
            } else {
                tn
            });
            return Ok((m, consistent && reproduces(w.margin(), m)));
        }
        (
            Subject::Rule { rule, reports },
            Witness::Budget {
                state,
                belief,
                epsilon,
                ..
            },
        ) => {
            let case = BudgetCase {
                state: state.clone(),
                belief: belief.clone(),
            };
            let (ok, _, m) = search_case(rule, reports, &case, *epsilon, cfg.delta)?;
            return Ok((m, !ok && reproduces(w.margin(), m)));
        }
        (Subject::Rule { rule, reports }, Witness::Subgroup { d, d2, .. }) => {
            let diffs = difference_sample(rule, reports)?;
            let scores = score_sample(rule, reports)?;
            let nearest = crate::costmarket::nearest_member;
            match d2 {
                None => nearest(&diffs, &d.iter().map(|v| -v).collect::<Vec<_>>()),
                Some(d2) => {
                    let sum = numeric::add(d, d2);
                    let mut gap = nearest(&diffs, &sum);
                    if nearest(&scores, d2) <= 1e-9 {
                        gap = gap.max(nearest(&scores, &sum));
                    }
                    gap
                }
            }
        }
        (Subject::Session(s), Witness::PathIndependence { index, outcome, .. }) => s
            .verify_path_independence()
            .witnesses
            .iter()
            .filter_map(|x| match x {
                Witness::PathIndependence {
                    index: i,
                    outcome: y,
                    margin,
                } if i == index && y == outcome => Some(*margin),
                _ => None,
            })
            .fold(0.0, f64::max),
        (Subject::Potential(f), Witness::Convexity { test, x, x2, .. }) => f
            .convexity_violation(*test, x, x2)
            .ok_or_else(|| mismatch(w))?,
        (Subject::Market(spec), Witness::Gradient { q, gradient, .. }) => {
            if q.is_empty() {
                // an interior price the gradient never reached
                if invert_gradient_numeric(&spec.cost, gradient, 1e-6).is_ok() {
                    0.0
                } else {
                    1.0
                }
            } else {
                let g = spec.cost.gradient(q)?;
                let poly = spec.polytope()?;
                if poly.classify(&g, 1e-12)? == Membership::Interior {
                    0.0
                } else {
                    1e-12 - crate::costmarket::polytope_depth(&poly, &g)
                }
            }
        }
        (Subject::Market(spec), Witness::QuasiOpen { q, v, .. }) => {
            cfg_margin(spec.quasi_open_slack(q, v)?)
        }
        (Subject::Market(spec), Witness::PriceBound { q, v, .. }) => {
            cfg_margin(spec.price_bound_margin(q, v)?)
        }
        _ => return Err(mismatch(w)),
    };
    Ok((margin, reproduces(w.margin(), margin)))
}

fn cfg_margin(slack: f64) -> f64 {
    crate::verdict::STRICT_MARGIN - slack
}

fn close(a: ExtReal, b: ExtReal) -> bool {
    match (a, b) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => (x - y).abs() <= 1e-9 * (1.0 + y.abs()),
        _ => a == b,
    }
}

//! Direct maximization of expected score, used as an independent check on
//! the closed-form property values.

use crate::belief::Belief;
use crate::costmarket::ShareSpace;
use crate::error::{Error, Result};
use crate::numeric::golden_max;

use super::{Report, ScoringRule};

const GOLDEN_TOL: f64 = 1e-13;

pub(super) fn best_response(rule: &ScoringRule, p: &Belief) -> Result<Report> {
    if rule.has_finite_reports() {
        let mut best: Option<(Report, f64)> = None;
        for r in rule.report_grid(1.0, (-1.0, 1.0))? {
            let v = rule.expected_score(&r, p)?;
            if best.as_ref().is_none_or(|(_, bv)| v > *bv + 1e-12) {
                best = Some((r, v));
            }
        }
        return best
            .map(|b| b.0)
            .ok_or(Error::InvalidSearch("empty report space".into()));
    }
    let k = rule.report_dim().expect("point reports");
    let objective = |x: &[f64]| -> f64 {
        rule.expected_score(&Report::Point(x.to_vec()), p)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let window = search_window(rule, p)?;
    let mut x: Vec<f64> = match &window {
        Some(w) => w.iter().map(|(a, b)| 0.5 * (a + b)).collect(),
        None => vec![0.0; k],
    };
    if let ScoringRule::Expectation(super::ExpectationRule { potential, .. })
    | ScoringRule::Ratio(super::RatioRule { potential, .. }) = rule
    {
        if !potential.domain().contains(&x) {
            x = vec![1.0 / (k as f64 + 1.0); k];
        }
    }
    for _ in 0..2000 {
        let before = x.clone();
        for i in 0..k {
            let (a, b) = match &window {
                Some(w) => coordinate_range(rule, &x, i, w[i]),
                None => {
                    let f = |t: f64| {
                        let mut y = x.clone();
                        y[i] = t;
                        objective(&y)
                    };
                    concave_bracket(f, x[i]).ok_or_else(|| {
                        Error::BeliefMismatch("expected score has no maximizer".into())
                    })?
                }
            };
            if a >= b {
                x[i] = a;
                continue;
            }
            let (xi, _) = golden_max(
                |t| {
                    let mut y = x.clone();
                    y[i] = t;
                    objective(&y)
                },
                a,
                b,
                GOLDEN_TOL * (1.0 + a.abs().max(b.abs())),
            );
            x[i] = xi;
        }
        let moved = x
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if k == 1 || moved < 1e-14 {
            break;
        }
    }
    let r = Report::Point(x);
    rule.check_report(&r)?;
    Ok(r)
}

/// Per-coordinate box known to contain the maximizer, or `None` when the
/// search must bracket it (cost markets on the full share space).
fn search_window(rule: &ScoringRule, p: &Belief) -> Result<Option<Vec<(f64, f64)>>> {
    let hull = |rows: Vec<Vec<f64>>| -> Vec<(f64, f64)> {
        let k = rows[0].len();
        (0..k)
            .map(|i| {
                let lo = rows.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[i]).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect()
    };
    let supported = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let probs = p.as_pmf().expect("finite belief");
        rows.iter()
            .zip(probs)
            .filter(|(_, q)| **q > 0.0)
            .map(|(r, _)| r.clone())
            .collect()
    };
    let support = || -> Result<Vec<(f64, f64)>> {
        let c = p
            .as_cdf()
            .ok_or_else(|| Error::BeliefMismatch("a CDF belief is required".into()))?;
        Ok(vec![c.support()])
    };
    Ok(match rule {
        ScoringRule::Expectation(e) => match &e.phi {
            Some(phi) => Some(hull(supported(phi))),
            None => Some(support()?),
        },
        ScoringRule::Quantile(_) | ScoringRule::Expectile(_) => Some(support()?),
        ScoringRule::Ratio(r) => {
            let psi: Vec<Vec<f64>> = r
                .phi
                .iter()
                .zip(&r.denominator)
                .map(|(row, b)| row.iter().map(|v| v / b).collect())
                .collect();
            Some(hull(supported(&psi)))
        }
        ScoringRule::Cost(c) => {
            debug_assert!(matches!(c.shares, ShareSpace::Full));
            None
        }
        ScoringRule::Finite(_) => unreachable!("finite reports are enumerated"),
    })
}

/// The feasible range of coordinate `i` with the others held at `x`,
/// intersected with the search window.
fn coordinate_range(rule: &ScoringRule, x: &[f64], i: usize, w: (f64, f64)) -> (f64, f64) {
    use crate::convex::Domain;
    let dom = match rule {
        ScoringRule::Expectation(e) => e.potential.domain(),
        ScoringRule::Ratio(r) => r.potential.domain(),
        _ => return w,
    };
    let (a, b) = match dom {
        Domain::Full => (f64::NEG_INFINITY, f64::INFINITY),
        Domain::ClosedBox(bx) | Domain::OpenBox(bx) => (bx.lo[i], bx.hi[i]),
        Domain::OpenOrthant => (0.0, f64::INFINITY),
        Domain::OpenSimplex => {
            let others: f64 = x
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v)
                .sum();
            (0.0, 1.0 - others)
        }
    };
    (w.0.max(a), w.1.min(b))
}

/// Brackets the maximizer of a concave function by doubling steps.
fn concave_bracket(f: impl Fn(f64) -> f64, x0: f64) -> Option<(f64, f64)> {
    let f0 = f(x0);
    let dir = if f(x0 + 1e-3) >= f0 { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut prev = x0;
    let mut fprev = f0;
    for _ in 0..200 {
        let next = x0 + dir * step;
        let fnext = f(next);
        if fnext < fprev {
            let (lo, hi) = if dir > 0.0 {
                (prev - step, next)
            } else {
                (next, prev + step)
            };
            return Some((lo.min(x0), hi.max(x0)));
        }
        prev = next;
        fprev = fnext;
        step *= 2.0;
    }
    None
}

//! Recovering a cost-function market from a scoring rule: securities from
//! a rank-revealing factorization of the trade payoffs, share vectors by
//! least squares, and a cost function from the cash components.

use nalgebra::{DMatrix, DVector};

use crate::convex::{ConvexFn, Polytope};
use crate::error::{Error, Result};
use crate::numeric::{self, dot};
use crate::scoring::{Report, ScoringRule};
use crate::verdict::Witness;

use super::subgroup::check_rule_subgroup;
use super::{CostSpec, ShareSpace};

/// Relative pivot tolerance for the rank decision.
pub const RANK_TOL: f64 = 1e-9;
/// Largest allowed violation of a supporting hyperplane.
pub const CONVEXITY_TOL: f64 = 1e-9;

/// A cost-function market equivalent to a rule on a grid of reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub reports: Vec<Report>,
    /// Extracted securities and the max-affine cost built from supporting
    /// hyperplanes at the grid points.
    pub market: CostSpec,
    /// Share vector of each report, relative to the first.
    pub shares: Vec<Vec<f64>>,
    /// Cost of each share vector; zero for the first report.
    pub costs: Vec<f64>,
    pub rank: usize,
    /// `max |S(r) - S(r_0) - (Phi v(r) - C(v(r)))|` over the grid.
    pub decomposition_residual: f64,
    /// Largest difference between a rule trade and the market trade
    /// between the same reports.
    pub round_trip_residual: f64,
    /// Largest amount by which a grid point lies below another point's
    /// supporting hyperplane.
    pub convexity_gap: f64,
    /// Distance to the known conjugate of the rule's potential, after
    /// fitting an affine term; only for expectation rules.
    pub conjugate_deviation: Option<f64>,
}

impl Extraction {
    pub fn share_of(&self, r: &Report) -> Option<&[f64]> {
        self.reports
            .iter()
            .position(|x| x == r)
            .map(|i| self.shares[i].as_slice())
    }
}

fn fail(step: &str, detail: impl Into<String>) -> Error {
    Error::Extraction {
        step: step.into(),
        detail: detail.into(),
    }
}

/// Distribution over outcomes whose security average is the market price at
/// `r`, when the rule pins it down.
fn preimage_belief(rule: &ScoringRule, r: &Report) -> Option<Vec<f64>> {
    let (phi, x) = match rule {
        ScoringRule::Expectation(e) => (e.phi.as_ref()?, r.as_point()?.to_vec()),
        ScoringRule::Cost(c) => (&c.phi, c.cost.subgradient(r.as_point()?).ok()?),
        _ => return None,
    };
    if phi.len() == 2 && phi[0].len() == 1 {
        let (a, b) = (phi[0][0], phi[1][0]);
        let t = (x[0] - a) / (b - a);
        return t.is_finite().then(|| vec![1.0 - t, t]);
    }
    Polytope::new(phi.clone()).ok()?.barycentric(&x)
}

/// One subgradient per point for one-dimensional data: the average of the
/// neighbouring secant slopes.
fn secant_slopes(v: &[f64], c: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut out = vec![0.0; v.len()];
    let secant = |i: usize, j: usize| (c[j] - c[i]) / (v[j] - v[i]);
    for (pos, &i) in order.iter().enumerate() {
        let left = (pos > 0).then(|| secant(order[pos - 1], i));
        let right = (pos + 1 < order.len()).then(|| secant(i, order[pos + 1]));
        out[i] = match (left, right) {
            (Some(l), Some(r)) => 0.5 * (l + r),
            (Some(s), None) | (None, Some(s)) => s,
            (None, None) => 0.0,
        };
    }
    out
}

pub fn extract_cost_market(rule: &ScoringRule, reports: &[Report]) -> Result<Extraction> {
    rule.validate()?;
    let n = rule
        .outcomes()
        .len()
        .ok_or_else(|| fail("input", "extraction needs a finite outcome space"))?;
    if reports.len() < 2 {
        return Err(fail("input", "need at least two reports"));
    }

    if rule.has_finite_reports() {
        let sub = check_rule_subgroup(rule, reports)?;
        if let Some(Witness::Subgroup { d, d2, margin }) = sub.witnesses.first() {
            let what = match d2 {
                Some(d2) => format!("{d:?} + {d2:?} is missing"),
                None => format!("the negation of {d:?} is missing"),
            };
            return Err(fail(
                "subgroup",
                format!("{what} (nearest member at distance {margin:e})"),
            ));
        }
    }

    let scores: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| {
            Ok(rule
                .score_contract(r)?
                .as_finite()
                .expect("finite outcomes")
                .to_vec())
        })
        .collect::<Result<_>>()?;
    let diffs: Vec<Vec<f64>> = scores.iter().map(|s| numeric::sub(s, &scores[0])).collect();
    let cashless = |d: &[f64]| {
        let mean = d.iter().sum::<f64>() / n as f64;
        d.iter().map(|x| x - mean).collect::<Vec<f64>>()
    };
    let m = reports.len();
    let dmat = DMatrix::from_fn(n, m - 1, |y, j| cashless(&diffs[j + 1])[y]);

    // rank-revealing factorization: leading pivoted columns form the basis
    let qr = dmat.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].abs())
        .collect();
    let top = diag.iter().copied().fold(0.0_f64, f64::max);
    let k = diag.iter().take_while(|v| **v > RANK_TOL * top).count();
    if top == 0.0 || k == 0 {
        return Err(fail(
            "rank",
            "every trade pays a constant; there are no securities to extract",
        ));
    }
    if let Some(dim) = rule.report_dim() {
        if !rule.has_finite_reports() && k > dim {
            return Err(fail(
                "subgroup",
                format!(
                    "trade payoffs span {k} dimensions beyond cash but reports have {dim}, so the \
                     trades cannot form an additive group"
                ),
            ));
        }
    }
    let mut order = DMatrix::from_fn(1, m - 1, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let pivots: Vec<usize> = (0..k).map(|i| order[(0, i)] as usize).collect();
    let basis = DMatrix::from_fn(n, k, |y, i| dmat[(y, pivots[i])]);
    let phi: Vec<Vec<f64>> = (0..n)
        .map(|y| (0..k).map(|i| basis[(y, i)]).collect())
        .collect();

    // shares by least squares; cash is the mean of each difference
    let gram = basis.transpose() * &basis;
    let chol = gram
        .cholesky()
        .ok_or_else(|| fail("rank", "extracted securities are numerically dependent"))?;
    let mut shares = Vec::with_capacity(m);
    let mut costs = Vec::with_capacity(m);
    let mut residual = 0.0_f64;
    for d in &diffs {
        let cl = DVector::from_vec(cashless(d));
        let v = chol.solve(&(basis.transpose() * &cl));
        residual = residual.max((&basis * &v - &cl).amax());
        shares.push(v.iter().copied().collect::<Vec<f64>>());
        costs.push(-(d.iter().sum::<f64>() / n as f64));
    }
    if residual > 1e-8 {
        return Err(fail(
            "shares",
            format!("least-squares residual {residual:e}"),
        ));
    }

    // supporting hyperplanes: prices from beliefs that make each report
    // optimal, else secant slopes on the line
    let slopes: Vec<Vec<f64>> = match reports
        .iter()
        .map(|r| preimage_belief(rule, r).map(|p| crate::scoring::mix_rows(&phi, &p)))
        .collect::<Option<Vec<_>>>()
    {
        Some(s) => s,
        None if k == 1 => {
            let v: Vec<f64> = shares.iter().map(|s| s[0]).collect();
            secant_slopes(&v, &costs)
                .into_iter()
                .map(|s| vec![s])
                .collect()
        }
        None => {
            return Err(fail(
                "convexity",
                "no supporting prices are available for a multi-dimensional share space",
            ))
        }
    };
    let offsets: Vec<f64> = (0..m)
        .map(|j| costs[j] - dot(&slopes[j], &shares[j]))
        .collect();
    let mut gap = 0.0_f64;
    let mut worst = (0, 0);
    for i in 0..m {
        for j in 0..m {
            let g = dot(&slopes[j], &shares[i]) + offsets[j] - costs[i];
            if g > gap {
                gap = g;
                worst = (i, j);
            }
        }
    }
    if gap > CONVEXITY_TOL {
        return Err(fail(
            "convexity",
            format!(
                "the cost at {} lies {gap:e} below the supporting hyperplane at {}",
                reports[worst.0], reports[worst.1]
            ),
        ));
    }
    let cost = ConvexFn::MaxAffine { slopes, offsets };
    let market = CostSpec::new(rule.outcomes().clone(), phi, cost, ShareSpace::Full)?;

    let mut round_trip = 0.0_f64;
    for i in 0..m {
        for j in 0..m {
            let expected = numeric::sub(&scores[j], &scores[i]);
            let bundle = numeric::sub(&shares[j], &shares[i]);
            let paid = market.cost_of(&shares[i], &bundle)?;
            let got = market.bundle_contract(&bundle, paid)?;
            let got = got.as_finite().expect("finite");
            let err = got
                .iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            round_trip = round_trip.max(err);
        }
    }

    let conjugate_deviation = match rule {
        ScoringRule::Expectation(e) => conjugate_fit(&e.potential, reports, &costs),
        _ => None,
    };

    Ok(Extraction {
        reports: reports.to_vec(),
        market,
        shares,
        costs,
        rank: k,
        decomposition_residual: residual,
        round_trip_residual: round_trip,
        convexity_gap: gap,
        conjugate_deviation,
    })
}

/// Fits `cost - G*(dG(r)) = a.dG(r) + c` by least squares and returns the
/// largest residual.
fn conjugate_fit(potential: &ConvexFn, reports: &[Report], costs: &[f64]) -> Option<f64> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (r, c) in reports.iter().zip(costs) {
        let theta = potential.subgradient(r.as_point()?).ok()?;
        let (conj, _) = potential.conjugate(&theta).ok()?;
        let mut row = theta;
        row.push(1.0);
        rows.push(row);
        rhs.push(c - conj);
    }
    let cols = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let coef = a.clone().svd(true, true).solve(&b, 1e-12).ok()?;
    Some((a * coef - b).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::OutcomeSpace;

    fn binary(potential: ConvexFn) -> ScoringRule {
        ScoringRule::Expectation(crate::scoring::ExpectationRule {
            outcomes: OutcomeSpace::numbered(2).unwrap(),
            phi: Some(vec![vec![0.0], vec![1.0]]),
            potential,
        })
    }

    #[test]
    fn secants_support_a_parabola() {
        let v = [0.0, 2.0, 1.0];
        let c = [0.0, 4.0, 1.0];
        assert_eq!(secant_slopes(&v, &c), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn quadratic_rule_yields_a_quadratic_cost() {
        let rule = binary(ConvexFn::Quadratic {
            dim: 1,
            scale: 1.0,
            bounds: Some(crate::convex::BoxBounds::new(vec![0.0], vec![1.0]).unwrap()),
        });
        let grid = rule.report_grid(0.1, (0.0, 1.0)).unwrap();
        let x = extract_cost_market(&rule, &grid).unwrap();
        assert_eq!(x.rank, 1);
        assert!(x.round_trip_residual < 1e-12);
        assert!(x.conjugate_deviation.unwrap() < 1e-12);
    }

    #[test]
    fn mode_rule_fails_the_subgroup_step() {
        let rule = ScoringRule::mode(3).unwrap();
        let grid = rule.report_grid(1.0, (0.0, 1.0)).unwrap();
        let err = extract_cost_market(&rule, &grid).unwrap_err();
        assert!(
            matches!(err, Error::Extraction { ref step, .. } if step == "subgroup"),
            "{err}"
        );
    }
}

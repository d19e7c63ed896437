//! Scoring rules: the five families plus cost-function markets viewed as
//! scoring rules over share vectors.

mod optimize;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::contract::Contract;
use crate::convex::{ConvexFn, Domain};
use crate::costmarket::{CostSpec, ShareSpace};
use crate::error::{Error, Result};
use crate::numeric::{self, dot};
use crate::outcome::{Outcome, OutcomeSpace};
use crate::transform::Transform;

/// A report: a label index for finite report spaces, a point otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Label(usize),
    Point(Vec<f64>),
}

impl Report {
    pub fn scalar(x: f64) -> Self {
        Report::Point(vec![x])
    }

    pub fn as_point(&self) -> Option<&[f64]> {
        match self {
            Report::Point(p) => Some(p),
            Report::Label(_) => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Report::Point(p) if p.len() == 1 => Some(p[0]),
            _ => None,
        }
    }

    /// Max-norm distance; labels are 0 apart when equal and 1 otherwise.
    pub fn distance(&self, other: &Report) -> f64 {
        match (self, other) {
            (Report::Label(a), Report::Label(b)) => (a != b) as u8 as f64,
            (Report::Point(a), Report::Point(b)) if a.len() == b.len() => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Report::Label(i) => write!(f, "#{i}"),
            Report::Point(p) if p.len() == 1 => write!(f, "{}", p[0]),
            Report::Point(p) => {
                let parts: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

/// An explicit payoff matrix over finite reports and outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteRule {
    pub outcomes: OutcomeSpace,
    pub reports: Vec<String>,
    /// `payoffs[r][y]`.
    pub payoffs: Vec<Vec<f64>>,
}

impl FiniteRule {
    /// `S(r, y) = 1{y = r}` on `n` numbered outcomes.
    pub fn mode(n: usize) -> Result<Self> {
        let outcomes = OutcomeSpace::numbered(n)?;
        let reports = outcomes.labels().expect("finite").to_vec();
        let payoffs = (0..n)
            .map(|r| (0..n).map(|y| (r == y) as u8 as f64).collect())
            .collect();
        Ok(FiniteRule {
            outcomes,
            reports,
            payoffs,
        })
    }

    fn is_mode(&self) -> bool {
        self.payoffs.len() == self.outcomes.len().unwrap_or(0)
            && self.payoffs.iter().enumerate().all(|(r, row)| {
                row.iter()
                    .enumerate()
                    .all(|(y, v)| *v == (r == y) as u8 as f64)
            })
    }
}

/// `S(r, y) = G(r) + dG(r).(phi(y) - r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRule {
    pub outcomes: OutcomeSpace,
    /// Security table, one row per outcome; omitted for the identity map on
    /// a real interval.
    #[serde(default)]
    pub phi: Option<Vec<Vec<f64>>>,
    pub potential: ConvexFn,
}

/// `S(r, y) = (alpha - 1{r >= y}) (g(r) - g(y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRule {
    pub outcomes: OutcomeSpace,
    pub alpha: f64,
    #[serde(default)]
    pub transform: Transform,
}

/// `S(r, y) = -|1{y <= r} - tau| * curvature * (y - r)^2`, the expectile
/// score for the Bregman divergence of `curvature * y^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectileRule {
    pub outcomes: OutcomeSpace,
    pub tau: f64,
    #[serde(default = "unit")]
    pub curvature: f64,
}

fn unit() -> f64 {
    1.0
}

/// `S(r, y) = b(y) G(r) + dG(r).(phi(y) - r b(y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRule {
    pub outcomes: OutcomeSpace,
    pub phi: Vec<Vec<f64>>,
    pub denominator: Vec<f64>,
    pub potential: ConvexFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScoringRule {
    Finite(FiniteRule),
    Expectation(ExpectationRule),
    Quantile(QuantileRule),
    Expectile(ExpectileRule),
    Ratio(RatioRule),
    /// A cost-function market: reports are share vectors `q` and
    /// `S(q, y) = q.phi(y) - C(q)`.
    Cost(CostSpec),
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidRule(msg.into())
}

fn check_table(rows: &[Vec<f64>], n: usize, k: usize, what: &str) -> Result<()> {
    if rows.len() != n
        || rows
            .iter()
            .any(|r| r.len() != k || r.iter().any(|v| !v.is_finite()))
    {
        return Err(invalid(format!(
            "{what} must have {n} finite rows of length {k}"
        )));
    }
    Ok(())
}

impl ScoringRule {
    pub fn mode(n: usize) -> Result<Self> {
        Ok(ScoringRule::Finite(FiniteRule::mode(n)?))
    }

    /// `S(r, y) = 2ry - r^2` on the given outcome interval.
    pub fn mean(outcomes: OutcomeSpace) -> Result<Self> {
        let rule = ScoringRule::Expectation(ExpectationRule {
            outcomes,
            phi: None,
            potential: ConvexFn::quadratic(1),
        });
        rule.validate()?;
        Ok(rule)
    }

    pub fn quantile(outcomes: OutcomeSpace, alpha: f64, transform: Transform) -> Result<Self> {
        let rule = ScoringRule::Quantile(QuantileRule {
            outcomes,
            alpha,
            transform,
        });
        rule.validate()?;
        Ok(rule)
    }

    pub fn expectile(outcomes: OutcomeSpace, tau: f64) -> Result<Self> {
        let rule = ScoringRule::Expectile(ExpectileRule {
            outcomes,
            tau,
            curvature: 1.0,
        });
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScoringRule::Finite(f) => {
                let n = f
                    .outcomes
                    .len()
                    .ok_or_else(|| invalid("finite rules need a finite outcome space"))?;
                f.outcomes.validate()?;
                if f.reports.is_empty() || f.reports.len() != f.payoffs.len() {
                    return Err(invalid("one payoff row per report is required"));
                }
                check_table(&f.payoffs, f.reports.len(), n, "payoff matrix")
            }
            ScoringRule::Expectation(e) => {
                e.outcomes.validate()?;
                e.potential.validate()?;
                let k = e.potential.dim();
                match (&e.outcomes, &e.phi) {
                    (OutcomeSpace::Finite { labels }, Some(phi)) => {
                        check_table(phi, labels.len(), k, "security table")
                    }
                    (OutcomeSpace::Interval { lo, hi }, None) => {
                        if k != 1 {
                            return Err(invalid(
                                "real-line expectation rules need a one-dimensional potential",
                            ));
                        }
                        let dom = e.potential.domain();
                        let ends_ok = [lo, hi].iter().all(|end| match end {
                            Some(v) => dom.contains_closure(&[*v]),
                            None => dom == Domain::Full,
                        });
                        if !ends_ok {
                            return Err(invalid(
                                "the potential's domain must cover the outcome interval",
                            ));
                        }
                        Ok(())
                    }
                    (OutcomeSpace::Finite { .. }, None) => {
                        Err(invalid("finite outcomes need a security table"))
                    }
                    (OutcomeSpace::Interval { .. }, Some(_)) => Err(invalid(
                        "real-line expectation rules use the identity security",
                    )),
                }
            }
            ScoringRule::Quantile(q) => {
                q.transform.validate()?;
                if !(q.alpha > 0.0 && q.alpha < 1.0) {
                    return Err(invalid("alpha must lie in (0, 1)"));
                }
                if q.outcomes.is_finite() {
                    return Err(invalid("quantile rules need a real outcome interval"));
                }
                q.outcomes.validate()
            }
            ScoringRule::Expectile(x) => {
                if !(x.tau > 0.0 && x.tau < 1.0) {
                    return Err(invalid("tau must lie in (0, 1)"));
                }
                if !(x.curvature.is_finite() && x.curvature > 0.0) {
                    return Err(invalid("curvature must be positive"));
                }
                if x.outcomes.is_finite() {
                    return Err(invalid("expectile rules need a real outcome interval"));
                }
                x.outcomes.validate()
            }
            ScoringRule::Ratio(r) => {
                r.outcomes.validate()?;
                r.potential.validate()?;
                let n = r
                    .outcomes
                    .len()
                    .ok_or_else(|| invalid("ratio rules need a finite outcome space"))?;
                check_table(&r.phi, n, r.potential.dim(), "security table")?;
                if r.denominator.len() != n
                    || r.denominator.iter().any(|b| !(b.is_finite() && *b > 0.0))
                {
                    return Err(invalid("the denominator must be positive on every outcome"));
                }
                let onto = matches!(
                    r.potential,
                    ConvexFn::Quadratic { bounds: None, .. }
                        | ConvexFn::Entropy { .. }
                        | ConvexFn::BinaryEntropy { .. }
                        | ConvexFn::SimplexEntropy { .. }
                );
                if !onto {
                    return Err(invalid(
                        "ratio rules need a differentiable strictly convex potential whose gradients cover R^k",
                    ));
                }
                Ok(())
            }
            ScoringRule::Cost(c) => c.validate(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ScoringRule::Finite(_) => "finite",
            ScoringRule::Expectation(_) => "expectation",
            ScoringRule::Quantile(_) => "quantile",
            ScoringRule::Expectile(_) => "expectile",
            ScoringRule::Ratio(_) => "ratio",
            ScoringRule::Cost(_) => "cost",
        }
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        match self {
            ScoringRule::Finite(f) => &f.outcomes,
            ScoringRule::Expectation(e) => &e.outcomes,
            ScoringRule::Quantile(q) => &q.outcomes,
            ScoringRule::Expectile(x) => &x.outcomes,
            ScoringRule::Ratio(r) => &r.outcomes,
            ScoringRule::Cost(c) => &c.outcomes,
        }
    }

    /// Dimension of point reports; `None` for label reports.
    pub fn report_dim(&self) -> Option<usize> {
        match self {
            ScoringRule::Finite(_) => None,
            ScoringRule::Expectation(e) => Some(e.potential.dim()),
            ScoringRule::Ratio(r) => Some(r.potential.dim()),
            ScoringRule::Quantile(_) | ScoringRule::Expectile(_) => Some(1),
            ScoringRule::Cost(c) => Some(c.cost.dim()),
        }
    }

    pub fn has_finite_reports(&self) -> bool {
        matches!(
            self,
            ScoringRule::Finite(_)
                | ScoringRule::Cost(CostSpec {
                    shares: ShareSpace::Lattice { .. },
                    ..
                })
        )
    }

    /// Labels for finite report spaces.
    pub fn report_labels(&self) -> Option<&[String]> {
        match self {
            ScoringRule::Finite(f) => Some(&f.reports),
            _ => None,
        }
    }

    pub fn check_report(&self, r: &Report) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidReport {
                report: r.to_string(),
                reason: reason.into(),
            })
        };
        match (self, r) {
            (ScoringRule::Finite(f), Report::Label(i)) => {
                if *i < f.reports.len() {
                    Ok(())
                } else {
                    bad("no such report label")
                }
            }
            (ScoringRule::Finite(_), Report::Point(_)) => bad("finite rules take label reports"),
            (_, Report::Label(_)) => bad("this family takes point reports"),
            (_, Report::Point(p)) => {
                if Some(p.len()) != self.report_dim() || p.iter().any(|v| !v.is_finite()) {
                    return bad("wrong dimension or non-finite coordinates");
                }
                let inside = match self {
                    ScoringRule::Expectation(e) => e.potential.domain().contains(p),
                    ScoringRule::Ratio(rr) => rr.potential.domain().contains(p),
                    ScoringRule::Quantile(q) => q.outcomes.contains(&Outcome::Real(p[0])),
                    ScoringRule::Expectile(x) => x.outcomes.contains(&Outcome::Real(p[0])),
                    ScoringRule::Cost(c) => c.in_share_space(p),
                    ScoringRule::Finite(_) => unreachable!(),
                };
                if inside {
                    Ok(())
                } else {
                    bad("outside the report space")
                }
            }
        }
    }

    pub fn score(&self, r: &Report, y: &Outcome) -> Result<f64> {
        self.outcomes().check(y)?;
        self.score_contract(r)?.eval(y)
    }

    /// The payoff function `S(r, .)`.
    pub fn score_contract(&self, r: &Report) -> Result<Contract> {
        self.check_report(r)?;
        match (self, r) {
            (ScoringRule::Finite(f), Report::Label(i)) => Contract::finite(f.payoffs[*i].clone()),
            (ScoringRule::Expectation(e), Report::Point(x)) => {
                let g = e.potential.value(x)?;
                let dg = e.potential.subgradient(x)?;
                let base = g - dot(&dg, x);
                match &e.phi {
                    Some(phi) => {
                        Contract::finite(phi.iter().map(|row| base + dot(&dg, row)).collect())
                    }
                    None => Contract::piecewise(
                        &e.outcomes,
                        Transform::Identity,
                        vec![],
                        vec![[base, dg[0], 0.0]],
                    ),
                }
            }
            (ScoringRule::Quantile(q), Report::Point(x)) => {
                let (a, gr) = (q.alpha, q.transform.apply(x[0]));
                // below the report: (a - 1)(g(r) - u); above: a (g(r) - u)
                let lower = [(a - 1.0) * gr, 1.0 - a, 0.0];
                let upper = [a * gr, -a, 0.0];
                interval_split(&q.outcomes, q.transform.clone(), x[0], lower, upper)
            }
            (ScoringRule::Expectile(e), Report::Point(x)) => {
                let r0 = x[0];
                let quad = |w: f64| {
                    let c = -w * e.curvature;
                    [c * r0 * r0, -2.0 * c * r0, c]
                };
                interval_split(
                    &e.outcomes,
                    Transform::Identity,
                    r0,
                    quad(1.0 - e.tau),
                    quad(e.tau),
                )
            }
            (ScoringRule::Ratio(rr), Report::Point(x)) => {
                let g = rr.potential.value(x)?;
                let dg = rr.potential.subgradient(x)?;
                let h = g - dot(&dg, x);
                Contract::finite(
                    rr.phi
                        .iter()
                        .zip(&rr.denominator)
                        .map(|(row, b)| b * h + dot(&dg, row))
                        .collect(),
                )
            }
            (ScoringRule::Cost(c), Report::Point(q)) => {
                let cq = c.cost.value(q)?;
                Contract::finite(c.phi.iter().map(|row| dot(q, row) - cq).collect())
            }
            _ => unreachable!("report kind checked above"),
        }
    }

    /// `F(to | from) = S(to, .) - S(from, .)`.
    pub fn trade_contract(&self, from: &Report, to: &Report) -> Result<Contract> {
        self.score_contract(to)?.sub(&self.score_contract(from)?)
    }

    pub fn expected_score(&self, r: &Report, p: &Belief) -> Result<f64> {
        self.score_contract(r)?.expected_payoff(p)
    }

    fn check_belief(&self, p: &Belief) -> Result<()> {
        p.validate()?;
        p.check_space(self.outcomes())
    }

    /// The elicited property `Gamma(p)`: every correct report (several only
    /// for ties of a finite property).
    pub fn property_value(&self, p: &Belief) -> Result<Vec<Report>> {
        self.check_belief(p)?;
        let single = |r: Report| -> Result<Vec<Report>> {
            self.check_report(&r).map_err(|e| {
                Error::BeliefMismatch(format!(
                    "the property value {r} is not an admissible report ({e})"
                ))
            })?;
            Ok(vec![r])
        };
        match self {
            ScoringRule::Finite(f) => {
                let probs = p.as_pmf().expect("checked");
                let values: Vec<f64> = if f.is_mode() {
                    probs.to_vec()
                } else {
                    f.payoffs.iter().map(|row| dot(row, probs)).collect()
                };
                let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| top - **v <= 1e-12)
                    .map(|(i, _)| Report::Label(i))
                    .collect())
            }
            ScoringRule::Expectation(e) => match (&e.phi, p) {
                (Some(phi), Belief::Pmf { probs }) => single(Report::Point(mix_rows(phi, probs))),
                (None, Belief::Cdf(c)) => single(Report::scalar(c.mean())),
                _ => Err(Error::BeliefMismatch(
                    "belief kind does not match the outcome space".into(),
                )),
            },
            ScoringRule::Quantile(q) => {
                let c = p
                    .as_cdf()
                    .ok_or_else(|| Error::BeliefMismatch("quantiles need a CDF belief".into()))?;
                single(Report::scalar(c.quantile(q.alpha)))
            }
            ScoringRule::Expectile(x) => {
                let c = p
                    .as_cdf()
                    .ok_or_else(|| Error::BeliefMismatch("expectiles need a CDF belief".into()))?;
                let tau = x.tau;
                let h = |v: f64| {
                    (1.0 - tau) * c.lower_partial_moment(v) - tau * c.upper_partial_moment(v)
                };
                let (a, b) = c.support();
                single(Report::scalar(numeric::bisect_increasing(
                    h, 0.0, a, b, 1e-13,
                )))
            }
            ScoringRule::Ratio(rr) => {
                let probs = p.as_pmf().expect("checked");
                let eb = dot(&rr.denominator, probs);
                single(Report::Point(
                    mix_rows(&rr.phi, probs)
                        .into_iter()
                        .map(|v| v / eb)
                        .collect(),
                ))
            }
            ScoringRule::Cost(c) => {
                let probs = p.as_pmf().expect("checked");
                let x = mix_rows(&c.phi, probs);
                match &c.shares {
                    ShareSpace::Full => single(Report::Point(c.cost.gradient_inverse(&x)?)),
                    ShareSpace::Lattice { .. } => {
                        let best = c
                            .lattice_points()?
                            .into_iter()
                            .map(|q| {
                                let v = dot(&q, &x) - c.cost.value(&q).unwrap_or(f64::INFINITY);
                                (q, v)
                            })
                            .fold((Vec::new(), f64::NEG_INFINITY), |acc, it| {
                                if it.1 > acc.1 {
                                    it
                                } else {
                                    acc
                                }
                            });
                        single(Report::Point(best.0))
                    }
                }
            }
        }
    }

    /// The report chosen by the convention for set-valued properties: the
    /// smallest label.
    pub fn property_report(&self, p: &Belief) -> Result<Report> {
        Ok(self.property_value(p)?.remove(0))
    }

    /// A maximizer of expected score found by direct optimization,
    /// independently of the property formula.
    pub fn best_response(&self, p: &Belief) -> Result<Report> {
        self.check_belief(p)?;
        optimize::best_response(self, p)
    }

    /// Share coordinates: reports `r` whose score is `cash(r) + theta(r).phi`
    /// (plus a term along the denominator for ratio rules), so that trades
    /// add in `theta`. Expectile reports use the slope `g'(r)`, in which the
    /// tails of trades add the same way.
    pub fn shares(&self, r: &Report) -> Option<Vec<f64>> {
        self.check_report(r).ok()?;
        let x = r.as_point()?;
        match self {
            ScoringRule::Expectation(e) => e.potential.subgradient(x).ok(),
            ScoringRule::Ratio(rr) => rr.potential.subgradient(x).ok(),
            ScoringRule::Cost(_) => Some(x.to_vec()),
            ScoringRule::Expectile(e) => Some(vec![2.0 * e.curvature * x[0]]),
            ScoringRule::Finite(_) | ScoringRule::Quantile(_) => None,
        }
    }

    /// Inverse of [`ScoringRule::shares`].
    pub fn report_from_shares(&self, theta: &[f64]) -> Result<Report> {
        let r = match self {
            ScoringRule::Expectation(e) => Report::Point(e.potential.gradient_inverse(theta)?),
            ScoringRule::Ratio(rr) => Report::Point(rr.potential.gradient_inverse(theta)?),
            ScoringRule::Cost(_) => Report::Point(theta.to_vec()),
            ScoringRule::Expectile(e) => Report::scalar(theta[0] / (2.0 * e.curvature)),
            ScoringRule::Finite(_) | ScoringRule::Quantile(_) => {
                return Err(invalid(format!(
                    "{} rules have no share coordinates",
                    self.family()
                )))
            }
        };
        self.check_report(&r)?;
        Ok(r)
    }

    /// Reports on a regular grid of the report space.
    pub fn report_grid(&self, step: f64, window: (f64, f64)) -> Result<Vec<Report>> {
        if !(step > 0.0) || !(window.0 < window.1) {
            return Err(Error::InvalidSearch(
                "grid step must be positive and the window nonempty".into(),
            ));
        }
        let axis = |lo: Option<f64>, hi: Option<f64>, open: bool| -> Vec<f64> {
            let a = lo.unwrap_or(window.0);
            let b = hi.unwrap_or(window.1);
            let n = ((b - a) / step).round().max(1.0) as usize;
            let h = (b - a) / n as f64;
            let first = if open && lo.is_some() { 1 } else { 0 };
            let last = if open && hi.is_some() { n - 1 } else { n };
            (first..=last).map(|i| a + i as f64 * h).collect()
        };
        let points: Vec<Vec<f64>> = match self {
            ScoringRule::Finite(f) => return Ok((0..f.reports.len()).map(Report::Label).collect()),
            ScoringRule::Quantile(QuantileRule { outcomes, .. })
            | ScoringRule::Expectile(ExpectileRule { outcomes, .. }) => {
                let (lo, hi) = match outcomes {
                    OutcomeSpace::Interval { lo, hi } => (*lo, *hi),
                    OutcomeSpace::Finite { .. } => unreachable!("validated"),
                };
                axis(lo, hi, false).into_iter().map(|v| vec![v]).collect()
            }
            ScoringRule::Expectation(ExpectationRule { potential, .. })
            | ScoringRule::Ratio(RatioRule { potential, .. }) => {
                domain_grid(&potential.domain(), potential.dim(), &axis, step)
            }
            ScoringRule::Cost(c) => match &c.shares {
                ShareSpace::Full => domain_grid(&Domain::Full, c.cost.dim(), &axis, step),
                ShareSpace::Lattice { .. } => c.lattice_points()?,
            },
        };
        Ok(points
            .into_iter()
            .map(Report::Point)
            .filter(|r| self.check_report(r).is_ok())
            .collect())
    }
}

fn domain_grid(
    dom: &Domain,
    k: usize,
    axis: &dyn Fn(Option<f64>, Option<f64>, bool) -> Vec<f64>,
    step: f64,
) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = match dom {
        Domain::Full => (0..k).map(|_| axis(None, None, false)).collect(),
        Domain::ClosedBox(b) => (0..k)
            .map(|i| axis(Some(b.lo[i]), Some(b.hi[i]), false))
            .collect(),
        Domain::OpenBox(b) => (0..k)
            .map(|i| axis(Some(b.lo[i]), Some(b.hi[i]), true))
            .collect(),
        Domain::OpenOrthant => (0..k).map(|_| axis(Some(0.0), None, true)).collect(),
        Domain::OpenSimplex => {
            let _ = step;
            (0..k).map(|_| axis(Some(0.0), Some(1.0), true)).collect()
        }
    };
    let mut out = vec![vec![]];
    for ax in axes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                ax.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out.retain(|p| dom.contains(p));
    out
}

/// A two-piece contract split at the report `r`: `lower` applies for
/// `y <= r`, `upper` for `y > r`.
fn interval_split(
    space: &OutcomeSpace,
    transform: Transform,
    r: f64,
    lower: [f64; 3],
    upper: [f64; 3],
) -> Result<Contract> {
    let (lo, hi) = match space {
        OutcomeSpace::Interval { lo, hi } => (*lo, *hi),
        OutcomeSpace::Finite { .. } => return Err(Error::RequiresFiniteOutcomes),
    };
    if lo.is_some_and(|l| r <= l) {
        Contract::piecewise(space, transform, vec![], vec![upper])
    } else if hi.is_some_and(|h| r >= h) {
        Contract::piecewise(space, transform, vec![], vec![lower])
    } else {
        Contract::piecewise(space, transform, vec![r], vec![lower, upper])
    }
}

/// `sum_y p_y phi(y)`.
pub(crate) fn mix_rows(phi: &[Vec<f64>], probs: &[f64]) -> Vec<f64> {
    let k = phi[0].len();
    let mut out = vec![0.0; k];
    for (row, p) in phi.iter().zip(probs) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += p * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real() -> OutcomeSpace {
        OutcomeSpace::real_line()
    }

    #[test]
    fn mode_rule_pays_on_correct_guess() {
        let m = ScoringRule::mode(3).unwrap();
        assert_eq!(m.score(&Report::Label(1), &Outcome::Label(1)).unwrap(), 1.0);
        assert_eq!(
            m.score_contract(&Report::Label(0))
                .unwrap()
                .as_finite()
                .unwrap(),
            &[1.0, 0.0, 0.0]
        );
        let p = Belief::pmf(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(m.property_value(&p).unwrap(), vec![Report::Label(1)]);
        let q = Belief::pmf(vec![0.6, 0.4]).unwrap();
        assert_eq!(
            ScoringRule::mode(2).unwrap().best_response(&q).unwrap(),
            Report::Label(0)
        );
    }

    #[test]
    fn mean_rule_examples() {
        let m = ScoringRule::mean(real()).unwrap();
        assert_eq!(
            m.score(&Report::scalar(1.0), &Outcome::Real(3.0)).unwrap(),
            5.0
        );
        let d = m
            .trade_contract(&Report::scalar(0.0), &Report::scalar(2.0))
            .unwrap();
        for y in [-1.0, 0.0, 0.5, 3.0] {
            assert!((d.eval(&Outcome::Real(y)).unwrap() - (-4.0 + 4.0 * y)).abs() < 1e-15);
        }
        let u = Belief::uniform(0.0, 1.0).unwrap();
        assert!((m.property_report(&u).unwrap().as_scalar().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn finite_expectation_contract() {
        let e = ScoringRule::Expectation(ExpectationRule {
            outcomes: OutcomeSpace::numbered(2).unwrap(),
            phi: Some(vec![vec![0.0], vec![1.0]]),
            potential: ConvexFn::quadratic(1),
        });
        e.validate().unwrap();
        let d = e.score_contract(&Report::scalar(0.5)).unwrap();
        assert_eq!(d.as_finite().unwrap(), &[-0.25, 0.75]);
    }

    #[test]
    fn quantile_examples() {
        let q = ScoringRule::quantile(real(), 0.5, Transform::Identity).unwrap();
        assert_eq!(
            q.score(&Report::scalar(1.0), &Outcome::Real(3.0)).unwrap(),
            -1.0
        );
        let s = ScoringRule::quantile(real(), 0.5, Transform::Sigmoid).unwrap();
        let (lo, hi) = s.score_contract(&Report::scalar(0.0)).unwrap().bounds();
        assert!(lo >= crate::ExtReal::Finite(-0.5) && hi <= crate::ExtReal::Finite(0.0));
    }

    #[test]
    fn expectile_at_one_half_is_the_mean() {
        let x = ScoringRule::expectile(real(), 0.5).unwrap();
        let u = Belief::uniform(0.0, 1.0).unwrap();
        let r = x.property_report(&u).unwrap().as_scalar().unwrap();
        assert!((r - 0.5).abs() < 1e-10);
    }

    #[test]
    fn reports_outside_the_space_are_rejected() {
        let e = ScoringRule::Expectation(ExpectationRule {
            outcomes: OutcomeSpace::numbered(2).unwrap(),
            phi: Some(vec![vec![0.0], vec![1.0]]),
            potential: ConvexFn::binary_negentropy(),
        });
        assert!(e.check_report(&Report::scalar(0.5)).is_ok());
        assert!(matches!(
            e.check_report(&Report::scalar(1.0)),
            Err(Error::InvalidReport { .. })
        ));
        assert!(e.check_report(&Report::Label(0)).is_err());
    }

    #[test]
    fn grids_respect_open_domains() {
        let e = ScoringRule::Expectation(ExpectationRule {
            outcomes: OutcomeSpace::numbered(2).unwrap(),
            phi: Some(vec![vec![0.0], vec![1.0]]),
            potential: ConvexFn::binary_negentropy(),
        });
        let g = e.report_grid(0.1, (-5.0, 5.0)).unwrap();
        assert_eq!(g.len(), 9);
        let m = ScoringRule::mean(real()).unwrap();
        assert_eq!(m.report_grid(0.5, (-1.0, 1.0)).unwrap().len(), 5);
    }
}

//! Contracts: outcome-contingent payoffs.
//!
//! On a finite outcome space a contract is a payoff vector. On a real
//! interval it is a continuous piecewise function, a polynomial of degree at
//! most two in the transformed coordinate `u = t(y)` on each piece. Every
//! family of scores in this crate has that shape, so bounds and
//! expectations are exact.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::outcome::{Outcome, OutcomeSpace};
use crate::transform::Transform;

/// Tolerance for structural identities (telescoping, projection).
pub const STRUCTURAL_TOL: f64 = 1e-12;

const CONTINUITY_TOL: f64 = 1e-9;
const CANCEL_TOL: f64 = 1e-12;

/// Coefficients `[c0, c1, c2]` of `c0 + c1 u + c2 u^2`.
pub type Poly = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contract {
    Finite { payoffs: Vec<f64> },
    Real(RealContract),
}

/// Piecewise polynomial payoff on an interval. Piece `i` covers
/// `[breaks[i-1], breaks[i]]`, with the interval ends standing in for the
/// missing outer breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealContract {
    lo: Option<f64>,
    hi: Option<f64>,
    transform: Transform,
    breaks: Vec<f64>,
    polys: Vec<Poly>,
}

impl Contract {
    pub fn finite(payoffs: Vec<f64>) -> Result<Self> {
        if payoffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidContract("payoffs must be finite".into()));
        }
        Ok(Contract::Finite { payoffs })
    }

    /// The constant contract `c * 1` on `space`.
    pub fn constant(space: &OutcomeSpace, c: f64) -> Self {
        match space {
            OutcomeSpace::Finite { labels } => Contract::Finite {
                payoffs: vec![c; labels.len()],
            },
            OutcomeSpace::Interval { lo, hi } => Contract::Real(RealContract {
                lo: *lo,
                hi: *hi,
                transform: Transform::Identity,
                breaks: vec![],
                polys: vec![[c, 0.0, 0.0]],
            }),
        }
    }

    pub fn zero(space: &OutcomeSpace) -> Self {
        Self::constant(space, 0.0)
    }

    pub fn piecewise(
        space: &OutcomeSpace,
        transform: Transform,
        breaks: Vec<f64>,
        polys: Vec<Poly>,
    ) -> Result<Self> {
        let (lo, hi) = match space {
            OutcomeSpace::Interval { lo, hi } => (*lo, *hi),
            OutcomeSpace::Finite { .. } => {
                return Err(Error::InvalidContract(
                    "piecewise contract on a finite space".into(),
                ))
            }
        };
        let rc = RealContract::new(lo, hi, transform, breaks, polys)?;
        Ok(Contract::Real(rc))
    }

    pub fn as_finite(&self) -> Option<&[f64]> {
        match self {
            Contract::Finite { payoffs } => Some(payoffs),
            Contract::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&RealContract> {
        match self {
            Contract::Real(r) => Some(r),
            Contract::Finite { .. } => None,
        }
    }

    pub fn eval(&self, y: &Outcome) -> Result<f64> {
        match (self, y) {
            (Contract::Finite { payoffs }, Outcome::Label(i)) => payoffs
                .get(*i)
                .copied()
                .ok_or_else(|| Error::InvalidOutcome(y.to_string())),
            (Contract::Real(rc), Outcome::Real(v)) if rc.contains(*v) => Ok(rc.eval(*v)),
            _ => Err(Error::InvalidOutcome(y.to_string())),
        }
    }

    /// Exact `(inf, sup)` of the payoff over the outcome space.
    pub fn bounds(&self) -> (ExtReal, ExtReal) {
        match self {
            Contract::Finite { payoffs } => {
                let lo = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (ExtReal::Finite(lo), ExtReal::Finite(hi))
            }
            Contract::Real(rc) => rc.bounds(),
        }
    }

    pub fn inf(&self) -> ExtReal {
        self.bounds().0
    }

    pub fn sup(&self) -> ExtReal {
        self.bounds().1
    }

    /// `sup - inf`; zero exactly for constant contracts.
    pub fn spread(&self) -> ExtReal {
        let (lo, hi) = self.bounds();
        hi.checked_sub(lo).unwrap_or(ExtReal::PosInf)
    }

    /// True when the payoff equals `c * 1` up to `tol`, returning `c`.
    pub fn constant_value(&self, tol: f64) -> Option<f64> {
        match self {
            Contract::Finite { payoffs } => {
                let (lo, hi) = (self.inf().finite()?, self.sup().finite()?);
                (hi - lo <= tol).then(|| payoffs.iter().sum::<f64>() / payoffs.len() as f64)
            }
            Contract::Real(rc) => {
                let c0 = rc.polys[0][0];
                let flat = rc
                    .polys
                    .iter()
                    .all(|p| p[1].abs() <= tol && p[2].abs() <= tol && (p[0] - c0).abs() <= tol);
                flat.then_some(c0)
            }
        }
    }

    /// Pointwise weighted sum.
    pub fn combine(contracts: &[&Contract], weights: &[f64]) -> Result<Contract> {
        if contracts.is_empty() || contracts.len() != weights.len() {
            return Err(Error::InvalidContract(
                "combine needs one weight per contract and at least one contract".into(),
            ));
        }
        match contracts[0] {
            Contract::Finite { payoffs } => {
                let n = payoffs.len();
                let mut out = vec![0.0; n];
                for (c, w) in contracts.iter().zip(weights) {
                    let p = c.as_finite().filter(|p| p.len() == n).ok_or_else(|| {
                        Error::MismatchedSpaces(
                            "finite contracts of different sizes or kinds".into(),
                        )
                    })?;
                    for (o, v) in out.iter_mut().zip(p) {
                        *o += w * v;
                    }
                }
                Ok(Contract::Finite { payoffs: out })
            }
            Contract::Real(first) => {
                let reals = contracts
                    .iter()
                    .map(|c| {
                        c.as_real()
                            .filter(|r| r.lo == first.lo && r.hi == first.hi)
                            .ok_or_else(|| {
                                Error::MismatchedSpaces(
                                    "real contracts on different intervals".into(),
                                )
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                RealContract::combine(&reals, weights).map(Contract::Real)
            }
        }
    }

    pub fn add(&self, other: &Contract) -> Result<Contract> {
        Contract::combine(&[self, other], &[1.0, 1.0])
    }

    pub fn sub(&self, other: &Contract) -> Result<Contract> {
        Contract::combine(&[self, other], &[1.0, -1.0])
    }

    pub fn scaled(&self, w: f64) -> Contract {
        Contract::combine(&[self], &[w]).expect("single-contract combine")
    }

    /// Splits `d = d0 + cash * 1` with `d0` orthogonal to `1`.
    pub fn project_cashless(&self) -> Result<(Contract, f64)> {
        let payoffs = self.as_finite().ok_or(Error::RequiresFiniteOutcomes)?;
        let cash = payoffs.iter().sum::<f64>() / payoffs.len() as f64;
        let d0 = payoffs.iter().map(|v| v - cash).collect();
        Ok((Contract::Finite { payoffs: d0 }, cash))
    }

    /// `E_p d(Y)`, exact for pmfs and piecewise-linear CDFs.
    pub fn expected_payoff(&self, p: &Belief) -> Result<f64> {
        match (self, p) {
            (Contract::Finite { payoffs }, Belief::Pmf { probs })
                if payoffs.len() == probs.len() =>
            {
                Ok(payoffs.iter().zip(probs).map(|(d, q)| d * q).sum())
            }
            (Contract::Real(rc), Belief::Cdf(cdf)) => {
                let (a, b) = cdf.support();
                if !rc.contains(a) || !rc.contains(b) {
                    return Err(Error::BeliefMismatch(format!(
                        "cdf support [{a}, {b}] leaves the contract's interval"
                    )));
                }
                let mut total = 0.0;
                for (xa, xb, rho) in cdf.segments() {
                    total += rho * rc.integrate(xa, xb);
                }
                Ok(total)
            }
            _ => Err(Error::BeliefMismatch(
                "belief kind does not match the contract".into(),
            )),
        }
    }

    /// Points at which two contracts must agree for them to be equal: every
    /// outcome of a finite space, or breakpoints, midpoints and points beyond
    /// the outer breakpoints on the real line.
    pub fn probe_outcomes(&self) -> Vec<Outcome> {
        match self {
            Contract::Finite { payoffs } => (0..payoffs.len()).map(Outcome::Label).collect(),
            Contract::Real(rc) => rc.probe_points().into_iter().map(Outcome::Real).collect(),
        }
    }

    /// Largest pointwise difference over the union of both contracts' probe
    /// points.
    pub fn max_abs_diff(&self, other: &Contract) -> Result<f64> {
        let diff = self.sub(other)?;
        let mut worst = 0.0_f64;
        for y in diff.probe_outcomes() {
            worst = worst.max(diff.eval(&y)?.abs());
        }
        Ok(worst)
    }
}

impl RealContract {
    pub fn new(
        lo: Option<f64>,
        hi: Option<f64>,
        transform: Transform,
        breaks: Vec<f64>,
        polys: Vec<Poly>,
    ) -> Result<Self> {
        transform.validate()?;
        if polys.len() != breaks.len() + 1 {
            return Err(Error::InvalidContract(format!(
                "{} breakpoints need {} pieces, got {}",
                breaks.len(),
                breaks.len() + 1,
                polys.len()
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidContract(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if polys.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidContract("coefficients must be finite".into()));
        }
        if breaks
            .iter()
            .any(|b| lo.is_some_and(|l| *b <= l) || hi.is_some_and(|h| *b >= h))
        {
            return Err(Error::InvalidContract(
                "breakpoints must lie strictly inside the interval".into(),
            ));
        }
        let rc = RealContract {
            lo,
            hi,
            transform,
            breaks,
            polys,
        };
        for (i, b) in rc.breaks.iter().enumerate() {
            let u = rc.transform.apply(*b);
            let left = eval_poly(&rc.polys[i], u);
            let right = eval_poly(&rc.polys[i + 1], u);
            if (left - right).abs() > CONTINUITY_TOL * (1.0 + left.abs().max(right.abs())) {
                return Err(Error::InvalidContract(format!(
                    "pieces disagree at breakpoint {b}: {left} vs {right}"
                )));
            }
        }
        Ok(rc)
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn interval(&self) -> (Option<f64>, Option<f64>) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, y: f64) -> bool {
        y.is_finite() && self.lo.is_none_or(|l| y >= l) && self.hi.is_none_or(|h| y <= h)
    }

    fn piece_index(&self, y: f64) -> usize {
        self.breaks.partition_point(|&b| b < y)
    }

    pub fn eval(&self, y: f64) -> f64 {
        eval_poly(&self.polys[self.piece_index(y)], self.transform.apply(y))
    }

    fn is_constant_shape(&self) -> bool {
        self.polys.iter().all(|p| p[1] == 0.0 && p[2] == 0.0)
    }

    fn piece_ends(&self, i: usize) -> (ExtReal, ExtReal) {
        let lo = if i == 0 {
            self.lo.map_or(ExtReal::NegInf, ExtReal::Finite)
        } else {
            ExtReal::Finite(self.breaks[i - 1])
        };
        let hi = if i == self.breaks.len() {
            self.hi.map_or(ExtReal::PosInf, ExtReal::Finite)
        } else {
            ExtReal::Finite(self.breaks[i])
        };
        (lo, hi)
    }

    pub fn bounds(&self) -> (ExtReal, ExtReal) {
        let mut lo = ExtReal::PosInf;
        let mut hi = ExtReal::NegInf;
        for (i, p) in self.polys.iter().enumerate() {
            let (ya, yb) = self.piece_ends(i);
            let (ua, ub) = (self.transform.apply_ext(ya), self.transform.apply_ext(yb));
            let (plo, phi) = poly_bounds(p, ua, ub);
            lo = lo.min(plo);
            hi = hi.max(phi);
        }
        (lo, hi)
    }

    /// `∫_a^b d(y) dy` for finite `a <= b` inside the interval.
    fn integrate(&self, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        cuts.extend(self.breaks.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| {
                let p = &self.polys[self.piece_index(0.5 * (w[0] + w[1]))];
                let m = self.transform.integrate_powers(w[0], w[1]);
                p[0] * m[0] + p[1] * m[1] + p[2] * m[2]
            })
            .sum()
    }

    fn combine(contracts: &[&RealContract], weights: &[f64]) -> Result<RealContract> {
        let first = contracts[0];
        let mut transform: Option<&Transform> = None;
        for c in contracts.iter().filter(|c| !c.is_constant_shape()) {
            match transform {
                None => transform = Some(&c.transform),
                Some(t) if *t == c.transform => {}
                Some(_) => {
                    return Err(Error::MismatchedSpaces(
                        "real contracts use different coordinate transforms".into(),
                    ))
                }
            }
        }
        let transform = transform.cloned().unwrap_or(Transform::Identity);

        let mut breaks: Vec<f64> = contracts
            .iter()
            .flat_map(|c| c.breaks.iter().copied())
            .collect();
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();

        let mut polys = Vec::with_capacity(breaks.len() + 1);
        for i in 0..=breaks.len() {
            let probe = match (i.checked_sub(1).map(|j| breaks[j]), breaks.get(i)) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) => a + 1.0,
                (None, Some(b)) => b - 1.0,
                (None, None) => first.lo.or(first.hi).unwrap_or(0.0),
            };
            let mut acc = [0.0; 3];
            let mut scale = [0.0_f64; 3];
            for (c, w) in contracts.iter().zip(weights) {
                let p = &c.polys[c.piece_index(probe)];
                for k in 0..3 {
                    acc[k] += w * p[k];
                    scale[k] += (w * p[k]).abs();
                }
            }
            // cancellation residue in the slope terms would otherwise turn a
            // bounded sum into an unbounded one
            for k in 1..3 {
                if acc[k].abs() <= CANCEL_TOL * scale[k] {
                    acc[k] = 0.0;
                }
            }
            polys.push(acc);
        }

        // merge neighbours with identical polynomials
        let mut mb = Vec::with_capacity(breaks.len());
        let mut mp = vec![polys[0]];
        for (b, p) in breaks.into_iter().zip(polys.into_iter().skip(1)) {
            if *mp.last().expect("nonempty") == p {
                continue;
            }
            mb.push(b);
            mp.push(p);
        }
        Ok(RealContract {
            lo: first.lo,
            hi: first.hi,
            transform,
            breaks: mb,
            polys: mp,
        })
    }

    pub fn probe_points(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        let anchor_lo = self
            .breaks
            .first()
            .copied()
            .or(self.lo)
            .or(self.hi)
            .unwrap_or(0.0);
        let anchor_hi = self
            .breaks
            .last()
            .copied()
            .or(self.hi)
            .or(self.lo)
            .unwrap_or(0.0);
        match self.lo {
            Some(l) => pts.push(l),
            None => pts.extend([anchor_lo - 1.0, anchor_lo - 10.0]),
        }
        for (i, b) in self.breaks.iter().enumerate() {
            pts.push(*b);
            if let Some(next) = self.breaks.get(i + 1) {
                pts.push(0.5 * (b + next));
            }
        }
        match self.hi {
            Some(h) => pts.push(h),
            None => pts.extend([anchor_hi + 1.0, anchor_hi + 10.0]),
        }
        if let (Some(l), Some(first)) = (self.lo, self.breaks.first()) {
            pts.push(0.5 * (l + first));
        }
        if let (Some(h), Some(last)) = (self.hi, self.breaks.last()) {
            pts.push(0.5 * (h + last));
        }
        if self.breaks.is_empty() {
            if let (Some(l), Some(h)) = (self.lo, self.hi) {
                pts.push(0.5 * (l + h));
            }
        }
        pts.retain(|&y| self.contains(y));
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        pts
    }
}

pub fn eval_poly(p: &Poly, u: f64) -> f64 {
    p[0] + u * (p[1] + u * p[2])
}

fn poly_limit(p: &Poly, u: ExtReal) -> ExtReal {
    match u {
        ExtReal::Finite(v) => ExtReal::Finite(eval_poly(p, v)),
        inf => {
            let dir = if inf == ExtReal::PosInf { 1.0 } else { -1.0 };
            if p[2] != 0.0 {
                ExtReal::PosInf.scale(p[2].signum())
            } else if p[1] != 0.0 {
                ExtReal::PosInf.scale(p[1].signum() * dir)
            } else {
                ExtReal::Finite(p[0])
            }
        }
    }
}

/// Infimum and supremum of a quadratic over `[ua, ub]` (ends may be infinite).
fn poly_bounds(p: &Poly, ua: ExtReal, ub: ExtReal) -> (ExtReal, ExtReal) {
    let ea = poly_limit(p, ua);
    let eb = poly_limit(p, ub);
    let (mut lo, mut hi) = (ea.min(eb), ea.max(eb));
    if p[2] != 0.0 {
        let vertex = -p[1] / (2.0 * p[2]);
        let v = ExtReal::Finite(vertex);
        if v > ua && v < ub {
            let val = ExtReal::Finite(eval_poly(p, vertex));
            lo = lo.min(val);
            hi = hi.max(val);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::Belief;

    fn line() -> OutcomeSpace {
        OutcomeSpace::real_line()
    }

    #[test]
    fn finite_bounds_are_componentwise() {
        let d = Contract::finite(vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(d.bounds(), (ExtReal::Finite(-1.0), ExtReal::Finite(1.0)));
        let one = Contract::constant(&OutcomeSpace::numbered(4).unwrap(), 1.0);
        assert_eq!(one.bounds(), (ExtReal::Finite(1.0), ExtReal::Finite(1.0)));
    }

    #[test]
    fn affine_real_contract_is_unbounded_both_ways() {
        let d = Contract::piecewise(&line(), Transform::Identity, vec![], vec![[-1.0, 2.0, 0.0]])
            .unwrap();
        assert_eq!(d.bounds(), (ExtReal::NegInf, ExtReal::PosInf));
    }

    #[test]
    fn quadratic_vertex_is_found() {
        // -(y - 1)^2 = -1 + 2y - y^2
        let d = Contract::piecewise(
            &line(),
            Transform::Identity,
            vec![],
            vec![[-1.0, 2.0, -1.0]],
        )
        .unwrap();
        assert_eq!(d.bounds(), (ExtReal::NegInf, ExtReal::Finite(0.0)));
    }

    #[test]
    fn sigmoid_contract_has_limit_bounds() {
        // -1/2 |s(0) - s(y)| as two affine pieces in u
        let d = Contract::piecewise(
            &line(),
            Transform::Sigmoid,
            vec![0.0],
            vec![[-0.25, 0.5, 0.0], [0.25, -0.5, 0.0]],
        )
        .unwrap();
        let (lo, hi) = d.bounds();
        assert_eq!(hi, ExtReal::Finite(0.0));
        assert_eq!(lo, ExtReal::Finite(-0.25));
    }

    #[test]
    fn combine_sums_to_cash() {
        let a = Contract::finite(vec![1.0, 0.0]).unwrap();
        let b = Contract::finite(vec![0.0, 1.0]).unwrap();
        let s = Contract::combine(&[&a, &b], &[1.0, 1.0]).unwrap();
        assert_eq!(s.as_finite().unwrap(), &[1.0, 1.0]);
        assert_eq!(a.scaled(-1.0).as_finite().unwrap(), &[-1.0, 0.0]);
    }

    #[test]
    fn combine_rejects_mismatched_spaces() {
        let a = Contract::finite(vec![1.0, 0.0]).unwrap();
        let b = Contract::finite(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(a.add(&b), Err(Error::MismatchedSpaces(_))));
        let c = Contract::zero(&line());
        assert!(matches!(a.add(&c), Err(Error::MismatchedSpaces(_))));
    }

    #[test]
    fn combine_merges_breakpoints() {
        let a = Contract::piecewise(
            &line(),
            Transform::Identity,
            vec![0.0],
            vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        )
        .unwrap();
        let b = Contract::piecewise(
            &line(),
            Transform::Identity,
            vec![1.0],
            vec![[0.0, 0.0, 0.0], [-1.0, 1.0, 0.0]],
        )
        .unwrap();
        let s = a.sub(&b).unwrap();
        // y+ - (y-1)+ : 0, then y, then 1
        for (y, want) in [(-2.0, 0.0), (0.5, 0.5), (3.0, 1.0)] {
            assert!((s.eval(&Outcome::Real(y)).unwrap() - want).abs() < 1e-15);
        }
        assert_eq!(s.bounds(), (ExtReal::Finite(0.0), ExtReal::Finite(1.0)));
    }

    #[test]
    fn cashless_projection_examples() {
        let (d0, c) = Contract::finite(vec![3.0, 3.0])
            .unwrap()
            .project_cashless()
            .unwrap();
        assert_eq!((d0.as_finite().unwrap(), c), (&[0.0, 0.0][..], 3.0));
        let (d0, c) = Contract::finite(vec![1.0, -1.0])
            .unwrap()
            .project_cashless()
            .unwrap();
        assert_eq!((d0.as_finite().unwrap(), c), (&[1.0, -1.0][..], 0.0));
        let (d0, c) = Contract::finite(vec![2.0, 0.0, 1.0])
            .unwrap()
            .project_cashless()
            .unwrap();
        assert_eq!((d0.as_finite().unwrap(), c), (&[1.0, -1.0, 0.0][..], 1.0));
        assert!(Contract::zero(&line()).project_cashless().is_err());
    }

    #[test]
    fn expected_payoff_examples() {
        let d = Contract::finite(vec![1.0, 0.0]).unwrap();
        let p = Belief::pmf(vec![0.25, 0.75]).unwrap();
        assert_eq!(d.expected_payoff(&p).unwrap(), 0.25);
        let id = Contract::piecewise(&line(), Transform::Identity, vec![], vec![[0.0, 1.0, 0.0]])
            .unwrap();
        let u = Belief::uniform(0.0, 1.0).unwrap();
        assert!((id.expected_payoff(&u).unwrap() - 0.5).abs() < 1e-15);
        assert!(id.expected_payoff(&p).is_err());
    }

    #[test]
    fn discontinuous_pieces_are_rejected() {
        let r = Contract::piecewise(
            &line(),
            Transform::Identity,
            vec![0.0],
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        );
        assert!(r.is_err());
    }
}

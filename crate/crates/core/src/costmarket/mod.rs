//! Cost-function market makers over a finite outcome space, with trades
//! optionally restricted to an integer lattice of bundles.

mod extract;
mod subgroup;

pub use extract::{extract_cost_market, Extraction};
pub(crate) use subgroup::nearest_member;
pub use subgroup::{
    check_rule_subgroup, check_subgroup, difference_sample, score_sample, SubgroupWindow,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contract::Contract;
use crate::convex::{invert_gradient_numeric, ConvexFn, Membership, Polytope};
use crate::error::{Error, Result};
use crate::numeric::{self, dot};
use crate::outcome::OutcomeSpace;
use crate::verdict::{AxiomReport, Basis, Check, Verdict, Witness, STRICT_MARGIN};

pub const DEFAULT_LATTICE_BOUND: i64 = 8;

fn default_bound() -> i64 {
    DEFAULT_LATTICE_BOUND
}

/// The bundles traders may buy.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShareSpace {
    #[default]
    Full,
    /// Integer combinations of linearly independent basis bundles. `bound`
    /// caps the coefficients visited by exhaustive searches.
    Lattice {
        basis: Vec<Vec<f64>>,
        #[serde(default = "default_bound")]
        bound: i64,
    },
}

impl ShareSpace {
    /// The integer lattice `Z^k`.
    pub fn integers(k: usize, bound: i64) -> Self {
        ShareSpace::Lattice {
            basis: (0..k)
                .map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect())
                .collect(),
            bound,
        }
    }
}

/// Cost function, securities and share space: everything about a market
/// except its current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub outcomes: OutcomeSpace,
    /// Security payoffs, one row `phi(y)` per outcome.
    pub phi: Vec<Vec<f64>>,
    pub cost: ConvexFn,
    #[serde(default)]
    pub shares: ShareSpace,
}

impl CostSpec {
    pub fn new(
        outcomes: OutcomeSpace,
        phi: Vec<Vec<f64>>,
        cost: ConvexFn,
        shares: ShareSpace,
    ) -> Result<Self> {
        let s = CostSpec {
            outcomes,
            phi,
            cost,
            shares,
        };
        s.validate()?;
        Ok(s)
    }

    /// `C(q) = log(1 + e^q)` with one security paying 1 on the second of two
    /// outcomes.
    pub fn binary_lmsr(shares: ShareSpace) -> Result<Self> {
        Self::new(
            OutcomeSpace::numbered(2)?,
            vec![vec![0.0], vec![1.0]],
            ConvexFn::binary_lmsr(),
            shares,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.outcomes.validate()?;
        self.cost.validate()?;
        let n = self.outcomes.len().ok_or_else(|| {
            Error::InvalidMarket("cost-function markets need a finite outcome space".into())
        })?;
        let k = self.cost.dim();
        if self.phi.len() != n
            || self
                .phi
                .iter()
                .any(|r| r.len() != k || r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidMarket(format!(
                "security table must have {n} rows of length {k}"
            )));
        }
        if let ShareSpace::Lattice { basis, bound } = &self.shares {
            if *bound < 1 || basis.is_empty() || basis.iter().any(|b| b.len() != k) {
                return Err(Error::InvalidMarket(
                    "lattice basis vectors must have the share dimension and bound >= 1".into(),
                ));
            }
            let m = DMatrix::from_fn(k, basis.len(), |i, j| basis[j][i]);
            if m.rank(1e-10) != basis.len() {
                return Err(Error::InvalidMarket(
                    "lattice basis must be linearly independent".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cost.dim()
    }

    /// Integer coefficients of `v` in the lattice basis, if `v` is a lattice
    /// point.
    pub fn lattice_coefficients(&self, v: &[f64]) -> Option<Vec<i64>> {
        let ShareSpace::Lattice { basis, .. } = &self.shares else {
            return None;
        };
        let k = self.dim();
        let m = DMatrix::from_fn(k, basis.len(), |i, j| basis[j][i]);
        let target = DVector::from_column_slice(v);
        let coef = m.clone().svd(true, true).solve(&target, 1e-12).ok()?;
        let rounded: Vec<i64> = coef.iter().map(|c| c.round() as i64).collect();
        let back = m * DVector::from_iterator(rounded.len(), rounded.iter().map(|c| *c as f64));
        let ok =
            (back - target).amax() <= 1e-9 && coef.iter().all(|c| (c - c.round()).abs() <= 1e-9);
        ok.then_some(rounded)
    }

    pub fn in_share_space(&self, v: &[f64]) -> bool {
        if v.len() != self.dim() || v.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match &self.shares {
            ShareSpace::Full => true,
            ShareSpace::Lattice { .. } => self.lattice_coefficients(v).is_some(),
        }
    }

    fn check_bundle(&self, v: &[f64]) -> Result<()> {
        if self.in_share_space(v) {
            Ok(())
        } else {
            Err(Error::NotInShareSpace(format!("{v:?}")))
        }
    }

    /// Every lattice point with coefficients in `[-bound, bound]`.
    pub fn lattice_points(&self) -> Result<Vec<Vec<f64>>> {
        match &self.shares {
            ShareSpace::Full => Err(Error::InvalidSearch(
                "the full share space has no lattice points".into(),
            )),
            ShareSpace::Lattice { basis, bound } => Ok(lattice_combinations(basis, *bound)),
        }
    }

    pub fn polytope(&self) -> Result<Polytope> {
        Polytope::new(self.phi.clone())
    }

    /// `max_y v.phi(y)`.
    pub fn max_payoff(&self, v: &[f64]) -> f64 {
        self.phi
            .iter()
            .map(|r| dot(r, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `C(q + v) - C(q)`.
    pub fn cost_of(&self, q: &[f64], v: &[f64]) -> Result<f64> {
        Ok(self.cost.value(&numeric::add(q, v))? - self.cost.value(q)?)
    }

    /// The payoff of holding bundle `v` bought for `cost`.
    pub fn bundle_contract(&self, v: &[f64], cost: f64) -> Result<Contract> {
        Contract::finite(self.phi.iter().map(|r| dot(r, v) - cost).collect())
    }

    /// `max_y v.phi(y) - (C(q + v) - C(q))`; positive exactly when the
    /// strict price bound holds for this pair.
    pub fn price_bound_margin(&self, q: &[f64], v: &[f64]) -> Result<f64> {
        Ok(self.max_payoff(v) - self.cost_of(q, v)?)
    }

    /// Quasi-openness slack at `(q, v)`: `max_y v.phi(y) - sup_{x in dC(q)} x.v`.
    pub fn quasi_open_slack(&self, q: &[f64], v: &[f64]) -> Result<f64> {
        let sup = self
            .cost
            .active_subgradients(q)?
            .iter()
            .map(|x| dot(x, v))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(self.max_payoff(v) - sup)
    }

    fn random_bundle(&self, rng: &mut impl Rng, scale: f64) -> Vec<f64> {
        match &self.shares {
            ShareSpace::Full => (0..self.dim())
                .map(|_| rng.gen_range(-scale..scale))
                .collect(),
            ShareSpace::Lattice { basis, bound } => {
                let coef: Vec<i64> = (0..basis.len())
                    .map(|_| rng.gen_range(-*bound..=*bound))
                    .collect();
                combine_basis(basis, &coef)
            }
        }
    }

    /// Openness: sampled gradients strictly inside the hull of the
    /// securities, and a grid of interior prices reached by inverting the
    /// gradient.
    pub fn check_open(&self, samples: usize, seed: u64) -> AxiomReport {
        let poly = match self.polytope() {
            Ok(p) => p,
            Err(e) => {
                return AxiomReport::new(Check::Open, Verdict::Inconclusive, Basis::Search)
                    .with_note(e.to_string())
            }
        };
        if !self.cost.is_differentiable() {
            return AxiomReport::new(Check::Open, Verdict::Inconclusive, Basis::Search).with_note(
                "openness is defined for differentiable cost functions; see the quasi-open check",
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.dim();
        let mut witnesses = Vec::new();
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let q: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let Ok(g) = self.cost.gradient(&q) else {
                continue;
            };
            let depth = polytope_depth(&poly, &g);
            worst = worst.min(depth);
            if poly.classify(&g, 1e-12) != Ok(Membership::Interior) && witnesses.len() < 8 {
                witnesses.push(Witness::Gradient {
                    q,
                    gradient: g,
                    margin: 1e-12 - depth,
                });
            }
        }
        let targets = poly.interior_grid(0.1);
        for x in &targets {
            match invert_gradient_numeric(&self.cost, x, 1e-6) {
                Ok(_) => {}
                Err(_) => {
                    if witnesses.len() < 8 {
                        witnesses.push(Witness::Gradient {
                            q: vec![],
                            gradient: x.clone(),
                            margin: 1.0,
                        });
                    }
                }
            }
        }
        let verdict = if witnesses.is_empty() {
            Verdict::HoldsAtBudget
        } else {
            Verdict::Fails
        };
        let mut r = AxiomReport::new(Check::Open, verdict, Basis::Search)
            .with_budget(samples + targets.len())
            .with_note(format!(
                "{} interior price targets inverted to 1e-6",
                targets.len()
            ));
        if worst.is_finite() {
            r = r.with_margin(worst);
        }
        r.witnesses = witnesses;
        r
    }

    /// Quasi-openness: every subgradient stays strictly below the best
    /// security payoff in every share direction. Exhaustive over the lattice
    /// within its bound; sampled on the full space.
    pub fn check_quasi_open(&self, samples: usize, seed: u64) -> AxiomReport {
        let (pairs, basis): (Vec<(Vec<f64>, Vec<f64>)>, Basis) = match &self.shares {
            ShareSpace::Lattice { .. } => {
                let pts = self.lattice_points().expect("lattice");
                let dirs: Vec<Vec<f64>> = pts
                    .iter()
                    .filter(|v| v.iter().any(|x| *x != 0.0))
                    .cloned()
                    .collect();
                let pairs = pts
                    .iter()
                    .flat_map(|q| dirs.iter().map(move |v| (q.clone(), v.clone())))
                    .collect();
                (pairs, Basis::Exhaustive)
            }
            ShareSpace::Full => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = self.dim();
                let pairs = (0..samples)
                    .map(|_| {
                        let q: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
                        let v = self.random_bundle(&mut rng, 5.0);
                        (q, v)
                    })
                    .collect();
                (pairs, Basis::Search)
            }
        };
        let mut witnesses = Vec::new();
        let mut worst = f64::INFINITY;
        for (q, v) in &pairs {
            let Ok(slack) = self.quasi_open_slack(q, v) else {
                continue;
            };
            worst = worst.min(slack);
            if slack <= STRICT_MARGIN && witnesses.len() < 8 {
                witnesses.push(Witness::QuasiOpen {
                    q: q.clone(),
                    v: v.clone(),
                    margin: STRICT_MARGIN - slack,
                });
            }
        }
        let verdict = if !witnesses.is_empty() {
            Verdict::Fails
        } else {
            Verdict::HoldsAtBudget
        };
        let mut r = AxiomReport::new(Check::QuasiOpen, verdict, basis).with_budget(pairs.len());
        if let ShareSpace::Lattice { bound, .. } = &self.shares {
            r = r.with_note(format!("exhaustive within coefficient bound {bound}"));
        }
        if worst.is_finite() {
            r = r.with_margin(worst);
        }
        r.witnesses = witnesses;
        r
    }

    /// Random `(q, v)` trials of `max_y v.phi(y) > C(q + v) - C(q)`.
    pub fn price_bound_check(&self, trials: usize, seed: u64) -> AxiomReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.dim();
        let mut witnesses = Vec::new();
        let mut worst = f64::INFINITY;
        let mut done = 0;
        while done < trials {
            let q: Vec<f64> = match &self.shares {
                ShareSpace::Full => (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect(),
                ShareSpace::Lattice { .. } => self.random_bundle(&mut rng, 10.0),
            };
            let v = self.random_bundle(&mut rng, 5.0);
            if v.iter().all(|x| *x == 0.0) {
                continue;
            }
            done += 1;
            let Ok(m) = self.price_bound_margin(&q, &v) else {
                continue;
            };
            worst = worst.min(m);
            if m <= 0.0 && witnesses.len() < 8 {
                witnesses.push(Witness::PriceBound {
                    q,
                    v,
                    margin: STRICT_MARGIN - m,
                });
            }
        }
        let verdict = if witnesses.is_empty() {
            Verdict::HoldsAtBudget
        } else {
            Verdict::Fails
        };
        let mut r = AxiomReport::new(Check::PriceBound, verdict, Basis::Search)
            .with_budget(trials)
            .with_note(format!("minimum observed margin {worst:e}"));
        if worst.is_finite() {
            r = r.with_margin(worst);
        }
        r.witnesses = witnesses;
        r
    }
}

/// Signed depth of `x` inside the polytope (smallest barycentric weight,
/// or distance to the nearer end on the line).
pub(crate) fn polytope_depth(poly: &Polytope, x: &[f64]) -> f64 {
    match poly.barycentric(x) {
        Some(p) => p.into_iter().fold(f64::INFINITY, f64::min),
        None => {
            let lo = poly
                .vertices()
                .iter()
                .map(|v| v[0])
                .fold(f64::INFINITY, f64::min);
            let hi = poly
                .vertices()
                .iter()
                .map(|v| v[0])
                .fold(f64::NEG_INFINITY, f64::max);
            (x[0] - lo).min(hi - x[0])
        }
    }
}

pub(crate) fn combine_basis(basis: &[Vec<f64>], coef: &[i64]) -> Vec<f64> {
    let k = basis[0].len();
    let mut v = vec![0.0; k];
    for (b, c) in basis.iter().zip(coef) {
        for (o, x) in v.iter_mut().zip(b) {
            *o += *c as f64 * x;
        }
    }
    v
}

fn lattice_combinations(basis: &[Vec<f64>], bound: i64) -> Vec<Vec<f64>> {
    let m = basis.len();
    let mut out = Vec::new();
    let mut coef = vec![-bound; m];
    loop {
        out.push(combine_basis(basis, &coef));
        let mut i = 0;
        while i < m {
            coef[i] += 1;
            if coef[i] <= bound {
                break;
            }
            coef[i] = -bound;
            i += 1;
        }
        if i == m {
            break;
        }
    }
    out
}

/// A bundle bought at a recorded cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareTrade {
    pub bundle: Vec<f64>,
    pub cost: f64,
}

/// Result of neutralizing a position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neutralization {
    pub bundle: Vec<f64>,
    /// Cost of the neutralizing bundle at the current state.
    pub cost: f64,
    /// The constant payoff of the position after neutralizing.
    pub cash: f64,
    /// Worst-case payoff of the position before neutralizing.
    pub position_inf: f64,
    /// Largest deviation of the neutralized payoff from a constant.
    pub spread: f64,
}

impl Neutralization {
    /// `cash > position_inf` by more than the strictness margin.
    pub fn improves(&self) -> bool {
        self.cash > self.position_inf + STRICT_MARGIN
    }
}

/// A cost-function market with its current share state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMarket {
    pub spec: CostSpec,
    state: Vec<f64>,
}

impl CostMarket {
    pub fn new(spec: CostSpec, state: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        spec.check_bundle(&state)?;
        spec.cost.value(&state)?;
        Ok(CostMarket { spec, state })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Cost and payoff of buying `v` now, without trading.
    pub fn quote(&self, v: &[f64]) -> Result<(f64, Contract)> {
        self.spec.check_bundle(v)?;
        let cost = self.spec.cost_of(&self.state, v)?;
        Ok((cost, self.spec.bundle_contract(v, cost)?))
    }

    /// Buys `v`: pays `C(q + v) - C(q)` and receives `v.phi(y)`.
    pub fn trade(&mut self, v: &[f64]) -> Result<(f64, Contract)> {
        let (cost, contract) = self.quote(v)?;
        self.state = numeric::add(&self.state, v);
        Ok((cost, contract))
    }

    /// Current prices `grad C(q)`.
    pub fn price(&self) -> Result<Vec<f64>> {
        self.spec.cost.gradient(&self.state)
    }

    /// The bundle `-sum(v_i)` that cancels every security in the position,
    /// its cost now, and the resulting constant payoff.
    pub fn neutralizing_bundle(&self, position: &[ShareTrade]) -> Result<Neutralization> {
        if position.is_empty() {
            return Err(Error::EmptyPosition);
        }
        let k = self.spec.dim();
        let mut total = vec![0.0; k];
        let mut paid = 0.0;
        for t in position {
            self.spec.check_bundle(&t.bundle)?;
            total = numeric::add(&total, &t.bundle);
            paid += t.cost;
        }
        let held = self.spec.bundle_contract(&total, paid)?;
        let bundle: Vec<f64> = total.iter().map(|v| -v).collect();
        let (cost, closing) = self.quote(&bundle)?;
        let net = held.add(&closing)?;
        let (lo, hi) = net.bounds();
        let spread =
            (hi.finite().unwrap_or(f64::INFINITY) - lo.finite().unwrap_or(f64::NEG_INFINITY)).abs();
        Ok(Neutralization {
            bundle,
            cost,
            cash: -paid - cost,
            position_inf: held.inf().finite().expect("finite contract"),
            spread,
        })
    }
}

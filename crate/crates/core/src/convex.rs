//! Convex potentials, their conjugates and Bregman divergences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::numeric::{
    self, bisect_increasing, bracket_increasing, dot, golden_max, log_sum_exp, softmax, xlogx,
};
use crate::transform::{sigmoid, softplus};
use crate::verdict::{AxiomReport, Basis, Check, ConvexityTest, Verdict, Witness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidPotential(
                "box bounds need lo < hi in every coordinate".into(),
            ));
        }
        Ok(BoxBounds { lo, hi })
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| a <= v && v <= b)
    }

    fn contains_open(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| a < v && v < b)
    }
}

/// Where a potential is finite.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Full,
    ClosedBox(BoxBounds),
    OpenBox(BoxBounds),
    /// `x > 0` componentwise.
    OpenOrthant,
    /// `x > 0`, `sum(x) < 1`.
    OpenSimplex,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Full => true,
            Domain::ClosedBox(b) => b.contains(x),
            Domain::OpenBox(b) => b.contains_open(x),
            Domain::OpenOrthant => x.iter().all(|v| *v > 0.0),
            Domain::OpenSimplex => x.iter().all(|v| *v > 0.0) && x.iter().sum::<f64>() < 1.0,
        }
    }

    pub fn contains_closure(&self, x: &[f64]) -> bool {
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Full => true,
            Domain::ClosedBox(b) | Domain::OpenBox(b) => b.contains(x),
            Domain::OpenOrthant => x.iter().all(|v| *v >= 0.0),
            Domain::OpenSimplex => {
                x.iter().all(|v| *v >= 0.0) && x.iter().sum::<f64>() <= 1.0 + 1e-15
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(
            self,
            Domain::ClosedBox(_) | Domain::OpenBox(_) | Domain::OpenSimplex
        )
    }

    pub fn is_open(&self) -> bool {
        !matches!(self, Domain::ClosedBox(_))
    }

    /// Smallest box containing the domain, when it is bounded.
    pub fn bounding_box(&self, dim: usize) -> Option<BoxBounds> {
        match self {
            Domain::ClosedBox(b) | Domain::OpenBox(b) => Some(b.clone()),
            Domain::OpenSimplex => Some(BoxBounds {
                lo: vec![0.0; dim],
                hi: vec![1.0; dim],
            }),
            Domain::Full | Domain::OpenOrthant => None,
        }
    }

    /// A random point of the domain, kept away from its boundary.
    pub fn sample(&self, dim: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Domain::Full => (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect(),
            Domain::ClosedBox(b) => {
                b.lo.iter()
                    .zip(&b.hi)
                    .map(|(a, c)| rng.gen_range(*a..=*c))
                    .collect()
            }
            Domain::OpenBox(b) => {
                b.lo.iter()
                    .zip(&b.hi)
                    .map(|(a, c)| {
                        let pad = 1e-3 * (c - a);
                        rng.gen_range(a + pad..c - pad)
                    })
                    .collect()
            }
            Domain::OpenOrthant => (0..dim).map(|_| rng.gen_range(1e-3..4.0)).collect(),
            Domain::OpenSimplex => loop {
                let e: Vec<f64> = (0..=dim)
                    .map(|_| -rng.gen_range(1e-12_f64..1.0).ln())
                    .collect();
                let s: f64 = e.iter().sum();
                let p: Vec<f64> = e.iter().map(|v| v / s).collect();
                if p.iter().all(|v| *v > 1e-3) {
                    break p[..dim].to_vec();
                }
            },
        }
    }

    /// Distance from `x` to the complement of the domain (infinite for the
    /// full space).
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Full => f64::INFINITY,
            Domain::ClosedBox(b) | Domain::OpenBox(b) => x
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .map(|(v, (a, c))| (v - a).min(c - v))
                .fold(f64::INFINITY, f64::min),
            Domain::OpenOrthant => x.iter().copied().fold(f64::INFINITY, f64::min),
            Domain::OpenSimplex => x
                .iter()
                .copied()
                .fold(1.0 - x.iter().sum::<f64>(), f64::min),
        }
    }
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

/// Built-in convex functions on `R^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexFn {
    /// `scale * |x|^2`, optionally restricted to a closed box.
    Quadratic {
        #[serde(default = "one_usize")]
        dim: usize,
        #[serde(default = "one_f64")]
        scale: f64,
        #[serde(default)]
        bounds: Option<BoxBounds>,
    },
    /// `sum x_i ln x_i` on the open positive orthant.
    Entropy {
        #[serde(default = "one_usize")]
        dim: usize,
    },
    /// `(hi - lo) * (t ln t + (1 - t) ln(1 - t))` with `t = (x - lo) / (hi - lo)`
    /// on the open interval; its derivative is `logit(t)`.
    BinaryEntropy {
        #[serde(default)]
        lo: f64,
        #[serde(default = "one_f64")]
        hi: f64,
    },
    /// `sum x_i ln x_i + x_0 ln x_0` with `x_0 = 1 - sum x_i`, on the open
    /// probability simplex written in its last `dim` coordinates.
    SimplexEntropy { dim: usize },
    /// `log sum_y exp(q . phi(y))`.
    LogPartition { phi: Vec<Vec<f64>> },
    /// `max_j (slope_j . q + offset_j)`.
    MaxAffine {
        slopes: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    /// One-dimensional: 0 below 0, `q^2 / 2` on `[0, 1]`, `q - 1/2` above.
    /// Its derivative `clamp(q, 0, 1)` reaches both ends of `[0, 1]`.
    SmoothHinge,
}

impl ConvexFn {
    pub fn quadratic(dim: usize) -> Self {
        ConvexFn::Quadratic {
            dim,
            scale: 1.0,
            bounds: None,
        }
    }

    pub fn binary_negentropy() -> Self {
        ConvexFn::BinaryEntropy { lo: 0.0, hi: 1.0 }
    }

    /// `log(1 + e^q)`.
    pub fn binary_lmsr() -> Self {
        ConvexFn::LogPartition {
            phi: vec![vec![0.0], vec![1.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPotential(m.into()));
        match self {
            ConvexFn::Quadratic { dim, scale, bounds } => {
                if *dim == 0 || !scale.is_finite() || *scale <= 0.0 {
                    return bad("quadratic needs dim >= 1 and a positive finite scale");
                }
                if let Some(b) = bounds {
                    BoxBounds::new(b.lo.clone(), b.hi.clone())?;
                    if b.lo.len() != *dim {
                        return bad("quadratic bounds have the wrong dimension");
                    }
                }
                Ok(())
            }
            ConvexFn::Entropy { dim } | ConvexFn::SimplexEntropy { dim } => {
                if *dim == 0 {
                    return bad("entropy needs dim >= 1");
                }
                Ok(())
            }
            ConvexFn::BinaryEntropy { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad("binary entropy needs finite lo < hi");
                }
                Ok(())
            }
            ConvexFn::LogPartition { phi } => {
                let k = phi.first().map_or(0, Vec::len);
                if phi.len() < 2
                    || k == 0
                    || phi
                        .iter()
                        .any(|r| r.len() != k || r.iter().any(|v| !v.is_finite()))
                {
                    return bad("log-partition needs at least two rows of equal, nonzero length");
                }
                Ok(())
            }
            ConvexFn::MaxAffine { slopes, offsets } => {
                let k = slopes.first().map_or(0, Vec::len);
                if slopes.is_empty()
                    || k == 0
                    || slopes.len() != offsets.len()
                    || slopes.iter().any(|s| s.len() != k)
                    || slopes
                        .iter()
                        .flatten()
                        .chain(offsets)
                        .any(|v| !v.is_finite())
                {
                    return bad("max-affine needs matching slopes and offsets");
                }
                Ok(())
            }
            ConvexFn::SmoothHinge => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexFn::Quadratic { dim, .. }
            | ConvexFn::Entropy { dim }
            | ConvexFn::SimplexEntropy { dim } => *dim,
            ConvexFn::BinaryEntropy { .. } | ConvexFn::SmoothHinge => 1,
            ConvexFn::LogPartition { phi } => phi[0].len(),
            ConvexFn::MaxAffine { slopes, .. } => slopes[0].len(),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            ConvexFn::Quadratic {
                bounds: Some(b), ..
            } => Domain::ClosedBox(b.clone()),
            ConvexFn::Quadratic { bounds: None, .. }
            | ConvexFn::LogPartition { .. }
            | ConvexFn::MaxAffine { .. }
            | ConvexFn::SmoothHinge => Domain::Full,
            ConvexFn::Entropy { .. } => Domain::OpenOrthant,
            ConvexFn::BinaryEntropy { lo, hi } => Domain::OpenBox(BoxBounds {
                lo: vec![*lo],
                hi: vec![*hi],
            }),
            ConvexFn::SimplexEntropy { .. } => Domain::OpenSimplex,
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, ConvexFn::MaxAffine { .. })
    }

    pub fn is_strictly_convex(&self) -> bool {
        match self {
            ConvexFn::MaxAffine { .. } | ConvexFn::SmoothHinge => false,
            ConvexFn::LogPartition { phi } => {
                // strictly convex iff the rows are affinely spanning
                affine_rank(phi) == phi[0].len()
            }
            _ => true,
        }
    }

    fn check_point(&self, x: &[f64], closure: bool) -> Result<()> {
        let d = self.domain();
        let ok = x.len() == self.dim()
            && if closure {
                d.contains_closure(x)
            } else {
                d.contains(x)
            };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!("{x:?}")))
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x, false)?;
        Ok(self.raw_value(x))
    }

    /// Value on the closure of the domain, extended by continuity.
    pub fn closure_value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x, true)?;
        Ok(self.raw_value(x))
    }

    fn raw_value(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFn::Quadratic { scale, .. } => scale * dot(x, x),
            ConvexFn::Entropy { .. } => x.iter().map(|v| xlogx(*v)).sum(),
            ConvexFn::BinaryEntropy { lo, hi } => {
                let t = ((x[0] - lo) / (hi - lo)).clamp(0.0, 1.0);
                (hi - lo) * (xlogx(t) + xlogx(1.0 - t))
            }
            ConvexFn::SimplexEntropy { .. } => {
                let x0 = (1.0 - x.iter().sum::<f64>()).max(0.0);
                x.iter().map(|v| xlogx(*v)).sum::<f64>() + xlogx(x0)
            }
            ConvexFn::LogPartition { phi } => {
                log_sum_exp(&phi.iter().map(|r| dot(r, x)).collect::<Vec<_>>())
            }
            ConvexFn::MaxAffine { slopes, offsets } => slopes
                .iter()
                .zip(offsets)
                .map(|(s, b)| dot(s, x) + b)
                .fold(f64::NEG_INFINITY, f64::max),
            ConvexFn::SmoothHinge => {
                let q = x[0];
                if q <= 0.0 {
                    0.0
                } else if q <= 1.0 {
                    0.5 * q * q
                } else {
                    q - 0.5
                }
            }
        }
    }

    /// The selected subgradient: the gradient where it exists, the
    /// minimal-norm subgradient at kinks.
    pub fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, false)?;
        Ok(match self {
            ConvexFn::Quadratic { scale, .. } => x.iter().map(|v| 2.0 * scale * v).collect(),
            ConvexFn::Entropy { .. } => x.iter().map(|v| v.ln() + 1.0).collect(),
            ConvexFn::BinaryEntropy { lo, hi } => {
                let t = (x[0] - lo) / (hi - lo);
                vec![t.ln() - (1.0 - t).ln()]
            }
            ConvexFn::SimplexEntropy { .. } => {
                let l0 = (1.0 - x.iter().sum::<f64>()).ln();
                x.iter().map(|v| v.ln() - l0).collect()
            }
            ConvexFn::LogPartition { phi } => {
                let p = softmax(&phi.iter().map(|r| dot(r, x)).collect::<Vec<_>>());
                weighted_rows(phi, &p)
            }
            ConvexFn::MaxAffine { .. } => min_norm_point(&self.active_subgradients(x)?),
            ConvexFn::SmoothHinge => vec![x[0].clamp(0.0, 1.0)],
        })
    }

    /// Extreme points of the subdifferential (a single gradient wherever the
    /// function is differentiable).
    pub fn active_subgradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        match self {
            ConvexFn::MaxAffine { slopes, offsets } => {
                self.check_point(x, false)?;
                let vals: Vec<f64> = slopes
                    .iter()
                    .zip(offsets)
                    .map(|(s, b)| dot(s, x) + b)
                    .collect();
                let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-12 * (1.0 + top.abs());
                let mut act: Vec<Vec<f64>> = Vec::new();
                for (s, v) in slopes.iter().zip(&vals) {
                    if top - v <= tol && !act.contains(s) {
                        act.push(s.clone());
                    }
                }
                Ok(act)
            }
            _ => Ok(vec![self.subgradient(x)?]),
        }
    }

    /// The gradient, or an error listing the subgradients at a kink.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let act = self.active_subgradients(x)?;
        if act.len() > 1 {
            return Err(Error::Nondifferentiable {
                point: format!("{x:?}"),
                subgradients: format!("{act:?}"),
            });
        }
        Ok(act.into_iter().next().expect("nonempty subdifferential"))
    }

    /// Closed-form `(sup_x q.x - G(x), argmax)` where the supremum is
    /// attained; falls back to the numerical path otherwise.
    pub fn conjugate(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        if q.len() != self.dim() {
            return Err(Error::OutOfDomain(format!("{q:?}")));
        }
        match self {
            ConvexFn::Quadratic { scale, bounds, .. } => {
                let x: Vec<f64> = match bounds {
                    None => q.iter().map(|v| v / (2.0 * scale)).collect(),
                    Some(b) => q
                        .iter()
                        .zip(b.lo.iter().zip(&b.hi))
                        .map(|(v, (lo, hi))| (v / (2.0 * scale)).clamp(*lo, *hi))
                        .collect(),
                };
                Ok((dot(q, &x) - scale * dot(&x, &x), x))
            }
            ConvexFn::Entropy { .. } => {
                let x: Vec<f64> = q.iter().map(|v| (v - 1.0).exp()).collect();
                Ok((x.iter().sum(), x))
            }
            ConvexFn::BinaryEntropy { lo, hi } => {
                let w = hi - lo;
                Ok((q[0] * lo + w * softplus(q[0]), vec![lo + w * sigmoid(q[0])]))
            }
            ConvexFn::SimplexEntropy { .. } => {
                let mut z = vec![0.0];
                z.extend_from_slice(q);
                let p = softmax(&z);
                Ok((log_sum_exp(&z), p[1..].to_vec()))
            }
            ConvexFn::LogPartition { .. } | ConvexFn::SmoothHinge => {
                let x = self.gradient_inverse(q)?;
                Ok((dot(q, &x) - self.raw_value(&x), x))
            }
            ConvexFn::MaxAffine { .. } => Err(Error::DivergentConjugate(
                "max-affine potentials have no attained conjugate in closed form".into(),
            )),
        }
    }

    /// `sup_x q.x - G(x)` including suprema that are only approached.
    pub fn conjugate_sup(&self, q: &[f64]) -> Result<ExtReal> {
        match self {
            ConvexFn::LogPartition { phi } => {
                let poly = Polytope::new(phi.clone())?;
                if let Some(p) = poly.barycentric(q) {
                    if p.iter().any(|v| *v < -1e-12) {
                        return Ok(ExtReal::PosInf);
                    }
                    return Ok(ExtReal::Finite(p.iter().map(|v| xlogx(v.max(0.0))).sum()));
                }
                if phi[0].len() == 1 {
                    let (lo, hi) = poly.interval();
                    let x = q[0];
                    if x < lo || x > hi {
                        return Ok(ExtReal::PosInf);
                    }
                    if x == lo || x == hi {
                        let m = phi.iter().filter(|r| r[0] == x).count();
                        return Ok(ExtReal::Finite(-(m as f64).ln()));
                    }
                }
                self.conjugate(q).map(|(v, _)| ExtReal::Finite(v))
            }
            ConvexFn::SmoothHinge => {
                let x = q[0];
                if (0.0..=1.0).contains(&x) {
                    Ok(ExtReal::Finite(0.5 * x * x))
                } else {
                    Ok(ExtReal::PosInf)
                }
            }
            _ => self.conjugate(q).map(|(v, _)| ExtReal::Finite(v)),
        }
    }

    /// The point whose gradient is `theta`; an error when `theta` is not a
    /// gradient of this potential.
    pub fn gradient_inverse(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain(format!("{theta:?}")));
        }
        let out_of_range = || Error::OutOfDomain(format!("{theta:?} is not in the gradient range"));
        match self {
            ConvexFn::Quadratic { scale, bounds, .. } => {
                let x: Vec<f64> = theta.iter().map(|v| v / (2.0 * scale)).collect();
                if bounds.as_ref().is_some_and(|b| !b.contains(&x)) {
                    return Err(out_of_range());
                }
                Ok(x)
            }
            ConvexFn::Entropy { .. }
            | ConvexFn::BinaryEntropy { .. }
            | ConvexFn::SimplexEntropy { .. } => {
                let x = self.conjugate(theta)?.1;
                // saturation at the boundary means theta is too large to invert
                if !self.domain().contains(&x) {
                    return Err(out_of_range());
                }
                Ok(x)
            }
            ConvexFn::LogPartition { phi } => {
                let poly = Polytope::new(phi.clone())?;
                if let Some(p) = poly.barycentric(theta) {
                    if p.iter().any(|v| *v <= 0.0) {
                        return Err(out_of_range());
                    }
                    // (phi_y - phi_0) . q = ln p_y - ln p_0
                    let k = phi[0].len();
                    let a: Vec<Vec<f64>> =
                        (1..=k).map(|y| numeric::sub(&phi[y], &phi[0])).collect();
                    let b: Vec<f64> = (1..=k).map(|y| p[y].ln() - p[0].ln()).collect();
                    return numeric::solve(&a, &b).ok_or_else(out_of_range);
                }
                if phi[0].len() == 1 {
                    let (lo, hi) = poly.interval();
                    if !(lo < theta[0] && theta[0] < hi) {
                        return Err(out_of_range());
                    }
                    let f = |t: f64| self.raw_gradient(&[t])[0];
                    let (a, b) = bracket_increasing(f, theta[0], 0.0).ok_or_else(out_of_range)?;
                    return Ok(vec![bisect_increasing(f, theta[0], a, b, 1e-14)]);
                }
                invert_gradient_numeric(self, theta, 1e-12)
            }
            ConvexFn::SmoothHinge => {
                if (0.0..=1.0).contains(&theta[0]) {
                    Ok(vec![theta[0]])
                } else {
                    Err(out_of_range())
                }
            }
            ConvexFn::MaxAffine { .. } => Err(Error::Nondifferentiable {
                point: format!("{theta:?}"),
                subgradients: "gradient inversion needs a differentiable potential".into(),
            }),
        }
    }

    fn raw_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.subgradient(x)
            .unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }

    /// `sup_x q.x - G(x)` by grid search over a bounding box, then
    /// coordinate-wise golden-section polishing.
    pub fn numeric_conjugate(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let k = self.dim();
        if q.len() != k {
            return Err(Error::OutOfDomain(format!("{q:?}")));
        }
        let domain = self.domain();
        let bbox = match (domain.bounding_box(k), self) {
            (Some(b), _) => b,
            (None, ConvexFn::Quadratic { scale, .. }) => {
                let r = q.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / (2.0 * scale) + 1.0;
                BoxBounds {
                    lo: vec![-r; k],
                    hi: vec![r; k],
                }
            }
            (None, ConvexFn::Entropy { .. }) => {
                let r = (q.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - 1.0).exp() + 1.0;
                BoxBounds {
                    lo: vec![0.0; k],
                    hi: vec![r; k],
                }
            }
            (None, _) => {
                return Err(Error::DivergentConjugate(
                    "unbounded domain and the potential is not coercive".into(),
                ))
            }
        };
        let objective = |x: &[f64]| -> f64 {
            match self.closure_value(x) {
                Ok(g) => dot(q, x) - g,
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let per_axis = match k {
            1 => 2001,
            2 => 141,
            3 => 27,
            _ => 7,
        };
        let cells: Vec<f64> = bbox
            .lo
            .iter()
            .zip(&bbox.hi)
            .map(|(a, b)| (b - a) / (per_axis - 1) as f64)
            .collect();
        let mut best = (f64::NEG_INFINITY, bbox.lo.clone());
        let mut idx = vec![0usize; k];
        loop {
            let x: Vec<f64> = (0..k)
                .map(|i| bbox.lo[i] + idx[i] as f64 * cells[i])
                .collect();
            let v = objective(&x);
            if v > best.0 {
                best = (v, x);
            }
            let mut i = 0;
            while i < k {
                idx[i] += 1;
                if idx[i] < per_axis {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == k {
                break;
            }
        }
        if !best.0.is_finite() {
            return Err(Error::DivergentConjugate("no feasible grid point".into()));
        }
        let mut x = best.1;
        let mut width: Vec<f64> = cells.clone();
        for _ in 0..200 {
            let before = x.clone();
            for i in 0..k {
                let a = (x[i] - width[i]).max(bbox.lo[i]);
                let b = (x[i] + width[i]).min(bbox.hi[i]);
                let (xi, _) = golden_max(
                    |t| {
                        let mut probe = x.clone();
                        probe[i] = t;
                        objective(&probe)
                    },
                    a,
                    b,
                    1e-12,
                );
                x[i] = xi;
            }
            let moved = numeric::norm(&numeric::sub(&x, &before));
            for (w, c) in width.iter_mut().zip(&cells) {
                *w = (moved * 4.0).clamp(1e-10, *c);
            }
            if moved < 1e-13 {
                break;
            }
        }
        Ok((objective(&x), x))
    }

    /// `D(y, x) = G(y) - G(x) - dG(x).(y - x)`; `y` may lie on the closure.
    pub fn bregman(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        let gy = self.closure_value(y)?;
        let gx = self.value(x)?;
        let dg = self.subgradient(x)?;
        Ok(gy - gx - dot(&dg, &numeric::sub(y, x)))
    }

    /// Randomized convexity audit on `samples` pairs.
    pub fn check_convexity(&self, samples: usize, seed: u64) -> AxiomReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = self.domain();
        let k = self.dim();
        let mut witnesses = Vec::new();
        let mut worst_slack = f64::INFINITY;
        for _ in 0..samples {
            let x = domain.sample(k, &mut rng);
            let x2 = domain.sample(k, &mut rng);
            for test in [
                ConvexityTest::Midpoint,
                ConvexityTest::Subgradient,
                ConvexityTest::Monotone,
                ConvexityTest::Gradient,
            ] {
                let Some(v) = self.convexity_violation(test, &x, &x2) else {
                    continue;
                };
                worst_slack = worst_slack.min(-v);
                if v > 0.0 && witnesses.len() < 8 {
                    witnesses.push(Witness::Convexity {
                        test,
                        x: x.clone(),
                        x2: x2.clone(),
                        margin: v,
                    });
                }
            }
        }
        let verdict = if witnesses.is_empty() {
            Verdict::HoldsAtBudget
        } else {
            Verdict::Fails
        };
        let mut r = AxiomReport::new(Check::Convexity, verdict, Basis::Search).with_budget(samples);
        if worst_slack.is_finite() {
            r = r.with_margin(worst_slack);
        }
        r.witnesses = witnesses;
        r
    }

    /// Size by which one convexity test is violated beyond its tolerance at
    /// the pair; `None` when the test does not apply there.
    pub fn convexity_violation(&self, test: ConvexityTest, x: &[f64], x2: &[f64]) -> Option<f64> {
        let g1 = self.value(x).ok()?;
        let g2 = self.value(x2).ok()?;
        let scale = 1.0 + g1.abs() + g2.abs();
        match test {
            ConvexityTest::Midpoint => {
                let m: Vec<f64> = x.iter().zip(x2).map(|(a, b)| 0.5 * (a + b)).collect();
                let gm = self.value(&m).ok()?;
                Some(gm - 0.5 * (g1 + g2) - 1e-9 * scale)
            }
            ConvexityTest::Subgradient => {
                let d = self.subgradient(x).ok()?;
                Some(g1 + dot(&d, &numeric::sub(x2, x)) - g2 - 1e-9 * scale)
            }
            ConvexityTest::Monotone => {
                let d1 = self.subgradient(x).ok()?;
                let d2 = self.subgradient(x2).ok()?;
                let dx = numeric::sub(x2, x);
                let gscale = 1.0 + numeric::norm(&d1) + numeric::norm(&d2);
                Some(
                    -dot(&numeric::sub(&d2, &d1), &dx) - 1e-9 * gscale * (1.0 + numeric::norm(&dx)),
                )
            }
            ConvexityTest::Gradient => {
                if !self.is_differentiable() || self.domain().boundary_distance(x) < 1e-3 {
                    return None;
                }
                let d = self.subgradient(x).ok()?;
                let h = 1e-5;
                let mut worst = f64::NEG_INFINITY;
                for i in 0..x.len() {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (self.value(&xp).ok()? - self.value(&xm).ok()?) / (2.0 * h);
                    worst = worst.max((fd - d[i]).abs() - 1e-5 * (1.0 + d[i].abs()));
                }
                Some(worst)
            }
        }
    }

    /// Gradients at `points` classified against the polytope `poly`.
    pub fn gradient_range(&self, points: &[Vec<f64>], poly: &Polytope) -> Result<GradientRange> {
        let mut out = GradientRange::default();
        for q in points {
            let g = self.gradient(q)?;
            let class = poly.classify(&g, 1e-12)?;
            let entry = (q.clone(), g);
            match class {
                Membership::Interior => out.interior.push(entry),
                Membership::Boundary => out.boundary.push(entry),
                Membership::Outside => out.outside.push(entry),
            }
        }
        Ok(out)
    }
}

/// Gauss-Seidel inversion of a gradient map: each coordinate of the
/// gradient of a convex function is nondecreasing in its own variable, so
/// every coordinate update is a bracketed bisection.
pub fn invert_gradient_numeric(f: &ConvexFn, target: &[f64], tol: f64) -> Result<Vec<f64>> {
    let k = f.dim();
    let mut q = vec![0.0; k];
    for _ in 0..5000 {
        for i in 0..k {
            let coord = |t: f64| {
                let mut p = q.clone();
                p[i] = t;
                f.raw_gradient(&p)[i]
            };
            let (a, b) = bracket_increasing(coord, target[i], q[i]).ok_or_else(|| {
                Error::OutOfDomain(format!("{target:?} is not in the gradient range"))
            })?;
            q[i] = bisect_increasing(coord, target[i], a, b, 1e-15);
        }
        let g = f.raw_gradient(&q);
        let resid = g
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if resid < tol {
            return Ok(q);
        }
    }
    Err(Error::OutOfDomain(format!(
        "gradient inversion for {target:?} did not converge"
    )))
}

fn weighted_rows(rows: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let mut out = vec![0.0; k];
    for (r, wi) in rows.iter().zip(w) {
        for (o, v) in out.iter_mut().zip(r) {
            *o += wi * v;
        }
    }
    out
}

/// Minimal-norm point of the convex hull of `pts` (Frank-Wolfe with exact
/// line search; exact for one dimension).
fn min_norm_point(pts: &[Vec<f64>]) -> Vec<f64> {
    if pts.len() == 1 {
        return pts[0].clone();
    }
    if pts[0].len() == 1 {
        let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return vec![0.0_f64.clamp(lo, hi)];
    }
    let mut x = pts[0].clone();
    for _ in 0..2000 {
        let s = pts
            .iter()
            .min_by(|a, b| dot(a, &x).total_cmp(&dot(b, &x)))
            .expect("nonempty");
        let d = numeric::sub(s, &x);
        let dd = dot(&d, &d);
        if dd == 0.0 {
            break;
        }
        let t = (-dot(&x, &d) / dd).clamp(0.0, 1.0);
        if t == 0.0 {
            break;
        }
        x = numeric::axpy(t, &d, &x);
    }
    x
}

fn affine_rank(rows: &[Vec<f64>]) -> usize {
    let k = rows[0].len();
    let n = rows.len() - 1;
    let m = nalgebra::DMatrix::from_fn(n, k, |i, j| rows[i + 1][j] - rows[0][j]);
    m.rank(1e-10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Interior,
    Boundary,
    Outside,
}

/// The convex hull of finitely many points in `R^k`. Membership tests are
/// supported on the line and for simplices (`k + 1` affinely independent
/// points).
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    vertices: Vec<Vec<f64>>,
    simplex: bool,
}

impl Polytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let k = vertices.first().map_or(0, Vec::len);
        if vertices.len() < 2 || k == 0 || vertices.iter().any(|v| v.len() != k) {
            return Err(Error::InvalidMarket(
                "polytope needs at least two points of equal dimension".into(),
            ));
        }
        let simplex = vertices.len() == k + 1 && affine_rank(&vertices) == k;
        if !simplex && k != 1 {
            return Err(Error::InvalidMarket(
                "membership tests need one dimension or k + 1 affinely independent points".into(),
            ));
        }
        Ok(Polytope { vertices, simplex })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    fn interval(&self) -> (f64, f64) {
        let lo = self
            .vertices
            .iter()
            .map(|v| v[0])
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .vertices
            .iter()
            .map(|v| v[0])
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Barycentric coordinates for a simplex.
    pub fn barycentric(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.simplex {
            return None;
        }
        let k = self.dim();
        let v0 = &self.vertices[0];
        // columns are vertex_j - vertex_0
        let a: Vec<Vec<f64>> = (0..k)
            .map(|i| (1..=k).map(|j| self.vertices[j][i] - v0[i]).collect())
            .collect();
        let lam = numeric::solve(&a, &numeric::sub(x, v0))?;
        let mut p = vec![1.0 - lam.iter().sum::<f64>()];
        p.extend(lam);
        Some(p)
    }

    pub fn classify(&self, x: &[f64], tol: f64) -> Result<Membership> {
        if x.len() != self.dim() {
            return Err(Error::MismatchedSpaces(
                "point and polytope dimensions differ".into(),
            ));
        }
        let worst = if let Some(p) = self.barycentric(x) {
            p.into_iter().fold(f64::INFINITY, f64::min)
        } else {
            let (lo, hi) = self.interval();
            (x[0] - lo).min(hi - x[0])
        };
        Ok(if worst > tol {
            Membership::Interior
        } else if worst >= -tol {
            Membership::Boundary
        } else {
            Membership::Outside
        })
    }

    /// Interior points on a regular grid of barycentric step `step`.
    pub fn interior_grid(&self, step: f64) -> Vec<Vec<f64>> {
        if !self.simplex {
            let (lo, hi) = self.interval();
            let n = ((hi - lo) / step).round() as usize;
            return (1..n)
                .map(|i| vec![lo + (hi - lo) * i as f64 / n as f64])
                .collect();
        }
        let m = (1.0 / step).round() as usize;
        let k = self.dim();
        let mut out = Vec::new();
        let mut counts = vec![1usize; k + 1];
        loop {
            if counts.iter().sum::<usize>() == m {
                let p: Vec<f64> = counts.iter().map(|c| *c as f64 / m as f64).collect();
                out.push(weighted_rows(&self.vertices, &p));
            }
            let mut i = 0;
            while i <= k {
                counts[i] += 1;
                if counts[i] < m {
                    break;
                }
                counts[i] = 1;
                i += 1;
            }
            if i > k {
                break;
            }
        }
        out
    }
}

/// Gradients grouped by their position relative to a polytope.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientRange {
    pub interior: Vec<(Vec<f64>, Vec<f64>)>,
    pub boundary: Vec<(Vec<f64>, Vec<f64>)>,
    pub outside: Vec<(Vec<f64>, Vec<f64>)>,
}

impl GradientRange {
    pub fn all_interior(&self) -> bool {
        self.boundary.is_empty() && self.outside.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_negentropy_conjugate_at_zero_is_log_two() {
        let g = ConvexFn::binary_negentropy();
        let (v, x) = g.conjugate(&[0.0]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!((x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn square_conjugate_at_two() {
        let (v, x) = ConvexFn::quadratic(1).conjugate(&[2.0]).unwrap();
        assert_eq!((v, x[0]), (1.0, 1.0));
    }

    #[test]
    fn numeric_conjugate_agrees_with_closed_form() {
        let g = ConvexFn::binary_negentropy();
        for q in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let (closed, _) = g.conjugate(&[q]).unwrap();
            let (num, _) = g.numeric_conjugate(&[q]).unwrap();
            assert!((closed - num).abs() < 1e-8, "q={q}: {closed} vs {num}");
            assert!((closed - softplus(q)).abs() < 1e-14);
        }
        let s = ConvexFn::SimplexEntropy { dim: 2 };
        let (closed, _) = s.conjugate(&[0.3, -0.7]).unwrap();
        let (num, _) = s.numeric_conjugate(&[0.3, -0.7]).unwrap();
        assert!((closed - num).abs() < 1e-8);
    }

    #[test]
    fn numeric_conjugate_rejects_non_coercive() {
        assert!(matches!(
            ConvexFn::binary_lmsr().numeric_conjugate(&[0.5]),
            Err(Error::DivergentConjugate(_))
        ));
    }

    #[test]
    fn bregman_examples() {
        let sq = ConvexFn::quadratic(1);
        assert_eq!(sq.bregman(&[3.0], &[1.0]).unwrap(), 4.0);
        assert_eq!(sq.bregman(&[0.7], &[0.7]).unwrap(), 0.0);
        let ent = ConvexFn::Entropy { dim: 1 };
        let d = ent.bregman(&[0.5], &[0.25]).unwrap();
        let direct = 0.5 * (0.5f64 / 0.25).ln() - 0.5 + 0.25;
        assert!((d - direct).abs() < 1e-15);
        assert!((d - (0.5 * 2f64.ln() - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn convexity_audit() {
        assert!(ConvexFn::quadratic(1)
            .check_convexity(200, 1)
            .verdict
            .is_positive());
        let concave = ConvexFn::Quadratic {
            dim: 1,
            scale: -1.0,
            bounds: None,
        };
        let r = concave.check_convexity(50, 1);
        assert_eq!(r.verdict, Verdict::Fails);
        assert!(!r.witnesses.is_empty());
        assert!(ConvexFn::binary_lmsr()
            .check_convexity(200, 2)
            .verdict
            .is_positive());
        assert!(ConvexFn::SimplexEntropy { dim: 2 }
            .check_convexity(200, 3)
            .verdict
            .is_positive());
    }

    #[test]
    fn gradient_ranges() {
        let unit = Polytope::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let pts: Vec<Vec<f64>> = (-20..=20).map(|i| vec![i as f64 * 0.5]).collect();
        let lmsr = ConvexFn::binary_lmsr().gradient_range(&pts, &unit).unwrap();
        assert!(lmsr.all_interior());
        let sq = ConvexFn::quadratic(1)
            .gradient_range(&[vec![5.0]], &unit)
            .unwrap();
        assert_eq!(sq.outside.len(), 1);
        assert_eq!(sq.outside[0].1, vec![10.0]);
        let simplex = Polytope::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let lp = ConvexFn::LogPartition {
            phi: simplex.vertices().to_vec(),
        };
        let pts: Vec<Vec<f64>> = (-3..=3)
            .flat_map(|i| (-3..=3).map(move |j| vec![i as f64, j as f64]))
            .collect();
        assert!(lp.gradient_range(&pts, &simplex).unwrap().all_interior());
    }

    #[test]
    fn log_partition_gradient_inverse_round_trips() {
        let lp = ConvexFn::LogPartition {
            phi: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let q = lp.gradient_inverse(&[0.2, 0.5]).unwrap();
        let g = lp.gradient(&q).unwrap();
        assert!((g[0] - 0.2).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);
        let numeric = invert_gradient_numeric(&lp, &[0.2, 0.5], 1e-12).unwrap();
        assert!((numeric[0] - q[0]).abs() < 1e-8 && (numeric[1] - q[1]).abs() < 1e-8);
        assert!(lp.gradient_inverse(&[0.6, 0.5]).is_err());
        let line = ConvexFn::LogPartition {
            phi: vec![vec![0.0], vec![1.0], vec![2.0]],
        };
        let q = line.gradient_inverse(&[1.5]).unwrap();
        assert!((line.gradient(&q).unwrap()[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn log_partition_conjugate_on_the_closure() {
        let lmsr = ConvexFn::binary_lmsr();
        assert_eq!(lmsr.conjugate_sup(&[1.0]).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(lmsr.conjugate_sup(&[1.5]).unwrap(), ExtReal::PosInf);
        let v = lmsr.conjugate_sup(&[0.25]).unwrap().finite().unwrap();
        assert!((v - (0.25 * 0.25f64.ln() + 0.75 * 0.75f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn max_affine_kinks() {
        let hinge = ConvexFn::MaxAffine {
            slopes: vec![vec![0.0], vec![1.0]],
            offsets: vec![0.0, 0.0],
        };
        assert_eq!(hinge.subgradient(&[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            hinge.gradient(&[0.0]),
            Err(Error::Nondifferentiable { .. })
        ));
        assert_eq!(hinge.gradient(&[2.0]).unwrap(), vec![1.0]);
        let two = ConvexFn::MaxAffine {
            slopes: vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            offsets: vec![0.0, 0.0],
        };
        let m = two.subgradient(&[0.0, 0.0]).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-9 && m[1].abs() < 1e-9);
    }

    #[test]
    fn polytope_grid_is_interior() {
        let simplex = Polytope::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = simplex.interior_grid(0.25);
        assert_eq!(g.len(), 3);
        for x in g {
            assert_eq!(simplex.classify(&x, 1e-12).unwrap(), Membership::Interior);
        }
    }
}

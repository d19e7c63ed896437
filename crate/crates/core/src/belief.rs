use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::OutcomeSpace;

const PMF_TOL: f64 = 1e-12;

/// A trader's belief about the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Belief {
    /// Probability mass function over a finite outcome space.
    Pmf { probs: Vec<f64> },
    /// Continuous CDF, linear between breakpoints, 0 before the first and 1
    /// after the last.
    Cdf(PiecewiseCdf),
}

impl Belief {
    pub fn pmf(probs: Vec<f64>) -> Result<Self> {
        let b = Belief::Pmf { probs };
        b.validate()?;
        Ok(b)
    }

    pub fn cdf(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        Ok(Belief::Cdf(PiecewiseCdf::new(xs, fs)?))
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::cdf(vec![a, b], vec![0.0, 1.0])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Belief::Pmf { probs } => {
                if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidBelief(
                        "pmf entries must be finite and nonnegative".into(),
                    ));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PMF_TOL {
                    return Err(Error::InvalidBelief(format!("pmf sums to {total}, not 1")));
                }
                Ok(())
            }
            Belief::Cdf(c) => c.validate(),
        }
    }

    /// Checks that the belief lives on `space`.
    pub fn check_space(&self, space: &OutcomeSpace) -> Result<()> {
        match (self, space) {
            (Belief::Pmf { probs }, OutcomeSpace::Finite { labels })
                if probs.len() == labels.len() =>
            {
                Ok(())
            }
            (Belief::Pmf { probs }, OutcomeSpace::Finite { labels }) => {
                Err(Error::BeliefMismatch(format!(
                    "pmf has {} entries but the space has {} outcomes",
                    probs.len(),
                    labels.len()
                )))
            }
            (Belief::Cdf(c), OutcomeSpace::Interval { lo, hi }) => {
                let (a, b) = c.support();
                if lo.is_some_and(|l| a < l) || hi.is_some_and(|h| b > h) {
                    return Err(Error::BeliefMismatch(format!(
                        "cdf support [{a}, {b}] leaves the outcome interval"
                    )));
                }
                Ok(())
            }
            (Belief::Pmf { .. }, _) => Err(Error::BeliefMismatch(
                "pmf on a real-line outcome space".into(),
            )),
            (Belief::Cdf(_), _) => Err(Error::BeliefMismatch(
                "cdf on a finite outcome space".into(),
            )),
        }
    }

    pub fn as_pmf(&self) -> Option<&[f64]> {
        match self {
            Belief::Pmf { probs } => Some(probs),
            Belief::Cdf(_) => None,
        }
    }

    pub fn as_cdf(&self) -> Option<&PiecewiseCdf> {
        match self {
            Belief::Cdf(c) => Some(c),
            Belief::Pmf { .. } => None,
        }
    }
}

/// Continuous piecewise-linear CDF, strictly increasing on its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCdf {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl PiecewiseCdf {
    pub fn new(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        let c = PiecewiseCdf { xs, fs };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let (xs, fs) = (&self.xs, &self.fs);
        if xs.len() < 2 || xs.len() != fs.len() {
            return Err(Error::InvalidBelief(
                "cdf needs at least two breakpoints with matching values".into(),
            ));
        }
        if xs.iter().chain(fs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidBelief(
                "cdf breakpoints must be finite".into(),
            ));
        }
        if fs[0] != 0.0 || (fs[fs.len() - 1] - 1.0).abs() > PMF_TOL {
            return Err(Error::InvalidBelief(
                "cdf must start at 0 and end at 1".into(),
            ));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) || fs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidBelief(
                "cdf must be strictly increasing on its support (no atoms, no flat segments)"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.fs
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// `(a, b, density)` for each linear segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.xs
            .windows(2)
            .zip(self.fs.windows(2))
            .map(|(x, f)| (x[0], x[1], (f[1] - f[0]) / (x[1] - x[0])))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        let j = self.xs.partition_point(|&v| v <= x) - 1;
        let t = (x - self.xs[j]) / (self.xs[j + 1] - self.xs[j]);
        self.fs[j] + t * (self.fs[j + 1] - self.fs[j])
    }

    /// The unique `x` with `F(x) = alpha` for `alpha` in `(0, 1)`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let j = self
            .fs
            .partition_point(|&f| f <= alpha)
            .clamp(1, self.fs.len() - 1)
            - 1;
        let t = (alpha - self.fs[j]) / (self.fs[j + 1] - self.fs[j]);
        self.xs[j] + t * (self.xs[j + 1] - self.xs[j])
    }

    pub fn mean(&self) -> f64 {
        self.segments()
            .map(|(a, b, rho)| rho * (b * b - a * a) / 2.0)
            .sum()
    }

    /// `E[(x - Y)+] = ∫_{-inf}^x F(y) dy`.
    pub fn lower_partial_moment(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        for (w, f) in self.xs.windows(2).zip(self.fs.windows(2)) {
            if w[0] >= x {
                break;
            }
            let hi = w[1].min(x);
            let f_hi = f[0] + (f[1] - f[0]) * (hi - w[0]) / (w[1] - w[0]);
            acc += (hi - w[0]) * (f[0] + f_hi) / 2.0;
        }
        if x > b {
            acc += x - b;
        }
        acc
    }

    /// `E[(Y - x)+]`.
    pub fn upper_partial_moment(&self, x: f64) -> f64 {
        self.lower_partial_moment(x) - (x - self.mean())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_must_normalize() {
        assert!(Belief::pmf(vec![0.25, 0.75]).is_ok());
        assert!(Belief::pmf(vec![0.25, 0.7]).is_err());
        assert!(Belief::pmf(vec![-0.25, 1.25]).is_err());
    }

    #[test]
    fn cdf_rejects_atoms_and_flats() {
        assert!(Belief::cdf(vec![0.0, 0.0, 1.0], vec![0.0, 0.5, 1.0]).is_err());
        assert!(Belief::cdf(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 0.5]).is_err());
        assert!(Belief::cdf(vec![0.0, 1.0], vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn uniform_quantile_and_mean() {
        let u = PiecewiseCdf::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!((u.quantile(0.3) - 0.3).abs() < 1e-15);
        assert!((u.mean() - 0.5).abs() < 1e-15);
        assert!((u.cdf(0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn partial_moments_of_uniform() {
        let u = PiecewiseCdf::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        // E[(x - Y)+] = x^2 / 2 on [0, 1]
        assert!((u.lower_partial_moment(0.6) - 0.18).abs() < 1e-15);
        assert!((u.upper_partial_moment(0.6) - 0.08).abs() < 1e-15);
        assert!((u.lower_partial_moment(2.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf_on_multi_segment() {
        let c = PiecewiseCdf::new(vec![-1.0, 0.0, 2.0], vec![0.0, 0.2, 1.0]).unwrap();
        for alpha in [0.05, 0.2, 0.5, 0.95] {
            assert!((c.cdf(c.quantile(alpha)) - alpha).abs() < 1e-14);
        }
    }
}

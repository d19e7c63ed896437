//! Strictly increasing coordinate transforms of the real line.
//!
//! Real-line contracts are stored as polynomials in `u = t(y)` for one of
//! these transforms, which keeps infima, suprema and expectations against
//! piecewise-linear CDFs in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    /// `t(y) = e^y / (1 + e^y)`.
    Sigmoid,
    /// Continuous piecewise-linear interpolation through the knots, with the
    /// end segments extrapolated linearly.
    PiecewiseLinear { xs: Vec<f64>, us: Vec<f64> },
}

pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^y)` without overflow.
pub fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

impl Transform {
    pub fn piecewise_linear(xs: Vec<f64>, us: Vec<f64>) -> Result<Self> {
        let t = Transform::PiecewiseLinear { xs, us };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if let Transform::PiecewiseLinear { xs, us } = self {
            if xs.len() < 2 || xs.len() != us.len() {
                return Err(Error::InvalidRule(
                    "piecewise-linear transform needs at least two knots with matching values"
                        .into(),
                ));
            }
            let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
            if !xs.iter().chain(us).all(|v| v.is_finite()) || !increasing(xs) || !increasing(us) {
                return Err(Error::InvalidRule(
                    "piecewise-linear transform knots must be finite and strictly increasing"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    pub fn apply(&self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Sigmoid => sigmoid(y),
            Transform::PiecewiseLinear { xs, us } => {
                let j = segment_index(xs, y);
                let slope = (us[j + 1] - us[j]) / (xs[j + 1] - xs[j]);
                us[j] + slope * (y - xs[j])
            }
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Sigmoid => {
                let s = sigmoid(y);
                s * (1.0 - s)
            }
            Transform::PiecewiseLinear { xs, us } => {
                let j = segment_index(xs, y);
                (us[j + 1] - us[j]) / (xs[j + 1] - xs[j])
            }
        }
    }

    /// Value at an extended-real argument (limits at the infinities).
    pub fn apply_ext(&self, y: ExtReal) -> ExtReal {
        match (self, y) {
            (_, ExtReal::Finite(v)) => ExtReal::Finite(self.apply(v)),
            (Transform::Sigmoid, ExtReal::NegInf) => ExtReal::Finite(0.0),
            (Transform::Sigmoid, ExtReal::PosInf) => ExtReal::Finite(1.0),
            (_, inf) => inf,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Transform::Sigmoid)
    }

    /// `[∫ 1, ∫ t(y), ∫ t(y)^2]` over `[a, b]` with respect to `dy`.
    pub fn integrate_powers(&self, a: f64, b: f64) -> [f64; 3] {
        debug_assert!(a <= b);
        match self {
            Transform::Identity => linear_powers(b - a, a, b),
            Transform::Sigmoid => {
                let antideriv_sq = |y: f64| softplus(y) - sigmoid(y);
                [
                    b - a,
                    softplus(b) - softplus(a),
                    antideriv_sq(b) - antideriv_sq(a),
                ]
            }
            Transform::PiecewiseLinear { xs, .. } => {
                let mut cuts = vec![a];
                cuts.extend(xs.iter().copied().filter(|&x| x > a && x < b));
                cuts.push(b);
                let mut acc = [0.0; 3];
                for w in cuts.windows(2) {
                    let seg = linear_powers(w[1] - w[0], self.apply(w[0]), self.apply(w[1]));
                    for (s, v) in acc.iter_mut().zip(seg) {
                        *s += v;
                    }
                }
                acc
            }
        }
    }
}

/// Powers integrated over an interval of length `len` on which `u` moves
/// linearly from `ua` to `ub`.
fn linear_powers(len: f64, ua: f64, ub: f64) -> [f64; 3] {
    [
        len,
        len * (ua + ub) / 2.0,
        len * (ua * ua + ua * ub + ub * ub) / 3.0,
    ]
}

fn segment_index(xs: &[f64], y: f64) -> usize {
    let last = xs.len() - 2;
    match xs.partition_point(|&x| x <= y) {
        0 => 0,
        p => (p - 1).min(last),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn sigmoid_powers_match_quadrature() {
        let t = Transform::Sigmoid;
        let got = t.integrate_powers(-3.0, 2.5);
        let want1 = simpson(sigmoid, -3.0, 2.5, 2000);
        let want2 = simpson(|y| sigmoid(y).powi(2), -3.0, 2.5, 2000);
        assert!((got[1] - want1).abs() < 1e-10);
        assert!((got[2] - want2).abs() < 1e-10);
    }

    #[test]
    fn piecewise_linear_powers_match_quadrature() {
        let t = Transform::piecewise_linear(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 2.5]).unwrap();
        let got = t.integrate_powers(-1.0, 4.0);
        let want2 = simpson(|y| t.apply(y).powi(2), -1.0, 0.0, 200)
            + simpson(|y| t.apply(y).powi(2), 0.0, 1.0, 200)
            + simpson(|y| t.apply(y).powi(2), 1.0, 3.0, 200)
            + simpson(|y| t.apply(y).powi(2), 3.0, 4.0, 200);
        assert!((got[2] - want2).abs() < 1e-10);
    }

    #[test]
    fn piecewise_linear_extrapolates_end_slopes() {
        let t = Transform::piecewise_linear(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(t.apply(-1.0), -2.0);
        assert_eq!(t.apply(3.0), 6.0);
        assert_eq!(t.apply_ext(ExtReal::PosInf), ExtReal::PosInf);
    }

    #[test]
    fn rejects_non_monotone_knots() {
        assert!(Transform::piecewise_linear(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }
}

//! Extended real numbers.
//!
//! Payoff infima and suprema over the real line may be infinite. They are
//! carried as an explicit enum so that infinities never leak into ordinary
//! floating point arithmetic.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::PosInf => ExtReal::NegInf,
            ExtReal::Finite(x) => ExtReal::Finite(-x),
        }
    }

    /// Sum of two extended reals; `None` for the undefined `+inf + -inf`.
    pub fn checked_add(self, other: ExtReal) -> Option<ExtReal> {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => None,
            (PosInf, _) | (_, PosInf) => Some(PosInf),
            (NegInf, _) | (_, NegInf) => Some(NegInf),
        }
    }

    pub fn add_finite(self, x: f64) -> ExtReal {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a + x),
            other => other,
        }
    }

    /// Product with a finite scalar. `0 * inf` is taken as 0.
    pub fn scale(self, c: f64) -> ExtReal {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a * c),
            _ if c == 0.0 => ExtReal::ZERO,
            inf if c > 0.0 => inf,
            inf => inf.neg(),
        }
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Difference `self - other`; `None` when both are the same infinity.
    pub fn checked_sub(self, other: ExtReal) -> Option<ExtReal> {
        self.checked_add(other.neg())
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::Finite(x)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Some(Ordering::Equal),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
            (PosInf, _) | (_, NegInf) => Some(Ordering::Greater),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "+inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_places_infinities_at_the_ends() {
        assert!(ExtReal::NegInf < ExtReal::Finite(-1e300));
        assert!(ExtReal::Finite(1e300) < ExtReal::PosInf);
        assert!(ExtReal::Finite(1.0) > ExtReal::Finite(0.5));
    }

    #[test]
    fn opposite_infinities_do_not_add() {
        assert_eq!(ExtReal::PosInf.checked_add(ExtReal::NegInf), None);
        assert_eq!(
            ExtReal::PosInf.checked_add(ExtReal::Finite(3.0)),
            Some(ExtReal::PosInf)
        );
    }

    #[test]
    fn scaling_by_negative_flips_infinity() {
        assert_eq!(ExtReal::PosInf.scale(-2.0), ExtReal::NegInf);
        assert_eq!(ExtReal::NegInf.scale(0.0), ExtReal::ZERO);
    }
}

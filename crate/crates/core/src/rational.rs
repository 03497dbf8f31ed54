//! Exact rational points on the circle `T = R/Z`.
//!
//! Every quantity in the circle-cocycle constructions is a rational once the
//! input cocycles are rational, so the circle is modeled by `Ratio<i64>`
//! reduced into `[0, 1)`. The metric and all lifts are computed exactly;
//! there is no floating point anywhere on a verification path.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Neg, Sub};

/// An exact rational, re-exported for use in cocycle values and bounds.
pub type Rat = Ratio<i64>;

/// A point of the circle `T = R/Z`, stored as a reduced rational in `[0, 1)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TorusPoint(Rat);

impl TorusPoint {
    pub const ZERO: TorusPoint = TorusPoint(Rat::new_raw(0, 1));

    /// Reduce an arbitrary rational modulo 1 into `[0, 1)`.
    pub fn new(value: Rat) -> TorusPoint {
        TorusPoint(value - value.floor())
    }

    pub fn from_ints(numer: i64, denom: i64) -> TorusPoint {
        TorusPoint::new(Rat::new(numer, denom))
    }

    /// The representative in `[0, 1)`.
    pub fn rep(&self) -> Rat {
        self.0
    }

    /// Distance to zero: `|t| = min(t, 1 - t)` for the representative.
    pub fn norm(&self) -> Rat {
        let one = Rat::from_integer(1);
        std::cmp::min(self.0, one - self.0)
    }

    /// Distance between two circle points.
    pub fn dist(&self, other: &TorusPoint) -> Rat {
        (*self - *other).norm()
    }

    /// The lift of this point with minimal absolute value, taken in
    /// `(-1/2, 1/2]`. Ties at distance exactly 1/2 break to the positive
    /// representative.
    pub fn minimal_lift(&self) -> Rat {
        let half = Rat::new(1, 2);
        if self.0 <= half {
            self.0
        } else {
            self.0 - Rat::from_integer(1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl Add for TorusPoint {
    type Output = TorusPoint;
    fn add(self, rhs: TorusPoint) -> TorusPoint {
        TorusPoint::new(self.0 + rhs.0)
    }
}

impl Sub for TorusPoint {
    type Output = TorusPoint;
    fn sub(self, rhs: TorusPoint) -> TorusPoint {
        TorusPoint::new(self.0 - rhs.0)
    }
}

impl Neg for TorusPoint {
    type Output = TorusPoint;
    fn neg(self) -> TorusPoint {
        TorusPoint::new(-self.0)
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

/// Parse an exact rational from a `p/q` or integer string.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: i64 = s.parse().ok()?;
        Some(Rat::from_integer(n))
    }
}

/// Format a rational as `p/q` (always with an explicit denominator).
pub fn format_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Absolute value helper for rationals.
pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_into_unit_interval() {
        assert_eq!(TorusPoint::from_ints(5, 3).rep(), Rat::new(2, 3));
        assert_eq!(TorusPoint::from_ints(-1, 3).rep(), Rat::new(2, 3));
        assert_eq!(TorusPoint::from_ints(7, 1).rep(), Rat::from_integer(0));
    }

    #[test]
    fn norm_is_distance_to_zero() {
        assert_eq!(TorusPoint::from_ints(1, 4).norm(), Rat::new(1, 4));
        assert_eq!(TorusPoint::from_ints(3, 4).norm(), Rat::new(1, 4));
        assert_eq!(TorusPoint::from_ints(1, 2).norm(), Rat::new(1, 2));
    }

    #[test]
    fn minimal_lift_prefers_positive_half() {
        assert_eq!(TorusPoint::from_ints(1, 2).minimal_lift(), Rat::new(1, 2));
        assert_eq!(TorusPoint::from_ints(3, 4).minimal_lift(), Rat::new(-1, 4));
        assert_eq!(TorusPoint::from_ints(1, 8).minimal_lift(), Rat::new(1, 8));
    }

    #[test]
    fn parse_and_format_round_trip() {
        let r = parse_rat("7/12").unwrap();
        assert_eq!(r, Rat::new(7, 12));
        assert_eq!(format_rat(&r), "7/12");
        assert_eq!(parse_rat("3").unwrap(), Rat::from_integer(3));
        assert!(parse_rat("1/0").is_none());
    }
}

//! Extended real numbers with the asymmetric conventions used for upper
//! expectations.
//!
//! Addition is total: `+∞` absorbs everything, including `-∞`, so
//! `+∞ + (-∞) = -∞ + (+∞) = +∞`. Scaling by zero always yields zero, even
//! for infinite operands. With these two rules no operation can produce a
//! NaN, and every sum or product of two [`ExtReal`]s is again an [`ExtReal`].
//!
//! Values are backed by `f64`; the infinities are the IEEE infinities and
//! NaN is never stored.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Default absolute tolerance for comparing finite values.
pub const DEFAULT_TOL: f64 = 1e-9;

/// An element of `ℝ ∪ {-∞, +∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const PLUS_INF: ExtReal = ExtReal(f64::INFINITY);
    pub const MINUS_INF: ExtReal = ExtReal(f64::NEG_INFINITY);
    pub const ZERO: ExtReal = ExtReal(0.0);
    pub const ONE: ExtReal = ExtReal(1.0);

    /// Wraps a float. Returns `None` for NaN.
    pub fn new(value: f64) -> Option<ExtReal> {
        if value.is_nan() {
            None
        } else {
            Some(ExtReal(value))
        }
    }

    /// Wraps a finite float.
    ///
    /// Panics if `value` is NaN or infinite; use [`ExtReal::new`] for
    /// unchecked input.
    pub fn finite(value: f64) -> ExtReal {
        assert!(value.is_finite(), "ExtReal::finite called with {value}");
        ExtReal(value)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_plus_inf(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn is_minus_inf(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// The finite value, if any.
    pub fn as_finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// `|self - other| <= tol` for finite values; infinities only match
    /// themselves.
    pub fn approx_eq(self, other: ExtReal, tol: f64) -> bool {
        match (self.as_finite(), other.as_finite()) {
            (Some(a), Some(b)) => (a - b).abs() <= tol,
            _ => self.0 == other.0,
        }
    }

    /// `self <= other + tol`, with the obvious reading for infinities.
    pub fn le_tol(self, other: ExtReal, tol: f64) -> bool {
        match (self.as_finite(), other.as_finite()) {
            (Some(a), Some(b)) => a <= b + tol,
            _ => self <= other,
        }
    }
}

/// Extended addition: any `+∞` operand wins, then any `-∞` operand.
pub fn ext_add(a: ExtReal, b: ExtReal) -> ExtReal {
    if a.is_plus_inf() || b.is_plus_inf() {
        ExtReal::PLUS_INF
    } else {
        // -∞ + c = -∞ and -∞ + -∞ = -∞ already hold for IEEE floats.
        ExtReal(a.0 + b.0)
    }
}

/// Extended multiplication with `0 · (±∞) = 0`.
pub fn ext_mul(lambda: ExtReal, a: ExtReal) -> ExtReal {
    if lambda.0 == 0.0 || a.0 == 0.0 {
        ExtReal::ZERO
    } else {
        ExtReal(lambda.0 * a.0)
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).expect("ExtReal never holds NaN")
    }
}

#[allow(clippy::derived_hash_with_manual_eq)]
impl std::hash::Hash for ExtReal {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        // 0.0 and -0.0 compare equal, so they must hash equal.
        let v = if self.0 == 0.0 { 0.0 } else { self.0 };
        v.to_bits().hash(state);
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        ext_add(self, rhs)
    }
}

impl Sub for ExtReal {
    type Output = ExtReal;
    fn sub(self, rhs: ExtReal) -> ExtReal {
        ext_add(self, -rhs)
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        ExtReal(-self.0)
    }
}

impl Mul for ExtReal {
    type Output = ExtReal;
    fn mul(self, rhs: ExtReal) -> ExtReal {
        ext_mul(self, rhs)
    }
}

impl Sum for ExtReal {
    fn sum<I: Iterator<Item = ExtReal>>(iter: I) -> ExtReal {
        iter.fold(ExtReal::ZERO, ext_add)
    }
}

impl From<f64> for ExtReal {
    /// Panics on NaN.
    fn from(value: f64) -> Self {
        ExtReal::new(value).expect("NaN is not an extended real")
    }
}

impl From<i32> for ExtReal {
    fn from(value: i32) -> Self {
        ExtReal(value as f64)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_plus_inf() {
            f.write_str("inf")
        } else if self.is_minus_inf() {
            f.write_str("-inf")
        } else {
            write!(f, "{}", round_significant(self.0, 12))
        }
    }
}

/// Rounds `x` to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_plus_inf() {
            serializer.serialize_str("inf")
        } else if self.is_minus_inf() {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtRealVisitor;

        impl Visitor<'_> for ExtRealVisitor {
            type Value = ExtReal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtReal, E> {
                ExtReal::new(v).ok_or_else(|| E::custom("NaN is not an extended real"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtReal, E> {
                match v {
                    "inf" | "+inf" => Ok(ExtReal::PLUS_INF),
                    "-inf" => Ok(ExtReal::MINUS_INF),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ExtRealVisitor)
    }
}

//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the twin can be computed in: `f64` for production runs, `f32`
/// when memory or throughput matters more than the last digits.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::max_value)
    }

    /// Shortest text that parses back to the same value; plain notation for
    /// magnitudes in `[1e-4, 1e16)`, exponent notation otherwise.
    fn to_text(self) -> String {
        let a = self.abs();
        if a == Self::zero() || !a.is_finite() || (a >= Self::lit(1e-4) && a < Self::lit(1e16)) {
            format!("{self}")
        } else {
            format!("{self:e}")
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, 1e-4, 9.99e-5, 5.104406683442697e-8, 1e16, 123456.789, f64::MIN_POSITIVE] {
            let t = v.to_text();
            assert_eq!(t.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{t}");
        }
        assert_eq!(5.104406683442697e-8f64.to_text(), "5.104406683442697e-8");
        assert_eq!(0.25f64.to_text(), "0.25");
        assert_eq!(0.1f32.to_text(), "0.1");
    }
}

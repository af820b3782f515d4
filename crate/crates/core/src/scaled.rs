//! Real numbers carried as `mantissa * e^offset`.
//!
//! Products such as `I_t(e^u) K_t(e^v)` routinely leave the f64 range
//! (`K_t(e^8)` is about `e^{-2981}`), so every I/K value and every product
//! of them flows through [`ScaledValue`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `ln|x|` that still converts to a finite f64.
const LN_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    mantissa: f64,
    exponent_offset: f64,
}

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        mantissa: 0.0,
        exponent_offset: 0.0,
    };
    pub const ONE: ScaledValue = ScaledValue {
        mantissa: 1.0,
        exponent_offset: 0.0,
    };

    /// Builds `mantissa * e^offset` and renormalises so that
    /// `|mantissa|` lies in `[e^{-1}, e]` (or is zero).
    pub fn new(mantissa: f64, exponent_offset: f64) -> Self {
        debug_assert!(mantissa.is_finite() && exponent_offset.is_finite());
        let mut v = ScaledValue {
            mantissa,
            exponent_offset,
        };
        v.normalize();
        v
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(x, 0.0)
    }

    /// `sign * e^{ln_abs}` with `sign` taken from the sign of `sign`.
    pub fn from_ln(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 || ln_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let off = ln_abs.round();
        ScaledValue {
            mantissa: sign.signum() * (ln_abs - off).exp(),
            exponent_offset: off,
        }
    }

    fn normalize(&mut self) {
        if self.mantissa == 0.0 {
            self.exponent_offset = 0.0;
            return;
        }
        let l = self.mantissa.abs().ln();
        if !(-1.0..=1.0).contains(&l) {
            let k = l.round();
            self.mantissa = self.mantissa.signum() * (l - k).exp();
            self.exponent_offset += k;
        }
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent_offset(&self) -> f64 {
        self.exponent_offset
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn signum(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    /// `ln|value|`; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.mantissa == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.exponent_offset
        }
    }

    /// Plain f64 value. Underflow quietly goes to (signed) zero; overflow is
    /// an error rather than an infinity.
    pub fn to_f64(&self) -> Result<f64> {
        let l = self.ln_abs();
        if l > LN_MAX {
            return Err(Error::Overflow { ln_abs: l });
        }
        Ok(self.mantissa * self.exponent_offset.exp())
    }

    /// Like [`to_f64`](Self::to_f64) for callers that know the value is in range.
    pub(crate) fn value(&self) -> f64 {
        self.mantissa * self.exponent_offset.exp()
    }

    pub fn abs(&self) -> Self {
        ScaledValue {
            mantissa: self.mantissa.abs(),
            exponent_offset: self.exponent_offset,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::new(self.mantissa * factor, self.exponent_offset)
    }

    /// Multiplies by `e^{shift}`.
    pub fn shift_exp(&self, shift: f64) -> Self {
        if self.is_zero() {
            return *self;
        }
        Self::new(self.mantissa, self.exponent_offset + shift)
    }

    pub fn add(&self, other: &ScaledValue) -> ScaledValue {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.exponent_offset >= other.exponent_offset {
            (self, other)
        } else {
            (other, self)
        };
        let d = small.exponent_offset - big.exponent_offset;
        let m = big.mantissa + small.mantissa * d.exp();
        Self::new(m, big.exponent_offset)
    }

    pub fn sub(&self, other: &ScaledValue) -> ScaledValue {
        self.add(&-*other)
    }

    pub fn recip(&self) -> Result<ScaledValue> {
        if self.is_zero() {
            return Err(Error::domain("reciprocal of zero"));
        }
        Ok(Self::new(1.0 / self.mantissa, -self.exponent_offset))
    }

    /// `|self| / |other|` compared in log space.
    pub fn ratio_ln(&self, other: &ScaledValue) -> f64 {
        self.ln_abs() - other.ln_abs()
    }

    /// Sum of many terms with a single common exponent.
    pub fn sum<'a, I: IntoIterator<Item = &'a ScaledValue>>(terms: I) -> ScaledValue {
        let terms: Vec<&ScaledValue> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        let Some(max_off) = terms
            .iter()
            .map(|t| t.exponent_offset)
            .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        else {
            return ScaledValue::ZERO;
        };
        let m: f64 = terms
            .iter()
            .map(|t| t.mantissa * (t.exponent_offset - max_off).exp())
            .sum();
        Self::new(m, max_off)
    }
}

impl Mul for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: ScaledValue) -> ScaledValue {
        if self.is_zero() || rhs.is_zero() {
            return ScaledValue::ZERO;
        }
        ScaledValue::new(
            self.mantissa * rhs.mantissa,
            self.exponent_offset + rhs.exponent_offset,
        )
    }
}

impl Neg for ScaledValue {
    type Output = ScaledValue;
    fn neg(self) -> ScaledValue {
        ScaledValue {
            mantissa: -self.mantissa,
            exponent_offset: self.exponent_offset,
        }
    }
}

impl fmt::Display for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_f64() {
            Ok(v) if v != 0.0 || self.is_zero() => write!(f, "{v:.12e}"),
            _ => write!(f, "{:.12}*e^{}", self.mantissa, self.exponent_offset),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalises_mantissa() {
        let v = ScaledValue::new(1e300, 0.0);
        assert!(v.mantissa().abs() <= std::f64::consts::E);
        assert!(v.mantissa().abs() >= (-1.0f64).exp());
        assert!((v.ln_abs() - 1e300f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_an_error() {
        let v = ScaledValue::from_ln(1.0, 800.0);
        assert!(matches!(v.to_f64(), Err(Error::Overflow { .. })));
        let tiny = ScaledValue::from_ln(1.0, -2981.0);
        assert_eq!(tiny.to_f64().unwrap(), 0.0);
        assert_eq!(tiny.exponent_offset(), -2981.0);
    }

    #[test]
    fn zero_behaviour() {
        let z = ScaledValue::ZERO;
        assert!(z.is_zero());
        assert_eq!((z * ScaledValue::from_f64(3.0)).to_f64().unwrap(), 0.0);
        assert_eq!(z.add(&ScaledValue::from_f64(2.5)).to_f64().unwrap(), 2.5);
        assert!(z.recip().is_err());
    }

    proptest! {
        #[test]
        fn product_matches_log_sum(a in -300.0f64..300.0, b in -300.0f64..300.0,
                                   sa in prop::bool::ANY, sb in prop::bool::ANY) {
            let x = ScaledValue::from_ln(if sa { 1.0 } else { -1.0 }, a);
            let y = ScaledValue::from_ln(if sb { 1.0 } else { -1.0 }, b);
            let p = x * y;
            prop_assert!((p.ln_abs() - (a + b)).abs() < 1e-12 * (1.0 + (a + b).abs()));
            prop_assert_eq!(p.signum(), x.signum() * y.signum());
            let m = p.mantissa().abs();
            prop_assert!(m >= (-1.0f64).exp() - 1e-15 && m <= std::f64::consts::E + 1e-15);
        }

        #[test]
        fn addition_matches_f64(a in -1e5f64..1e5, b in -1e5f64..1e5) {
            let s = ScaledValue::from_f64(a).add(&ScaledValue::from_f64(b));
            prop_assert!((s.to_f64().unwrap() - (a + b)).abs() <= 1e-10 * (a.abs() + b.abs() + 1.0));
        }
    }
}

//! Numeric abstraction shared by every ratio-valued measurement.
//!
//! Coverage fractions, outcome rates, success rates, Chao1 estimates and
//! labor-market shares are all ratios of counts or sums. They are computed
//! generically so the same code runs in `f32`, `f64` or exact rational
//! arithmetic ([`Exact`]).

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Exact rational scalar. Counts in this toolkit stay far below `i128`
/// limits, so overflow is not a practical concern.
pub type Exact = Ratio<i128>;

/// Scalar type usable by the measurement code.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an integer count. Panics only if the count is not
    /// representable, which cannot happen for the supported scalars.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// `num / den` as a scalar. `den` must be non-zero.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    /// Lossy conversion for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Conversion from a decimal input value. Exact scalars approximate
    /// the binary value by a nearby rational.
    fn from_f64_lossy(x: f64) -> Option<Self> {
        Self::from_f64(x)
    }

    fn hundred() -> Self {
        Self::from_count(100)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Num
        + Copy
        + PartialOrd
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Sum of an iterator of scalars.
pub fn sum<S: Scalar>(values: impl IntoIterator<Item = S>) -> S {
    values.into_iter().fold(S::zero(), |acc, v| acc + v)
}

/// Parses a decimal string into an exact rational without going through
/// binary floating point. Accepts an optional sign, digits, an optional
/// fractional part and an optional exponent.
pub fn parse_exact(text: &str) -> Option<Exact> {
    let s = text.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let joined = format!("{int_part}{frac_part}");
    let mut numer: i128 = if joined.is_empty() { 0 } else { joined.parse().ok()? };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let pow = 10i128.checked_pow(scale.unsigned_abs())?;
    Some(if scale >= 0 {
        Ratio::from_integer(numer.checked_mul(pow)?)
    } else {
        Ratio::new(numer, pow)
    })
}

/// Parses a decimal value into any scalar, exactly for [`Exact`].
pub trait ParseScalar: Scalar {
    fn parse_decimal(text: &str) -> Option<Self>;
}

impl ParseScalar for f64 {
    fn parse_decimal(text: &str) -> Option<Self> {
        text.trim().parse().ok().filter(|v: &f64| v.is_finite())
    }
}

impl ParseScalar for f32 {
    fn parse_decimal(text: &str) -> Option<Self> {
        text.trim().parse().ok().filter(|v: &f32| v.is_finite())
    }
}

impl ParseScalar for Exact {
    fn parse_decimal(text: &str) -> Option<Self> {
        parse_exact(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_is_exact_for_rationals() {
        assert_eq!(Exact::ratio(3, 10), Ratio::new(3, 10));
        assert_eq!(<f64 as Scalar>::ratio(1, 4), 0.25);
    }

    #[test]
    fn parse_exact_decimals() {
        assert_eq!(parse_exact("0.1"), Some(Ratio::new(1, 10)));
        assert_eq!(parse_exact("-2.50"), Some(Ratio::new(-5, 2)));
        assert_eq!(parse_exact("1e3"), Some(Ratio::from_integer(1000)));
        assert_eq!(parse_exact("12.5E-1"), Some(Ratio::new(5, 4)));
        assert_eq!(parse_exact("50000"), Some(Ratio::from_integer(50000)));
        assert_eq!(parse_exact("abc"), None);
        assert_eq!(parse_exact("."), None);
        assert_eq!(parse_exact(""), None);
    }

    #[test]
    fn min_max_helpers() {
        assert_eq!(2.0f64.max_of(3.0), 3.0);
        assert_eq!(Exact::from_integer(2).min_of(Exact::from_integer(3)), Exact::from_integer(2));
    }
}

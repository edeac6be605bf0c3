use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;

/// Exact sample rate in hertz.
///
/// Every clock in a run is derived from one master oscillator by integer
/// division, so rates are kept as reduced `u64` ratios instead of floats:
/// divider chains, interleave paths, and capture decimation then stay exact
/// and comparisons like "is this at most 10 Msps" have no rounding ambiguity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Rate(Ratio<u64>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RateError {
    #[error("rate denominator must be nonzero")]
    ZeroDenominator,
    #[error("clock divider must be at least 1")]
    ZeroDivider,
}

impl Rate {
    pub fn from_hz(hz: u64) -> Self {
        Rate(Ratio::from_integer(hz))
    }

    pub fn new(num: u64, den: u64) -> Result<Self, RateError> {
        if den == 0 {
            return Err(RateError::ZeroDenominator);
        }
        Ok(Rate(Ratio::new(num, den)))
    }

    /// Numerator of the reduced fraction, in Hz.
    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    /// Denominator of the reduced fraction.
    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    /// Nearest `f64` value; exact whenever numerator and denominator fit in 53 bits.
    pub fn hz(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact division by an integer divider.
    pub fn div(&self, n: u64) -> Result<Self, RateError> {
        if n == 0 {
            return Err(RateError::ZeroDivider);
        }
        Ok(Rate(self.0 / Ratio::from_integer(n)))
    }

    pub fn mul(&self, n: u64) -> Self {
        Rate(self.0 * Ratio::from_integer(n))
    }

    /// `self / other` when the quotient is an exact positive integer.
    pub fn integer_ratio_to(&self, other: Rate) -> Option<u64> {
        if *other.0.numer() == 0 {
            return None;
        }
        let q = self.0 / other.0;
        if q.is_integer() && *q.numer() > 0 {
            Some(q.to_integer())
        } else {
            None
        }
    }

    pub fn at_most_hz(&self, hz: u64) -> bool {
        self.0 <= Ratio::from_integer(hz)
    }

    pub fn is_zero(&self) -> bool {
        *self.0.numer() == 0
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{} Hz", self.0.numer())
        } else {
            write!(f, "{}/{} Hz", self.0.numer(), self.0.denom())
        }
    }
}

use rug::float::Constant;
use rug::{Assign, Float};

use crate::error::{Error, Result};

/// Working precision shared by every extended-precision computation.
///
/// Values created through a context carry exactly `bits` bits of mantissa.
/// Tolerances are derived from the precision so that routines can be run at
/// 64 bits for quick checks or at several hundred bits for the Hankel-type
/// computations that need them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Precision {
    bits: u32,
}

impl Precision {
    pub const MIN_BITS: u32 = 64;

    pub fn new(bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::Argument(format!(
                "precision must be at least {} bits, got {bits}",
                Self::MIN_BITS
            )));
        }
        Ok(Precision { bits })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// The same context with `extra` guard bits added.
    pub fn widened(self, extra: u32) -> Self {
        Precision {
            bits: self.bits + extra,
        }
    }

    /// Unit roundoff `2^-bits`.
    pub fn eps(self) -> Float {
        self.pow2(-(self.bits as i32))
    }

    /// Default relative tolerance `2^(-bits+16)`.
    pub fn tol(self) -> Float {
        self.pow2(16 - self.bits as i32)
    }

    pub fn pow2(self, exp: i32) -> Float {
        Float::with_val(self.bits, 1) << exp
    }

    pub fn real<T>(self, value: T) -> Float
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits, value)
    }

    pub fn zero(self) -> Float {
        Float::new(self.bits)
    }

    pub fn one(self) -> Float {
        self.real(1)
    }

    pub fn pi(self) -> Float {
        self.real(Constant::Pi)
    }

    /// `p/q` rounded once.
    pub fn ratio(self, p: i64, q: i64) -> Float {
        self.real(p) / q
    }

    /// Parses a decimal literal at this precision.
    pub fn parse(self, text: &str) -> Result<Float> {
        Float::parse(text)
            .map(|v| self.real(v))
            .map_err(|e| Error::Argument(format!("cannot parse {text:?} as a number: {e}")))
    }

    /// Significant decimal digits carried by a value at this precision.
    pub fn digits(self) -> usize {
        (self.bits as f64 * std::f64::consts::LOG10_2).ceil() as usize
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision { bits: 128 }
    }
}

/// Relative difference `|a - b| / |b|`, or `|a|` when `b` is zero.
pub fn rel_diff(a: &Float, b: &Float) -> Float {
    let diff = Float::with_val(a.prec().max(b.prec()), a - b).abs();
    if b.is_zero() {
        diff
    } else {
        diff / b.clone().abs()
    }
}

//! Saturating two's complement integer words.
//!
//! Every quantity in the accelerator datapath (weights, membrane potential,
//! synaptic current, threshold) is an N-bit signed integer. Arithmetic never
//! wraps: results outside the representable range clamp to the nearest bound.
//! Decay by `1 - 2^-k` is realized as `v - (v >> k)` with an arithmetic
//! (floor) shift, which is what a shifter plus subtractor computes in hardware.
//! A side effect is a dead zone: positive values below `2^k` never decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_WIDTH: u32 = 32;

/// Width of a signed fixed-point word, 1 to 32 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FxpFormat {
    bits: u32,
}

impl FxpFormat {
    pub fn new(bits: u32) -> Result<Self> {
        if (1..=MAX_WIDTH).contains(&bits) {
            Ok(Self { bits })
        } else {
            Err(Error::InvalidWidth(bits))
        }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn min(self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn max(self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    pub fn contains(self, raw: i64) -> bool {
        raw >= self.min() && raw <= self.max()
    }

    /// Clamp a wide integer into this format.
    #[inline]
    pub fn saturate(self, raw: i64) -> i32 {
        raw.clamp(self.min(), self.max()) as i32
    }

    /// Raw-level saturating add. Operands are assumed to be in range.
    #[inline]
    pub fn add(self, a: i32, b: i32) -> i32 {
        self.saturate(a as i64 + b as i64)
    }

    #[inline]
    pub fn sub(self, a: i32, b: i32) -> i32 {
        self.saturate(a as i64 - b as i64)
    }

    /// Raw-level decay `v - (v >> shift)`; `shift` must be at least 1.
    #[inline]
    pub fn decay(self, v: i32, shift: u32) -> i32 {
        let v = v as i64;
        self.saturate(v - (v >> shift.min(63)))
    }

    /// Two's complement bit string, most significant bit first.
    pub fn to_bits(self, raw: i32) -> String {
        let mask = if self.bits == 32 {
            u32::MAX
        } else {
            (1u32 << self.bits) - 1
        };
        format!("{:0width$b}", (raw as u32) & mask, width = self.bits as usize)
    }

    /// Inverse of [`FxpFormat::to_bits`]; sign-extends from the top bit.
    pub fn from_bits(self, s: &str) -> Option<i32> {
        if s.len() != self.bits as usize || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return None;
        }
        let unsigned = u64::from_str_radix(s, 2).ok()? as i64;
        let shift = 64 - self.bits;
        Some(((unsigned << shift) >> shift) as i32)
    }
}

impl TryFrom<u32> for FxpFormat {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<FxpFormat> for u32 {
    fn from(fmt: FxpFormat) -> u32 {
        fmt.bits
    }
}

/// A raw integer word tagged with its format. The raw value is always in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FxpValue {
    raw: i32,
    fmt: FxpFormat,
}

impl FxpValue {
    /// Exact constructor; fails if `raw` is not representable.
    pub fn new(raw: i64, fmt: FxpFormat) -> Result<Self> {
        if fmt.contains(raw) {
            Ok(Self { raw: raw as i32, fmt })
        } else {
            Err(Error::OutOfRange { raw, bits: fmt.bits() })
        }
    }

    pub fn saturating(raw: i64, fmt: FxpFormat) -> Self {
        Self {
            raw: fmt.saturate(raw),
            fmt,
        }
    }

    pub fn zero(fmt: FxpFormat) -> Self {
        Self { raw: 0, fmt }
    }

    pub fn raw(self) -> i32 {
        self.raw
    }

    pub fn format(self) -> FxpFormat {
        self.fmt
    }
}

fn same_format(a: FxpValue, b: FxpValue) -> Result<FxpFormat> {
    if a.fmt == b.fmt {
        Ok(a.fmt)
    } else {
        Err(Error::FormatMismatch {
            left: a.fmt.bits(),
            right: b.fmt.bits(),
        })
    }
}

pub fn sat_add(a: FxpValue, b: FxpValue) -> Result<FxpValue> {
    let fmt = same_format(a, b)?;
    Ok(FxpValue {
        raw: fmt.add(a.raw, b.raw),
        fmt,
    })
}

pub fn sat_sub(a: FxpValue, b: FxpValue) -> Result<FxpValue> {
    let fmt = same_format(a, b)?;
    Ok(FxpValue {
        raw: fmt.sub(a.raw, b.raw),
        fmt,
    })
}

/// Multiply by `1 - 2^-shift` using an arithmetic right shift.
pub fn decay(v: FxpValue, shift: i64) -> Result<FxpValue> {
    if shift < 1 {
        return Err(Error::InvalidShift(shift));
    }
    Ok(FxpValue {
        raw: v.fmt.decay(v.raw, shift.min(63) as u32),
        fmt: v.fmt,
    })
}

pub fn requantize(v: FxpValue, target: FxpFormat) -> FxpValue {
    FxpValue::saturating(v.raw as i64, target)
}

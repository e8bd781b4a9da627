//! Stored floating-point format.
//!
//! A word is `sign | exponent (n_e) | mantissa (n_m)` with the mantissa in the
//! low bits, matching IEEE-754 packing for the 32-bit preset. There are no
//! subnormals, infinities or NaNs: exponent 0 with mantissa 0 is the only
//! zero, the all-ones exponent is unused and every other exponent is a normal
//! number with a hidden leading one. Results are truncated toward zero.

use std::ops::{BitOr, BitOrAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subarray::{CellLoc, Subarray, WordLoc};

pub const MAX_EXP_BITS: u32 = 16;
pub const MAX_MANT_BITS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Rounding {
    #[default]
    TruncateTowardZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FloatLayout {
    pub n_e: u32,
    pub n_m: u32,
    pub bias: i64,
    #[serde(default)]
    pub rounding: Rounding,
}

impl FloatLayout {
    pub const FP32: FloatLayout = FloatLayout {
        n_e: 8,
        n_m: 23,
        bias: 127,
        rounding: Rounding::TruncateTowardZero,
    };

    pub fn new(n_e: u32, n_m: u32) -> Result<Self> {
        if !(2..=MAX_EXP_BITS).contains(&n_e) {
            return Err(Error::Layout(format!("n_e={n_e} outside 2..={MAX_EXP_BITS}")));
        }
        if !(1..=MAX_MANT_BITS).contains(&n_m) {
            return Err(Error::Layout(format!("n_m={n_m} outside 1..={MAX_MANT_BITS}")));
        }
        Ok(FloatLayout {
            n_e,
            n_m,
            bias: (1i64 << (n_e - 1)) - 1,
            rounding: Rounding::TruncateTowardZero,
        })
    }

    pub fn with_bias(self, bias: i64) -> Result<Self> {
        let l = FloatLayout { bias, ..self };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let base = FloatLayout::new(self.n_e, self.n_m)?;
        if self.bias < 1 || self.bias >= base.e_max() as i64 {
            return Err(Error::Layout(format!(
                "bias {} outside 1..{} for n_e={}",
                self.bias,
                base.e_max(),
                self.n_e
            )));
        }
        Ok(())
    }

    /// Parses `"<n_e>,<n_m>"` with the default bias.
    pub fn parse(s: &str) -> Result<Self> {
        let (e, m) = s
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("layout `{s}` must be `<n_e>,<n_m>`")))?;
        let n_e = e
            .trim()
            .parse()
            .map_err(|err| Error::Parse(format!("n_e `{e}`: {err}")))?;
        let n_m = m
            .trim()
            .parse()
            .map_err(|err| Error::Parse(format!("n_m `{m}`: {err}")))?;
        FloatLayout::new(n_e, n_m)
    }

    /// Largest biased exponent of a finite value.
    pub fn e_max(&self) -> u32 {
        (1u32 << self.n_e) - 2
    }

    pub fn width(&self) -> usize {
        (1 + self.n_e + self.n_m) as usize
    }

    pub fn man_mask(&self) -> u64 {
        (1u64 << self.n_m) - 1
    }

    pub fn max_finite(&self, sign: bool) -> FloatBits {
        FloatBits {
            sign,
            exp: self.e_max(),
            man: self.man_mask(),
        }
    }
}

impl Default for FloatLayout {
    fn default() -> Self {
        FloatLayout::FP32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FpFlags {
    pub overflow: bool,
    pub underflow: bool,
}

impl FpFlags {
    pub fn any(&self) -> bool {
        self.overflow || self.underflow
    }
}

impl BitOr for FpFlags {
    type Output = FpFlags;
    fn bitor(self, o: FpFlags) -> FpFlags {
        FpFlags {
            overflow: self.overflow | o.overflow,
            underflow: self.underflow | o.underflow,
        }
    }
}

impl BitOrAssign for FpFlags {
    fn bitor_assign(&mut self, o: FpFlags) {
        *self = *self | o;
    }
}

/// Field-level value of a stored float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FloatBits {
    pub sign: bool,
    pub exp: u32,
    pub man: u64,
}

impl FloatBits {
    pub const ZERO: FloatBits = FloatBits {
        sign: false,
        exp: 0,
        man: 0,
    };

    pub fn zero(sign: bool) -> Self {
        FloatBits { sign, ..Self::ZERO }
    }

    pub fn is_zero(&self) -> bool {
        self.exp == 0
    }

    pub fn negate(self) -> Self {
        FloatBits {
            sign: !self.sign,
            ..self
        }
    }

    /// Significand with the hidden bit materialized (0 for zero).
    pub fn significand(&self, layout: &FloatLayout) -> u64 {
        if self.is_zero() {
            0
        } else {
            (1u64 << layout.n_m) | self.man
        }
    }

    pub fn validate(&self, layout: &FloatLayout) -> Result<()> {
        if self.exp > layout.e_max() {
            return Err(Error::Unsupported(format!(
                "exponent {} above max finite {}",
                self.exp,
                layout.e_max()
            )));
        }
        if self.man > layout.man_mask() {
            return Err(Error::Precondition(format!("mantissa wider than {} bits", layout.n_m)));
        }
        if self.exp == 0 && self.man != 0 {
            return Err(Error::Unsupported("subnormal encodings are not supported".into()));
        }
        Ok(())
    }

    pub fn to_raw(&self, layout: &FloatLayout) -> u128 {
        ((self.sign as u128) << (layout.n_e + layout.n_m))
            | ((self.exp as u128) << layout.n_m)
            | self.man as u128
    }

    /// Decodes a packed word, rejecting encodings outside the format.
    pub fn from_raw(layout: &FloatLayout, raw: u128) -> Result<Self> {
        if raw >> layout.width() != 0 {
            return Err(Error::Parse(format!("raw word wider than {} bits", layout.width())));
        }
        let f = FloatBits {
            sign: (raw >> (layout.n_e + layout.n_m)) & 1 == 1,
            exp: ((raw >> layout.n_m) as u32) & ((1u32 << layout.n_e) - 1),
            man: (raw as u64) & layout.man_mask(),
        };
        f.validate(layout)?;
        Ok(f)
    }
}

/// Converts a real to the layout, truncating toward zero.
pub fn encode_float(v: f64, layout: &FloatLayout) -> Result<(FloatBits, FpFlags)> {
    if !v.is_finite() {
        return Err(Error::Unsupported(format!("{v} is not finite")));
    }
    let sign = v.is_sign_negative();
    if v == 0.0 {
        return Ok((FloatBits::zero(sign), FpFlags::default()));
    }
    let raw = v.abs().to_bits();
    let field = (raw >> 52) as i64;
    let frac = raw & ((1u64 << 52) - 1);
    // normalize to a 53-bit significand with the leading one at bit 52
    let (sig, e) = if field == 0 {
        let shift = frac.leading_zeros() as i64 - 11;
        (frac << shift, -1022 - shift)
    } else {
        (frac | (1u64 << 52), field - 1023)
    };
    let biased = e + layout.bias;
    if biased <= 0 {
        return Ok((
            FloatBits::zero(sign),
            FpFlags {
                underflow: true,
                ..Default::default()
            },
        ));
    }
    if biased > layout.e_max() as i64 {
        return Ok((
            layout.max_finite(sign),
            FpFlags {
                overflow: true,
                ..Default::default()
            },
        ));
    }
    let n_m = layout.n_m;
    let man = if n_m <= 52 {
        (sig >> (52 - n_m)) & layout.man_mask()
    } else {
        (sig << (n_m - 52)) & layout.man_mask()
    };
    Ok((
        FloatBits {
            sign,
            exp: biased as u32,
            man,
        },
        FpFlags::default(),
    ))
}

/// Exact for `n_m <= 52` and exponents inside the f64 range.
pub fn decode_float(f: &FloatBits, layout: &FloatLayout) -> f64 {
    if f.is_zero() {
        return if f.sign { -0.0 } else { 0.0 };
    }
    let sig = f.significand(layout) as f64;
    let scale = f.exp as i64 - layout.bias - layout.n_m as i64;
    let mag = sig * 2f64.powi(scale as i32);
    if f.sign {
        -mag
    } else {
        mag
    }
}

/// A float resident in a subarray word of `layout.width()` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFloat {
    pub loc: WordLoc,
    pub layout: FloatLayout,
}

impl StoredFloat {
    pub fn new(loc: WordLoc, layout: FloatLayout) -> Result<Self> {
        if loc.len != layout.width() {
            return Err(Error::Precondition(format!(
                "word of {} cells cannot hold a {}-bit float",
                loc.len,
                layout.width()
            )));
        }
        Ok(StoredFloat { loc, layout })
    }

    /// Word of the right width starting at (`row`, `col`).
    pub fn at(row: usize, col: usize, layout: FloatLayout) -> Self {
        StoredFloat {
            loc: WordLoc::new(row, col, layout.width()),
            layout,
        }
    }

    pub fn sign_cell(&self) -> CellLoc {
        self.loc.bit((self.layout.n_e + self.layout.n_m) as usize)
    }

    pub fn exp_cell(&self, i: usize) -> CellLoc {
        self.loc.bit(self.layout.n_m as usize + i)
    }

    pub fn man_cell(&self, i: usize) -> CellLoc {
        self.loc.bit(i)
    }

    /// Untracked host write.
    pub fn store(&self, sa: &mut Subarray, f: &FloatBits) -> Result<()> {
        f.validate(&self.layout)?;
        sa.poke_word(&self.loc, f.to_raw(&self.layout))
    }

    /// Untracked host read; does not validate.
    pub fn load(&self, sa: &Subarray) -> Result<FloatBits> {
        let raw = sa.peek_word(&self.loc)?;
        let l = &self.layout;
        Ok(FloatBits {
            sign: (raw >> (l.n_e + l.n_m)) & 1 == 1,
            exp: ((raw >> l.n_m) as u32) & ((1u32 << l.n_e) - 1),
            man: (raw as u64) & l.man_mask(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: FloatLayout = FloatLayout::FP32;

    #[test]
    fn layout_validation() {
        assert_eq!(FloatLayout::new(8, 23).unwrap(), FloatLayout::FP32);
        assert!(FloatLayout::new(1, 23).is_err());
        assert!(FloatLayout::new(8, 0).is_err());
        assert!(FloatLayout::new(8, 61).is_err());
        assert_eq!(FloatLayout::new(5, 10).unwrap().bias, 15);
        assert!(L.with_bias(0).is_err());
        assert!(L.with_bias(100).is_ok());
        assert_eq!(FloatLayout::parse(" 5 , 10").unwrap(), FloatLayout::new(5, 10).unwrap());
        assert!(FloatLayout::parse("8;23").is_err());
        assert!(FloatLayout::parse("x,23").is_err());
    }

    #[test]
    fn encode_examples() {
        let (one, _) = encode_float(1.0, &L).unwrap();
        assert_eq!(one, FloatBits { sign: false, exp: 127, man: 0 });
        let (m2, _) = encode_float(-2.0, &L).unwrap();
        assert_eq!(m2, FloatBits { sign: true, exp: 128, man: 0 });
        let (x, _) = encode_float(0.15625, &L).unwrap();
        assert_eq!(decode_float(&x, &L), 0.15625);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(encode_float(f64::NAN, &L).is_err());
        assert!(encode_float(f64::INFINITY, &L).is_err());
    }

    #[test]
    fn out_of_range_flags() {
        let (f, fl) = encode_float(1e300, &L).unwrap();
        assert!(fl.overflow);
        assert_eq!(f, L.max_finite(false));
        let (f, fl) = encode_float(-1e-300, &L).unwrap();
        assert!(fl.underflow);
        assert_eq!(f, FloatBits::zero(true));
    }

    #[test]
    fn encode_truncates_toward_zero() {
        let v = 1.0 + 2f64.powi(-30);
        let (f, _) = encode_float(v, &L).unwrap();
        assert_eq!(decode_float(&f, &L), 1.0);
        let (f, _) = encode_float(-v, &L).unwrap();
        assert_eq!(decode_float(&f, &L), -1.0);
    }

    #[test]
    fn raw_matches_ieee_single() {
        for v in [1.0f32, -2.5, std::f32::consts::PI, 1e-30, 6.5e30] {
            let (f, _) = encode_float(v as f64, &L).unwrap();
            assert_eq!(f.to_raw(&L) as u32, v.to_bits());
            assert_eq!(FloatBits::from_raw(&L, v.to_bits() as u128).unwrap(), f);
        }
        assert!(FloatBits::from_raw(&L, 0x7f80_0000).is_err());
        assert!(FloatBits::from_raw(&L, 1).is_err());
        assert!(FloatBits::from_raw(&L, 1 << 40).is_err());
    }

    #[test]
    fn stored_float_fields() {
        let mut sa = Subarray::new(2, 64).unwrap();
        let s = StoredFloat::at(1, 3, L);
        let (f, _) = encode_float(-6.25, &L).unwrap();
        s.store(&mut sa, &f).unwrap();
        assert_eq!(s.load(&sa).unwrap(), f);
        assert!(sa.peek(1, s.sign_cell().col).unwrap());
        assert!(StoredFloat::new(WordLoc::new(0, 0, 31), L).is_err());
    }

    proptest::proptest! {
        #[test]
        fn roundtrip_representable(sign: bool, exp in 1u32..=254, man in 0u64..(1 << 23)) {
            let f = FloatBits { sign, exp, man };
            let v = decode_float(&f, &L);
            let (g, flags) = encode_float(v, &L).unwrap();
            proptest::prop_assert_eq!(g, f);
            proptest::prop_assert!(!flags.any());
        }
    }
}

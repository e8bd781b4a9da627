//! Integer reference model of the stored float format.
//!
//! This is the comparison target for the in-memory schedules: it follows the
//! same numerical rules (one guard bit during alignment, shifts beyond the
//! guard flush the smaller operand, truncation toward zero, flush-to-zero,
//! saturating overflow) but computes with plain machine integers and never
//! touches a subarray.

use super::float::{FloatBits, FloatLayout, FpFlags};

fn finish(layout: &FloatLayout, sign: bool, exp: i64, man: u64) -> (FloatBits, FpFlags) {
    if exp <= 0 {
        return (
            FloatBits::zero(sign),
            FpFlags {
                underflow: true,
                overflow: false,
            },
        );
    }
    if exp > layout.e_max() as i64 {
        return (
            layout.max_finite(sign),
            FpFlags {
                overflow: true,
                underflow: false,
            },
        );
    }
    (
        FloatBits {
            sign,
            exp: exp as u32,
            man: man & layout.man_mask(),
        },
        FpFlags::default(),
    )
}

pub fn ref_add(layout: &FloatLayout, a: &FloatBits, b: &FloatBits) -> (FloatBits, FpFlags) {
    let n_m = layout.n_m as i64;
    // significands with one guard bit below the LSB
    let ga = (a.significand(layout) as u128) << 1;
    let gb = (b.significand(layout) as u128) << 1;
    let d = a.exp as i64 - b.exp as i64;
    let (big, small, big_sig, small_sig, shift) = if d >= 0 {
        (a, b, ga, gb, d)
    } else {
        (b, a, gb, ga, -d)
    };
    let aligned = if shift <= n_m + 1 { small_sig >> shift } else { 0 };
    let (mag, sign) = if big.sign == small.sign {
        (big_sig + aligned, big.sign)
    } else if big_sig >= aligned {
        (big_sig - aligned, big.sign)
    } else {
        (aligned - big_sig, small.sign)
    };
    if mag == 0 {
        return (FloatBits::ZERO, FpFlags::default());
    }
    let p = 127 - mag.leading_zeros() as i64;
    let man = if p >= n_m {
        (mag >> (p - n_m)) as u64
    } else {
        (mag << (n_m - p)) as u64
    };
    finish(layout, sign, big.exp as i64 + p - n_m - 1, man)
}

pub fn ref_mul(layout: &FloatLayout, a: &FloatBits, b: &FloatBits) -> (FloatBits, FpFlags) {
    let sign = a.sign ^ b.sign;
    if a.is_zero() || b.is_zero() {
        return (FloatBits::zero(sign), FpFlags::default());
    }
    let n = layout.n_m + 1;
    let prod = a.significand(layout) as u128 * b.significand(layout) as u128;
    let top = ((prod >> (2 * n - 1)) & 1) as u32;
    let man = (prod >> (layout.n_m + top)) as u64;
    let exp = a.exp as i64 + b.exp as i64 - layout.bias + top as i64;
    finish(layout, sign, exp, man)
}

/// `acc + x*w` as a multiply followed by a separately truncated add.
pub fn ref_mac(
    layout: &FloatLayout,
    acc: &FloatBits,
    x: &FloatBits,
    w: &FloatBits,
) -> (FloatBits, FpFlags) {
    let (p, f1) = ref_mul(layout, x, w);
    let (s, f2) = ref_add(layout, acc, &p);
    (s, f1 | f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::float::{decode_float, encode_float};

    const L: FloatLayout = FloatLayout::FP32;

    fn enc(v: f64) -> FloatBits {
        encode_float(v, &L).unwrap().0
    }

    fn dec(f: FloatBits) -> f64 {
        decode_float(&f, &L)
    }

    #[test]
    fn exact_cases() {
        assert_eq!(dec(ref_add(&L, &enc(1.5), &enc(2.5)).0), 4.0);
        assert_eq!(dec(ref_add(&L, &enc(1.5), &enc(-1.5)).0), 0.0);
        assert_eq!(dec(ref_add(&L, &enc(-3.0), &enc(0.0)).0), -3.0);
        assert_eq!(dec(ref_mul(&L, &enc(2.0), &enc(3.0)).0), 6.0);
        assert_eq!(dec(ref_mac(&L, &enc(1.0), &enc(2.0), &enc(3.0)).0), 7.0);
        let z = ref_mul(&L, &enc(-2.0), &enc(0.0)).0;
        assert!(z.is_zero() && z.sign);
    }

    #[test]
    fn overflow_and_underflow() {
        let big = L.max_finite(false);
        let (r, f) = ref_add(&L, &big, &big);
        assert!(f.overflow);
        assert_eq!(r, big);
        let (r, f) = ref_mul(&L, &enc(1e-30), &enc(1e-30));
        assert!(f.underflow && r.is_zero());
    }

    // Exact sum computed in f64 (exact when the exponent gap is small),
    // then truncated to single precision by clearing low bits.
    fn truncate_to_f32(x: f64) -> f32 {
        let r = x as f32;
        if (r as f64).abs() > x.abs() {
            f32::from_bits(r.to_bits() - 1)
        } else {
            r
        }
    }

    proptest::proptest! {
        #[test]
        fn same_sign_add_is_exact_truncation(
            sign: bool, ea in 100u32..150, eb in 100u32..150,
            ma in 0u64..(1 << 23), mb in 0u64..(1 << 23),
        ) {
            let a = FloatBits { sign, exp: ea, man: ma };
            let b = FloatBits { sign, exp: eb, man: mb };
            // f64 holds the exact sum while the exponent gap stays below 29
            proptest::prop_assume!((ea as i64 - eb as i64).abs() <= 29);
            let exact = dec(a) + dec(b);
            let want = truncate_to_f32(exact);
            let got = ref_add(&L, &a, &b).0;
            proptest::prop_assert_eq!(dec(got) as f32, want);
        }

        #[test]
        fn mul_is_exact_truncation(
            sa: bool, sb: bool, ea in 90u32..160, eb in 90u32..160,
            ma in 0u64..(1 << 23), mb in 0u64..(1 << 23),
        ) {
            let a = FloatBits { sign: sa, exp: ea, man: ma };
            let b = FloatBits { sign: sb, exp: eb, man: mb };
            let exact = dec(a) * dec(b); // 48-bit product is exact in f64
            let got = ref_mul(&L, &a, &b).0;
            proptest::prop_assert_eq!(dec(got) as f32, truncate_to_f32(exact));
        }

        #[test]
        fn add_commutes(
            sa: bool, sb: bool, ea in 0u32..=254, eb in 0u32..=254,
            ma in 0u64..(1 << 23), mb in 0u64..(1 << 23),
        ) {
            let a = FloatBits { sign: sa, exp: ea, man: if ea == 0 { 0 } else { ma } };
            let b = FloatBits { sign: sb, exp: eb, man: if eb == 0 { 0 } else { mb } };
            proptest::prop_assert_eq!(ref_add(&L, &a, &b), ref_add(&L, &b, &a));
            proptest::prop_assert_eq!(ref_mul(&L, &a, &b), ref_mul(&L, &b, &a));
        }
    }
}

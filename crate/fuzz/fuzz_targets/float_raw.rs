#![no_main]

use libfuzzer_sys::fuzz_target;
use sotpim::arith::{decode_float, FloatBits, FloatLayout};

// bytes 0..2 pick the layout, the next 16 are the raw word
fuzz_target!(|data: &[u8]| {
    if data.len() < 18 {
        return;
    }
    let Ok(l) = FloatLayout::new(2 + (data[0] % 15) as u32, 1 + (data[1] % 60) as u32) else { return };
    let raw = u128::from_le_bytes(data[2..18].try_into().unwrap());
    if let Ok(f) = FloatBits::from_raw(&l, raw) {
        assert_eq!(f.to_raw(&l), raw);
        f.validate(&l).unwrap();
        if l.n_m <= 52 && l.n_e <= 11 {
            assert!(decode_float(&f, &l).is_finite());
        }
    }
});

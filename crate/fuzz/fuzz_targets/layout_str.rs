#![no_main]

use libfuzzer_sys::fuzz_target;
use sotpim::arith::FloatLayout;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(l) = FloatLayout::parse(text) {
        l.validate().unwrap();
        assert_eq!(l.width() as u32, 1 + l.n_e + l.n_m);
        assert_eq!(FloatLayout::parse(&format!("{},{}", l.n_e, l.n_m)).unwrap(), l);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use sotpim::calibration::Calibration;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Calibration::from_json(text) {
        assert_eq!(Calibration::from_json(&c.to_json()).unwrap(), c);
        let _ = c.primitive_costs().unwrap();
    }
});

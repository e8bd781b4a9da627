#![no_main]

use libfuzzer_sys::fuzz_target;
use sotpim::subarray::{parse_trace_csv, trace_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(events) = parse_trace_csv(text) {
        assert_eq!(parse_trace_csv(&trace_to_csv(&events)).unwrap(), events);
    }
});

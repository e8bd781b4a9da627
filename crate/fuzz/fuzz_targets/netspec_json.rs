#![no_main]

use libfuzzer_sys::fuzz_target;
use sotpim::workload::NetworkSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(n) = NetworkSpec::from_json(text) {
        let stats = n.stats().unwrap();
        assert_eq!(stats.len(), n.layers.len());
        assert_eq!(NetworkSpec::from_json(&n.to_json()).unwrap(), n);
    }
});

#![no_main]

use dudesim::analytic::{parse_fixture, write_fixture, AnalyticParams};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = parse_fixture(text) {
            let again = parse_fixture(&write_fixture(&r)).expect("round trip");
            assert_eq!(again.geometry, r.geometry);
            assert_eq!(again.model, r.model);
            // evaluation may reject the geometry but must not panic
            let _ = r.evaluate(&AnalyticParams::default());
        }
    }
});

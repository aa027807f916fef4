#![no_main]

use dudesim::config::{parse_scenario, NoFiles};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = parse_scenario(text, &NoFiles) {
            // anything accepted must also pass validation on its own
            s.validate().expect("parsed scenario failed validation");
        }
    }
});

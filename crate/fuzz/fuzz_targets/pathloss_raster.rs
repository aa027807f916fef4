#![no_main]

use dudesim::raster::PathlossRaster;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = PathlossRaster::parse(text) {
            let again = PathlossRaster::parse(&r.to_text()).expect("round trip");
            assert_eq!(again.cells.len(), r.cells.len());
        }
    }
});

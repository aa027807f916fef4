#![no_main]

use dudesim::raster::DensityRaster;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = DensityRaster::parse(text) {
            let again = DensityRaster::parse(&r.to_text()).expect("round trip");
            assert_eq!(again.grid, r.grid);
            assert_eq!(again.weights.len(), r.weights.len());
        }
    }
});

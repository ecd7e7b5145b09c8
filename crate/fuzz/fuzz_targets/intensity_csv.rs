#![no_main]

use libfuzzer_sys::fuzz_target;
use tearfilm::ingest::ingest_intensity;

fuzz_target!(|data: &[u8]| {
    if let Ok(series) = ingest_intensity(data, 601) {
        assert_eq!(series.len(), 601);
        assert_eq!(series.values()[0], 1.0);
        assert!(series.values().iter().all(|v| v.is_finite()));
    }
});

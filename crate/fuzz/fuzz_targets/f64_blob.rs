#![no_main]

use libfuzzer_sys::fuzz_target;
use tearfilm::io::{f64_from_le_bytes, f64_to_le_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(values) = f64_from_le_bytes(data) {
        assert_eq!(f64_to_le_bytes(&values), data);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tearfilm::sampling::dataset::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = Manifest::from_json(text) {
            let _ = m.validate();
        }
    }
});

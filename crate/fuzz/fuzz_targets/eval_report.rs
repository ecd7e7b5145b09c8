#![no_main]

use libfuzzer_sys::fuzz_target;
use tearfilm::eval::EvalReport;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = EvalReport::from_json(text) {
            let _ = report.cases_csv();
        }
    }
});

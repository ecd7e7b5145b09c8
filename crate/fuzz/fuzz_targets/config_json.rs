#![no_main]

use libfuzzer_sys::fuzz_target;
use tearfilm::learners::TrainConfig;
use tearfilm::physics::{nondim_ode, nondim_pde, OdeParams, PdeParams, PhysicalConstants};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let constants = PhysicalConstants::from_json(text).unwrap_or_default();
    if let Ok(p) = serde_json::from_str::<OdeParams>(text) {
        let _ = nondim_ode(&p, &constants);
    }
    if let Ok(p) = serde_json::from_str::<PdeParams>(text) {
        let _ = nondim_pde(&p, &constants);
    }
    let _ = serde_json::from_str::<TrainConfig>(text);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tearfilm::learners::checkpoint::{from_bytes, to_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(learner) = from_bytes(data) {
        let bytes = to_bytes(&learner).expect("a loaded checkpoint serializes");
        let again = from_bytes(&bytes).expect("a written checkpoint loads");
        assert_eq!(to_bytes(&again).unwrap(), bytes);
        let n = learner.info.n;
        let ext = learner.kind().uses_ext().then(|| vec![0.5; 3]);
        let _ = learner.predict(&vec![1.0; n], ext.as_deref());
    }
});

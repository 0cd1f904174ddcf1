#![no_main]

use depcens::copula::ArchimedeanCopula;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = serde_json::from_slice::<ArchimedeanCopula>(data) {
        let _ = c.cdf(0.3, 0.7);
        let _ = c.density(0.4, 0.6);
    }
});

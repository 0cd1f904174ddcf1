#![no_main]

use depcens::marginals::SurvivalMarginal;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = serde_json::from_slice::<SurvivalMarginal>(data) {
        let x = vec![0.25; m.risk().input_dim().unwrap_or(1)];
        let _ = m.survival(1.0, &x);
        let _ = m.log_density(1.0, &x);
    }
});

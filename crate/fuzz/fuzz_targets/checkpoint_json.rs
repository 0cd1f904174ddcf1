#![no_main]

use depcens::data::SurvivalRecord;
use depcens::training::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ck) = Checkpoint::from_json(text) {
        let dim = ck.model.event.risk().input_dim().unwrap_or(1);
        let r = SurvivalRecord::new(vec![0.5; dim], 1.0, true);
        let _ = ck.model.loglik(&r);
    }
});

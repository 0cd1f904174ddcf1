#![no_main]

use depcens::generator::GeneratorNetwork;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = serde_json::from_slice::<GeneratorNetwork>(data) {
        for t in [0.0, 0.5, 3.0] {
            let _ = g.eval(t);
        }
    }
});

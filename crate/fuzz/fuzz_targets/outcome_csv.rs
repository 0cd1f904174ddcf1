#![no_main]

use depcens::data::OutcomeTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = OutcomeTable::read_csv(data) {
        assert_eq!(t.x.len(), t.y.len());
        assert!(t.y.iter().all(|&y| y > 0.0));
    }
});

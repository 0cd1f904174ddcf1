#![no_main]

use depcens::data::SurvivalDataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = SurvivalDataset::read_csv(data) {
        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        let again = SurvivalDataset::read_csv(out.as_slice()).unwrap();
        assert_eq!(again.len(), ds.len());
    }
});

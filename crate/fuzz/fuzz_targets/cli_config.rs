#![no_main]

use depcens_cli::{
    parse_config, EvaluateConfig, ExportConfig, GenerateConfig, SweepCmdConfig, TrainCmdConfig,
};
use libfuzzer_sys::fuzz_target;

// First byte picks the config type.
fuzz_target!(|data: &[u8]| {
    let Some((&which, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let _ = match which % 5 {
        0 => parse_config::<GenerateConfig>(text).map(drop),
        1 => parse_config::<TrainCmdConfig>(text).map(drop),
        2 => parse_config::<EvaluateConfig>(text).map(drop),
        3 => parse_config::<SweepCmdConfig>(text).map(drop),
        _ => parse_config::<ExportConfig>(text).map(drop),
    };
});

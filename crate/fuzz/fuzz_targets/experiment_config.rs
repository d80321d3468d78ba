#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_sirp::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::from_json(text) {
        // building computes sigma^2 per sweep point but runs no trials
        if config.sweep.values.len() <= 64 && config.targets.len() <= 8 {
            let _ = config.build();
        }
    }
});

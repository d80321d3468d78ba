#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_sirp::harness::{EstimatorSelection, ExperimentConfig};

// Input: estimator names and iteration counts as the command line takes them,
// "NAME,NAME,...;N,N,...".
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (names, iterations) = text.split_once(';').unwrap_or((text, "2"));
    let Ok(iterations) = iterations.split(',').map(|s| s.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>()
    else {
        return;
    };
    let mut config = ExperimentConfig::default();
    config.sweep.values.truncate(1);
    config.estimators = names
        .split(',')
        .map(|n| EstimatorSelection {
            name: n.trim().to_string(),
            iterations: iterations.clone(),
        })
        .collect();
    if let Ok(exp) = config.build() {
        assert!(!exp.estimators.is_empty());
        assert!(exp.estimators.iter().all(|e| !e.iterations.is_empty() && !e.iterations.contains(&0)));
    }
});

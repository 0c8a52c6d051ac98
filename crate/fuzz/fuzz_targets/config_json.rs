#![no_main]

use dimerlab_cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match ExperimentConfig::from_json(text) {
        Ok(config) => {
            let echoed = serde_json::to_string(&config).expect("config serializes");
            assert_eq!(ExperimentConfig::from_json(&echoed).expect("echoed config parses"), config);
        }
        Err(e) => assert!(!e.path.is_empty()),
    }
});

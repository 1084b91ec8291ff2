#![no_main]
use libfuzzer_sys::fuzz_target;

use fracpen::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::load(text, &[]) {
            // a config that validates must survive its own serialization
            let again = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::load(&again, &[]).unwrap(), cfg);
        }
    }
});

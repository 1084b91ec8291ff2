#![no_main]
use libfuzzer_sys::fuzz_target;

use fracpen::config::{apply_override, ExperimentConfig};

// First line is a JSON document, every later line one `path=value` override.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let mut lines = text.lines();
    let base = lines.next().unwrap_or("");
    let overrides: Vec<String> = lines.map(str::to_string).collect();
    if let Ok(mut value) = serde_json::from_str::<serde_json::Value>(base) {
        for o in &overrides {
            let _ = apply_override(&mut value, o);
        }
        let _ = ExperimentConfig::from_value(value);
    }
    let _ = ExperimentConfig::load(base, &overrides);
});

#![no_main]
use libfuzzer_sys::fuzz_target;

use fracpen::verify::{table_from_csv, table_to_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = table_from_csv(data) {
        let bytes = table_to_csv(&rows).unwrap();
        let again = table_from_csv(&bytes).unwrap();
        assert_eq!(again.len(), rows.len());
    }
});

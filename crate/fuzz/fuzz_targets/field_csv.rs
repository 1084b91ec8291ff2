#![no_main]
use libfuzzer_sys::fuzz_target;

use fracpen::io::{decode_field_csv, encode_field_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(u) = decode_field_csv(data) {
        assert_eq!(u.values().len(), u.grid().len());
        let back = decode_field_csv(&encode_field_csv(&u)).expect("re-encoded field parses");
        assert_eq!(back.grid(), u.grid());
    }
});

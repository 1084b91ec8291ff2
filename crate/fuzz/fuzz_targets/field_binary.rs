#![no_main]
use libfuzzer_sys::fuzz_target;

use fracpen::io::decode_field_binary;

// Two little-endian bytes give the header length; the rest is the payload.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    let (header, payload) = rest.split_at(n.min(rest.len()));
    if let Ok(u) = decode_field_binary(header, payload) {
        assert_eq!(8 * u.grid().len(), payload.len());
    }
});

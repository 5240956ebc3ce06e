#![no_main]

use ditto_core::manifest_store::record::parse_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = parse_line(data) {
        let line = record.encode();
        let again = parse_line(line.trim_end_matches('\n').as_bytes()).expect("encoded record parses");
        assert_eq!(again, record);
    }
});

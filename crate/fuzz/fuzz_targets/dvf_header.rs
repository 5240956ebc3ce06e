#![no_main]

use ditto_core::media_io::parse_header_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_header_line(data);
});

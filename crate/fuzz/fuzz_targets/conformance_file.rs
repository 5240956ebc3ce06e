#![no_main]

use ditto_core::backends::conformance::VectorFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(file) = VectorFile::parse(text) {
        VectorFile::parse(&file.to_pretty_json()).expect("pretty output parses");
    }
});

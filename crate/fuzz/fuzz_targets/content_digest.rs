#![no_main]

use ditto_core::ContentDigest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(d) = ContentDigest::parse(text) {
        assert_eq!(d.to_string(), text);
    }
});

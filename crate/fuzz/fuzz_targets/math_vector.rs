#![no_main]

use ditto_core::training_math::parse_vector;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(v) = parse_vector(text) {
        assert!(v.iter().all(|x| x.is_finite()));
    }
});

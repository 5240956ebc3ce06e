#![no_main]

use ditto_core::manifest_store::replay_reader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = replay_reader(data);
});

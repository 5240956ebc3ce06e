#![no_main]

use ditto_core::backends::protocol::{BackendKind, BackendResponse};
use libfuzzer_sys::fuzz_target;

// First byte picks the endpoint; the rest is the body.
fuzz_target!(|data: &[u8]| {
    let Some((&k, body)) = data.split_first() else {
        return;
    };
    let kind = BackendKind::ALL[k as usize % BackendKind::ALL.len()];
    if let Ok(msg) = BackendResponse::parse(kind, body) {
        let again = BackendResponse::parse(kind, msg.to_body().as_bytes()).expect("canonical body parses");
        assert_eq!(again, msg);
    }
});

#![no_main]

use ditto_core::filtering::{dedup, motion_score, parse_feature_records, parse_track_records};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(vs) = parse_feature_records(text) {
        let _ = dedup(&vs, 0.95);
    }
    if let Ok(tracks) = parse_track_records(text) {
        for (_, ts) in tracks {
            let _ = motion_score(&ts);
        }
    }
});

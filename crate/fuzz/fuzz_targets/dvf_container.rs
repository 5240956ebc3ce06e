#![no_main]

use ditto_core::media_io::decode_container;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(video) = decode_container(data) {
        let again = decode_container(&video.encode()).expect("re-encoded container decodes");
        assert_eq!(again, video);
    }
});

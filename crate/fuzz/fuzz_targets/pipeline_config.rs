#![no_main]

use ditto_core::pipeline::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(config) = PipelineConfig::from_toml(text) {
        let again = PipelineConfig::from_toml(&config.to_toml()).expect("serialized config loads");
        assert_eq!(again.identity_hash(), config.identity_hash());
    }
});

#![allow(dead_code)]

use ditto_core::media_io::StandardizeTarget;
use ditto_core::pipeline::PipelineConfig;

/// Small, fast config: tiny clips standardized to 32x18.
pub fn small_config(count: usize, seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    c.assets.count = count;
    c.assets.seed = seed;
    c.standardize = StandardizeTarget {
        width: 32,
        height: 18,
        fps: 10,
        frame_cap: 21,
    };
    c.retry.backoff_base_ms = 0;
    c
}

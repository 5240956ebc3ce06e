//! Desk-scale orchestrator for synthesizing (source video, instruction, edited video)
//! training triplets.
//!
//! The pipeline runs a fixed stage graph per source video: near-duplicate and
//! low-motion filtering, standardization, captioning, instruction generation,
//! keyframe editing, depth prediction, in-context generation, judge-based
//! rejection sampling, enhancement and publication. Every neural model sits behind
//! the wire protocol in [`backends`], with deterministic seeded mocks so that whole
//! runs are reproducible bit-for-bit. All state lives in the append-only journal of
//! [`manifest_store`].

#![forbid(unsafe_code)]

pub mod backends;
pub mod curation;
pub mod digest;
pub mod filtering;
pub mod manifest_store;
pub mod media_io;
pub mod pipeline;
pub mod stage;
pub mod training_math;

pub use digest::ContentDigest;
pub use stage::Stage;

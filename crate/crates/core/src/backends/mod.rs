//! Wire protocol for the seven model services (captioner, instructor, image editor,
//! depth predictor, video generator, judge, enhancer), a client over pluggable
//! transports, deterministic mocks, and an HTTP front for the mocks.

pub mod analysis;
pub mod client;
pub mod conformance;
pub mod media;
pub mod mock;
pub mod protocol;
pub mod serve;

pub use client::{BackendClient, BackendError, GenerateInputs, Reply, Transport};
pub use media::{MediaStore, StoreError};
pub use mock::{MockBackend, MockConfig};
pub use protocol::{
    BackendKind, BackendRequest, BackendResponse, Category, Criterion, JudgeScores, MediaKind,
    MediaRef, OutputValue, ProtocolError,
};

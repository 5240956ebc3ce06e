//! Append-only journal that is the single source of truth for a run: registered
//! assets, stage results, GPU costs, rejections and published triplets. All state
//! is a fold over the journal, optionally starting from a snapshot.

mod journal;
pub mod record;
mod state;
mod stats;

use std::path::PathBuf;

pub use journal::{
    load_snapshot, manifest_digest, replay, replay_onto, replay_reader, replay_with_snapshot,
    write_snapshot, Journal, Snapshot,
};
pub use record::{
    AssetPayload, CostPayload, Entry, JobStatus, LineageEntry, Payload, Record, RecordKind,
    PublishPayload, RejectPayload, RejectReason, StageResultPayload, Triplet,
};
pub use state::{AssetState, CostEntry, ManifestState};
pub use stats::{stats_composition, stats_tokens, token_counts, tokenize, CompositionTable, FormatRow};

use crate::stage::Stage;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt journal at byte {offset}: {reason}")]
    CorruptJournal { offset: u64, reason: String },
    #[error("asset {0} is already published")]
    DuplicatePublish(String),
    #[error("asset {0} is already registered")]
    DuplicateAsset(String),
    #[error("asset {0} is not registered")]
    UnknownAsset(String),
    #[error("{stage} already has a result for asset {asset_id}")]
    DuplicateResult { asset_id: String, stage: Stage },
    #[error("asset {0} is already published or rejected")]
    AlreadyTerminal(String),
    #[error("expected sequence number {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("journal is unusable after a failed write")]
    Poisoned,
}

//! Run orchestration: configuration, the stage graph, the executor and cost
//! accounting.
//!
//! A run lives in `<home>/runs/<run_id>/` (`config.toml`, `journal.log`); media is
//! shared across runs in `<home>/media/`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

pub mod config;
pub mod exec;
pub mod ledger;
pub mod plan;
pub mod synth;

pub use config::PipelineConfig;
pub use exec::{execute, summarize, ExecOptions, RunContext, RunStatus, RunSummary};
pub use ledger::{budget_report, exact_sum, BudgetReport, CostLedger, LedgerError};
pub use plan::{build_plan, StagePlan};
pub use synth::{load_assets, SourceAsset};

use crate::backends::client::{BackendClient, HttpTransport};
use crate::backends::media::{MediaStore, StoreError};
use crate::backends::mock::MockBackend;
use crate::filtering::FilterError;
use crate::manifest_store::{Journal, ManifestError};
use crate::media_io::MediaError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("no such run: {0}")]
    NoSuchRun(String),
}

impl PipelineError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Manifest(ManifestError::CorruptJournal { .. }) => 4,
            _ => 1,
        }
    }
}

/// Directory layout under one home directory.
#[derive(Clone, Debug)]
pub struct Home {
    root: PathBuf,
}

impl Home {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn media_dir(&self) -> PathBuf {
        self.root.join("media")
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    pub fn config_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("config.toml")
    }

    pub fn journal_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("journal.log")
    }

    pub fn store(&self) -> Result<MediaStore, PipelineError> {
        Ok(MediaStore::open(self.media_dir())?)
    }

    /// Stored config of an existing run.
    pub fn load_run_config(&self, run_id: &str) -> Result<PipelineConfig, PipelineError> {
        let path = self.config_path(run_id);
        if !path.exists() {
            return Err(PipelineError::NoSuchRun(run_id.to_string()));
        }
        PipelineConfig::load(&path, &[])
    }
}

pub fn make_client(config: &PipelineConfig, store: &MediaStore) -> BackendClient {
    if config.backends.endpoints.is_empty() {
        BackendClient::in_process(MockBackend::new(config.mock, store.clone()))
    } else {
        BackendClient::new(Arc::new(HttpTransport::new(
            config.backends.endpoints.clone(),
            Duration::from_millis(config.backends.timeout_ms),
            Some(store.clone()),
        )))
    }
}

pub fn context(config: PipelineConfig, client: BackendClient, store: MediaStore) -> Result<RunContext, PipelineError> {
    let plan = build_plan(&config)?;
    Ok(RunContext {
        config,
        plan,
        client,
        store,
    })
}

fn write_config(home: &Home, id: &str, config: &PipelineConfig) -> Result<(), PipelineError> {
    let dir = home.run_dir(id);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    let path = home.config_path(id);
    if path.exists() {
        let stored = PipelineConfig::load(&path, &[])?;
        if stored.identity_hash() != config.identity_hash() {
            return Err(PipelineError::ConfigMismatch(format!(
                "run {id} was started with a different config"
            )));
        }
        return Ok(());
    }
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    std::fs::write(&path, config.to_toml()).map_err(io(&path))
}

/// Starts (or continues, when the run already exists with the same config) a run.
pub fn start_run(home: &Home, config: PipelineConfig, opts: ExecOptions) -> Result<(String, RunSummary), PipelineError> {
    let id = config.run_id();
    write_config(home, &id, &config)?;
    let store = home.store()?;
    let client = make_client(&config, &store);
    run_with(home, &id, config, client, store, opts)
}

/// Runs `config` under `id` with an explicit client.
pub fn run_with(
    home: &Home,
    id: &str,
    config: PipelineConfig,
    client: BackendClient,
    store: MediaStore,
    opts: ExecOptions,
) -> Result<(String, RunSummary), PipelineError> {
    let mut journal = Journal::open(home.journal_path(id))?;
    let assets = load_assets(&config.assets, &store)?;
    let ctx = context(config, client, store)?;
    let summary = execute(&ctx, &mut journal, &assets, opts)?;
    Ok((id.to_string(), summary))
}

/// Continues an existing run from its journal. `workers` and `backends` may differ
/// from the stored config without changing the result.
pub fn resume_run(
    home: &Home,
    id: &str,
    adjust: impl FnOnce(&mut PipelineConfig),
    opts: ExecOptions,
) -> Result<RunSummary, PipelineError> {
    let mut config = home.load_run_config(id)?;
    let identity = config.identity_hash();
    adjust(&mut config);
    if config.identity_hash() != identity {
        return Err(PipelineError::ConfigMismatch(format!(
            "resume of {id} may only change workers and backends"
        )));
    }
    config.validate()?;
    let store = home.store()?;
    let client = make_client(&config, &store);
    Ok(run_with(home, id, config, client, store, opts)?.1)
}

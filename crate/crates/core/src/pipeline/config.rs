//! Run configuration: a TOML document with `--set key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::mock::{
    MockConfig, MockCosts, DEFAULT_ENHANCE_STEPS, DEFAULT_GLOBAL_WEIGHT, DEFAULT_NOISE_SIGMA,
};
use crate::curation::CurationPolicy;
use crate::filtering::{DEFAULT_FEATURE_DIM, DEFAULT_MOTION_THRESHOLD, DEFAULT_SIMILARITY_THRESHOLD};
use crate::media_io::{GridSpec, KeyframePolicy, StandardizeTarget};
use crate::stage::Stage;

use super::PipelineError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssetConfig {
    /// Seed for the synthetic source videos, independent of the run seed.
    pub seed: u64,
    pub count: usize,
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub frames: u32,
    /// Share of synthetic videos that do not move.
    pub static_fraction: f64,
    /// Share of synthetic videos that re-use an earlier video's content.
    pub duplicate_fraction: f64,
    /// Ingest every `*.dvf` file in this directory instead of synthesizing.
    pub source_dir: Option<PathBuf>,
}

impl Default for AssetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 2,
            width: 48,
            height: 27,
            fps: 10,
            frames: 51,
            static_fraction: 0.1,
            duplicate_fraction: 0.1,
            source_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageConfig {
    pub disabled: Vec<Stage>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub similarity_threshold: f64,
    pub motion_threshold: f64,
    pub feature_dim: usize,
    pub grid: GridSpec,
    pub search_radius: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            motion_threshold: DEFAULT_MOTION_THRESHOLD,
            feature_dim: DEFAULT_FEATURE_DIM,
            grid: GridSpec::default(),
            search_radius: crate::backends::analysis::DEFAULT_SEARCH_RADIUS,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyframeConfig {
    pub policy: KeyframePolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstructConfig {
    pub global_weight: f64,
}

impl Default for InstructConfig {
    fn default() -> Self {
        Self {
            global_weight: DEFAULT_GLOBAL_WEIGHT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub distilled: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { distilled: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhanceConfig {
    pub noise_sigma: f64,
    pub steps: i64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            noise_sigma: DEFAULT_NOISE_SIGMA,
            steps: DEFAULT_ENHANCE_STEPS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkerConfig {
    pub workers: usize,
    /// Concurrent requests allowed per backend kind.
    pub per_kind: usize,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        Self {
            workers: 4,
            per_kind: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_factor: u32,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base_ms: 1000,
            backoff_factor: 4,
        }
    }
}

impl RetryConfig {
    /// Delay before attempt `attempt + 1`, `attempt >= 1`.
    pub fn backoff_ms(&self, attempt: u32) -> u64 {
        let exp = attempt.saturating_sub(1).min(16);
        self.backoff_base_ms
            .saturating_mul((self.backoff_factor as u64).saturating_pow(exp))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    /// Cap on total GPU-seconds; none means unlimited.
    pub gpu_seconds: Option<f64>,
    /// Sample count the cost report projects to.
    pub target_samples: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            gpu_seconds: None,
            target_samples: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    /// Base URLs of services speaking the wire protocol; empty runs the mocks in
    /// process.
    pub endpoints: Vec<String>,
    pub timeout_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoints: Vec::new(),
            timeout_ms: 30_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub run_id: Option<String>,
    pub assets: AssetConfig,
    pub stages: StageConfig,
    pub filter: FilterConfig,
    pub standardize: StandardizeTarget,
    pub keyframe: KeyframeConfig,
    pub instruct: InstructConfig,
    pub curation: CurationPolicy,
    pub generate: GenerateConfig,
    pub enhance: EnhanceConfig,
    pub workers: WorkerConfig,
    pub retry: RetryConfig,
    pub budget: BudgetConfig,
    /// Per-call GPU-second estimates used for pre-dispatch budget checks.
    pub cost_model: MockCosts,
    pub backends: BackendConfig,
    pub mock: MockConfig,
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::InvalidConfig(msg.into())
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides to the document tree, then
    /// deserializes and validates.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self, PipelineError> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: PipelineConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if let Some(id) = &self.run_id {
            crate::manifest_store::record::validate_asset_id(id)
                .map_err(|e| invalid(format!("run_id: {e}")))?;
        }
        let a = &self.assets;
        if a.source_dir.is_none() {
            if a.count == 0 {
                return Err(invalid("assets.count must be >= 1"));
            }
            crate::media_io::VideoHeader::new(a.width, a.height, a.fps, a.frames)
                .map_err(|e| invalid(format!("assets: {e}")))?;
        }
        for (name, v) in [
            ("assets.static_fraction", a.static_fraction),
            ("assets.duplicate_fraction", a.duplicate_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if a.static_fraction + a.duplicate_fraction > 1.0 {
            return Err(invalid("assets.static_fraction + assets.duplicate_fraction exceeds 1"));
        }
        let f = &self.filter;
        if !(f.similarity_threshold > 0.0 && f.similarity_threshold <= 1.0) {
            return Err(invalid(format!(
                "filter.similarity_threshold = {} outside (0, 1]",
                f.similarity_threshold
            )));
        }
        if !(f.motion_threshold.is_finite() && f.motion_threshold >= 0.0) {
            return Err(invalid("filter.motion_threshold must be finite and >= 0"));
        }
        if f.feature_dim == 0 || f.grid.rows == 0 || f.grid.cols == 0 {
            return Err(invalid("filter.feature_dim and filter.grid must be positive"));
        }
        self.standardize
            .validate()
            .map_err(|e| invalid(format!("standardize: {e}")))?;
        if !(0.0..=1.0).contains(&self.instruct.global_weight) {
            return Err(invalid("instruct.global_weight outside [0, 1]"));
        }
        self.curation
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        crate::backends::mock::validate_enhance(self.enhance.noise_sigma, self.enhance.steps)
            .map_err(|e| invalid(format!("enhance: {e}")))?;
        if self.workers.workers == 0 || self.workers.per_kind == 0 {
            return Err(invalid("workers.workers and workers.per_kind must be >= 1"));
        }
        if self.retry.max_attempts == 0 {
            return Err(invalid("retry.max_attempts must be >= 1"));
        }
        if let Some(b) = self.budget.gpu_seconds {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid("budget.gpu_seconds must be finite and >= 0"));
            }
        }
        if !(self.budget.target_samples.is_finite() && self.budget.target_samples >= 0.0) {
            return Err(invalid("budget.target_samples must be finite and >= 0"));
        }
        let probe = MockConfig {
            costs: self.cost_model,
            ..MockConfig::default()
        };
        probe
            .validate()
            .map_err(|e| invalid(format!("cost_model: {e}")))?;
        self.mock.validate().map_err(|e| invalid(format!("mock: {e}")))?;
        super::plan::build_plan(self)?;
        Ok(())
    }

    /// Hash of everything that determines the manifest. Worker limits and backend
    /// locations only change how the work is done, so they are left out.
    pub fn identity_hash(&self) -> String {
        let mut c = self.clone();
        c.workers = WorkerConfig::default();
        c.backends = BackendConfig::default();
        c.run_id = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn run_id(&self) -> String {
        match &self.run_id {
            Some(id) => id.clone(),
            None => format!("run-{}", &self.identity_hash()[..12]),
        }
    }
}

/// Sets `a.b.c = value` in the document. The value is read as a TOML value when it
/// parses as one and as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), PipelineError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let path: Vec<&str> = key.split('.').collect();
    if key.is_empty() || path.iter().any(|p| p.is_empty()) {
        return Err(invalid(format!("override key {key:?} is malformed")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("nonempty");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("override key {key:?}: {p} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

//! Stage-wave executor.
//!
//! Stages run one at a time in plan order. Within a stage, per-asset jobs fan out to
//! a thread pool and a single coordinator appends their records in asset order, so
//! the journal bytes do not depend on the worker count or on completion order.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::Serialize;

use crate::backends::analysis::{encode_features, track_grid};
use crate::backends::client::{BackendClient, BackendError, GenerateInputs};
use crate::backends::media::MediaStore;
use crate::backends::protocol::{BackendKind, Category, MediaKind, MediaRef, OutputValue};
use crate::curation::{accept, Decision};
use crate::digest::{ContentDigest, KeyedHash};
use crate::filtering::{
    cosine_similarity, dedup, motion_filter, motion_score, FeatureVector, FilterReason,
};
use crate::manifest_store::{
    AssetPayload, AssetState, CostPayload, Entry, JobStatus, Journal, LineageEntry,
    ManifestState, Payload, PublishPayload, RejectPayload, RejectReason, StageResultPayload,
    Triplet,
};
use crate::media_io::{select_keyframe, standardize};
use crate::stage::Stage;

use super::config::PipelineConfig;
use super::ledger::exact_sum;
use super::plan::StagePlan;
use super::synth::SourceAsset;
use super::PipelineError;

/// Everything a run needs besides the journal.
#[derive(Clone)]
pub struct RunContext {
    pub config: PipelineConfig,
    pub plan: StagePlan,
    pub client: BackendClient,
    pub store: MediaStore,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecOptions {
    /// Stop after this stage's wave as if the process had been killed there.
    pub halt_after: Option<Stage>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Complete,
    /// Finished, but some jobs FAILED.
    Partial,
    BudgetExceeded,
    Halted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub assets: usize,
    pub published: usize,
    pub rejected: usize,
    /// Assets with at least one FAILED job.
    pub failed: usize,
    pub skipped_jobs: usize,
    /// Jobs executed by this invocation.
    pub dispatched: usize,
    pub gpu_seconds: f64,
    pub journal_records: u64,
    pub manifest_digest: ContentDigest,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Complete => 0,
            RunStatus::Partial | RunStatus::Halted => 2,
            RunStatus::BudgetExceeded => 3,
        }
    }
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "status          {:?}", self.status)?;
        writeln!(f, "assets          {}", self.assets)?;
        writeln!(f, "published       {}", self.published)?;
        writeln!(f, "rejected        {}", self.rejected)?;
        writeln!(f, "failed          {}", self.failed)?;
        writeln!(f, "skipped jobs    {}", self.skipped_jobs)?;
        writeln!(f, "dispatched jobs {}", self.dispatched)?;
        writeln!(f, "gpu_seconds     {:.3}", self.gpu_seconds)?;
        writeln!(f, "records         {}", self.journal_records)?;
        write!(f, "manifest        {}", self.manifest_digest)
    }
}

pub fn summarize(
    state: &ManifestState,
    journal: &Journal,
    status: RunStatus,
    dispatched: usize,
) -> Result<RunSummary, PipelineError> {
    let failed = state
        .assets
        .values()
        .filter(|a| a.stages.values().any(|r| r.status == JobStatus::Failed))
        .count();
    let skipped_jobs = state
        .assets
        .values()
        .flat_map(|a| a.stages.values())
        .filter(|r| r.status == JobStatus::Skipped)
        .count();
    let status = match status {
        RunStatus::Complete if failed > 0 => RunStatus::Partial,
        s => s,
    };
    Ok(RunSummary {
        status,
        assets: state.order.len(),
        published: state.published().count(),
        rejected: state.rejected().count(),
        failed,
        skipped_jobs,
        dispatched,
        gpu_seconds: exact_sum(state.costs.iter().map(|c| c.gpu_seconds)),
        journal_records: state.next_seq,
        manifest_digest: journal.digest()?,
    })
}

/// Seed for one (stage, asset) job; attempts share it.
pub fn job_seed(run_seed: u64, stage: Stage, asset_id: &str) -> u64 {
    KeyedHash::new("ditto.pipeline.job")
        .u64(run_seed)
        .str(stage.as_str())
        .str(asset_id)
        .words()[0]
}

pub fn request_id(stage: Stage, asset_id: &str, attempt: u32) -> String {
    format!("{stage}/{asset_id}/{attempt}")
}

pub fn backend_kind(stage: Stage) -> Option<BackendKind> {
    Some(match stage {
        Stage::Caption => BackendKind::Caption,
        Stage::Instruct => BackendKind::Instruct,
        Stage::KeyframeEdit => BackendKind::EditImage,
        Stage::Depth => BackendKind::Depth,
        Stage::Generate => BackendKind::Generate,
        Stage::Curate => BackendKind::Judge,
        Stage::Enhance => BackendKind::Enhance,
        _ => return None,
    })
}

fn local_model(stage: Stage) -> String {
    format!("ditto-{}", stage.as_str().to_ascii_lowercase().replace('_', "-"))
}

#[derive(Debug)]
enum JobError {
    Backend(BackendError),
    Local(String),
}

impl<E: Into<PipelineError>> From<E> for JobError {
    fn from(e: E) -> Self {
        JobError::Local(e.into().to_string())
    }
}

impl std::fmt::Display for JobError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JobError::Backend(e) => e.fmt(f),
            JobError::Local(s) => f.write_str(s),
        }
    }
}

/// What a successful attempt produced.
struct Work {
    outputs: BTreeMap<String, OutputValue>,
    model_id: String,
    request_id: String,
    gpu_seconds: Option<f64>,
    extra: Option<Payload>,
}

impl Work {
    fn local(stage: Stage, asset_id: &str) -> Self {
        Self {
            outputs: BTreeMap::new(),
            model_id: local_model(stage),
            request_id: request_id(stage, asset_id, 1),
            gpu_seconds: None,
            extra: None,
        }
    }

    fn remote<T>(reply: &crate::backends::client::Reply<T>) -> Self {
        Self {
            outputs: BTreeMap::new(),
            model_id: reply.model_id.clone(),
            request_id: reply.request_id.clone(),
            gpu_seconds: Some(reply.gpu_seconds),
            extra: None,
        }
    }

    fn out(mut self, name: &str, v: OutputValue) -> Self {
        self.outputs.insert(name.to_string(), v);
        self
    }
}

enum JobOutcome {
    Entries(Vec<Entry>),
    Unavailable(BackendError),
}

fn stage_result(
    stage: Stage,
    status: JobStatus,
    attempts: u32,
    lineage: Option<LineageEntry>,
    outputs: BTreeMap<String, OutputValue>,
    error: Option<String>,
) -> Payload {
    Payload::StageResult(StageResultPayload {
        stage,
        status,
        attempts,
        lineage,
        outputs,
        error,
    })
}

fn done_entries(stage: Stage, asset_id: &str, seed: u64, attempts: u32, w: Work) -> Vec<Entry> {
    let lineage = LineageEntry {
        stage,
        request_id: w.request_id.clone(),
        model_id: w.model_id.clone(),
        seed,
    };
    let mut v = vec![Entry::new(
        asset_id,
        stage_result(stage, JobStatus::Done, attempts, Some(lineage), w.outputs, None),
    )];
    if let Some(g) = w.gpu_seconds {
        v.push(Entry::new(
            asset_id,
            Payload::Cost(CostPayload {
                stage,
                gpu_seconds: g,
                model_id: w.model_id,
                request_id: w.request_id,
            }),
        ));
    }
    if let Some(p) = w.extra {
        v.push(Entry::new(asset_id, p));
    }
    v
}

fn skipped_entry(stage: Stage, asset_id: &str, reason: String) -> Entry {
    Entry::new(
        asset_id,
        stage_result(stage, JobStatus::Skipped, 0, None, BTreeMap::new(), Some(reason)),
    )
}

fn out_media(a: &AssetState, stage: Stage, name: &str) -> Result<MediaRef, JobError> {
    match a.stages.get(&stage).and_then(|r| r.outputs.get(name)) {
        Some(OutputValue::Media(m)) => Ok(m.clone()),
        _ => Err(JobError::Local(format!("{stage} has no media output {name:?}"))),
    }
}

fn out_text(a: &AssetState, stage: Stage, name: &str) -> Result<String, JobError> {
    match a.stages.get(&stage).and_then(|r| r.outputs.get(name)) {
        Some(OutputValue::Text(t)) => Ok(t.clone()),
        _ => Err(JobError::Local(format!("{stage} has no text output {name:?}"))),
    }
}

impl RunContext {
    fn attempt(&self, stage: Stage, a: &AssetState, id: &str, seed: u64, rid: &str) -> Result<Work, JobError> {
        let cfg = &self.config;
        let c = &self.client;
        let be = JobError::Backend;
        let video = || out_media(a, Stage::Standardize, "video");
        let instruction = || out_text(a, Stage::Instruct, "instruction");
        Ok(match stage {
            Stage::Standardize => {
                let src = self.store.get(&a.asset.source)?;
                let std = standardize(&src, &cfg.standardize)?;
                let m = self.store.put(&std, MediaKind::Video)?;
                Work::local(stage, id).out("video", OutputValue::Media(m))
            }
            Stage::Caption => {
                let r = c.caption(rid, &video()?, seed).map_err(be)?;
                Work::remote(&r).out("caption", OutputValue::Text(r.value.clone()))
            }
            Stage::Instruct => {
                let caption = out_text(a, Stage::Caption, "caption")?;
                let r = c
                    .instruct(rid, &video()?, &caption, seed, cfg.instruct.global_weight)
                    .map_err(be)?;
                let (text, category) = r.value.clone();
                Work::remote(&r)
                    .out("instruction", OutputValue::Text(text))
                    .out("category", OutputValue::Text(category.as_str().into()))
            }
            Stage::KeyframeEdit => {
                let v = self.store.get(&video()?)?;
                let index = select_keyframe(v.header().frame_count, cfg.keyframe.policy);
                let frame = self.store.put(&v.extract_frame(index)?, MediaKind::Image)?;
                let r = c.edit_image(rid, &frame, &instruction()?, seed).map_err(be)?;
                Work::remote(&r)
                    .out("keyframe", OutputValue::Media(frame))
                    .out("edited_keyframe", OutputValue::Media(r.value.clone()))
            }
            Stage::Depth => {
                let r = c.predict_depth(rid, &video()?, seed).map_err(be)?;
                Work::remote(&r).out("depth_video", OutputValue::Media(r.value.clone()))
            }
            Stage::Generate => {
                let depth = out_media(a, Stage::Depth, "depth_video")?;
                let key = out_media(a, Stage::KeyframeEdit, "edited_keyframe")?;
                let text = instruction()?;
                let inputs = GenerateInputs {
                    depth_video: Some(&depth),
                    edited_keyframe: Some(&key),
                    instruction: &text,
                };
                let r = c
                    .generate_video(rid, inputs, seed, cfg.generate.distilled)
                    .map_err(be)?;
                Work::remote(&r).out("edited_video", OutputValue::Media(r.value.clone()))
            }
            Stage::Curate => {
                let edited = out_media(a, Stage::Generate, "edited_video")?;
                let r = c
                    .judge(rid, &video()?, &edited, &instruction()?, seed)
                    .map_err(be)?;
                let mut w = Work::remote(&r).out("scores", OutputValue::Scores(r.value));
                if let Decision::Reject(failed) = accept(&r.value, &cfg.curation) {
                    w.extra = Some(Payload::Reject(RejectPayload {
                        stage,
                        reason: RejectReason::Judge {
                            failed,
                            scores: r.value,
                        },
                    }));
                }
                w
            }
            Stage::Enhance => {
                let edited = out_media(a, Stage::Generate, "edited_video")?;
                let r = c
                    .enhance(rid, &edited, cfg.enhance.noise_sigma, cfg.enhance.steps, seed)
                    .map_err(be)?;
                let (m, prov) = r.value.clone();
                Work::remote(&r)
                    .out("video", OutputValue::Media(m))
                    .out("provenance", OutputValue::Text(prov))
            }
            Stage::Publish => self.publish(a, id, seed)?,
            Stage::Ingest | Stage::Dedup | Stage::MotionFilter => {
                return Err(JobError::Local(format!("{stage} is not a per-asset stage")))
            }
        })
    }

    fn publish(&self, a: &AssetState, id: &str, seed: u64) -> Result<Work, JobError> {
        let edited = if self.plan.contains(Stage::Enhance) {
            out_media(a, Stage::Enhance, "video")?
        } else {
            out_media(a, Stage::Generate, "edited_video")?
        };
        let scores = match a.stages.get(&Stage::Curate).and_then(|r| r.outputs.get("scores")) {
            Some(OutputValue::Scores(s)) => *s,
            _ => return Err(JobError::Local("CURATE has no scores".into())),
        };
        let category: Category = out_text(a, Stage::Instruct, "category")?
            .parse()
            .map_err(|e: crate::backends::protocol::ProtocolError| JobError::Local(e.to_string()))?;
        let w = Work::local(Stage::Publish, id);
        let mut lineage: Vec<LineageEntry> = self
            .plan
            .order()
            .iter()
            .filter_map(|s| a.stages.get(s).and_then(|r| r.lineage.clone()))
            .collect();
        lineage.push(LineageEntry {
            stage: Stage::Publish,
            request_id: w.request_id.clone(),
            model_id: w.model_id.clone(),
            seed,
        });
        let triplet = Triplet {
            source: out_media(a, Stage::Standardize, "video")?,
            instruction: out_text(a, Stage::Instruct, "instruction")?,
            category,
            edited_format: self.store.header(&edited)?,
            edited: edited.clone(),
            judge_scores: scores,
            lineage,
        };
        let mut w = w.out("edited", OutputValue::Media(edited));
        w.extra = Some(Payload::Publish(PublishPayload { triplet }));
        Ok(w)
    }

    /// Runs one job with retries.
    fn run_job(&self, stage: Stage, a: &AssetState, id: &str) -> JobOutcome {
        let seed = job_seed(self.config.seed, stage, id);
        let retry = &self.config.retry;
        let mut attempt = 1;
        loop {
            let rid = request_id(stage, id, attempt);
            let err = match self.attempt(stage, a, id, seed, &rid) {
                Ok(w) => return JobOutcome::Entries(done_entries(stage, id, seed, attempt, w)),
                Err(e) => e,
            };
            let retryable = matches!(&err, JobError::Backend(e) if e.is_retryable());
            if retryable && attempt < retry.max_attempts {
                let ms = retry.backoff_ms(attempt);
                if ms > 0 {
                    std::thread::sleep(Duration::from_millis(ms));
                }
                attempt += 1;
                continue;
            }
            if let JobError::Backend(e) = err {
                if e.is_unreachable() {
                    return JobOutcome::Unavailable(e);
                }
                return JobOutcome::Entries(vec![failed_entry(stage, id, attempt, e.to_string())]);
            }
            return JobOutcome::Entries(vec![failed_entry(stage, id, attempt, err.to_string())]);
        }
    }
}

fn failed_entry(stage: Stage, id: &str, attempts: u32, error: String) -> Entry {
    Entry::new(
        id,
        stage_result(stage, JobStatus::Failed, attempts, None, BTreeMap::new(), Some(error)),
    )
}

/// Maps `work` over `items` on up to `threads` threads and hands results to `sink`
/// in item order. Once `sink` returns false no further items are started and the
/// remaining results are dropped.
fn run_ordered<T, R, W, S>(items: &[T], threads: usize, work: W, mut sink: S)
where
    T: Sync,
    R: Send,
    W: Fn(&T) -> R + Sync,
    S: FnMut(usize, R) -> bool,
{
    if threads <= 1 || items.len() <= 1 {
        for (i, item) in items.iter().enumerate() {
            if !sink(i, work(item)) {
                return;
            }
        }
        return;
    }
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, R)>();
        for _ in 0..threads.min(items.len()) {
            let tx = tx.clone();
            let (next, stop, work) = (&next, &stop, &work);
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                if tx.send((i, work(&items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending: BTreeMap<usize, R> = BTreeMap::new();
        let mut emit = 0;
        let mut open = true;
        for (i, r) in rx {
            if !open {
                continue;
            }
            pending.insert(i, r);
            while let Some(r) = pending.remove(&emit) {
                if !sink(emit, r) {
                    open = false;
                    stop.store(true, Ordering::SeqCst);
                    pending.clear();
                    break;
                }
                emit += 1;
            }
        }
    });
}

enum Plan {
    Dispatch,
    Skip(String),
}

/// Assets with no result at `stage` whose parents are all terminal, in order.
fn wave(plan: &StagePlan, state: &ManifestState, stage: Stage) -> Vec<(String, Plan)> {
    state
        .assets_in_order()
        .filter(|(_, a)| a.rejected.is_none() && a.published.is_none())
        .filter(|(_, a)| !a.stages.contains_key(&stage))
        .filter_map(|(id, a)| {
            let mut blocked = None;
            for p in plan.parents(stage) {
                match a.status(p) {
                    Some(JobStatus::Done) => {}
                    Some(_) => {
                        blocked.get_or_insert_with(|| format!("{p} did not complete"));
                    }
                    None => return None,
                }
            }
            Some((
                id.to_string(),
                match blocked {
                    Some(why) => Plan::Skip(why),
                    None => Plan::Dispatch,
                },
            ))
        })
        .collect()
}

/// Registers any new assets, then runs every stage of the plan over the journal.
pub fn execute(
    ctx: &RunContext,
    journal: &mut Journal,
    assets: &[SourceAsset],
    opts: ExecOptions,
) -> Result<RunSummary, PipelineError> {
    let mut dispatched = 0;
    let status = run_stages(ctx, journal, assets, opts, &mut dispatched)?;
    summarize(journal.state(), journal, status, dispatched)
}

fn run_stages(
    ctx: &RunContext,
    journal: &mut Journal,
    assets: &[SourceAsset],
    opts: ExecOptions,
    dispatched: &mut usize,
) -> Result<RunStatus, PipelineError> {
    for (ordinal, asset) in assets.iter().enumerate() {
        if let Some(known) = journal.state().asset(&asset.asset_id) {
            if known.asset.source != asset.source {
                return Err(PipelineError::ConfigMismatch(format!(
                    "{} was registered with different content",
                    asset.asset_id
                )));
            }
            continue;
        }
        let id = asset.asset_id.as_str();
        let w = Work::local(Stage::Ingest, id);
        let lineage = LineageEntry {
            stage: Stage::Ingest,
            request_id: w.request_id,
            model_id: w.model_id,
            seed: job_seed(ctx.config.seed, Stage::Ingest, id),
        };
        journal.append_batch(vec![
            Entry::new(
                id,
                Payload::Asset(AssetPayload {
                    ordinal: ordinal as u64,
                    source: asset.source.clone(),
                    header: asset.header,
                    origin: asset.origin.clone(),
                }),
            ),
            Entry::new(
                id,
                stage_result(
                    Stage::Ingest,
                    JobStatus::Done,
                    1,
                    Some(lineage),
                    BTreeMap::from([("source".to_string(), OutputValue::Media(asset.source.clone()))]),
                    None,
                ),
            ),
        ])?;
        *dispatched += 1;
    }
    if opts.halt_after == Some(Stage::Ingest) {
        return Ok(RunStatus::Halted);
    }

    for &stage in ctx.plan.order() {
        if stage == Stage::Ingest {
            continue;
        }
        let items = wave(&ctx.plan, journal.state(), stage);
        let outcome = if stage.is_barrier() {
            run_barrier(ctx, journal, stage, items, dispatched)?
        } else {
            run_per_asset(ctx, journal, stage, items, dispatched)?
        };
        if let Some(status) = outcome {
            return Ok(status);
        }
        if opts.halt_after == Some(stage) {
            return Ok(RunStatus::Halted);
        }
    }
    Ok(RunStatus::Complete)
}

fn run_per_asset(
    ctx: &RunContext,
    journal: &mut Journal,
    stage: Stage,
    items: Vec<(String, Plan)>,
    dispatched: &mut usize,
) -> Result<Option<RunStatus>, PipelineError> {
    let kind = backend_kind(stage);
    let mut over_budget = false;
    let mut items = items;
    if let (Some(kind), Some(budget)) = (kind, ctx.config.budget.gpu_seconds) {
        let estimate = ctx
            .config
            .cost_model
            .for_kind(kind, ctx.config.generate.distilled);
        let mut committed: Vec<f64> = journal.state().costs.iter().map(|c| c.gpu_seconds).collect();
        let cut = items.iter().position(|(_, p)| {
            if matches!(p, Plan::Skip(_)) {
                return false;
            }
            committed.push(estimate);
            exact_sum(committed.iter().copied()) > budget
        });
        if let Some(cut) = cut {
            items.truncate(cut);
            over_budget = true;
        }
    }

    let jobs: Vec<(String, Plan, AssetState)> = items
        .into_iter()
        .map(|(id, p)| {
            let a = journal.state().assets[&id].clone();
            (id, p, a)
        })
        .collect();
    let threads = match kind {
        Some(_) => ctx.config.workers.workers.min(ctx.config.workers.per_kind),
        None => ctx.config.workers.workers,
    };
    let mut failure: Option<PipelineError> = None;
    run_ordered(
        &jobs,
        threads,
        |(id, p, a)| match p {
            Plan::Dispatch => ctx.run_job(stage, a, id),
            Plan::Skip(why) => JobOutcome::Entries(vec![skipped_entry(stage, id, why.clone())]),
        },
        |i, outcome| {
            match outcome {
                JobOutcome::Entries(entries) => {
                    if matches!(jobs[i].1, Plan::Dispatch) {
                        *dispatched += 1;
                    }
                    if let Err(e) = journal.append_batch(entries) {
                        failure = Some(e.into());
                        return false;
                    }
                }
                JobOutcome::Unavailable(e) => {
                    failure = Some(PipelineError::BackendUnavailable(e.to_string()));
                    return false;
                }
            }
            true
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(over_budget.then_some(RunStatus::BudgetExceeded))
}

/// Batch-wide filters. Every decision of the stage is appended in one batch.
fn run_barrier(
    ctx: &RunContext,
    journal: &mut Journal,
    stage: Stage,
    items: Vec<(String, Plan)>,
    dispatched: &mut usize,
) -> Result<Option<RunStatus>, PipelineError> {
    if items.is_empty() {
        return Ok(None);
    }
    let cfg = &ctx.config.filter;
    let sources: Vec<(String, Option<MediaRef>)> = items
        .iter()
        .map(|(id, p)| {
            let src = match p {
                Plan::Dispatch => Some(journal.state().assets[id].asset.source.clone()),
                Plan::Skip(_) => None,
            };
            (id.clone(), src)
        })
        .collect();

    // Per-asset measurement: feature vector for DEDUP, motion score otherwise.
    let mut measured: Vec<Option<Result<Vec<f64>, String>>> = Vec::with_capacity(sources.len());
    run_ordered(
        &sources,
        ctx.config.workers.workers,
        |(_, src)| {
            src.as_ref().map(|m| -> Result<Vec<f64>, String> {
                let v = ctx.store.get(m).map_err(|e| e.to_string())?;
                if stage == Stage::Dedup {
                    encode_features(&v, cfg.feature_dim).map_err(|e| e.to_string())
                } else {
                    let ts = track_grid(&v, cfg.grid, cfg.search_radius).map_err(|e| e.to_string())?;
                    Ok(vec![motion_score(&ts).map_err(|e| e.to_string())?])
                }
            })
        },
        |_, r| {
            measured.push(r);
            true
        },
    );

    let mut ok_ids = Vec::new();
    let mut vectors = Vec::new();
    let mut scores = Vec::new();
    let mut errors: HashMap<usize, String> = HashMap::new();
    for (i, m) in measured.iter().enumerate() {
        match m {
            Some(Ok(v)) => {
                let id = sources[i].0.clone();
                if stage == Stage::Dedup {
                    match FeatureVector::new(id.clone(), v.clone()) {
                        Ok(fv) => {
                            vectors.push(fv);
                            ok_ids.push(i);
                        }
                        Err(e) => {
                            errors.insert(i, e.to_string());
                        }
                    }
                } else {
                    scores.push((id, v[0]));
                    ok_ids.push(i);
                }
            }
            Some(Err(e)) => {
                errors.insert(i, e.clone());
            }
            None => {}
        }
    }
    let decisions = if stage == Stage::Dedup {
        dedup(&vectors, cfg.similarity_threshold)?
    } else {
        motion_filter(&scores, cfg.motion_threshold)?
    };
    let by_index: HashMap<usize, &crate::filtering::FilterDecision> =
        ok_ids.iter().copied().zip(decisions.iter()).collect();

    let mut entries = Vec::new();
    for (i, (id, p)) in items.iter().enumerate() {
        if let Plan::Skip(why) = p {
            entries.push(skipped_entry(stage, id, why.clone()));
            continue;
        }
        *dispatched += 1;
        if let Some(e) = errors.get(&i) {
            entries.push(failed_entry(stage, id, 1, e.clone()));
            continue;
        }
        let d = by_index[&i];
        let mut w = Work::local(stage, id);
        match &d.reason {
            FilterReason::Kept => {}
            FilterReason::DuplicateOf {
                asset_id,
                similarity,
            } => {
                w.extra = Some(Payload::Reject(RejectPayload {
                    stage,
                    reason: RejectReason::DuplicateOf {
                        asset_id: asset_id.clone(),
                        similarity: *similarity,
                    },
                }));
            }
            FilterReason::LowMotion { score } => {
                w.extra = Some(Payload::Reject(RejectPayload {
                    stage,
                    reason: RejectReason::LowMotion { score: *score },
                }));
            }
        }
        if stage == Stage::MotionFilter {
            let score = scores.iter().find(|(s, _)| s == id).map(|(_, v)| *v).unwrap_or(0.0);
            w = w.out("motion_score", OutputValue::Text(score.to_string()));
        } else if let FilterReason::Kept = d.reason {
            let nearest = vectors
                .iter()
                .filter(|v| &v.asset_id != id)
                .filter_map(|v| {
                    let me = vectors.iter().find(|x| &x.asset_id == id)?;
                    cosine_similarity(me, v).ok()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if nearest.is_finite() {
                w = w.out("max_similarity", OutputValue::Text(nearest.to_string()));
            }
        }
        let seed = job_seed(ctx.config.seed, stage, id);
        entries.extend(done_entries(stage, id, seed, 1, w));
    }
    journal.append_batch(entries)?;
    Ok(None)
}

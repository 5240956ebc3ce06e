//! `ditto`: run, resume and inspect triplet synthesis runs.
//!
//! Exit codes: 0 success, 1 error, 2 partial (some jobs FAILED or the run was
//! halted), 3 budget exceeded, 4 corrupt journal.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ditto_core::backends::conformance::{run_in_process, run_over_http, stage_media, Outcome, VectorFile};
use ditto_core::backends::media::MediaStore;
use ditto_core::backends::mock::{MockBackend, MockConfig};
use ditto_core::backends::serve::MockServer;
use ditto_core::manifest_store::{replay, stats_composition, stats_tokens, ManifestState};
use ditto_core::pipeline::{
    budget_report, resume_run, start_run, CostLedger, ExecOptions, Home, PipelineConfig,
    PipelineError, RunSummary,
};
use ditto_core::training_math::{
    flow_matching_gradient, flow_matching_loss_with, parse_vector, scaffold_probability,
    Conditioning, CurriculumSchedule, FlowSample, Reduction, DEFAULT_TOTAL_STEPS,
    DEFAULT_WARMUP_STEPS,
};
use ditto_core::Stage;

/// `println!` that stops quietly when stdout is closed.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "ditto", version, about = "Instruction-based video editing triplet synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct HomeArg {
    /// Directory holding runs and the shared media store.
    #[arg(long, env = "DITTO_HOME", default_value = ".ditto")]
    home: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Start a run (or continue it when the same config was already started).
    Run(RunArgs),
    /// Continue an interrupted run from its journal.
    Resume(ResumeArgs),
    /// Dataset and cost statistics from a run's journal.
    Report(ReportArgs),
    /// Serve the mock backends over HTTP.
    MockServe(ServeArgs),
    /// Replay a conformance vector file in-process or against a live service.
    Conformance(ConformanceArgs),
    /// Curriculum and flow-matching calculators.
    #[command(subcommand)]
    Math(MathCommand),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    home: HomeArg,
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-key override such as `assets.count=20`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Comma-separated backend base URLs; empty means in-process mocks.
    #[arg(long, value_delimiter = ',')]
    backends: Vec<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Stop after this stage's wave (the run can be resumed).
    #[arg(long, value_name = "STAGE")]
    halt_after: Option<Stage>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ResumeArgs {
    #[command(flatten)]
    home: HomeArg,
    run_id: String,
    #[arg(long, value_delimiter = ',')]
    backends: Vec<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_name = "STAGE")]
    halt_after: Option<Stage>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Composition,
    Tokens,
    Cost,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    home: HomeArg,
    kind: ReportKind,
    /// Run whose journal to read.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    run: Option<String>,
    /// Journal file to read directly.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    /// Sample count for the cost projection; defaults to the run's budget.target_samples.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8700")]
    addr: String,
    /// Media directory shared with clients; defaults to `<home>/media`.
    #[arg(long)]
    media: Option<PathBuf>,
    #[command(flatten)]
    home: HomeArg,
    /// Mock settings as a TOML file with the `[mock]` table layout.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    threads: usize,
}

#[derive(Args)]
struct ConformanceArgs {
    vectors: PathBuf,
    /// Input media shipped with the vectors; defaults to `media/` next to the file.
    #[arg(long)]
    media: Option<PathBuf>,
    /// Base URL of a service to test; in-process mocks when absent.
    #[arg(long)]
    endpoint: Option<String>,
}

#[derive(Subcommand)]
enum MathCommand {
    /// Probability of conditioning on the visual scaffold at a training step.
    Scaffold {
        step: u64,
        #[arg(long, default_value_t = DEFAULT_WARMUP_STEPS)]
        warmup: u64,
        #[arg(long, default_value_t = DEFAULT_TOTAL_STEPS)]
        total: u64,
    },
    /// Flow-matching loss and gradient of a velocity prediction.
    Loss {
        /// Predicted velocity, comma or space separated.
        #[arg(long, allow_hyphen_values = true)]
        predicted: String,
        #[arg(long, allow_hyphen_values = true)]
        z0: String,
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        mean: bool,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn fail(message: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Resume(a) => cmd_resume(a),
        Command::Report(a) => cmd_report(a),
        Command::MockServe(a) => cmd_serve(a),
        Command::Conformance(a) => cmd_conformance(a),
        Command::Math(m) => cmd_math(m),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn print_summary(id: &str, s: &RunSummary, json: bool) -> u8 {
    if json {
        #[derive(Serialize)]
        struct Out<'a> {
            run_id: &'a str,
            #[serde(flatten)]
            summary: &'a RunSummary,
        }
        say!("{}", serde_json::to_string_pretty(&Out { run_id: id, summary: s }).expect("serializes"));
    } else {
        say!("run_id          {id}\n{s}");
    }
    s.exit_code() as u8
}

fn cmd_run(a: RunArgs) -> Result<u8, Failure> {
    let mut overrides = a.overrides;
    if let Some(seed) = a.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut config = match &a.config {
        Some(p) => PipelineConfig::load(p, &overrides)?,
        None => PipelineConfig::from_toml_with("", &overrides)?,
    };
    if !a.backends.is_empty() {
        config.backends.endpoints = a.backends;
    }
    if let Some(w) = a.workers {
        config.workers.workers = w;
    }
    config.validate()?;
    let home = Home::new(a.home.home);
    let opts = ExecOptions {
        halt_after: a.halt_after,
    };
    let (id, s) = start_run(&home, config, opts)?;
    Ok(print_summary(&id, &s, a.json))
}

fn cmd_resume(a: ResumeArgs) -> Result<u8, Failure> {
    let home = Home::new(a.home.home);
    let opts = ExecOptions {
        halt_after: a.halt_after,
    };
    let backends = a.backends;
    let workers = a.workers;
    let s = resume_run(
        &home,
        &a.run_id,
        |c| {
            if !backends.is_empty() {
                c.backends.endpoints = backends;
            }
            if let Some(w) = workers {
                c.workers.workers = w;
            }
        },
        opts,
    )?;
    Ok(print_summary(&a.run_id, &s, a.json))
}

fn cmd_report(a: ReportArgs) -> Result<u8, Failure> {
    let home = Home::new(a.home.home);
    let (state, target): (ManifestState, f64) = match (&a.run, &a.manifest) {
        (Some(id), _) => {
            let cfg = home.load_run_config(id)?;
            let state = replay(&home.journal_path(id)).map_err(PipelineError::from)?;
            (state, cfg.budget.target_samples)
        }
        (None, Some(path)) => (
            replay(path).map_err(PipelineError::from)?,
            PipelineConfig::default().budget.target_samples,
        ),
        (None, None) => return Err(fail("either --run or --manifest is required")),
    };
    let json = a.format == Format::Json;
    match a.kind {
        ReportKind::Composition => {
            let t = stats_composition(&state);
            if json {
                say!("{}", pretty(&t));
            } else {
                say!("{t}");
            }
        }
        ReportKind::Tokens => {
            let rows = stats_tokens(&state, a.top_k);
            if json {
                say!("{}", pretty(&rows));
            } else {
                say!("{:<20} {:>8}", "token", "count");
                for (tok, n) in rows {
                    say!("{tok:<20} {n:>8}");
                }
            }
        }
        ReportKind::Cost => {
            let r = budget_report(&CostLedger::from_state(&state), a.target.unwrap_or(target))
                .map_err(fail)?;
            if json {
                say!("{}", pretty(&r));
            } else {
                say!("{r}");
            }
        }
    }
    Ok(0)
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes")
}

fn cmd_serve(a: ServeArgs) -> Result<u8, Failure> {
    let mock: MockConfig = match &a.config {
        Some(p) => PipelineConfig::load(p, &[])?.mock,
        None => MockConfig::default(),
    };
    let media = a.media.unwrap_or_else(|| Home::new(a.home.home).media_dir());
    let store = MediaStore::open(&media).map_err(fail)?;
    let server = MockServer::bind(&a.addr, MockBackend::new(mock, store)).map_err(fail)?;
    say!("listening on http://{}", server.local_addr());
    let _running = server.spawn(a.threads);
    loop {
        std::thread::park();
    }
}

fn cmd_conformance(a: ConformanceArgs) -> Result<u8, Failure> {
    let file = VectorFile::load(&a.vectors).map_err(fail)?;
    let results = match &a.endpoint {
        Some(url) => run_over_http(&file, url, Duration::from_secs(30)),
        None => {
            let media = a.media.unwrap_or_else(|| {
                a.vectors
                    .parent()
                    .map(|p| p.join("media"))
                    .unwrap_or_else(|| PathBuf::from("media"))
            });
            let scratch = std::env::temp_dir().join(format!("ditto-conformance-{}", std::process::id()));
            stage_media(&media, &scratch).map_err(fail)?;
            let mock = MockBackend::new(MockConfig::default(), MediaStore::open(&scratch).map_err(fail)?);
            let r = run_in_process(&file, &mock);
            let _ = std::fs::remove_dir_all(&scratch);
            r
        }
    };
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Outcome::Pass => say!("PASS {name}"),
            other => {
                failed += 1;
                say!("FAIL {name}: {other:?}");
            }
        }
    }
    say!("{} of {} vectors passed", results.len() - failed, results.len());
    Ok(if failed == 0 { 0 } else { 1 })
}

fn cmd_math(m: MathCommand) -> Result<u8, Failure> {
    match m {
        MathCommand::Scaffold {
            step,
            warmup,
            total,
        } => {
            let s = CurriculumSchedule::new(warmup, total).map_err(fail)?;
            say!("{}", scaffold_probability(step, &s));
        }
        MathCommand::Loss {
            predicted,
            z0,
            eps,
            t,
            mean,
        } => {
            let p = parse_vector(&predicted).map_err(fail)?;
            let z0 = parse_vector(&z0).map_err(fail)?;
            let eps = parse_vector(&eps).map_err(fail)?;
            let sample = FlowSample::new(z0, eps, t, Conditioning::TextPlusScaffold).map_err(fail)?;
            let reduction = if mean { Reduction::Mean } else { Reduction::Sum };
            let loss = flow_matching_loss_with(&p, &sample, reduction).map_err(fail)?;
            let grad = flow_matching_gradient(&p, &sample).map_err(fail)?;
            say!("loss     {loss}");
            say!("target   {:?}", sample.target());
            say!("gradient {grad:?}");
        }
    }
    Ok(0)
}

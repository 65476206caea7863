//! Command-line surface. Every subcommand resolves its configuration from
//! defaults, then an optional TOML config file, then flags (flags win),
//! logs the resolved values to stderr, and exits 0 on success, 1 on a
//! runtime failure, 2 on a usage error such as a missing input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rendergate_core::classifier::{RenderNet, DESK_INPUT};
use rendergate_core::eval::{evaluate, NullClock};
use rendergate_core::nn::TrainConfig;
use rendergate_core::protocol::PayloadFormat;
use rendergate_core::scheduler::{ThrottlePolicy, VerdictSource};
use rendergate_core::segmenter::{build_dataset, pair_scores, SegmenterConfig};
use rendergate_core::sim::{exploration_suite, random_app, random_script, standard_suite};
use rendergate_core::{classifier, subseed};
use serde::Deserialize;

use crate::appconfig::{self, NamedTrace};
use crate::fsio;
use crate::pipelines::{self, bench_pipeline, exploration_pipeline, format_train_log};
use crate::stream::{serve, ServeConfig};

#[derive(Parser)]
#[command(
    name = "rendergate",
    version,
    about = "GUI rendering inference: screencast segmentation, a rendering-state classifier, and adaptive test-event scheduling over a device simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    fps: Option<u32>,
    /// Consecutive-pair similarity at or above this reads as steady.
    #[arg(long, visible_alias = "similarity-threshold", global = true)]
    threshold: Option<f64>,
    /// Steady run length that counts as fully rendered.
    #[arg(long, global = true)]
    steady_frames: Option<usize>,
    /// Adaptive wait cap before a forced dispatch.
    #[arg(long, global = true)]
    max_wait_ms: Option<u64>,
    /// Throttle policy, repeatable: fixed:<ms> or
    /// adaptive[:cnn|:consecutive|:oracle].
    #[arg(long = "policy", global = true)]
    policies: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Segment screencasts into a labeled dataset manifest.
    Segment(SegmentArgs),
    /// Generate synthetic apps, screencasts, and ground truth.
    Gen(GenArgs),
    /// Train the rendering classifier from a corpus on disk.
    Train(TrainArgs),
    /// Score a checkpoint against a corpus.
    Eval(EvalArgs),
    /// Stream a simulated app's screen over TCP until interrupted.
    Serve(ServeArgs),
    /// Replay the suite crash traces under each policy.
    Bench(BenchArgs),
    /// Random exploration per app under each policy.
    Explore(ExploreArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// One screencast directory, or a corpus root holding `casts/`.
    #[arg(long)]
    input: PathBuf,
    /// Dataset manifest destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-pair similarity scores as a TSV, for plotting.
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteKind {
    Standard,
    Exploration,
}

#[derive(Args)]
struct GenArgs {
    /// Corpus root to create (`casts/`, `apps/`).
    #[arg(long)]
    out: PathBuf,
    /// Number of random apps (ignored with --suite).
    #[arg(long, default_value_t = 12)]
    apps: usize,
    /// Use a built-in app suite instead of random apps.
    #[arg(long, value_enum)]
    suite: Option<SuiteKind>,
    /// Scripted navigation taps per screencast.
    #[arg(long, default_value_t = 4)]
    events: usize,
    /// Recording keeps rolling this long past the last tap.
    #[arg(long, default_value_t = 1200)]
    tail_ms: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus root holding `dataset.txt` and `casts/`.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint destination.
    #[arg(long)]
    out: PathBuf,
    /// Epoch log destination (stdout always gets it too).
    #[arg(long)]
    log_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    epochs: u32,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SplitKind {
    All,
    Train,
    Val,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus root holding `dataset.txt` and `casts/`.
    #[arg(long)]
    data: PathBuf,
    /// Which by-app split to score.
    #[arg(long, value_enum, default_value_t = SplitKind::All)]
    split: SplitKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// App description TOML.
    #[arg(long)]
    app: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: String,
    /// Send raw RGB payloads instead of PNG.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Classifier checkpoint backing adaptive policies.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Report destination (stdout always gets it too).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw rows as a TSV, for plotting.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExploreArgs {
    /// Classifier checkpoint backing adaptive policies.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Per-app exploration budget.
    #[arg(long, default_value_t = 60_000)]
    budget_ms: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Defaults, overlaid by the config file, overlaid by flags.
#[derive(Debug, Clone)]
struct Resolved {
    seed: u64,
    fps: u32,
    threshold: f64,
    steady_frames: usize,
    max_wait_ms: u64,
    policies: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    fps: Option<u32>,
    threshold: Option<f64>,
    steady_frames: Option<usize>,
    max_wait_ms: Option<u64>,
    policy: Option<Vec<String>>,
}

const DEFAULT_POLICIES: [&str; 4] = ["fixed:200", "fixed:500", "fixed:1000", "adaptive"];

fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let file = match &common.config {
        Some(path) => {
            require_input(path)?;
            let text = fs::read_to_string(path)?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let mut resolved = Resolved {
        seed: common.seed.or(file.seed).unwrap_or(0),
        fps: common.fps.or(file.fps).unwrap_or(30),
        threshold: common.threshold.or(file.threshold).unwrap_or(0.99),
        steady_frames: common.steady_frames.or(file.steady_frames).unwrap_or(5),
        max_wait_ms: common.max_wait_ms.or(file.max_wait_ms).unwrap_or(1000),
        policies: if common.policies.is_empty() {
            file.policy
                .unwrap_or_else(|| DEFAULT_POLICIES.iter().map(|s| (*s).to_string()).collect())
        } else {
            common.policies.clone()
        },
    };
    if resolved.fps == 0 {
        return Err(CliError::usage("fps must be positive"));
    }
    resolved.policies.dedup();
    Ok(resolved)
}

impl Resolved {
    fn segmenter(&self) -> SegmenterConfig {
        SegmenterConfig {
            similarity_threshold: self.threshold,
            steady_min_frames: self.steady_frames,
            rng_seed: self.seed,
            ..SegmenterConfig::default()
        }
    }

    fn log(&self) {
        eprintln!(
            "config: seed={} fps={} threshold={} steady-frames={} max-wait-ms={} policies={}",
            self.seed,
            self.fps,
            self.threshold,
            self.steady_frames,
            self.max_wait_ms,
            self.policies.join(",")
        );
    }
}

fn require_input(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!("missing input: {}", path.display())));
    }
    Ok(())
}

fn parse_policy(
    spec: &str,
    cfg: &Resolved,
    model: Option<&RenderNet>,
) -> Result<ThrottlePolicy, CliError> {
    if let Some(ms) = spec.strip_prefix("fixed:") {
        let interval: u64 = ms
            .parse()
            .map_err(|_| CliError::usage(format!("bad interval in policy {spec:?}")))?;
        if interval == 0 {
            return Err(CliError::usage(format!("policy {spec:?} needs a positive interval")));
        }
        return Ok(ThrottlePolicy::fixed(interval));
    }
    let adaptive = |source| ThrottlePolicy::Adaptive { max_wait_ms: cfg.max_wait_ms, source };
    match spec {
        "adaptive" => Ok(adaptive(match model {
            Some(m) => VerdictSource::Cnn(m.clone()),
            None => VerdictSource::Heuristic(cfg.segmenter()),
        })),
        "adaptive:cnn" => match model {
            Some(m) => Ok(adaptive(VerdictSource::Cnn(m.clone()))),
            None => Err(CliError::usage("policy adaptive:cnn needs --checkpoint")),
        },
        "adaptive:consecutive" => Ok(adaptive(VerdictSource::Heuristic(cfg.segmenter()))),
        "adaptive:oracle" => Ok(adaptive(VerdictSource::GroundTruth)),
        _ => Err(CliError::usage(format!(
            "unknown policy {spec:?}; want fixed:<ms> or adaptive[:cnn|:consecutive|:oracle]"
        ))),
    }
}

fn parse_policies(
    cfg: &Resolved,
    model: Option<&RenderNet>,
) -> Result<Vec<ThrottlePolicy>, CliError> {
    cfg.policies.iter().map(|s| parse_policy(s, cfg, model)).collect()
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    if let Some(path) = out {
        fs::write(path, text)?;
    }
    print!("{text}");
    Ok(())
}

fn load_model(path: Option<&Path>) -> Result<Option<RenderNet>, CliError> {
    match path {
        Some(p) => {
            require_input(p)?;
            Ok(Some(fsio::load_checkpoint(p)?))
        }
        None => Ok(None),
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = execute(&cli);
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    cfg.log();
    match &cli.cmd {
        Cmd::Segment(args) => cmd_segment(args, &cfg),
        Cmd::Gen(args) => cmd_gen(args, &cfg),
        Cmd::Train(args) => cmd_train(args, &cfg),
        Cmd::Eval(args) => cmd_eval(args, &cfg),
        Cmd::Serve(args) => cmd_serve(args, &cfg),
        Cmd::Bench(args) => cmd_bench(args, &cfg),
        Cmd::Explore(args) => cmd_explore(args, &cfg),
    }
}

fn cmd_segment(args: &SegmentArgs, cfg: &Resolved) -> Result<(), CliError> {
    require_input(&args.input)?;
    let casts = if args.input.join(fsio::CAST_MANIFEST).exists() {
        vec![fsio::load_screencast(&args.input)?.0]
    } else if args.input.join(fsio::CASTS_DIR).exists() {
        fsio::list_casts(&args.input)?
            .iter()
            .map(|dir| Ok(fsio::load_screencast(dir)?.0))
            .collect::<Result<Vec<_>, CliError>>()?
    } else {
        return Err(CliError::usage(format!(
            "missing input: {} holds neither {} nor {}/",
            args.input.display(),
            fsio::CAST_MANIFEST,
            fsio::CASTS_DIR
        )));
    };

    let dataset = build_dataset(&casts, &cfg.segmenter())?;
    if let Some(path) = &args.scores_out {
        let mut tsv = String::from("cast\tpair\tssim\n");
        for cast in &casts {
            for (i, s) in pair_scores(&cast.frames)?.iter().enumerate() {
                let _ = writeln!(tsv, "{}\t{i}\t{s:.6}", cast.id);
            }
        }
        fs::write(path, tsv)?;
    }
    match &args.out {
        Some(path) => {
            fsio::save_dataset(path, &dataset)?;
            println!(
                "wrote {} entries from {} screencasts to {}",
                dataset.entries.len(),
                casts.len(),
                path.display()
            );
        }
        None => print!("{}", dataset.manifest()),
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs, cfg: &Resolved) -> Result<(), CliError> {
    let apps_with_traces: Vec<(rendergate_core::sim::AppModel, Vec<NamedTrace>)> =
        match args.suite {
            Some(SuiteKind::Standard) => standard_suite()
                .into_iter()
                .map(|sa| {
                    let trace = NamedTrace { name: format!("{}-crash", sa.app.id), steps: sa.trace };
                    (sa.app, vec![trace])
                })
                .collect(),
            Some(SuiteKind::Exploration) => {
                exploration_suite(cfg.seed).into_iter().map(|app| (app, Vec::new())).collect()
            }
            None => (0..args.apps)
                .map(|i| (random_app(cfg.seed, &format!("app{i:02}")), Vec::new()))
                .collect(),
        };

    let apps_dir = args.out.join(fsio::APPS_DIR);
    fs::create_dir_all(&apps_dir)?;
    let mut n_casts = 0usize;
    for (app, traces) in &apps_with_traces {
        appconfig::save_app(&apps_dir.join(format!("{}.toml", app.id)), app, traces)?;
        let script = random_script(app, cfg.seed, args.events);
        let cast_id = format!("{}--0", app.id);
        let generated = rendergate_core::sim::generate_screencast(
            app,
            &cast_id,
            &script,
            cfg.fps,
            args.tail_ms,
        )?;
        fsio::save_screencast(
            &args.out.join(fsio::CASTS_DIR).join(&cast_id),
            &generated.cast,
            Some(&generated.gt),
        )?;
        n_casts += 1;
    }
    println!(
        "generated {} apps, {} screencasts under {}",
        apps_with_traces.len(),
        n_casts,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs, cfg: &Resolved) -> Result<(), CliError> {
    let manifest = args.data.join(fsio::DATASET_FILE);
    require_input(&args.data)?;
    require_input(&manifest)?;
    let dataset = fsio::load_dataset(&manifest)?;
    let examples = fsio::load_examples(&args.data, &dataset, DESK_INPUT)?;
    let (train_set, val_set, test_set) = classifier::split_by_app(examples, cfg.seed)?;

    let train_cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        base_lr: args.lr,
        rng_seed: cfg.seed,
        ..TrainConfig::default()
    };
    let mut model = RenderNet::desk();
    model.init(subseed(cfg.seed, "model-init"));
    let outcome = classifier::train(model, &train_set, &val_set, &train_cfg)?;

    let mut log = format_train_log(&outcome);
    if !test_set.is_empty() {
        let test = evaluate(&outcome.model, &test_set, &NullClock, args.batch_size)?;
        let _ = writeln!(log, "test  p {:.4}  r {:.4}  f1 {:.4}", test.precision, test.recall, test.f1);
    }
    fsio::save_checkpoint(&args.out, &outcome.model)?;
    if let Some(path) = &args.log_out {
        fs::write(path, &log)?;
    }
    print!("{log}");
    println!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs, cfg: &Resolved) -> Result<(), CliError> {
    require_input(&args.checkpoint)?;
    require_input(&args.data.join(fsio::DATASET_FILE))?;
    let model = fsio::load_checkpoint(&args.checkpoint)?;
    let dataset = fsio::load_dataset(&args.data.join(fsio::DATASET_FILE))?;
    let examples = fsio::load_examples(&args.data, &dataset, DESK_INPUT)?;
    let examples = match args.split {
        SplitKind::All => examples,
        split => {
            let (train_set, val_set, test_set) = classifier::split_by_app(examples, cfg.seed)?;
            match split {
                SplitKind::Train => train_set,
                SplitKind::Val => val_set,
                SplitKind::Test => test_set,
                SplitKind::All => unreachable!(),
            }
        }
    };
    let report = evaluate(&model, &examples, &crate::clock::StdClock::new(), 32)?;
    write_or_print(args.out.as_deref(), &report.table())
}

fn cmd_serve(args: &ServeArgs, cfg: &Resolved) -> Result<(), CliError> {
    require_input(&args.app)?;
    let (app, _) = appconfig::load_app(&args.app)?;
    let format = if args.raw { PayloadFormat::RawRgb } else { PayloadFormat::Png };
    let server = serve(app, args.addr.as_str(), ServeConfig { fps: cfg.fps, format })?;
    println!("serving on {} at {} fps ({:?} payloads)", server.addr(), cfg.fps, format);
    server.wait();
    Ok(())
}

fn cmd_bench(args: &BenchArgs, cfg: &Resolved) -> Result<(), CliError> {
    let model = load_model(args.checkpoint.as_deref())?;
    let policies = parse_policies(cfg, model.as_ref())?;
    let outcome = bench_pipeline(&policies, u64::from(cfg.fps))?;
    if let Some(path) = &args.plot_out {
        fs::write(path, pipelines::bench_tsv(&outcome.rows))?;
    }
    write_or_print(args.out.as_deref(), &outcome.report)
}

fn cmd_explore(args: &ExploreArgs, cfg: &Resolved) -> Result<(), CliError> {
    let model = load_model(args.checkpoint.as_deref())?;
    let policies = parse_policies(cfg, model.as_ref())?;
    let outcome = exploration_pipeline(&policies, cfg.seed, u64::from(cfg.fps), args.budget_ms)?;
    if let Some(path) = &args.plot_out {
        fs::write(path, pipelines::exploration_tsv(&outcome.rows))?;
    }
    write_or_print(args.out.as_deref(), &outcome.report)
}

//! End-to-end drivers shared by the CLI and the benchmark suites: corpus
//! generation, classifier training with a held-out evaluation, trace
//! replay across throttle policies, and budgeted exploration. Reports are
//! pure functions of config and seed so a rerun reproduces them byte for
//! byte.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rendergate_core::classifier::{
    preprocess, split_by_app, train, ClassifierError, RenderNet, TrainExample, TrainOutcome,
    DESK_INPUT,
};
use rendergate_core::eval::{evaluate, EvalError, EvalReport, NullClock};
use rendergate_core::nn::TrainConfig;
use rendergate_core::scheduler::{
    bench_report, exploration_report, run_exploration, run_trace, BenchRow, ExplorationRow,
    SchedulerError, ThrottlePolicy,
};
use rendergate_core::segmenter::{
    build_dataset, LabeledDataset, Screencast, SegmenterConfig, SegmenterError,
};
use rendergate_core::sim::{
    exploration_suite, generate_screencast, random_app, random_script, GeneratedScreencast,
    SimError,
};
use thiserror::Error;

use crate::fsio::app_id_of_cast;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sim: {0}")]
    Sim(#[from] SimError),
    #[error("segmenter: {0}")]
    Segmenter(#[from] SegmenterError),
    #[error("classifier: {0}")]
    Classifier(#[from] ClassifierError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error("scheduler: {0}")]
    Scheduler(#[from] SchedulerError),
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub apps: usize,
    pub seed: u64,
    pub fps: u32,
    /// Scripted navigation taps per screencast.
    pub events_per_app: usize,
    /// Recording continues this long past the last tap.
    pub tail_ms: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { apps: 64, seed: 0, fps: 30, events_per_app: 4, tail_ms: 1200 }
    }
}

/// One screencast per generated app, ids `app00--0`, `app01--0`, ...
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Vec<GeneratedScreencast>, SimError> {
    (0..cfg.apps)
        .map(|i| {
            let id = format!("app{i:02}");
            let app = random_app(cfg.seed, &id);
            let script = random_script(&app, cfg.seed, cfg.events_per_app);
            generate_screencast(&app, &format!("{id}--0"), &script, cfg.fps, cfg.tail_ms)
        })
        .collect()
}

/// Segment screencasts into a labeled dataset and preprocess every entry
/// into a training example at the given input resolution.
pub fn dataset_and_examples(
    casts: &[Screencast],
    seg: &SegmenterConfig,
    input_hw: (usize, usize),
) -> Result<(LabeledDataset, Vec<TrainExample>), SegmenterError> {
    let dataset = build_dataset(casts, seg)?;
    let by_id: BTreeMap<&str, &Screencast> = casts.iter().map(|c| (c.id.as_str(), c)).collect();
    let (h, w) = input_hw;
    let examples = dataset
        .entries
        .iter()
        .map(|e| {
            // build_dataset only emits in-range indices for its own casts
            let cast = by_id[e.screencast_id.as_str()];
            TrainExample {
                input: preprocess(&cast.frames[e.frame_index], h, w),
                label: e.label,
                app_id: app_id_of_cast(&e.screencast_id).to_owned(),
            }
        })
        .collect();
    Ok((dataset, examples))
}

#[derive(Debug, Clone)]
pub struct TrainPipelineConfig {
    pub corpus: CorpusConfig,
    pub segmenter: SegmenterConfig,
    pub train: TrainConfig,
}

impl Default for TrainPipelineConfig {
    fn default() -> Self {
        TrainPipelineConfig {
            corpus: CorpusConfig::default(),
            segmenter: SegmenterConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

pub struct TrainPipelineOutcome {
    pub report: String,
    pub model: RenderNet,
    pub dataset: LabeledDataset,
    pub test: EvalReport,
    pub best_val_f1: f64,
}

pub fn format_train_log(outcome: &TrainOutcome) -> String {
    let mut out = String::new();
    for log in &outcome.logs {
        out += &format!(
            "epoch {:>2}  lr {:.6}  loss {:.6}  val p {:.4}  r {:.4}  f1 {:.4}\n",
            log.epoch, log.lr, log.train_loss, log.val_precision, log.val_recall, log.val_f1
        );
    }
    out += &format!("best epoch {}  val f1 {:.4}\n", outcome.best_epoch, outcome.best_val_f1);
    out
}

fn format_eval_line(tag: &str, report: &EvalReport) -> String {
    let c = report.counts;
    format!(
        "{tag}  p {:.4}  r {:.4}  f1 {:.4}  (tp {} fp {} tn {} fn {})\n",
        report.precision, report.recall, report.f1, c.true_pos, c.false_pos, c.true_neg, c.false_neg
    )
}

/// The full training story: generate a corpus, label it with the
/// segmenter, split by app, train, and score the untouched test apps.
pub fn train_pipeline(cfg: &TrainPipelineConfig) -> Result<TrainPipelineOutcome, PipelineError> {
    let generated = generate_corpus(&cfg.corpus)?;
    let casts: Vec<Screencast> = generated.into_iter().map(|g| g.cast).collect();
    let (dataset, examples) = dataset_and_examples(&casts, &cfg.segmenter, DESK_INPUT)?;
    drop(casts);

    let apps: BTreeSet<&str> = examples.iter().map(|e| e.app_id.as_str()).collect();
    let mut report = String::from("classifier training run\n");
    report += &format!(
        "apps {}  entries {}  full {}  partial {}\n",
        apps.len(),
        dataset.entries.len(),
        dataset.count(rendergate_core::RenderLabel::FullyRendered),
        dataset.count(rendergate_core::RenderLabel::PartiallyRendered),
    );
    drop(apps);

    let (train_set, val_set, test_set) = split_by_app(examples, cfg.train.rng_seed)?;
    report += &format!(
        "split  train {}  val {}  test {}\n",
        train_set.len(),
        val_set.len(),
        test_set.len()
    );

    let mut model = RenderNet::desk();
    model.init(rendergate_core::subseed(cfg.train.rng_seed, "model-init"));
    let outcome = train(model, &train_set, &val_set, &cfg.train)?;
    report += &format_train_log(&outcome);

    let test = evaluate(&outcome.model, &test_set, &NullClock, cfg.train.batch_size)?;
    report += &format_eval_line("test", &test);

    Ok(TrainPipelineOutcome {
        report,
        model: outcome.model,
        dataset,
        test,
        best_val_f1: outcome.best_val_f1,
    })
}

pub struct BenchOutcome {
    pub report: String,
    pub rows: Vec<BenchRow>,
}

/// Replay every suite crash trace under every policy.
pub fn bench_pipeline(policies: &[ThrottlePolicy], fps: u64) -> Result<BenchOutcome, PipelineError> {
    let suite = rendergate_core::sim::standard_suite();
    let mut rows = Vec::with_capacity(suite.len() * policies.len());
    for sa in &suite {
        for policy in policies {
            let run = run_trace(sa.app.clone(), &sa.trace, policy, fps)?;
            rows.push(BenchRow {
                app_id: sa.app.id.clone(),
                kind: sa.kind.to_owned(),
                policy: policy.name(),
                reproduced: run.reproduced,
                elapsed_ms: run.elapsed_ms,
            });
        }
    }
    Ok(BenchOutcome { report: bench_report(&rows), rows })
}

pub struct ExplorationOutcome {
    pub report: String,
    pub rows: Vec<ExplorationRow>,
}

/// Random exploration with a wall-clock budget per app under every policy.
pub fn exploration_pipeline(
    policies: &[ThrottlePolicy],
    seed: u64,
    fps: u64,
    budget_ms: u64,
) -> Result<ExplorationOutcome, PipelineError> {
    let apps = exploration_suite(seed);
    let mut rows = Vec::with_capacity(apps.len() * policies.len());
    for app in &apps {
        for policy in policies {
            let metrics = run_exploration(app.clone(), policy, budget_ms, seed, fps)?;
            rows.push(ExplorationRow {
                app_id: app.id.clone(),
                policy: policy.name(),
                metrics,
            });
        }
    }
    Ok(ExplorationOutcome { report: exploration_report(&rows), rows })
}

pub fn bench_tsv(rows: &[BenchRow]) -> String {
    let mut out = String::from("app\tkind\tpolicy\treproduced\telapsed_ms\n");
    for r in rows {
        out += &format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.app_id,
            r.kind,
            r.policy,
            if r.reproduced { 1 } else { 0 },
            r.elapsed_ms
        );
    }
    out
}

pub fn exploration_tsv(rows: &[ExplorationRow]) -> String {
    let mut out = String::from("app\tpolicy\tevents\tscreens\tfr_dispatch\tcrashes\twall_ms\n");
    for r in rows {
        out += &format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.app_id,
            r.policy,
            r.metrics.events_sent,
            r.metrics.screens_visited,
            r.metrics.fully_rendered_dispatch_count,
            r.metrics.crashes_triggered,
            r.metrics.wall_clock_ms
        );
    }
    out
}

/// Consecutive-pair similarity scores as a plottable two-column table.
pub fn scores_tsv(scores: &[f64]) -> String {
    let mut out = String::from("pair\tssim\n");
    for (i, s) in scores.iter().enumerate() {
        out += &format!("{i}\t{s:.6}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rendergate_core::scheduler::VerdictSource;

    #[test]
    fn corpus_is_deterministic_per_seed() {
        let cfg = CorpusConfig { apps: 2, ..CorpusConfig::default() };
        let a = generate_corpus(&cfg).unwrap();
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.cast.id, y.cast.id);
            assert_eq!(x.cast.frames, y.cast.frames);
            assert_eq!(x.gt, y.gt);
        }
        let other = generate_corpus(&CorpusConfig { apps: 2, seed: 1, ..CorpusConfig::default() })
            .unwrap();
        assert_ne!(a[0].cast.frames, other[0].cast.frames);
    }

    #[test]
    fn examples_carry_app_ids_and_desk_shape() {
        let cfg = CorpusConfig { apps: 2, ..CorpusConfig::default() };
        let generated = generate_corpus(&cfg).unwrap();
        let casts: Vec<Screencast> = generated.into_iter().map(|g| g.cast).collect();
        let (dataset, examples) =
            dataset_and_examples(&casts, &SegmenterConfig::default(), DESK_INPUT).unwrap();
        assert_eq!(dataset.entries.len(), examples.len());
        assert!(!examples.is_empty());
        assert!(examples.iter().all(|e| e.input.shape == vec![3, 96, 56]));
        assert!(examples.iter().all(|e| e.app_id == "app00" || e.app_id == "app01"));
    }

    #[test]
    fn bench_rows_cover_every_app_policy_pair() {
        let policies = vec![
            ThrottlePolicy::fixed(600),
            ThrottlePolicy::adaptive(VerdictSource::GroundTruth),
        ];
        let out = bench_pipeline(&policies, 30).unwrap();
        let suite_len = rendergate_core::sim::standard_suite().len();
        assert_eq!(out.rows.len(), suite_len * policies.len());
        assert!(out.report.contains("adaptive:oracle"));
        let oracle_rows: Vec<_> =
            out.rows.iter().filter(|r| r.policy == "adaptive:oracle").collect();
        assert!(oracle_rows.iter().all(|r| r.reproduced));
    }

    #[test]
    fn tsv_tables_have_one_line_per_row() {
        let policies = vec![ThrottlePolicy::fixed(500)];
        let out = exploration_pipeline(&policies, 3, 30, 3000).unwrap();
        let tsv = exploration_tsv(&out.rows);
        assert_eq!(tsv.lines().count(), out.rows.len() + 1);
        assert!(tsv.starts_with("app\tpolicy\t"));
    }
}

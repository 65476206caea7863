//! Event-dispatch timing: send the next test event after a fixed throttle,
//! or adaptively as soon as the GUI reads fully rendered, with a forced
//! dispatch once a maximum wait is exhausted. Includes the sim-backed
//! harnesses that replay crash traces and run budgeted random exploration
//! under either policy.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::classifier::{ClassifierError, RenderNet};
use crate::eval::NullClock;
use crate::imaging::{self, Frame, ImagingError};
use crate::segmenter::SegmenterConfig;
use crate::sim::{AppModel, GtState, Session, SimError, TapOutcome};
use crate::{subseed, RenderLabel};

#[derive(Debug)]
pub enum SchedulerError {
    /// The frame source disconnected mid-wait.
    StreamLost,
    /// The verdict source needs ground truth this frame source lacks.
    MissingGroundTruth,
    /// A consecutive-frame verdict was asked of too short a window.
    InsufficientFrames { have: usize, need: usize },
    App(SimError),
    Imaging(ImagingError),
    Classifier(ClassifierError),
}

impl fmt::Display for SchedulerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerError::StreamLost => write!(f, "frame source disconnected mid-wait"),
            SchedulerError::MissingGroundTruth => {
                write!(f, "verdict source requires ground truth the frame source lacks")
            }
            SchedulerError::InsufficientFrames { have, need } => {
                write!(f, "consecutive-frame verdict needs {need} frames, have {have}")
            }
            SchedulerError::App(e) => write!(f, "app model: {e}"),
            SchedulerError::Imaging(e) => write!(f, "imaging: {e}"),
            SchedulerError::Classifier(e) => write!(f, "classifier: {e}"),
        }
    }
}

impl core::error::Error for SchedulerError {}

impl From<SimError> for SchedulerError {
    fn from(e: SimError) -> Self {
        SchedulerError::App(e)
    }
}

impl From<ImagingError> for SchedulerError {
    fn from(e: ImagingError) -> Self {
        SchedulerError::Imaging(e)
    }
}

impl From<ClassifierError> for SchedulerError {
    fn from(e: ClassifierError) -> Self {
        SchedulerError::Classifier(e)
    }
}

/// How the adaptive policy decides a frame shows a fully rendered GUI.
pub enum VerdictSource {
    /// Trained classifier; one inference per arriving frame.
    Cnn(RenderNet),
    /// Steady-run rule over the most recent frames, no model.
    Heuristic(SegmenterConfig),
    /// The simulator's own state; the benchmark upper bound.
    GroundTruth,
}

impl VerdictSource {
    fn name(&self) -> &'static str {
        match self {
            VerdictSource::Cnn(_) => "cnn",
            VerdictSource::Heuristic(_) => "consecutive",
            VerdictSource::GroundTruth => "oracle",
        }
    }
}

/// When to dispatch the next event.
pub enum ThrottlePolicy {
    /// Sleep a fixed interval, look at nothing.
    Fixed { interval_ms: u64 },
    /// Inspect every arriving frame and dispatch on the first fully
    /// rendered verdict, or forcibly once max_wait_ms has elapsed.
    Adaptive { max_wait_ms: u64, source: VerdictSource },
}

pub const DEFAULT_MAX_WAIT_MS: u64 = 1000;

impl ThrottlePolicy {
    pub fn fixed(interval_ms: u64) -> Self {
        debug_assert!(interval_ms > 0);
        ThrottlePolicy::Fixed { interval_ms }
    }

    pub fn adaptive(source: VerdictSource) -> Self {
        ThrottlePolicy::Adaptive { max_wait_ms: DEFAULT_MAX_WAIT_MS, source }
    }

    pub fn name(&self) -> String {
        match self {
            ThrottlePolicy::Fixed { interval_ms } => format!("fixed:{interval_ms}"),
            ThrottlePolicy::Adaptive { source, .. } => format!("adaptive:{}", source.name()),
        }
    }
}

/// One wait-then-dispatch decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchRecord {
    pub event: usize,
    pub waited_ms: u64,
    pub frames_inspected: usize,
    /// The wait cap expired without a fully rendered verdict.
    pub forced: bool,
    /// Simulator ground truth at the dispatch instant, when the frame
    /// source carries it.
    pub rendering_state_at_dispatch: Option<GtState>,
}

/// Aggregates for one budgeted exploration session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionMetrics {
    pub events_sent: usize,
    pub screens_visited: usize,
    pub fully_rendered_dispatch_count: usize,
    pub crashes_triggered: usize,
    pub wall_clock_ms: u64,
}

/// A frame and, when the source is a simulator, the true state behind it.
pub struct SourcedFrame {
    pub frame: Frame,
    pub gt: Option<GtState>,
}

/// Where frames and time come from during a wait. The simulator advances
/// a virtual clock; a live transport blocks on real arrivals.
pub trait FrameSource {
    /// Current time on the source's clock, ms.
    fn now_ms(&self) -> u64;
    /// Block until the first frame strictly after now, advancing the clock.
    fn next_frame(&mut self) -> Result<SourcedFrame, SchedulerError>;
    /// Idle until `t`; consumes no frames.
    fn sleep_until(&mut self, t: u64);
    /// Ground truth at the current instant, when the source knows it.
    fn gt_now(&self) -> Option<GtState> {
        None
    }
}

/// The fixed/adaptive wait of the dispatch loop. Fixed sleeps exactly its
/// interval and inspects nothing. Adaptive evaluates every arriving frame
/// and returns on the first fully rendered verdict; if `max_wait_ms`
/// elapses first, the dispatch happens anyway and is marked forced. The
/// cap timer starts when the wait starts.
pub fn wait_for_dispatch(
    policy: &ThrottlePolicy,
    source: &mut dyn FrameSource,
    event: usize,
) -> Result<DispatchRecord, SchedulerError> {
    let start = source.now_ms();
    match policy {
        ThrottlePolicy::Fixed { interval_ms } => {
            source.sleep_until(start + interval_ms);
            Ok(DispatchRecord {
                event,
                waited_ms: source.now_ms() - start,
                frames_inspected: 0,
                forced: false,
                rendering_state_at_dispatch: source.gt_now(),
            })
        }
        ThrottlePolicy::Adaptive { max_wait_ms, source: verdicts } => {
            let mut inspected = 0usize;
            let mut steady = SteadyWindow::new();
            loop {
                let sf = source.next_frame()?;
                inspected += 1;
                let now = source.now_ms();
                let fully = match verdicts {
                    VerdictSource::GroundTruth => {
                        let gt = sf.gt.ok_or(SchedulerError::MissingGroundTruth)?;
                        gt == GtState::FullyRendered
                    }
                    VerdictSource::Cnn(model) => {
                        let v = model.infer(&sf.frame, &NullClock)?;
                        v.decision == RenderLabel::FullyRendered
                    }
                    VerdictSource::Heuristic(cfg) => steady.push(&sf.frame, cfg)?,
                };
                let done = |forced| DispatchRecord {
                    event,
                    waited_ms: now - start,
                    frames_inspected: inspected,
                    forced,
                    rendering_state_at_dispatch: sf.gt.or_else(|| source.gt_now()),
                };
                if fully {
                    return Ok(done(false));
                }
                if now - start >= *max_wait_ms {
                    return Ok(done(true));
                }
            }
        }
    }
}

/// Rolling steady-run state for the consecutive-frame baseline: each
/// frame is blurred once, and only the pair score against the previous
/// frame is computed.
struct SteadyWindow {
    prev: Option<imaging::FrameStats>,
    frames_seen: usize,
    steady_pairs: usize,
}

impl SteadyWindow {
    fn new() -> Self {
        SteadyWindow { prev: None, frames_seen: 0, steady_pairs: 0 }
    }

    /// Feed one frame; true once the last `steady_min_frames` frames all
    /// read pairwise similar.
    fn push(&mut self, frame: &Frame, cfg: &SegmenterConfig) -> Result<bool, SchedulerError> {
        let map = imaging::rgb_to_luminance(frame);
        if map.width < imaging::SSIM_WINDOW || map.height < imaging::SSIM_WINDOW {
            return Err(ImagingError::TooSmall {
                width: map.width,
                height: map.height,
                min: imaging::SSIM_WINDOW,
            }
            .into());
        }
        let cur = imaging::FrameStats::of(&map);
        if let Some(prev) = &self.prev {
            if prev.size() != cur.size() {
                return Err(ImagingError::DimensionMismatch { a: prev.size(), b: cur.size() }.into());
            }
            if imaging::ssim_from_stats(prev, &cur) >= cfg.similarity_threshold {
                self.steady_pairs += 1;
            } else {
                self.steady_pairs = 0;
            }
        }
        self.frames_seen += 1;
        self.prev = Some(cur);
        Ok(self.frames_seen >= cfg.steady_min_frames
            && self.steady_pairs >= cfg.steady_min_frames - 1)
    }
}

/// Verdict of the consecutive-frame baseline over an explicit window:
/// fully rendered iff the last `steady_min_frames` frames form a steady
/// run under the segmenter's similarity rule.
pub fn consecutive_frame_verdict(
    window: &[Frame],
    cfg: &SegmenterConfig,
) -> Result<RenderLabel, SchedulerError> {
    if window.len() < cfg.steady_min_frames {
        return Err(SchedulerError::InsufficientFrames {
            have: window.len(),
            need: cfg.steady_min_frames,
        });
    }
    let mut steady = SteadyWindow::new();
    let mut fully = false;
    for frame in &window[window.len() - cfg.steady_min_frames..] {
        fully = steady.push(frame, cfg)?;
    }
    Ok(if fully { RenderLabel::FullyRendered } else { RenderLabel::PartiallyRendered })
}

/// Frame source backed by a simulated device session on a virtual clock:
/// frames arrive on the fps grid and sleeping costs nothing real.
pub struct SimRun {
    session: Session,
    fps: u64,
    now: u64,
}

impl SimRun {
    pub fn new(app: AppModel, fps: u64) -> Result<Self, SchedulerError> {
        debug_assert!(fps > 0);
        Ok(SimRun { session: Session::new(app)?, fps, now: 0 })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Tap the settled center of a widget on the current screen; a widget
    /// that is not there (the run diverged) simply misses.
    pub fn tap_widget(&mut self, widget_id: &str) -> TapOutcome {
        match self.session.widget_center(widget_id) {
            Some((x, y)) => self.session.tap(self.now, x, y),
            None => TapOutcome::Missed,
        }
    }

    pub fn tap_at(&mut self, x: u32, y: u32) -> TapOutcome {
        self.session.tap(self.now, x, y)
    }
}

impl FrameSource for SimRun {
    fn now_ms(&self) -> u64 {
        self.now
    }

    fn next_frame(&mut self) -> Result<SourcedFrame, SchedulerError> {
        // first grid instant strictly after now; grid matches the
        // screencast generator's i * 1000 / fps
        let mut i = self.now * self.fps / 1000 + 1;
        while i * 1000 / self.fps <= self.now {
            i += 1;
        }
        self.now = i * 1000 / self.fps;
        Ok(SourcedFrame {
            frame: self.session.frame_at(self.now),
            gt: Some(self.session.ground_truth(self.now)),
        })
    }

    fn sleep_until(&mut self, t: u64) {
        if t > self.now {
            self.now = t;
        }
    }

    fn gt_now(&self) -> Option<GtState> {
        Some(self.session.ground_truth(self.now))
    }
}

/// Outcome of replaying one crash trace under a policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRun {
    pub reproduced: bool,
    pub elapsed_ms: u64,
    pub records: Vec<DispatchRecord>,
}

/// Replay a recorded crash path: wait under the policy, then tap each
/// step's settled widget center. Reproduced means every intermediate tap
/// navigated and the final one crashed; the first tap that misses or
/// lands elsewhere diverges the run.
pub fn run_trace(
    app: AppModel,
    trace: &[String],
    policy: &ThrottlePolicy,
    fps: u64,
) -> Result<TraceRun, SchedulerError> {
    let mut run = SimRun::new(app, fps)?;
    let mut records = Vec::with_capacity(trace.len());
    let mut reproduced = !trace.is_empty();
    for (i, widget) in trace.iter().enumerate() {
        records.push(wait_for_dispatch(policy, &mut run, i)?);
        let outcome = run.tap_widget(widget);
        let last = i + 1 == trace.len();
        let on_track = match outcome {
            TapOutcome::Navigated { .. } => !last,
            TapOutcome::Crashed => last,
            TapOutcome::Missed => false,
        };
        if !on_track {
            reproduced = false;
            break;
        }
    }
    Ok(TraceRun { reproduced, elapsed_ms: run.now_ms(), records })
}

/// Budgeted random exploration: wait under the policy, then tap the
/// settled center of a uniformly chosen widget on the current screen,
/// until the budget is spent. A wait that finishes past the budget does
/// not dispatch.
pub fn run_exploration(
    app: AppModel,
    policy: &ThrottlePolicy,
    budget_ms: u64,
    seed: u64,
    fps: u64,
) -> Result<SessionMetrics, SchedulerError> {
    let mut rng = ChaCha12Rng::seed_from_u64(subseed(seed, &app.id));
    let mut visited: BTreeSet<String> = BTreeSet::new();
    visited.insert(app.start_screen.clone());
    let mut run = SimRun::new(app, fps)?;
    let mut metrics = SessionMetrics::default();

    loop {
        let record = wait_for_dispatch(policy, &mut run, metrics.events_sent)?;
        if run.now_ms() >= budget_ms {
            break;
        }
        let (x, y) = {
            let widgets = &run.session().current_screen().widgets;
            widgets[rng.gen_range(0..widgets.len())].bounds.center()
        };
        metrics.events_sent += 1;
        if record.rendering_state_at_dispatch == Some(GtState::FullyRendered) {
            metrics.fully_rendered_dispatch_count += 1;
        }
        match run.tap_at(x, y) {
            TapOutcome::Navigated { to } => {
                visited.insert(to);
            }
            TapOutcome::Crashed => metrics.crashes_triggered += 1,
            TapOutcome::Missed => {}
        }
    }

    metrics.screens_visited = visited.len();
    metrics.wall_clock_ms = run.now_ms().min(budget_ms);
    Ok(metrics)
}

/// One line of the trace benchmark.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub app_id: String,
    pub kind: String,
    pub policy: String,
    pub reproduced: bool,
    pub elapsed_ms: u64,
}

/// Reproduction table: one row per (app, policy) replay, then per-policy
/// success rates and mean times.
pub fn bench_report(rows: &[BenchRow]) -> String {
    let mut out = String::from("app            policy            T(s)    R\n");
    for r in rows {
        out += &format!(
            "{:<14} {:<17} {:>6.2}  {}\n",
            r.app_id,
            r.policy,
            r.elapsed_ms as f64 / 1000.0,
            if r.reproduced { "yes" } else { "no" }
        );
    }
    out += "\n";
    for policy in distinct(rows.iter().map(|r| r.policy.as_str())) {
        let of_policy: Vec<&BenchRow> = rows.iter().filter(|r| r.policy == policy).collect();
        let hits = of_policy.iter().filter(|r| r.reproduced).count();
        let mean_ms =
            of_policy.iter().map(|r| r.elapsed_ms).sum::<u64>() as f64 / of_policy.len() as f64;
        out += &format!(
            "{policy}: reproduced {hits}/{}, mean T {:.2}s\n",
            of_policy.len(),
            mean_ms / 1000.0
        );
    }
    out
}

/// One line of the exploration benchmark.
#[derive(Debug, Clone)]
pub struct ExplorationRow {
    pub app_id: String,
    pub policy: String,
    pub metrics: SessionMetrics,
}

/// Exploration table: events, screens, dispatches on fully rendered GUIs,
/// and crashes per (app, policy), then per-policy totals.
pub fn exploration_report(rows: &[ExplorationRow]) -> String {
    let mut out = String::from("app            policy            events  screens  fr-dispatch  crashes\n");
    for r in rows {
        out += &format!(
            "{:<14} {:<17} {:>6}  {:>7}  {:>11}  {:>7}\n",
            r.app_id,
            r.policy,
            r.metrics.events_sent,
            r.metrics.screens_visited,
            r.metrics.fully_rendered_dispatch_count,
            r.metrics.crashes_triggered
        );
    }
    out += "\n";
    for policy in distinct(rows.iter().map(|r| r.policy.as_str())) {
        let of_policy: Vec<&ExplorationRow> =
            rows.iter().filter(|r| r.policy == policy).collect();
        let events: usize = of_policy.iter().map(|r| r.metrics.events_sent).sum();
        let screens: usize = of_policy.iter().map(|r| r.metrics.screens_visited).sum();
        let fr: usize =
            of_policy.iter().map(|r| r.metrics.fully_rendered_dispatch_count).sum();
        let crashes: usize = of_policy.iter().map(|r| r.metrics.crashes_triggered).sum();
        let fr_share = if events == 0 { 0.0 } else { fr as f64 / events as f64 };
        out += &format!(
            "{policy}: events {events}, screens {screens}, fr-dispatch {fr} ({:.1}%), crashes {crashes}\n",
            fr_share * 100.0
        );
    }
    out
}

/// First-appearance-ordered distinct strings.
fn distinct<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = Vec::new();
    for it in items {
        if !seen.contains(&it) {
            seen.push(it);
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{standard_suite, RenderTimeline, Rect, Screen, TapAction, Widget};
    use crate::sim::{generate_screencast, ScriptEvent};
    use crate::segmenter::segment;

    /// Single screen that finishes rendering `total` ms after launch.
    fn loading_app(total: u64) -> AppModel {
        AppModel {
            id: "solo".to_string(),
            screens: vec![Screen {
                id: "main".to_string(),
                background: [245, 245, 245],
                widgets: vec![Widget {
                    id: "content".to_string(),
                    bounds: Rect::new(15, 40, 180, 120),
                    color: [15, 157, 88],
                    action: TapAction::None,
                    striped: true,
                }],
                timeline: RenderTimeline::fade(total),
            }],
            start_screen: "main".to_string(),
            restart_timeline: RenderTimeline::fade(120),
        }
    }

    #[test]
    fn fixed_sleeps_exactly_and_inspects_nothing() {
        let mut run = SimRun::new(loading_app(600), 30).unwrap();
        let rec = wait_for_dispatch(&ThrottlePolicy::fixed(200), &mut run, 0).unwrap();
        assert_eq!(rec.waited_ms, 200);
        assert_eq!(rec.frames_inspected, 0);
        assert!(!rec.forced);
        assert_eq!(rec.rendering_state_at_dispatch, Some(GtState::Transiting));
    }

    #[test]
    fn adaptive_oracle_dispatches_within_a_frame_of_completion() {
        let mut run = SimRun::new(loading_app(600), 30).unwrap();
        let policy = ThrottlePolicy::adaptive(VerdictSource::GroundTruth);
        let rec = wait_for_dispatch(&policy, &mut run, 0).unwrap();
        assert!((600..634).contains(&rec.waited_ms), "waited {}", rec.waited_ms);
        assert!(!rec.forced);
        assert_eq!(rec.rendering_state_at_dispatch, Some(GtState::FullyRendered));
        assert_eq!(rec.frames_inspected, rec.waited_ms as usize * 30 / 1000);
    }

    #[test]
    fn adaptive_forces_dispatch_at_the_cap() {
        let mut run = SimRun::new(loading_app(5_000), 30).unwrap();
        let policy = ThrottlePolicy::adaptive(VerdictSource::GroundTruth);
        let rec = wait_for_dispatch(&policy, &mut run, 0).unwrap();
        assert!((1000..1034).contains(&rec.waited_ms), "waited {}", rec.waited_ms);
        assert!(rec.forced);
        assert_eq!(rec.rendering_state_at_dispatch, Some(GtState::Transiting));
    }

    #[test]
    fn heuristic_waits_for_a_steady_run() {
        // spinner until 600ms so no steady pair exists before completion
        let mut app = loading_app(100);
        app.screens[0].timeline =
            RenderTimeline { transition_ms: 100, explicit_loading_ms: 500, ..Default::default() };
        let mut run = SimRun::new(app, 30).unwrap();
        let policy =
            ThrottlePolicy::adaptive(VerdictSource::Heuristic(SegmenterConfig::default()));
        let rec = wait_for_dispatch(&policy, &mut run, 0).unwrap();
        // four steady pairs after the 600ms completion: ~133ms lag
        assert!((733..767).contains(&rec.waited_ms), "waited {}", rec.waited_ms);
        assert!(!rec.forced);
        assert_eq!(rec.rendering_state_at_dispatch, Some(GtState::FullyRendered));
    }

    #[test]
    fn consecutive_verdict_needs_enough_frames() {
        let cfg = SegmenterConfig::default();
        let run = SimRun::new(loading_app(100), 30).unwrap();
        let frames: Vec<Frame> =
            (1..=4).map(|i| run.session.frame_at(500 + i * 33)).collect();
        assert!(matches!(
            consecutive_frame_verdict(&frames, &cfg),
            Err(SchedulerError::InsufficientFrames { have: 4, need: 5 })
        ));
    }

    /// The windowed verdict must call exactly the indices the segmenter
    /// puts at least steady_min_frames deep into a fully rendered group.
    #[test]
    fn consecutive_verdict_agrees_with_segmenter_runs() {
        let suite = standard_suite();
        let spinner = suite.iter().find(|s| s.kind == "spinner").unwrap();
        let script: Vec<ScriptEvent> = spinner
            .trace
            .iter()
            .enumerate()
            .map(|(i, w)| ScriptEvent { at_ms: 400 + i as u64 * 1200, widget: w.clone() })
            .collect();
        let out = generate_screencast(&spinner.app, "agree", &script, 30, 1200).unwrap();
        let cfg = SegmenterConfig::default();
        let groups = segment(&out.cast.frames, &cfg).unwrap();
        let frames = &out.cast.frames;
        for i in cfg.steady_min_frames - 1..frames.len() {
            let window = &frames[..=i];
            let verdict = consecutive_frame_verdict(window, &cfg).unwrap();
            let deep_in_full = groups.iter().any(|g| {
                g.label == RenderLabel::FullyRendered
                    && i >= g.start + cfg.steady_min_frames - 1
                    && i < g.end
            });
            let expect =
                if deep_in_full { RenderLabel::FullyRendered } else { RenderLabel::PartiallyRendered };
            assert_eq!(verdict, expect, "frame {i}");
        }
    }

    #[test]
    fn trace_reproduces_with_oracle_but_not_under_short_throttle() {
        let suite = standard_suite();
        let drift = suite.iter().find(|s| s.kind == "drift").unwrap();

        let adaptive = ThrottlePolicy::adaptive(VerdictSource::GroundTruth);
        let hit = run_trace(drift.app.clone(), &drift.trace, &adaptive, 30).unwrap();
        assert!(hit.reproduced);
        assert_eq!(hit.records.len(), drift.trace.len());
        assert!(hit.records.iter().all(|r| !r.forced));

        let fixed = ThrottlePolicy::fixed(200);
        let miss = run_trace(drift.app.clone(), &drift.trace, &fixed, 30).unwrap();
        assert!(!miss.reproduced);
        // diverges on the first drifting screen: the second step
        assert_eq!(miss.records.len(), 2);

        let slow = ThrottlePolicy::fixed(1000);
        let late = run_trace(drift.app.clone(), &drift.trace, &slow, 30).unwrap();
        assert!(late.reproduced);
        assert!(hit.elapsed_ms < late.elapsed_ms);
    }

    #[test]
    fn zero_budget_explores_nothing() {
        let m = run_exploration(
            loading_app(100),
            &ThrottlePolicy::fixed(200),
            0,
            7,
            30,
        )
        .unwrap();
        assert_eq!(m.events_sent, 0);
        assert_eq!(m.screens_visited, 1);
        assert_eq!(m.wall_clock_ms, 0);
    }

    #[test]
    fn exploration_is_deterministic_and_event_counts_shrink_with_interval() {
        let app = crate::sim::random_app(11, "expl");
        let policies =
            [ThrottlePolicy::fixed(200), ThrottlePolicy::fixed(400), ThrottlePolicy::fixed(800)];
        let counts: Vec<usize> = policies
            .iter()
            .map(|p| run_exploration(app.clone(), p, 20_000, 5, 30).unwrap().events_sent)
            .collect();
        assert!(counts[0] >= counts[1] && counts[1] >= counts[2], "{counts:?}");

        let a = run_exploration(app.clone(), &policies[0], 20_000, 5, 30).unwrap();
        let b = run_exploration(app, &policies[0], 20_000, 5, 30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exploration_counts_conserve() {
        let suite = standard_suite();
        let app = suite.iter().find(|s| s.kind == "mixed").unwrap().app.clone();
        let n_screens = app.screens.len();
        let policy = ThrottlePolicy::adaptive(VerdictSource::GroundTruth);
        let m = run_exploration(app, &policy, 30_000, 3, 30).unwrap();
        assert!(m.events_sent > 0);
        assert!(m.fully_rendered_dispatch_count <= m.events_sent);
        assert!(m.screens_visited <= n_screens);
        assert!(m.wall_clock_ms <= 30_000);
        // the oracle never dispatches early below the cap
        assert_eq!(m.fully_rendered_dispatch_count, m.events_sent);
    }

    #[test]
    fn reports_are_stable_text() {
        let rows = [
            BenchRow {
                app_id: "drift-0".to_string(),
                kind: "drift".to_string(),
                policy: "adaptive:oracle".to_string(),
                reproduced: true,
                elapsed_ms: 3_467,
            },
            BenchRow {
                app_id: "drift-0".to_string(),
                kind: "drift".to_string(),
                policy: "fixed:200".to_string(),
                reproduced: false,
                elapsed_ms: 400,
            },
        ];
        let text = bench_report(&rows);
        assert!(text.contains("adaptive:oracle"));
        assert!(text.contains("3.47"));
        assert!(text.contains("fixed:200: reproduced 0/1"));
        assert_eq!(text, bench_report(&rows));

        let erows = [ExplorationRow {
            app_id: "explore-0".to_string(),
            policy: "adaptive:oracle".to_string(),
            metrics: SessionMetrics {
                events_sent: 40,
                screens_visited: 4,
                fully_rendered_dispatch_count: 40,
                crashes_triggered: 1,
                wall_clock_ms: 60_000,
            },
        }];
        let etext = exploration_report(&erows);
        assert!(etext.contains("fr-dispatch 40 (100.0%)"));
    }
}

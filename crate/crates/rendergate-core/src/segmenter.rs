//! Screencast segmentation: score consecutive frames, cut the sequence into
//! steady and transitional groups, and sample a labeled frame dataset.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::imaging::{self, Frame, ImagingError};
use crate::{subseed, RenderLabel};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    /// Consecutive-pair SSIM at or above this joins two frames into one run.
    pub similarity_threshold: f64,
    /// Runs at least this many frames long count as fully rendered.
    pub steady_min_frames: usize,
    /// Frames sampled from each partially rendered group.
    pub partial_sample_count: usize,
    pub rng_seed: u64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            similarity_threshold: 0.99,
            steady_min_frames: 5,
            partial_sample_count: 3,
            rng_seed: 0,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmenterError> {
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(SegmenterError::BadConfig("similarity_threshold must be in (0, 1]"));
        }
        if self.steady_min_frames < 2 {
            return Err(SegmenterError::BadConfig("steady_min_frames must be at least 2"));
        }
        if self.partial_sample_count < 1 {
            return Err(SegmenterError::BadConfig("partial_sample_count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum SegmenterError {
    TooFewFrames { got: usize, need: usize },
    EmptyInput,
    BadConfig(&'static str),
    ScoreCountMismatch { frames: usize, scores: usize },
    Imaging(ImagingError),
    /// Failure in one screencast of a batch, tagged with its id.
    InScreencast(String, Box<SegmenterError>),
}

impl fmt::Display for SegmenterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmenterError::TooFewFrames { got, need } => {
                write!(f, "need at least {need} frames, got {got}")
            }
            SegmenterError::EmptyInput => write!(f, "no screencasts supplied"),
            SegmenterError::BadConfig(msg) => write!(f, "bad segmenter config: {msg}"),
            SegmenterError::ScoreCountMismatch { frames, scores } => {
                write!(f, "{frames} frames require {} scores, got {scores}", frames - 1)
            }
            SegmenterError::Imaging(e) => write!(f, "{e}"),
            SegmenterError::InScreencast(id, e) => write!(f, "screencast {id}: {e}"),
        }
    }
}

impl core::error::Error for SegmenterError {}

impl From<ImagingError> for SegmenterError {
    fn from(e: ImagingError) -> Self {
        SegmenterError::Imaging(e)
    }
}

/// A maximal run of frames in one rendering state. `end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateGroup {
    pub start: usize,
    pub end: usize,
    pub label: RenderLabel,
}

impl StateGroup {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// One sampled training frame, tagged with where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub screencast_id: String,
    pub frame_index: usize,
    pub label: RenderLabel,
    pub group_id: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    pub entries: Vec<DatasetEntry>,
}

impl LabeledDataset {
    pub fn count(&self, label: RenderLabel) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    /// Line-oriented manifest: `entry <screencast> <frame> <label> <group>`.
    pub fn manifest(&self) -> String {
        let mut out = String::from("dataset v1\n");
        for e in &self.entries {
            out += &alloc::format!(
                "entry {} {} {} {}\n",
                e.screencast_id,
                e.frame_index,
                e.label.as_str(),
                e.group_id
            );
        }
        out
    }
}

/// An ordered frame sequence plus the scroll intervals to exclude from
/// segmentation. Timestamps must be non-decreasing.
#[derive(Debug, Clone)]
pub struct Screencast {
    pub id: String,
    pub frames: Vec<Frame>,
    /// Inclusive [start, end] millisecond spans during which the screen was
    /// scrolling; frames inside are dropped before segmentation.
    pub scroll_intervals: Vec<(u64, u64)>,
}

impl Screencast {
    pub fn new(id: &str, frames: Vec<Frame>) -> Self {
        Screencast { id: id.to_owned(), frames, scroll_intervals: Vec::new() }
    }
}

/// SSIM between each consecutive luminance pair: N frames give N-1 scores.
pub fn pair_scores(frames: &[Frame]) -> Result<Vec<f64>, SegmenterError> {
    if frames.len() < 2 {
        return Err(SegmenterError::TooFewFrames { got: frames.len(), need: 2 });
    }
    let mut scores = Vec::with_capacity(frames.len() - 1);
    // Stats are per-frame, so each frame is blurred once, not once per pair.
    let mut prev = frame_stats(&frames[0])?;
    for f in &frames[1..] {
        let cur = frame_stats(f)?;
        scores.push(imaging::ssim_from_stats(&prev, &cur));
        prev = cur;
    }
    Ok(scores)
}

fn frame_stats(frame: &Frame) -> Result<imaging::FrameStats, SegmenterError> {
    let map = imaging::rgb_to_luminance(frame);
    if map.width < imaging::SSIM_WINDOW || map.height < imaging::SSIM_WINDOW {
        return Err(ImagingError::TooSmall {
            width: map.width,
            height: map.height,
            min: imaging::SSIM_WINDOW,
        }
        .into());
    }
    Ok(imaging::FrameStats::of(&map))
}

/// Cut a screencast into maximal similar runs and label each run.
pub fn segment(frames: &[Frame], cfg: &SegmenterConfig) -> Result<Vec<StateGroup>, SegmenterError> {
    if frames.is_empty() {
        return Err(SegmenterError::TooFewFrames { got: 0, need: 1 });
    }
    if frames.len() == 1 {
        return segment_scores(1, &[], cfg);
    }
    segment_scores(frames.len(), &pair_scores(frames)?, cfg)
}

/// Grouping rule on raw pair scores.
///
/// A run extends while every internal consecutive pair scores at or above the
/// threshold; runs of `steady_min_frames` or more are FullyRendered. A frame
/// dissimilar to both neighbors ends up in a run of one.
pub fn segment_scores(
    frame_count: usize,
    scores: &[f64],
    cfg: &SegmenterConfig,
) -> Result<Vec<StateGroup>, SegmenterError> {
    cfg.validate()?;
    if frame_count == 0 {
        return Err(SegmenterError::TooFewFrames { got: 0, need: 1 });
    }
    if scores.len() != frame_count - 1 {
        return Err(SegmenterError::ScoreCountMismatch { frames: frame_count, scores: scores.len() });
    }
    let mut groups = Vec::new();
    let mut start = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s < cfg.similarity_threshold {
            groups.push(make_group(start, i + 1, cfg));
            start = i + 1;
        }
    }
    groups.push(make_group(start, frame_count, cfg));
    Ok(groups)
}

fn make_group(start: usize, end: usize, cfg: &SegmenterConfig) -> StateGroup {
    let label = if end - start >= cfg.steady_min_frames {
        RenderLabel::FullyRendered
    } else {
        RenderLabel::PartiallyRendered
    };
    StateGroup { start, end, label }
}

/// Draw training frames from labeled groups.
///
/// Fully rendered groups contribute one frame chosen uniformly at random;
/// partially rendered groups contribute `min(partial_sample_count, len)`
/// frames at uniformly spaced indices, endpoints included for counts >= 2
/// (a count of 1 takes the midpoint). Group ids are indices into `groups`.
pub fn sample(
    screencast_id: &str,
    groups: &[StateGroup],
    cfg: &SegmenterConfig,
) -> Vec<DatasetEntry> {
    let mut rng = ChaCha12Rng::seed_from_u64(subseed(cfg.rng_seed, screencast_id));
    let mut entries = Vec::new();
    for (group_id, g) in groups.iter().enumerate() {
        match g.label {
            RenderLabel::FullyRendered => {
                let frame_index = g.start + rng.gen_range(0..g.len());
                entries.push(DatasetEntry {
                    screencast_id: screencast_id.to_owned(),
                    frame_index,
                    label: g.label,
                    group_id,
                });
            }
            RenderLabel::PartiallyRendered => {
                for frame_index in spaced_indices(g.start, g.len(), cfg.partial_sample_count) {
                    entries.push(DatasetEntry {
                        screencast_id: screencast_id.to_owned(),
                        frame_index,
                        label: g.label,
                        group_id,
                    });
                }
            }
        }
    }
    entries
}

/// `min(count, n)` indices uniformly spaced over `start..start+n`, computed
/// as round(j (n-1) / (k-1)) with half-up integer rounding.
fn spaced_indices(start: usize, n: usize, count: usize) -> Vec<usize> {
    let k = count.min(n);
    if k == 1 {
        // Midpoint, rounding half-up: round((n - 1) / 2) = n / 2.
        return alloc::vec![start + n / 2];
    }
    (0..k)
        .map(|j| start + (2 * j * (n - 1) + (k - 1)) / (2 * (k - 1)))
        .collect()
}

/// Segment and sample every screencast into one dataset.
///
/// Frames inside scroll intervals are dropped first; the remaining spans are
/// segmented independently so a run never straddles a scroll. Frame indices
/// in the output always refer to the original sequence.
pub fn build_dataset(
    casts: &[Screencast],
    cfg: &SegmenterConfig,
) -> Result<LabeledDataset, SegmenterError> {
    cfg.validate()?;
    if casts.is_empty() {
        return Err(SegmenterError::EmptyInput);
    }
    let mut entries = Vec::new();
    for cast in casts {
        let groups = screencast_groups(cast, cfg)
            .map_err(|e| SegmenterError::InScreencast(cast.id.clone(), Box::new(e)))?;
        entries.extend(sample(&cast.id, &groups, cfg));
    }
    Ok(LabeledDataset { entries })
}

/// Scroll-aware segmentation of one screencast, in original frame indices.
pub fn screencast_groups(
    cast: &Screencast,
    cfg: &SegmenterConfig,
) -> Result<Vec<StateGroup>, SegmenterError> {
    if cast.frames.is_empty() {
        return Err(SegmenterError::TooFewFrames { got: 0, need: 1 });
    }
    if cast.frames.windows(2).any(|w| w[1].timestamp_ms < w[0].timestamp_ms) {
        return Err(SegmenterError::BadConfig("frame timestamps must be non-decreasing"));
    }
    let scrolled = |f: &Frame| {
        cast.scroll_intervals
            .iter()
            .any(|&(s, e)| f.timestamp_ms >= s && f.timestamp_ms <= e)
    };
    let mut groups = Vec::new();
    let mut span_start = None::<usize>;
    for i in 0..=cast.frames.len() {
        let keep = i < cast.frames.len() && !scrolled(&cast.frames[i]);
        match (span_start, keep) {
            (None, true) => span_start = Some(i),
            (Some(s), false) => {
                for g in segment(&cast.frames[s..i], cfg)? {
                    groups.push(StateGroup { start: g.start + s, end: g.end + s, label: g.label });
                }
                span_start = None;
            }
            _ => {}
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn cfg() -> SegmenterConfig {
        SegmenterConfig::default()
    }

    /// Brute-force oracle: build the similarity graph over frames (edge i ~
    /// i+1 when the pair scores at or above threshold), take connected
    /// components, label by size. Independent of the linear scan.
    fn oracle_segment(frame_count: usize, scores: &[f64], cfg: &SegmenterConfig) -> Vec<StateGroup> {
        let mut comp: Vec<usize> = (0..frame_count).collect();
        // Repeated relabeling until fixpoint stands in for union-find.
        loop {
            let mut changed = false;
            for (i, &s) in scores.iter().enumerate() {
                if s >= cfg.similarity_threshold && comp[i + 1] != comp[i] {
                    let (a, b) = (comp[i], comp[i + 1]);
                    let target = a.min(b);
                    for c in comp.iter_mut() {
                        if *c == a || *c == b {
                            *c = target;
                        }
                    }
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut groups: Vec<StateGroup> = Vec::new();
        for (i, &c) in comp.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if comp[g.start] == c => g.end = i + 1,
                _ => groups.push(StateGroup { start: i, end: i + 1, label: RenderLabel::PartiallyRendered }),
            }
        }
        for g in groups.iter_mut() {
            if g.len() >= cfg.steady_min_frames {
                g.label = RenderLabel::FullyRendered;
            }
        }
        groups
    }

    #[test]
    fn worked_fifteen_frame_example() {
        let mut scores = vec![0.999; 5];
        scores.extend([0.30, 0.995, 0.995, 0.30]);
        scores.extend([0.999; 5]);
        let groups = segment_scores(15, &scores, &cfg()).unwrap();
        assert_eq!(
            groups,
            vec![
                StateGroup { start: 0, end: 6, label: RenderLabel::FullyRendered },
                StateGroup { start: 6, end: 9, label: RenderLabel::PartiallyRendered },
                StateGroup { start: 9, end: 15, label: RenderLabel::FullyRendered },
            ]
        );
    }

    #[test]
    fn all_identical_collapses_to_one_steady_group() {
        let groups = segment_scores(10, &[1.0; 9], &cfg()).unwrap();
        assert_eq!(groups, vec![StateGroup { start: 0, end: 10, label: RenderLabel::FullyRendered }]);
    }

    #[test]
    fn all_dissimilar_yields_singletons() {
        let groups = segment_scores(6, &[0.2; 5], &cfg()).unwrap();
        assert_eq!(groups.len(), 6);
        assert!(groups.iter().all(|g| g.len() == 1 && g.label == RenderLabel::PartiallyRendered));
    }

    #[test]
    fn single_frame_is_one_partial_group() {
        let groups = segment_scores(1, &[], &cfg()).unwrap();
        assert_eq!(groups, vec![StateGroup { start: 0, end: 1, label: RenderLabel::PartiallyRendered }]);
    }

    #[test]
    fn threshold_is_inclusive() {
        let groups = segment_scores(6, &[0.99; 5], &cfg()).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].label, RenderLabel::FullyRendered);
    }

    #[test]
    fn partial_spacing_includes_endpoints() {
        assert_eq!(spaced_indices(0, 7, 3), vec![0, 3, 6]);
        assert_eq!(spaced_indices(10, 2, 3), vec![10, 11]);
        assert_eq!(spaced_indices(0, 2, 1), vec![1]);
        assert_eq!(spaced_indices(0, 5, 4), vec![0, 1, 3, 4]);
    }

    #[test]
    fn sampling_the_worked_example_yields_five_entries() {
        let mut scores = vec![0.999; 5];
        scores.extend([0.30, 0.995, 0.995, 0.30]);
        scores.extend([0.999; 5]);
        let groups = segment_scores(15, &scores, &cfg()).unwrap();
        let entries = sample("cast", &groups, &cfg());
        assert_eq!(entries.len(), 5);
        assert_eq!(entries.iter().filter(|e| e.label == RenderLabel::FullyRendered).count(), 2);
        let partial: Vec<usize> = entries
            .iter()
            .filter(|e| e.label == RenderLabel::PartiallyRendered)
            .map(|e| e.frame_index)
            .collect();
        assert_eq!(partial, vec![6, 7, 8]);
        for e in &entries {
            let g = groups[e.group_id];
            assert!(e.frame_index >= g.start && e.frame_index < g.end);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let groups = segment_scores(12, &[1.0; 11], &cfg()).unwrap();
        let a = sample("x", &groups, &cfg());
        let b = sample("x", &groups, &cfg());
        assert_eq!(a, b);
    }

    #[test]
    fn scroll_intervals_split_segmentation() {
        // 12 steady frames, middle four tagged as scroll: two spans of four,
        // each shorter than steady_min_frames, so both come out partial.
        let frames: Vec<Frame> = (0..12)
            .map(|i| Frame::filled(16, 16, [100, 100, 100], i * 100))
            .collect();
        let mut cast = Screencast::new("c", frames);
        cast.scroll_intervals.push((400, 700));
        let groups = screencast_groups(&cast, &cfg()).unwrap();
        assert_eq!(
            groups,
            vec![
                StateGroup { start: 0, end: 4, label: RenderLabel::PartiallyRendered },
                StateGroup { start: 8, end: 12, label: RenderLabel::PartiallyRendered },
            ]
        );
    }

    #[test]
    fn build_dataset_requires_input_and_tags_errors() {
        assert!(matches!(build_dataset(&[], &cfg()), Err(SegmenterError::EmptyInput)));
        let bad = Screencast::new("broken", Vec::new());
        match build_dataset(&[bad], &cfg()) {
            Err(SegmenterError::InScreencast(id, _)) => assert_eq!(id, "broken"),
            other => panic!("expected tagged error, got {other:?}"),
        }
    }

    #[test]
    fn pair_scores_on_identical_then_changed_frames() {
        let a = Frame::filled(16, 16, [10, 10, 10], 0);
        let b = Frame::filled(16, 16, [10, 10, 10], 33);
        let c = Frame::filled(16, 16, [240, 240, 240], 66);
        let scores = pair_scores(&[a, b, c]).unwrap();
        assert_eq!(scores.len(), 2);
        assert!((scores[0] - 1.0).abs() <= 1e-9);
        assert!(scores[1] < 0.99);
        assert!(matches!(
            pair_scores(&[Frame::filled(16, 16, [0, 0, 0], 0)]),
            Err(SegmenterError::TooFewFrames { .. })
        ));
    }

    #[test]
    fn manifest_is_line_oriented() {
        let ds = LabeledDataset {
            entries: vec![DatasetEntry {
                screencast_id: String::from("app001"),
                frame_index: 17,
                label: RenderLabel::FullyRendered,
                group_id: 3,
            }],
        };
        assert_eq!(ds.manifest(), "dataset v1\nentry app001 17 full 3\n");
    }

    fn arb_scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop::sample::select(vec![0.2, 0.7, 0.985, 0.99, 0.995, 1.0]),
            0..=11,
        )
    }

    proptest! {
        #[test]
        fn matches_bruteforce_oracle(scores in arb_scores()) {
            let n = scores.len() + 1;
            let got = segment_scores(n, &scores, &cfg()).unwrap();
            let want = oracle_segment(n, &scores, &cfg());
            prop_assert_eq!(got, want);
        }

        #[test]
        fn groups_tile_the_input(scores in arb_scores()) {
            let n = scores.len() + 1;
            let groups = segment_scores(n, &scores, &cfg()).unwrap();
            let mut next = 0;
            for g in &groups {
                prop_assert_eq!(g.start, next);
                prop_assert!(g.end > g.start);
                next = g.end;
            }
            prop_assert_eq!(next, n);
        }

        #[test]
        fn raising_threshold_never_merges(scores in arb_scores(), bump in 0.0f64..0.01) {
            let n = scores.len() + 1;
            let lo = segment_scores(n, &scores, &cfg()).unwrap();
            let mut cfg_hi = cfg();
            cfg_hi.similarity_threshold += bump;
            let hi = segment_scores(n, &scores, &cfg_hi).unwrap();
            prop_assert!(hi.len() >= lo.len());
        }

        #[test]
        fn steady_groups_are_sound(scores in arb_scores()) {
            let n = scores.len() + 1;
            let c = cfg();
            for g in segment_scores(n, &scores, &c).unwrap() {
                if g.label == RenderLabel::FullyRendered {
                    prop_assert!(g.len() >= c.steady_min_frames);
                    for i in g.start..g.end - 1 {
                        prop_assert!(scores[i] >= c.similarity_threshold);
                    }
                }
            }
        }

        #[test]
        fn sample_counts_follow_the_rule(scores in arb_scores(), count in 1usize..5) {
            let n = scores.len() + 1;
            let mut c = cfg();
            c.partial_sample_count = count;
            let groups = segment_scores(n, &scores, &c).unwrap();
            let entries = sample("cast", &groups, &c);
            let mut seen = alloc::collections::BTreeSet::new();
            for e in &entries {
                prop_assert!(seen.insert(e.frame_index), "duplicate frame {}", e.frame_index);
            }
            for (gid, g) in groups.iter().enumerate() {
                let k = entries.iter().filter(|e| e.group_id == gid).count();
                match g.label {
                    RenderLabel::FullyRendered => prop_assert_eq!(k, 1),
                    RenderLabel::PartiallyRendered => prop_assert_eq!(k, count.min(g.len())),
                }
            }
        }

        #[test]
        fn dataset_is_deterministic(seed in 0u64..1000) {
            let frames: Vec<Frame> = (0..8u64)
                .map(|i| Frame::filled(16, 16, [(i * 30) as u8; 3], i * 33))
                .collect();
            let mut c = cfg();
            c.rng_seed = seed;
            let casts = [Screencast::new("a", frames)];
            let d1 = build_dataset(&casts, &c).unwrap();
            let d2 = build_dataset(&casts, &c).unwrap();
            prop_assert_eq!(d1.manifest(), d2.manifest());
        }
    }

    // Keeps the oracle honest on a case where transitivity matters: all pairs
    // similar except one in the middle.
    #[test]
    fn oracle_spot_check() {
        let scores = [1.0, 1.0, 0.5, 1.0];
        let groups = oracle_segment(5, &scores, &cfg());
        assert_eq!(
            groups,
            vec![
                StateGroup { start: 0, end: 3, label: RenderLabel::PartiallyRendered },
                StateGroup { start: 3, end: 5, label: RenderLabel::PartiallyRendered },
            ]
        );
        let _ = format!("{:?}", groups);
    }
}

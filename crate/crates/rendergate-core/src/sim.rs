//! Deterministic device simulator. Renders a scripted mobile app as a
//! stream of RGB frames with per-frame ground-truth rendering state, so
//! the segmenter, classifier and scheduler can be exercised end to end
//! without hardware.
//!
//! A screen's load goes through up to three phases, mirroring how real
//! GUIs come up: a cross-fade from the previous screen (optionally with
//! widgets drifting into place), an explicit loading overlay (spinner),
//! and implicit loading where individual widgets show gray placeholders
//! until their content arrives. While any phase is active a progress
//! strip sits at the bottom of the frame; it vanishes the instant the
//! screen is fully rendered, so completion is always a visible, sharp
//! change rather than an asymptotic one.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::imaging::Frame;
use crate::segmenter::Screencast;
use crate::subseed;
use crate::RenderLabel;

pub const SCREEN_W: u32 = 210;
pub const SCREEN_H: u32 = 360;

/// Height of the progress strip overlaid during loading.
const BAR_H: u32 = 8;
const SPINNER_BOX: u32 = 120;
const SPINNER_HAND_LEN: f64 = 48.0;
const SPINNER_HAND_HALF_W: f64 = 5.0;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        let (px, py) = (px as i64, py as i64);
        px >= self.x as i64
            && px < self.x as i64 + self.w as i64
            && py >= self.y as i64
            && py < self.y as i64 + self.h as i64
    }

    pub fn center(&self) -> (u32, u32) {
        let cx = self.x + self.w as i32 / 2;
        let cy = self.y + self.h as i32 / 2;
        (cx.max(0) as u32, cy.max(0) as u32)
    }

    fn lerp(from: Rect, to: Rect, num: u64, den: u64) -> Rect {
        debug_assert!(den > 0 && num <= den);
        let mix = |a: i32, b: i32| a + ((b - a) as i64 * num as i64 / den as i64) as i32;
        Rect {
            x: mix(from.x, to.x),
            y: mix(from.y, to.y),
            w: mix(from.w as i32, to.w as i32).max(1) as u32,
            h: mix(from.h as i32, to.h as i32).max(1) as u32,
        }
    }
}

/// What a tap on the widget does once it lands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TapAction {
    /// Decorative: taps pass through as if they hit nothing.
    None,
    Navigate(String),
    Crash,
}

#[derive(Debug, Clone)]
pub struct Widget {
    pub id: String,
    /// Final, settled bounds.
    pub bounds: Rect,
    pub color: Rgb,
    pub action: TapAction,
    /// Draw text-like stripes inside the body.
    pub striped: bool,
}

/// How a screen comes up after navigation lands on it.
#[derive(Debug, Clone, Default)]
pub struct RenderTimeline {
    /// Cross-fade from the previous appearance.
    pub transition_ms: u64,
    /// Spinner overlay after the fade.
    pub explicit_loading_ms: u64,
    /// Widget id -> extra delay after the explicit phase before its
    /// content replaces the gray placeholder.
    pub implicit_delays: BTreeMap<String, u64>,
    /// Widget id -> bounds it drifts in from during the fade.
    pub widget_drift: BTreeMap<String, Rect>,
}

impl RenderTimeline {
    pub fn instant() -> Self {
        RenderTimeline::default()
    }

    pub fn fade(transition_ms: u64) -> Self {
        RenderTimeline { transition_ms, ..RenderTimeline::default() }
    }

    /// When the screen is fully rendered, relative to phase start.
    pub fn total_ms(&self) -> u64 {
        let slowest_implicit = self.implicit_delays.values().copied().max().unwrap_or(0);
        self.transition_ms + self.explicit_loading_ms + slowest_implicit
    }
}

#[derive(Debug, Clone)]
pub struct Screen {
    pub id: String,
    pub background: Rgb,
    pub widgets: Vec<Widget>,
    pub timeline: RenderTimeline,
}

impl Screen {
    pub fn widget(&self, id: &str) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.id == id)
    }
}

#[derive(Debug, Clone)]
pub struct AppModel {
    pub id: String,
    pub screens: Vec<Screen>,
    pub start_screen: String,
    /// Governs the start screen's re-render after a crash restart.
    pub restart_timeline: RenderTimeline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    NoScreens,
    DuplicateId(String),
    UnknownScreen(String),
    UnknownWidget { screen: String, widget: String },
    InvalidScript(&'static str),
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::NoScreens => write!(f, "app has no screens"),
            SimError::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            SimError::UnknownScreen(id) => write!(f, "unknown screen {id:?}"),
            SimError::UnknownWidget { screen, widget } => {
                write!(f, "screen {screen:?} references unknown widget {widget:?}")
            }
            SimError::InvalidScript(what) => write!(f, "invalid script: {what}"),
        }
    }
}

impl core::error::Error for SimError {}

impl AppModel {
    pub fn screen(&self, id: &str) -> Option<&Screen> {
        self.screens.iter().find(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.screens.is_empty() {
            return Err(SimError::NoScreens);
        }
        let mut screen_ids = alloc::collections::BTreeSet::new();
        for s in &self.screens {
            if !screen_ids.insert(&s.id) {
                return Err(SimError::DuplicateId(s.id.clone()));
            }
            let mut widget_ids = alloc::collections::BTreeSet::new();
            for w in &s.widgets {
                if !widget_ids.insert(&w.id) {
                    return Err(SimError::DuplicateId(format!("{}/{}", s.id, w.id)));
                }
            }
            for key in s.timeline.implicit_delays.keys().chain(s.timeline.widget_drift.keys()) {
                if s.widget(key).is_none() {
                    return Err(SimError::UnknownWidget {
                        screen: s.id.clone(),
                        widget: key.clone(),
                    });
                }
            }
        }
        for s in &self.screens {
            for w in &s.widgets {
                if let TapAction::Navigate(target) = &w.action {
                    if self.screen(target).is_none() {
                        return Err(SimError::UnknownScreen(target.clone()));
                    }
                }
            }
        }
        if self.screen(&self.start_screen).is_none() {
            return Err(SimError::UnknownScreen(self.start_screen.clone()));
        }
        Ok(())
    }
}

/// Ground-truth rendering state of the visible screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtState {
    Transiting,
    ExplicitLoading,
    ImplicitLoading,
    FullyRendered,
}

impl GtState {
    pub fn label(self) -> RenderLabel {
        match self {
            GtState::FullyRendered => RenderLabel::FullyRendered,
            _ => RenderLabel::PartiallyRendered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TapOutcome {
    Navigated { to: String },
    /// The tap landed on nothing actionable: empty space, a decorative
    /// widget, a placeholder still loading, or a blocked loading overlay.
    Missed,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrashTrace {
    pub app_id: String,
    pub screen_id: String,
    pub widget_id: String,
    pub at_ms: u64,
}

/// A running app: owns the current screen, its phase clock, and the
/// imagery needed to draw cross-fades.
#[derive(Debug, Clone)]
pub struct Session {
    app: AppModel,
    screen_idx: usize,
    /// Timeline governing the current load; differs from the screen's own
    /// after a crash restart.
    timeline: RenderTimeline,
    phase_start_ms: u64,
    /// Appearance the fade blends away from (RGB, full frame).
    fade_from: Vec<u8>,
    crashes: Vec<CrashTrace>,
}

impl Session {
    pub fn new(app: AppModel) -> Result<Self, SimError> {
        app.validate()?;
        let screen_idx = app.screens.iter().position(|s| s.id == app.start_screen).unwrap();
        let timeline = app.screens[screen_idx].timeline.clone();
        Ok(Session {
            app,
            screen_idx,
            timeline,
            phase_start_ms: 0,
            // Cold launch fades in from a black screen.
            fade_from: vec![0; (SCREEN_W * SCREEN_H * 3) as usize],
            crashes: Vec::new(),
        })
    }

    pub fn app(&self) -> &AppModel {
        &self.app
    }

    pub fn current_screen(&self) -> &Screen {
        &self.app.screens[self.screen_idx]
    }

    pub fn timeline(&self) -> &RenderTimeline {
        &self.timeline
    }

    pub fn phase_start_ms(&self) -> u64 {
        self.phase_start_ms
    }

    pub fn crashes(&self) -> &[CrashTrace] {
        &self.crashes
    }

    fn elapsed(&self, t: u64) -> u64 {
        t.saturating_sub(self.phase_start_ms)
    }

    pub fn ground_truth(&self, t: u64) -> GtState {
        let e = self.elapsed(t);
        let tl = &self.timeline;
        if e < tl.transition_ms {
            GtState::Transiting
        } else if e < tl.transition_ms + tl.explicit_loading_ms {
            GtState::ExplicitLoading
        } else if e < tl.total_ms() {
            GtState::ImplicitLoading
        } else {
            GtState::FullyRendered
        }
    }

    /// Center of a widget's settled bounds on the current screen; where
    /// a scripted tap aims regardless of any drift still in progress.
    pub fn widget_center(&self, widget_id: &str) -> Option<(u32, u32)> {
        self.current_screen().widget(widget_id).map(|w| w.bounds.center())
    }

    fn widget_bounds_at(&self, w: &Widget, e: u64) -> Rect {
        let tl = &self.timeline;
        if e < tl.transition_ms {
            if let Some(&from) = tl.widget_drift.get(&w.id) {
                return Rect::lerp(from, w.bounds, e, tl.transition_ms);
            }
        }
        w.bounds
    }

    fn implicit_pending(&self, w: &Widget, e: u64) -> bool {
        match self.timeline.implicit_delays.get(&w.id) {
            Some(&d) => e < self.timeline.transition_ms + self.timeline.explicit_loading_ms + d,
            None => false,
        }
    }

    /// Draw the current screen's own content at phase time `e`, without
    /// any cross-fade or overlays. Used both as the fade target and as
    /// the settled appearance. Drifting widgets are left out while the
    /// transition runs; `frame_at` paints them over the blend instead.
    fn raster_content(&self, e: u64) -> Vec<u8> {
        let screen = self.current_screen();
        let mut pix = vec![0u8; (SCREEN_W * SCREEN_H * 3) as usize];
        fill_rect(&mut pix, Rect::new(0, 0, SCREEN_W, SCREEN_H), screen.background);
        for w in &screen.widgets {
            if e < self.timeline.transition_ms && self.timeline.widget_drift.contains_key(&w.id) {
                continue;
            }
            let bounds = self.widget_bounds_at(w, e);
            if self.implicit_pending(w, e) {
                draw_placeholder(&mut pix, bounds);
            } else {
                draw_widget(&mut pix, bounds, w.color, w.striped);
            }
        }
        pix
    }

    /// Full visible frame at absolute time `t`: content, cross-fade,
    /// spinner overlay and progress strip as the phases dictate.
    /// Drifting widgets ride on top of the blend at full opacity, the way
    /// a panel slides over a fading backdrop; only their position eases in.
    pub fn frame_at(&self, t: u64) -> Frame {
        let e = self.elapsed(t);
        let tl = &self.timeline;
        let mut pix = self.raster_content(e);

        if e < tl.transition_ms {
            blend_from(&mut pix, &self.fade_from, e, tl.transition_ms);
            for w in &self.current_screen().widgets {
                if tl.widget_drift.contains_key(&w.id) {
                    draw_widget(&mut pix, self.widget_bounds_at(w, e), w.color, w.striped);
                }
            }
        } else if e < tl.transition_ms + tl.explicit_loading_ms {
            draw_spinner(&mut pix, e - tl.transition_ms);
        }

        let total = tl.total_ms();
        if e < total {
            draw_progress(&mut pix, e, total);
        }

        Frame::new(SCREEN_W as usize, SCREEN_H as usize, pix, t).expect("raster is well formed")
    }

    /// Deliver a tap at absolute time `t`. During the explicit loading
    /// overlay all input is swallowed. A widget still drifting into place
    /// takes no taps at all until the transition ends, so aiming at its
    /// settled bounds mid-animation misses.
    pub fn tap(&mut self, t: u64, x: u32, y: u32) -> TapOutcome {
        let e = self.elapsed(t);
        let tl = &self.timeline;
        if e >= tl.transition_ms && e < tl.transition_ms + tl.explicit_loading_ms {
            return TapOutcome::Missed;
        }

        let hit = self
            .current_screen()
            .widgets
            .iter()
            .rev()
            .find(|w| {
                if e < tl.transition_ms && tl.widget_drift.contains_key(&w.id) {
                    return false;
                }
                self.widget_bounds_at(w, e).contains(x, y)
            })
            .cloned();
        let Some(widget) = hit else {
            return TapOutcome::Missed;
        };
        if self.implicit_pending(&widget, e) {
            return TapOutcome::Missed;
        }

        match &widget.action {
            TapAction::None => TapOutcome::Missed,
            TapAction::Navigate(target) => {
                self.fade_from = self.frame_at(t).pixels;
                self.screen_idx = self.app.screens.iter().position(|s| &s.id == target).unwrap();
                self.timeline = self.current_screen().timeline.clone();
                self.phase_start_ms = t;
                TapOutcome::Navigated { to: target.clone() }
            }
            TapAction::Crash => {
                self.crashes.push(CrashTrace {
                    app_id: self.app.id.clone(),
                    screen_id: self.current_screen().id.clone(),
                    widget_id: widget.id.clone(),
                    at_ms: t,
                });
                // The process dies to black and relaunches on the start
                // screen under the restart timeline.
                self.fade_from = vec![0; (SCREEN_W * SCREEN_H * 3) as usize];
                self.screen_idx =
                    self.app.screens.iter().position(|s| s.id == self.app.start_screen).unwrap();
                self.timeline = self.app.restart_timeline.clone();
                self.phase_start_ms = t;
                TapOutcome::Crashed
            }
        }
    }
}

fn px_index(x: u32, y: u32) -> usize {
    ((y * SCREEN_W + x) * 3) as usize
}

fn fill_rect(pix: &mut [u8], r: Rect, color: Rgb) {
    let x0 = r.x.max(0) as u32;
    let y0 = r.y.max(0) as u32;
    let x1 = (r.x + r.w as i32).clamp(0, SCREEN_W as i32) as u32;
    let y1 = (r.y + r.h as i32).clamp(0, SCREEN_H as i32) as u32;
    for y in y0..y1 {
        for x in x0..x1 {
            let i = px_index(x, y);
            pix[i..i + 3].copy_from_slice(&color);
        }
    }
}

fn darken(c: Rgb, by: u8) -> Rgb {
    [c[0].saturating_sub(by), c[1].saturating_sub(by), c[2].saturating_sub(by)]
}

fn draw_widget(pix: &mut [u8], r: Rect, color: Rgb, striped: bool) {
    fill_rect(pix, r, color);
    // 2px border
    let border = darken(color, 70);
    fill_rect(pix, Rect::new(r.x, r.y, r.w, 2), border);
    fill_rect(pix, Rect::new(r.x, r.y + r.h as i32 - 2, r.w, 2), border);
    fill_rect(pix, Rect::new(r.x, r.y, 2, r.h), border);
    fill_rect(pix, Rect::new(r.x + r.w as i32 - 2, r.y, 2, r.h), border);
    if striped && r.h > 16 {
        let stripe = darken(color, 45);
        let mut y = r.y + 6;
        while y + 3 < r.y + r.h as i32 - 6 {
            fill_rect(pix, Rect::new(r.x + 6, y, r.w.saturating_sub(12), 3), stripe);
            y += 9;
        }
    }
}

fn draw_placeholder(pix: &mut [u8], r: Rect) {
    fill_rect(pix, r, [208, 208, 208]);
    let border = [176, 176, 176];
    fill_rect(pix, Rect::new(r.x, r.y, r.w, 2), border);
    fill_rect(pix, Rect::new(r.x, r.y + r.h as i32 - 2, r.w, 2), border);
    fill_rect(pix, Rect::new(r.x, r.y, 2, r.h), border);
    fill_rect(pix, Rect::new(r.x + r.w as i32 - 2, r.y, 2, r.h), border);
}

/// pix = (from * (T - e) + pix * e + T/2) / T, integer per channel.
fn blend_from(pix: &mut [u8], from: &[u8], e: u64, t_total: u64) {
    debug_assert!(e < t_total);
    let (wn, wo) = (e, t_total - e);
    let half = t_total / 2;
    for (p, o) in pix.iter_mut().zip(from.iter()) {
        *p = ((u64::from(*o) * wo + u64::from(*p) * wn + half) / t_total) as u8;
    }
}

/// Loading overlay: white card with a clock-hand sweep completing one
/// turn per second. The hand is long and thick so consecutive frames at
/// camera rate differ over a wide region, never reading as steady.
fn draw_spinner(pix: &mut [u8], e_spin: u64) {
    let bx = (SCREEN_W - SPINNER_BOX) as i32 / 2;
    let by = (SCREEN_H - SPINNER_BOX) as i32 / 2;
    fill_rect(pix, Rect::new(bx, by, SPINNER_BOX, SPINNER_BOX), [250, 250, 250]);
    fill_rect(pix, Rect::new(bx, by, SPINNER_BOX, 2), [160, 160, 160]);
    fill_rect(pix, Rect::new(bx, by + SPINNER_BOX as i32 - 2, SPINNER_BOX, 2), [160, 160, 160]);
    fill_rect(pix, Rect::new(bx, by, 2, SPINNER_BOX), [160, 160, 160]);
    fill_rect(pix, Rect::new(bx + SPINNER_BOX as i32 - 2, by, 2, SPINNER_BOX), [160, 160, 160]);

    let cx = f64::from(SCREEN_W) / 2.0;
    let cy = f64::from(SCREEN_H) / 2.0;
    let theta = 2.0 * core::f64::consts::PI * (e_spin % 1000) as f64 / 1000.0;
    let (s, c) = (Float::sin(theta), Float::cos(theta));
    let tip = (cx + SPINNER_HAND_LEN * s, cy - SPINNER_HAND_LEN * c);

    // Rasterize the hand as every pixel within half-width of the segment.
    let reach = (SPINNER_HAND_LEN + SPINNER_HAND_HALF_W + 2.0) as i32;
    let x0 = (cx as i32 - reach).max(0);
    let x1 = (cx as i32 + reach).min(SCREEN_W as i32 - 1);
    let y0 = (cy as i32 - reach).max(0);
    let y1 = (cy as i32 + reach).min(SCREEN_H as i32 - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = dist_to_segment(x as f64 + 0.5, y as f64 + 0.5, cx, cy, tip.0, tip.1);
            if d <= SPINNER_HAND_HALF_W {
                let i = px_index(x as u32, y as u32);
                pix[i..i + 3].copy_from_slice(&[20, 20, 20]);
            }
        }
    }
}

fn dist_to_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (nx, ny) = (ax + t * dx, ay + t * dy);
    Float::sqrt((px - nx) * (px - nx) + (py - ny) * (py - ny))
}

/// Bottom progress strip: dark track, light fill proportional to load
/// progress. Present only while the screen is still coming up, so a
/// fully rendered frame never carries it.
fn draw_progress(pix: &mut [u8], e: u64, total: u64) {
    let y = (SCREEN_H - BAR_H) as i32;
    fill_rect(pix, Rect::new(0, y, SCREEN_W, BAR_H), [40, 40, 48]);
    let fill_w = (u64::from(SCREEN_W) * e / total) as u32;
    if fill_w > 0 {
        fill_rect(pix, Rect::new(0, y, fill_w, BAR_H), [90, 200, 250]);
    }
}

/// A scripted tap: at `at_ms`, aim at the settled center of `widget` on
/// whatever screen is current. Taps that land nowhere are recorded as
/// missed, exactly like a mistimed tap on a real device.
#[derive(Debug, Clone)]
pub struct ScriptEvent {
    pub at_ms: u64,
    pub widget: String,
}

#[derive(Debug)]
pub struct GeneratedScreencast {
    pub cast: Screencast,
    /// Ground truth for each frame, index-aligned with `cast.frames`.
    pub gt: Vec<GtState>,
    pub outcomes: Vec<(u64, TapOutcome)>,
}

/// Run a script against a fresh session and record the camera's view:
/// frames on the fps grid from launch until `tail_ms` past the last
/// event (or past launch for an empty script).
pub fn generate_screencast(
    app: &AppModel,
    cast_id: &str,
    script: &[ScriptEvent],
    fps: u32,
    tail_ms: u64,
) -> Result<GeneratedScreencast, SimError> {
    if fps == 0 {
        return Err(SimError::InvalidScript("fps must be positive"));
    }
    for pair in script.windows(2) {
        if pair[1].at_ms <= pair[0].at_ms {
            return Err(SimError::InvalidScript("event times must be strictly increasing"));
        }
    }
    let mut session = Session::new(app.clone())?;
    let end_ms = script.last().map_or(0, |e| e.at_ms) + tail_ms;
    let n_frames = (end_ms * u64::from(fps)) / 1000 + 1;

    let mut frames = Vec::with_capacity(n_frames as usize);
    let mut gt = Vec::with_capacity(n_frames as usize);
    let mut outcomes = Vec::with_capacity(script.len());
    let mut next_event = 0usize;
    for i in 0..n_frames {
        let t = i * 1000 / u64::from(fps);
        while next_event < script.len() && script[next_event].at_ms <= t {
            let ev = &script[next_event];
            let outcome = match session.widget_center(&ev.widget) {
                Some((x, y)) => session.tap(ev.at_ms, x, y),
                None => TapOutcome::Missed,
            };
            outcomes.push((ev.at_ms, outcome));
            next_event += 1;
        }
        frames.push(session.frame_at(t));
        gt.push(session.ground_truth(t));
    }

    Ok(GeneratedScreencast {
        cast: Screencast { id: cast_id.to_string(), frames, scroll_intervals: Vec::new() },
        gt,
        outcomes,
    })
}

const PALETTE: [Rgb; 10] = [
    [66, 133, 244],
    [219, 68, 55],
    [244, 180, 0],
    [15, 157, 88],
    [171, 71, 188],
    [0, 172, 193],
    [255, 112, 67],
    [158, 157, 36],
    [92, 107, 192],
    [240, 98, 146],
];

const BACKGROUNDS: [Rgb; 6] = [
    [250, 250, 250],
    [242, 245, 250],
    [252, 248, 240],
    [235, 240, 235],
    [248, 240, 246],
    [38, 42, 52],
];

/// Loading-behavior archetypes the random generator mixes. Every one is
/// built so that (a) no five consecutive camera frames before completion
/// read as steady, and (b) completion itself is a sharp visual change.
/// Slow fades therefore always carry drifting widgets, and implicit
/// content pops arrive less than five frame intervals apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Archetype {
    Fast,
    DriftFade,
    Spinner,
    Implicit,
}

fn random_timeline(
    rng: &mut ChaCha12Rng,
    archetype: Archetype,
    widgets: &[Widget],
) -> RenderTimeline {
    let mut tl = RenderTimeline::default();
    match archetype {
        Archetype::Fast => {
            tl.transition_ms = rng.gen_range(67..=166);
        }
        Archetype::DriftFade => {
            tl.transition_ms = rng.gen_range(334..=700);
            // The striped banner rides up from just above the bottom
            // edge, fully visible all the way. Even a 700ms fade moves
            // it 11px+ per camera frame, shifting its stripe bands out
            // of phase between consecutive frames.
            let banner = &widgets[0];
            let from = Rect::new(
                banner.bounds.x,
                (SCREEN_H as i32) - (banner.bounds.h as i32) - 12,
                banner.bounds.w,
                banner.bounds.h,
            );
            tl.widget_drift.insert(banner.id.clone(), from);
        }
        Archetype::Spinner => {
            tl.transition_ms = rng.gen_range(67..=166);
            tl.explicit_loading_ms = rng.gen_range(300..=700);
        }
        Archetype::Implicit => {
            tl.transition_ms = rng.gen_range(67..=133);
            // Pops spaced under five frame intervals so the gaps between
            // them can never register as a steady run.
            let mut delay = 0u64;
            let n = 2 + rng.gen_range(0..2.min(widgets.len().saturating_sub(1)) + 1);
            for w in widgets.iter().take(n.min(widgets.len())) {
                delay += rng.gen_range(60..=130);
                tl.implicit_delays.insert(w.id.clone(), delay);
            }
        }
    }
    tl
}

/// Generate a plausible app: a handful of screens with varied widget
/// layouts, loading behaviors drawn from the archetype mix, navigation
/// links forming a connected graph, and a rare crashing widget.
pub fn random_app(seed: u64, id: &str) -> AppModel {
    let mut rng = ChaCha12Rng::seed_from_u64(subseed(seed, id));
    let n_screens = rng.gen_range(3..=5);
    let mut screens = Vec::with_capacity(n_screens);

    for si in 0..n_screens {
        let background = BACKGROUNDS[rng.gen_range(0..BACKGROUNDS.len())];
        let mut widgets = Vec::new();

        // Banner: the big content block placeholders stand in for.
        widgets.push(Widget {
            id: format!("banner{si}"),
            bounds: Rect::new(10, 14 + rng.gen_range(0..10), 190, rng.gen_range(56..=72)),
            color: PALETTE[rng.gen_range(0..PALETTE.len())],
            action: TapAction::None,
            striped: true,
        });
        // Text rows.
        let rows = rng.gen_range(2..=4);
        for r in 0..rows {
            widgets.push(Widget {
                id: format!("row{si}_{r}"),
                bounds: Rect::new(
                    12,
                    104 + r * 44 + rng.gen_range(0..6) as i32,
                    rng.gen_range(150..=186),
                    rng.gen_range(26..=36),
                ),
                color: PALETTE[rng.gen_range(0..PALETTE.len())],
                action: TapAction::None,
                striped: rng.gen_bool(0.6),
            });
        }
        // Navigation buttons along the bottom; targets fixed up below.
        let n_nav = rng.gen_range(1..=2);
        for b in 0..n_nav {
            widgets.push(Widget {
                id: format!("nav{si}_{b}"),
                bounds: Rect::new(
                    14 + b as i32 * 100,
                    292 + rng.gen_range(0..8) as i32,
                    rng.gen_range(72..=88),
                    rng.gen_range(30..=40),
                ),
                color: PALETTE[rng.gen_range(0..PALETTE.len())],
                action: TapAction::None,
                striped: false,
            });
        }
        if rng.gen_bool(0.08) {
            widgets.push(Widget {
                id: format!("trap{si}"),
                bounds: Rect::new(168, 260, 30, 22),
                color: [120, 20, 20],
                action: TapAction::Crash,
                striped: false,
            });
        }

        let archetype = match rng.gen_range(0..100) {
            0..=29 => Archetype::Fast,
            30..=54 => Archetype::DriftFade,
            55..=79 => Archetype::Spinner,
            _ => Archetype::Implicit,
        };
        // Drift and implicit behavior attach to content, not nav buttons,
        // so scripted taps aren't starved on slow screens.
        let content_count = 1 + rows as usize;
        let timeline = random_timeline(&mut rng, archetype, &widgets[..content_count]);

        screens.push(Screen {
            id: format!("s{si}"),
            background,
            widgets,
            timeline,
        });
    }

    // Wire navigation into a ring with shortcuts so every screen is
    // reachable and walks don't dead-end.
    for si in 0..n_screens {
        let next = format!("s{}", (si + 1) % n_screens);
        let other = format!("s{}", rng.gen_range(0..n_screens));
        let ids: Vec<String> = screens[si]
            .widgets
            .iter()
            .filter(|w| w.id.starts_with("nav"))
            .map(|w| w.id.clone())
            .collect();
        for (bi, wid) in ids.iter().enumerate() {
            let target = if bi == 0 { next.clone() } else { other.clone() };
            let w = screens[si].widgets.iter_mut().find(|w| &w.id == wid).unwrap();
            w.action = TapAction::Navigate(target);
        }
    }

    AppModel {
        id: id.to_string(),
        screens,
        start_screen: "s0".to_string(),
        restart_timeline: RenderTimeline::fade(120),
    }
}

/// Walk the app like an impatient but not reckless user: wait for each
/// screen to finish plus a beat, then tap a random navigation button.
pub fn random_script(app: &AppModel, seed: u64, events: usize) -> Vec<ScriptEvent> {
    let mut rng = ChaCha12Rng::seed_from_u64(subseed(seed, &format!("script-{}", app.id)));
    let mut session = match Session::new(app.clone()) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    let mut script = Vec::with_capacity(events);
    for _ in 0..events {
        let total = session.timeline().total_ms();
        let t = session.phase_start_ms() + total + rng.gen_range(400..=900);
        let nav: Vec<String> = session
            .current_screen()
            .widgets
            .iter()
            .filter(|w| matches!(w.action, TapAction::Navigate(_)))
            .map(|w| w.id.clone())
            .collect();
        if nav.is_empty() {
            break;
        }
        let widget = nav[rng.gen_range(0..nav.len())].clone();
        let (x, y) = session.widget_center(&widget).unwrap();
        session.tap(t, x, y);
        script.push(ScriptEvent { at_ms: t, widget });
    }
    script
}

/// A suite app plus the scripted path a test driver follows through it.
#[derive(Debug, Clone)]
pub struct SuiteApp {
    pub app: AppModel,
    /// Widget ids to tap in order, one per screen along the path,
    /// ending on the final screen's crashing widget.
    pub trace: Vec<String>,
    pub kind: &'static str,
}

fn chain_app(
    id: &str,
    kind: &'static str,
    timelines: Vec<RenderTimeline>,
    decorate: impl Fn(usize, &mut Screen),
) -> SuiteApp {
    let n = timelines.len();
    let mut screens = Vec::with_capacity(n);
    for (si, timeline) in timelines.into_iter().enumerate() {
        let mut widgets = vec![Widget {
            id: format!("body{si}"),
            bounds: Rect::new(15, 30, 180, 90),
            color: PALETTE[(si * 3 + 1) % PALETTE.len()],
            action: TapAction::None,
            striped: true,
        }];
        if si + 1 < n {
            widgets.push(Widget {
                id: format!("next{si}"),
                bounds: Rect::new(60, 296, 90, 36),
                color: PALETTE[(si * 2) % PALETTE.len()],
                action: TapAction::Navigate(format!("s{}", si + 1)),
                striped: false,
            });
        } else {
            // the planted bug: a crashing widget on the final screen,
            // so a completed trace ends in a reproducible crash
            widgets.push(Widget {
                id: "trap".to_string(),
                bounds: Rect::new(150, 250, 40, 28),
                color: [120, 20, 20],
                action: TapAction::Crash,
                striped: false,
            });
        }
        let mut screen = Screen {
            id: format!("s{si}"),
            background: BACKGROUNDS[si % 3],
            widgets,
            timeline,
        };
        decorate(si, &mut screen);
        screens.push(screen);
    }
    let mut trace: Vec<String> = (0..n - 1).map(|si| format!("next{si}")).collect();
    trace.push("trap".to_string());
    SuiteApp {
        app: AppModel {
            id: id.to_string(),
            screens,
            start_screen: "s0".to_string(),
            restart_timeline: RenderTimeline::fade(120),
        },
        trace,
        kind,
    }
}

/// Fade where the screen's striped body panel rides up 250px into place
/// at full opacity, carrying the optional tap target with it. The panel
/// is large and mostly on-screen from the first frame, and its stripes
/// shift 10px+ per camera interval, so every pair across the transition
/// reads unsteady; the widgets take no taps until they settle.
fn drift_timeline(transition_ms: u64, si: usize, target: Option<&str>) -> RenderTimeline {
    let mut tl = RenderTimeline::fade(transition_ms);
    tl.widget_drift.insert(format!("body{si}"), Rect::new(15, 30 + 250, 180, 90));
    if let Some(id) = target {
        tl.widget_drift.insert(id.to_string(), Rect::new(60, 296 + 80, 90, 36));
    }
    tl
}

fn spinner_timeline(transition_ms: u64, explicit_ms: u64) -> RenderTimeline {
    RenderTimeline { transition_ms, explicit_loading_ms: explicit_ms, ..RenderTimeline::default() }
}

fn implicit_timeline(transition_ms: u64, pairs: &[(&str, u64)]) -> RenderTimeline {
    let mut tl = RenderTimeline::fade(transition_ms);
    for (id, d) in pairs {
        tl.implicit_delays.insert(id.to_string(), *d);
    }
    tl
}

/// Twelve fixed apps spanning the loading-behavior mix: three where the
/// tap target drifts in during a long fade, three spinner screens, two
/// implicit loaders whose tap target arrives late, two fast ones, one
/// mixing all behaviors along the path, and one whose decorative banner
/// loads for well over a second while the controls are ready early.
pub fn standard_suite() -> Vec<SuiteApp> {
    let mut suite = Vec::new();

    for (i, fade) in [500u64, 600, 700].into_iter().enumerate() {
        let id = format!("drift-{i}");
        suite.push(chain_app(&id, "drift", (0..4).map(|si| {
            if si == 0 {
                RenderTimeline::fade(100)
            } else if si < 3 {
                drift_timeline(fade, si, Some(&format!("next{si}")))
            } else {
                // last screen has no next button; only its body drifts
                drift_timeline(fade, si, None)
            }
        }).collect(), |_, _| {}));
    }

    for (i, explicit) in [400u64, 550, 700].into_iter().enumerate() {
        let id = format!("spinner-{i}");
        suite.push(chain_app(&id, "spinner", (0..4).map(|si| {
            if si == 0 {
                RenderTimeline::fade(100)
            } else {
                spinner_timeline(100, explicit)
            }
        }).collect(), |_, _| {}));
    }

    for (i, delay) in [300u64, 450].into_iter().enumerate() {
        let id = format!("implicit-{i}");
        suite.push(chain_app(&id, "implicit", (0..4).map(|si| {
            if si == 0 {
                RenderTimeline::fade(100)
            } else if si < 3 {
                implicit_timeline(
                    100,
                    &[(&format!("body{si}"), delay / 3), (&format!("next{si}"), delay)],
                )
            } else {
                implicit_timeline(100, &[("body3", delay)])
            }
        }).collect(), |_, _| {}));
    }

    for (i, fade) in [100u64, 133].into_iter().enumerate() {
        let id = format!("fast-{i}");
        suite.push(chain_app(&id, "fast", (0..4).map(|_| RenderTimeline::fade(fade)).collect(), |_, _| {}));
    }

    suite.push(chain_app("mixed-0", "mixed", vec![
        RenderTimeline::fade(100),
        drift_timeline(550, 1, Some("next1")),
        spinner_timeline(100, 500),
        implicit_timeline(100, &[("next3", 350)]),
        RenderTimeline::fade(120),
    ], |_, _| {}));

    // Controls are live once the 133ms fade lands; only the banner keeps
    // loading, pushing completion past the scheduler's forced-wait cap.
    suite.push(chain_app("slow-banner", "slow-decorative", (0..4).map(|si| {
        if si == 0 {
            RenderTimeline::fade(100)
        } else {
            implicit_timeline(133, &[(&format!("body{si}"), 1200)])
        }
    }).collect(), |_, _| {}));

    suite
}

/// Totals here all sit well inside a 200ms step (mod 200 at most 133),
/// so a fixed 200ms throttler always overshoots a completion by 67ms or
/// more, far above the one camera interval an adaptive one needs to
/// spot it.
pub const EXPLORATION_TOTALS: [u64; 8] = [433, 467, 533, 633, 667, 733, 833, 867];

/// Eight apps for budgeted exploration runs, one per pinned total. Each
/// uses the random generator's layout style with its loading behavior
/// re-pinned so every screen of app `i` completes at EXPLORATION_TOTALS[i].
pub fn exploration_suite(seed: u64) -> Vec<AppModel> {
    EXPLORATION_TOTALS
        .iter()
        .enumerate()
        .map(|(i, &total)| {
            let mut app = random_app(seed, &format!("explore-{i}"));
            for screen in app.screens.iter_mut() {
                screen.timeline = match i % 3 {
                    // fade + spinner filling the whole load
                    0 => spinner_timeline(100, total - 100),
                    // long drift fade, then implicit pops to the total
                    1 => {
                        let mut tl = RenderTimeline::fade(total - 133);
                        let banner = &screen.widgets[0];
                        let from = Rect::new(
                            banner.bounds.x,
                            (SCREEN_H as i32) - (banner.bounds.h as i32) - 12,
                            banner.bounds.w,
                            banner.bounds.h,
                        );
                        tl.widget_drift.insert(banner.id.clone(), from);
                        let row = screen.widgets[1].id.clone();
                        tl.implicit_delays.insert(row, 133);
                        tl
                    }
                    // short fade, spinner, then a final implicit pop
                    _ => {
                        let mut tl = spinner_timeline(100, total - 220);
                        let banner = screen.widgets[0].id.clone();
                        tl.implicit_delays.insert(banner, 120);
                        tl
                    }
                };
                debug_assert_eq!(screen.timeline.total_ms(), total);
            }
            app
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{rgb_to_luminance, ssim, Frame};
    use crate::segmenter::{segment, SegmenterConfig};

    fn luma_ssim(a: &Frame, b: &Frame) -> f64 {
        ssim(&rgb_to_luminance(a), &rgb_to_luminance(b)).unwrap()
    }

    fn two_screen_app() -> AppModel {
        AppModel {
            id: "two".to_string(),
            screens: vec![
                Screen {
                    id: "home".to_string(),
                    background: [250, 250, 250],
                    widgets: vec![Widget {
                        id: "go".to_string(),
                        bounds: Rect::new(60, 200, 90, 40),
                        color: [66, 133, 244],
                        action: TapAction::Navigate("detail".to_string()),
                        striped: false,
                    }],
                    timeline: RenderTimeline::fade(100),
                },
                Screen {
                    id: "detail".to_string(),
                    background: [242, 245, 250],
                    widgets: vec![Widget {
                        id: "content".to_string(),
                        bounds: Rect::new(15, 40, 180, 120),
                        color: [15, 157, 88],
                        action: TapAction::None,
                        striped: true,
                    }],
                    timeline: spinner_timeline(100, 400),
                },
            ],
            start_screen: "home".to_string(),
            restart_timeline: RenderTimeline::fade(120),
        }
    }

    #[test]
    fn validate_catches_broken_references() {
        let mut app = two_screen_app();
        app.start_screen = "nope".to_string();
        assert_eq!(app.validate(), Err(SimError::UnknownScreen("nope".to_string())));

        let mut app = two_screen_app();
        app.screens[0].widgets[0].action = TapAction::Navigate("gone".to_string());
        assert_eq!(app.validate(), Err(SimError::UnknownScreen("gone".to_string())));

        let mut app = two_screen_app();
        app.screens[1].timeline.implicit_delays.insert("ghost".to_string(), 100);
        assert!(matches!(app.validate(), Err(SimError::UnknownWidget { .. })));

        assert_eq!(two_screen_app().validate(), Ok(()));
    }

    #[test]
    fn ground_truth_walks_the_phases() {
        let mut app = two_screen_app();
        app.screens[0].timeline = implicit_timeline(100, &[("go", 200)]);
        let session = Session::new(app).unwrap();
        assert_eq!(session.ground_truth(0), GtState::Transiting);
        assert_eq!(session.ground_truth(99), GtState::Transiting);
        assert_eq!(session.ground_truth(100), GtState::ImplicitLoading);
        assert_eq!(session.ground_truth(299), GtState::ImplicitLoading);
        assert_eq!(session.ground_truth(300), GtState::FullyRendered);
    }

    #[test]
    fn fully_rendered_frames_are_static() {
        let session = Session::new(two_screen_app()).unwrap();
        let a = session.frame_at(5_000);
        let b = session.frame_at(6_000);
        assert_eq!(a.pixels, b.pixels);
        assert_eq!(luma_ssim(&a, &b), 1.0);
    }

    #[test]
    fn progress_strip_marks_every_loading_frame() {
        let mut app = two_screen_app();
        app.screens[0].timeline = spinner_timeline(100, 400);
        let session = Session::new(app).unwrap();
        let strip = |f: &Frame| {
            let y = (SCREEN_H - BAR_H / 2) as usize;
            f.pixels[(y * SCREEN_W as usize) * 3..][..30].to_vec()
        };
        let loading = session.frame_at(250);
        let done = session.frame_at(500);
        assert_ne!(strip(&loading), strip(&done));
        assert_eq!(session.ground_truth(250), GtState::ExplicitLoading);
        assert_eq!(session.ground_truth(500), GtState::FullyRendered);
    }

    #[test]
    fn spinner_keeps_consecutive_frames_unsteady() {
        let mut app = two_screen_app();
        app.screens[0].timeline = spinner_timeline(0, 2_000);
        let session = Session::new(app).unwrap();
        // camera pairs at 30fps across the spinner phase
        for i in 1..30u64 {
            let a = session.frame_at(i * 1000 / 30);
            let b = session.frame_at((i + 1) * 1000 / 30);
            let s = luma_ssim(&a, &b);
            assert!(s < 0.99, "spinner pair {i} read steady: {s}");
        }
    }

    #[test]
    fn taps_follow_loading_semantics() {
        let mut session = Session::new(two_screen_app()).unwrap();
        // during the home fade the button is present and live
        assert_eq!(
            session.tap(50, 105, 220),
            TapOutcome::Navigated { to: "detail".to_string() }
        );
        // detail: fade 100 + spinner 400; spinner swallows input
        assert_eq!(session.tap(50 + 200, 100, 100), TapOutcome::Missed);
        // after the spinner, empty space and decorative content both miss
        assert_eq!(session.tap(50 + 600, 100, 100), TapOutcome::Missed);
        assert_eq!(session.tap(50 + 700, 5, 5), TapOutcome::Missed);
    }

    #[test]
    fn implicit_widget_rejects_taps_until_it_arrives() {
        let mut app = two_screen_app();
        app.screens[0].timeline = implicit_timeline(100, &[("go", 300)]);
        let mut session = Session::new(app).unwrap();
        assert_eq!(session.tap(250, 105, 220), TapOutcome::Missed);
        assert_eq!(
            session.tap(450, 105, 220),
            TapOutcome::Navigated { to: "detail".to_string() }
        );
    }

    #[test]
    fn drifting_widget_misses_until_settled() {
        let mut app = two_screen_app();
        // "go" settles at x=60; it slides in from 120px left
        let mut tl = RenderTimeline::fade(500);
        tl.widget_drift.insert("go".to_string(), Rect::new(-60, 200, 90, 40));
        app.screens[0].timeline = tl;
        let mut session = Session::new(app).unwrap();
        // halfway through the fade it is drawn at x=0..90 at full
        // opacity, riding above the blend rather than fading with it
        assert_eq!(session.frame_at(250).rgb_at(45, 220), [66, 133, 244]);
        // in flight it takes no taps, neither at the settled center nor
        // at the spot it is currently drawn
        assert_eq!(session.tap(250, 105, 220), TapOutcome::Missed);
        assert_eq!(session.tap(490, 100, 220), TapOutcome::Missed);
        assert_eq!(
            session.tap(500, 105, 220),
            TapOutcome::Navigated { to: "detail".to_string() }
        );
    }

    #[test]
    fn crash_restarts_on_the_start_screen() {
        let mut app = two_screen_app();
        app.screens[0].widgets.push(Widget {
            id: "trap".to_string(),
            bounds: Rect::new(10, 300, 30, 30),
            color: [120, 20, 20],
            action: TapAction::Crash,
            striped: false,
        });
        let mut session = Session::new(app).unwrap();
        assert_eq!(session.tap(600, 20, 310), TapOutcome::Crashed);
        assert_eq!(session.crashes().len(), 1);
        assert_eq!(session.crashes()[0].widget_id, "trap");
        assert_eq!(session.current_screen().id, "home");
        // restart re-renders under the restart timeline
        assert_eq!(session.ground_truth(650), GtState::Transiting);
        assert_eq!(session.ground_truth(600 + 120), GtState::FullyRendered);
    }

    #[test]
    fn screencast_covers_script_plus_tail() {
        let app = two_screen_app();
        let script = vec![ScriptEvent { at_ms: 700, widget: "go".to_string() }];
        let out = generate_screencast(&app, "t", &script, 30, 1000).unwrap();
        assert_eq!(out.cast.frames.len(), (1700 * 30 / 1000 + 1) as usize);
        assert_eq!(out.outcomes.len(), 1);
        assert!(matches!(out.outcomes[0].1, TapOutcome::Navigated { .. }));
        assert_eq!(out.gt.len(), out.cast.frames.len());
        // frame timestamps ride the grid
        assert_eq!(out.cast.frames[3].timestamp_ms, 100);
    }

    #[test]
    fn screencast_rejects_unordered_scripts() {
        let app = two_screen_app();
        let script = vec![
            ScriptEvent { at_ms: 500, widget: "go".to_string() },
            ScriptEvent { at_ms: 500, widget: "go".to_string() },
        ];
        assert!(matches!(
            generate_screencast(&app, "t", &script, 30, 100),
            Err(SimError::InvalidScript(_))
        ));
    }

    #[test]
    fn random_apps_validate_and_vary() {
        let a = random_app(7, "app-1");
        let b = random_app(7, "app-2");
        assert_eq!(a.validate(), Ok(()));
        assert_eq!(b.validate(), Ok(()));
        assert_eq!(a.screens[0].id, "s0");
        // same seed, same id -> identical; different id -> different layout
        let a2 = random_app(7, "app-1");
        assert_eq!(a.screens.len(), a2.screens.len());
        assert_eq!(a.screens[0].widgets[0].bounds, a2.screens[0].widgets[0].bounds);
        let differs = a.screens.len() != b.screens.len()
            || a.screens[0].widgets[0].bounds != b.screens[0].widgets[0].bounds
            || a.screens[0].background != b.screens[0].background;
        assert!(differs);
    }

    #[test]
    fn random_scripts_walk_navigation() {
        let app = random_app(11, "walker");
        let script = random_script(&app, 11, 6);
        assert!(!script.is_empty());
        for pair in script.windows(2) {
            assert!(pair[0].at_ms < pair[1].at_ms);
        }
        let out = generate_screencast(&app, "walk", &script, 30, 800).unwrap();
        let navigated = out
            .outcomes
            .iter()
            .filter(|(_, o)| matches!(o, TapOutcome::Navigated { .. }))
            .count();
        assert!(navigated >= script.len() / 2, "only {navigated} taps landed");
    }

    #[test]
    fn suite_has_the_required_mix() {
        let suite = standard_suite();
        assert!(suite.len() >= 12);
        for s in &suite {
            assert_eq!(s.app.validate(), Ok(()), "{} invalid", s.app.id);
            assert!(!s.trace.is_empty());
        }
        assert!(suite.iter().filter(|s| s.kind == "drift").count() >= 3);
        let slow = suite.iter().find(|s| s.kind == "slow-decorative").unwrap();
        let max_total = slow
            .app
            .screens
            .iter()
            .map(|s| s.timeline.total_ms())
            .max()
            .unwrap();
        assert!(max_total > 1000, "slow app peaks at {max_total}ms");
    }

    #[test]
    fn exploration_suite_pins_screen_totals() {
        let apps = exploration_suite(3);
        assert_eq!(apps.len(), 8);
        for (app, &total) in apps.iter().zip(EXPLORATION_TOTALS.iter()) {
            assert_eq!(app.validate(), Ok(()));
            for s in &app.screens {
                assert_eq!(s.timeline.total_ms(), total, "{}/{}", app.id, s.id);
            }
            // fixed 200ms stepping overshoots by 200 - r >= 67ms
            assert!((33..=133).contains(&(total % 200)));
        }
    }

    /// End-to-end label agreement: segment a generated screencast and
    /// compare group labels against ground truth frame by frame.
    #[test]
    fn segmenter_agrees_with_ground_truth() {
        let mut agree = 0usize;
        let mut total = 0usize;
        for suite_app in standard_suite().iter().take(6) {
            let mut t = 400u64;
            let script: Vec<ScriptEvent> = suite_app
                .trace
                .iter()
                .map(|w| {
                    let ev = ScriptEvent { at_ms: t, widget: w.clone() };
                    t += 1200;
                    ev
                })
                .collect();
            let out =
                generate_screencast(&suite_app.app, &suite_app.app.id, &script, 30, 1200).unwrap();
            let cfg = SegmenterConfig::default();
            let groups = segment(&out.cast.frames, &cfg).unwrap();
            for g in groups {
                for i in g.start..g.end {
                    total += 1;
                    if g.label == out.gt[i].label() {
                        agree += 1;
                    }
                }
            }
        }
        let rate = agree as f64 / total as f64;
        assert!(rate >= 0.95, "label agreement {rate:.3} below 0.95");
    }
}

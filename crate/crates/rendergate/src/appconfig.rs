//! Human-editable app descriptions: screens, widgets, render timelines,
//! and scripted crash traces in one TOML file.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rendergate_core::sim::{
    AppModel, Rect, RenderTimeline, Screen, SimError, TapAction, Widget,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialize: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid app: {0}")]
    Invalid(#[from] SimError),
    #[error("widget {widget:?}: bad action {action:?} (want none, crash, or nav:<screen>)")]
    BadAction { widget: String, action: String },
    #[error("bounds for {widget:?} have negative size")]
    BadBounds { widget: String },
    #[error("trace {trace:?} step {step:?} names no widget in the app")]
    UnknownTraceStep { trace: String, step: String },
}

/// A scripted widget path through the app, usually ending on a crash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedTrace {
    pub name: String,
    pub steps: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AppFile {
    id: String,
    start_screen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    restart: Option<TimelineCfg>,
    screens: Vec<ScreenCfg>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    traces: Vec<TraceCfg>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScreenCfg {
    id: String,
    background: [u8; 3],
    #[serde(default, skip_serializing_if = "TimelineCfg::is_instant")]
    timeline: TimelineCfg,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    widgets: Vec<WidgetCfg>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct TimelineCfg {
    #[serde(default, skip_serializing_if = "is_zero")]
    transition_ms: u64,
    #[serde(default, skip_serializing_if = "is_zero")]
    explicit_loading_ms: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    implicit_delays: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    widget_drift: BTreeMap<String, [i64; 4]>,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl TimelineCfg {
    fn is_instant(&self) -> bool {
        self.transition_ms == 0
            && self.explicit_loading_ms == 0
            && self.implicit_delays.is_empty()
            && self.widget_drift.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WidgetCfg {
    id: String,
    /// x, y, width, height in pixels.
    bounds: [i64; 4],
    color: [u8; 3],
    #[serde(default = "action_none", skip_serializing_if = "is_none_action")]
    action: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    striped: bool,
}

fn action_none() -> String {
    "none".to_owned()
}

fn is_none_action(a: &String) -> bool {
    a == "none"
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceCfg {
    name: String,
    steps: Vec<String>,
}

fn rect_of(widget: &str, b: [i64; 4]) -> Result<Rect, AppConfigError> {
    if b[2] < 0 || b[3] < 0 {
        return Err(AppConfigError::BadBounds { widget: widget.to_owned() });
    }
    Ok(Rect::new(b[0] as i32, b[1] as i32, b[2] as u32, b[3] as u32))
}

fn rect_cfg(r: &Rect) -> [i64; 4] {
    [i64::from(r.x), i64::from(r.y), i64::from(r.w), i64::from(r.h)]
}

fn timeline_of(screen: &str, cfg: &TimelineCfg) -> Result<RenderTimeline, AppConfigError> {
    let mut widget_drift = BTreeMap::new();
    for (widget, b) in &cfg.widget_drift {
        widget_drift.insert(widget.clone(), rect_of(&format!("{screen}/{widget}"), *b)?);
    }
    Ok(RenderTimeline {
        transition_ms: cfg.transition_ms,
        explicit_loading_ms: cfg.explicit_loading_ms,
        implicit_delays: cfg.implicit_delays.clone(),
        widget_drift,
    })
}

fn timeline_cfg(t: &RenderTimeline) -> TimelineCfg {
    TimelineCfg {
        transition_ms: t.transition_ms,
        explicit_loading_ms: t.explicit_loading_ms,
        implicit_delays: t.implicit_delays.clone(),
        widget_drift: t.widget_drift.iter().map(|(k, r)| (k.clone(), rect_cfg(r))).collect(),
    }
}

fn action_of(widget: &str, action: &str) -> Result<TapAction, AppConfigError> {
    match action {
        "none" => Ok(TapAction::None),
        "crash" => Ok(TapAction::Crash),
        other => match other.strip_prefix("nav:") {
            Some(target) if !target.is_empty() => Ok(TapAction::Navigate(target.to_owned())),
            _ => Err(AppConfigError::BadAction {
                widget: widget.to_owned(),
                action: action.to_owned(),
            }),
        },
    }
}

fn action_cfg(action: &TapAction) -> String {
    match action {
        TapAction::None => "none".to_owned(),
        TapAction::Crash => "crash".to_owned(),
        TapAction::Navigate(target) => format!("nav:{target}"),
    }
}

/// Parse an app description, validating cross-references the same way the
/// simulator does plus that every trace step names a real widget.
pub fn parse_app(text: &str) -> Result<(AppModel, Vec<NamedTrace>), AppConfigError> {
    let file: AppFile = toml::from_str(text)?;
    let mut screens = Vec::with_capacity(file.screens.len());
    for sc in &file.screens {
        let mut widgets = Vec::with_capacity(sc.widgets.len());
        for wc in &sc.widgets {
            widgets.push(Widget {
                id: wc.id.clone(),
                bounds: rect_of(&wc.id, wc.bounds)?,
                color: wc.color,
                action: action_of(&wc.id, &wc.action)?,
                striped: wc.striped,
            });
        }
        screens.push(Screen {
            id: sc.id.clone(),
            background: sc.background,
            widgets,
            timeline: timeline_of(&sc.id, &sc.timeline)?,
        });
    }
    let app = AppModel {
        id: file.id,
        screens,
        start_screen: file.start_screen,
        restart_timeline: file
            .restart
            .as_ref()
            .map(|t| timeline_of("restart", t))
            .transpose()?
            .unwrap_or_default(),
    };
    app.validate()?;

    let traces: Vec<NamedTrace> = file
        .traces
        .into_iter()
        .map(|t| NamedTrace { name: t.name, steps: t.steps })
        .collect();
    for trace in &traces {
        for step in &trace.steps {
            if !app.screens.iter().any(|s| s.widget(step).is_some()) {
                return Err(AppConfigError::UnknownTraceStep {
                    trace: trace.name.clone(),
                    step: step.clone(),
                });
            }
        }
    }
    Ok((app, traces))
}

pub fn render_app(app: &AppModel, traces: &[NamedTrace]) -> Result<String, AppConfigError> {
    let file = AppFile {
        id: app.id.clone(),
        start_screen: app.start_screen.clone(),
        restart: if app.restart_timeline.total_ms() == 0
            && app.restart_timeline.widget_drift.is_empty()
        {
            None
        } else {
            Some(timeline_cfg(&app.restart_timeline))
        },
        screens: app
            .screens
            .iter()
            .map(|s| ScreenCfg {
                id: s.id.clone(),
                background: s.background,
                timeline: timeline_cfg(&s.timeline),
                widgets: s
                    .widgets
                    .iter()
                    .map(|w| WidgetCfg {
                        id: w.id.clone(),
                        bounds: rect_cfg(&w.bounds),
                        color: w.color,
                        action: action_cfg(&w.action),
                        striped: w.striped,
                    })
                    .collect(),
            })
            .collect(),
        traces: traces
            .iter()
            .map(|t| TraceCfg { name: t.name.clone(), steps: t.steps.clone() })
            .collect(),
    };
    Ok(toml::to_string_pretty(&file)?)
}

pub fn load_app(path: &Path) -> Result<(AppModel, Vec<NamedTrace>), AppConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|source| AppConfigError::Io { path: path.to_path_buf(), source })?;
    parse_app(&text)
}

pub fn save_app(path: &Path, app: &AppModel, traces: &[NamedTrace]) -> Result<(), AppConfigError> {
    let text = render_app(app, traces)?;
    fs::write(path, text).map_err(|source| AppConfigError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rendergate_core::sim::standard_suite;

    #[test]
    fn suite_apps_survive_the_round_trip() {
        for suite in standard_suite() {
            let traces =
                vec![NamedTrace { name: format!("{}-crash", suite.app.id), steps: suite.trace.clone() }];
            let text = render_app(&suite.app, &traces).unwrap();
            let (app, back_traces) = parse_app(&text).unwrap();
            assert_eq!(app.id, suite.app.id);
            assert_eq!(app.start_screen, suite.app.start_screen);
            assert_eq!(app.screens.len(), suite.app.screens.len());
            for (a, b) in app.screens.iter().zip(&suite.app.screens) {
                assert_eq!(a.id, b.id);
                assert_eq!(a.background, b.background);
                assert_eq!(a.timeline.transition_ms, b.timeline.transition_ms);
                assert_eq!(a.timeline.explicit_loading_ms, b.timeline.explicit_loading_ms);
                assert_eq!(a.timeline.implicit_delays, b.timeline.implicit_delays);
                assert_eq!(a.timeline.widget_drift, b.timeline.widget_drift);
                assert_eq!(a.widgets.len(), b.widgets.len());
                for (wa, wb) in a.widgets.iter().zip(&b.widgets) {
                    assert_eq!(wa.id, wb.id);
                    assert_eq!(wa.bounds, wb.bounds);
                    assert_eq!(wa.color, wb.color);
                    assert_eq!(wa.action, wb.action);
                    assert_eq!(wa.striped, wb.striped);
                }
            }
            assert_eq!(back_traces, traces);
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let text = r#"
id = "mini"
start_screen = "only"

[[screens]]
id = "only"
background = [255, 255, 255]

[[screens.widgets]]
id = "button"
bounds = [10, 10, 50, 20]
color = [0, 0, 0]
"#;
        let (app, traces) = parse_app(text).unwrap();
        assert!(traces.is_empty());
        let screen = &app.screens[0];
        assert_eq!(screen.timeline.total_ms(), 0);
        assert_eq!(screen.widgets[0].action, TapAction::None);
        assert!(!screen.widgets[0].striped);
    }

    #[test]
    fn bad_references_are_refused() {
        let nav_nowhere = r#"
id = "broken"
start_screen = "only"

[[screens]]
id = "only"
background = [255, 255, 255]

[[screens.widgets]]
id = "button"
bounds = [10, 10, 50, 20]
color = [0, 0, 0]
action = "nav:missing"
"#;
        assert!(matches!(parse_app(nav_nowhere), Err(AppConfigError::Invalid(_))));

        let bad_action = nav_nowhere.replace("nav:missing", "launch");
        assert!(matches!(parse_app(&bad_action), Err(AppConfigError::BadAction { .. })));

        let ghost_trace = format!(
            "{}\n[[traces]]\nname = \"t\"\nsteps = [\"ghost\"]\n",
            nav_nowhere.replace("action = \"nav:missing\"", "")
        );
        assert!(matches!(
            parse_app(&ghost_trace),
            Err(AppConfigError::UnknownTraceStep { .. })
        ));
    }
}

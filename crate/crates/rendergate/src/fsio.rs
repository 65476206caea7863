//! On-disk formats: screencast directories (PNG frames plus a line
//! manifest), dataset manifests, model checkpoints, and whole training
//! corpora.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rendergate_core::classifier::{preprocess, ClassifierError, RenderNet, TrainExample};
use rendergate_core::imaging::{Frame, ImagingError};
use rendergate_core::segmenter::{DatasetEntry, LabeledDataset, Screencast};
use rendergate_core::sim::GtState;
use rendergate_core::RenderLabel;
use thiserror::Error;

pub const CAST_MANIFEST: &str = "cast.txt";
pub const GT_FILE: &str = "gt.txt";
pub const DATASET_FILE: &str = "dataset.txt";
pub const CASTS_DIR: &str = "casts";
pub const APPS_DIR: &str = "apps";

#[derive(Debug, Error)]
pub enum FsioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {what}")]
    Malformed { path: PathBuf, what: String },
    #[error("{path}: {what}")]
    BadImage { path: PathBuf, what: String },
    #[error(transparent)]
    BadFrame(#[from] ImagingError),
    #[error("checkpoint: {0}")]
    BadCheckpoint(#[from] ClassifierError),
    #[error("dataset references screencast {cast} frame {index}, cast has {frames} frames")]
    FrameOutOfRange { cast: String, index: usize, frames: usize },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> FsioError + '_ {
    move |source| FsioError::Io { path: path.to_path_buf(), source }
}

fn malformed(path: &Path, what: impl Into<String>) -> FsioError {
    FsioError::Malformed { path: path.to_path_buf(), what: what.into() }
}

fn gt_name(state: GtState) -> &'static str {
    match state {
        GtState::Transiting => "transiting",
        GtState::ExplicitLoading => "explicit-loading",
        GtState::ImplicitLoading => "implicit-loading",
        GtState::FullyRendered => "fully-rendered",
    }
}

fn parse_gt(name: &str) -> Option<GtState> {
    match name {
        "transiting" => Some(GtState::Transiting),
        "explicit-loading" => Some(GtState::ExplicitLoading),
        "implicit-loading" => Some(GtState::ImplicitLoading),
        "fully-rendered" => Some(GtState::FullyRendered),
        _ => None,
    }
}

fn frame_file(i: usize) -> String {
    format!("frame_{i:04}.png")
}

/// Write one screencast as a directory: numbered PNGs, a `cast.txt`
/// manifest (id, frame files with timestamps, scroll intervals), and an
/// optional `gt.txt` with one rendering state per frame.
pub fn save_screencast(
    dir: &Path,
    cast: &Screencast,
    gt: Option<&[GtState]>,
) -> Result<(), FsioError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut manifest = format!("screencast v1 {}\n", cast.id);
    for (i, frame) in cast.frames.iter().enumerate() {
        let file = frame_file(i);
        let path = dir.join(&file);
        let img = image::RgbImage::from_raw(
            frame.width as u32,
            frame.height as u32,
            frame.pixels.clone(),
        )
        .expect("frame pixel length is validated at construction");
        img.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|e| FsioError::BadImage { path: path.clone(), what: e.to_string() })?;
        manifest += &format!("frame {file} {}\n", frame.timestamp_ms);
    }
    for &(start, end) in &cast.scroll_intervals {
        manifest += &format!("scroll {start} {end}\n");
    }
    fs::write(dir.join(CAST_MANIFEST), manifest).map_err(io_at(&dir.join(CAST_MANIFEST)))?;
    if let Some(states) = gt {
        let mut text = String::new();
        for s in states {
            text += gt_name(*s);
            text.push('\n');
        }
        fs::write(dir.join(GT_FILE), text).map_err(io_at(&dir.join(GT_FILE)))?;
    }
    Ok(())
}

/// Read a screencast directory back; ground truth comes along when a
/// `gt.txt` is present and covers every frame.
pub fn load_screencast(dir: &Path) -> Result<(Screencast, Option<Vec<GtState>>), FsioError> {
    let manifest_path = dir.join(CAST_MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(io_at(&manifest_path))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let mut head = header.split_whitespace();
    let id = match (head.next(), head.next(), head.next(), head.next()) {
        (Some("screencast"), Some("v1"), Some(id), None) => id.to_owned(),
        _ => return Err(malformed(&manifest_path, format!("bad header {header:?}"))),
    };

    let mut frames = Vec::new();
    let mut scroll_intervals = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            ["frame", file, ts] => {
                let ts: u64 = ts
                    .parse()
                    .map_err(|_| malformed(&manifest_path, format!("bad timestamp in {line:?}")))?;
                let path = dir.join(file);
                let img = image::open(&path)
                    .map_err(|e| FsioError::BadImage { path: path.clone(), what: e.to_string() })?
                    .to_rgb8();
                let (w, h) = img.dimensions();
                frames.push(Frame::new(w as usize, h as usize, img.into_raw(), ts)?);
            }
            ["scroll", start, end] => {
                let parse = |s: &str| {
                    s.parse::<u64>()
                        .map_err(|_| malformed(&manifest_path, format!("bad interval in {line:?}")))
                };
                scroll_intervals.push((parse(start)?, parse(end)?));
            }
            _ => return Err(malformed(&manifest_path, format!("unrecognized line {line:?}"))),
        }
    }

    let gt_path = dir.join(GT_FILE);
    let gt = if gt_path.exists() {
        let text = fs::read_to_string(&gt_path).map_err(io_at(&gt_path))?;
        let states: Vec<GtState> = text
            .lines()
            .map(|l| parse_gt(l.trim()).ok_or_else(|| malformed(&gt_path, format!("bad state {l:?}"))))
            .collect::<Result<_, _>>()?;
        if states.len() != frames.len() {
            return Err(malformed(
                &gt_path,
                format!("{} states for {} frames", states.len(), frames.len()),
            ));
        }
        Some(states)
    } else {
        None
    };

    Ok((Screencast { id, frames, scroll_intervals }, gt))
}

pub fn save_dataset(path: &Path, dataset: &LabeledDataset) -> Result<(), FsioError> {
    fs::write(path, dataset.manifest()).map_err(io_at(path))
}

/// Parse the line-oriented dataset manifest (`entry <cast> <frame> <label>
/// <group>` under a `dataset v1` header).
pub fn load_dataset(path: &Path) -> Result<LabeledDataset, FsioError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let mut lines = text.lines();
    if lines.next() != Some("dataset v1") {
        return Err(malformed(path, "missing `dataset v1` header"));
    }
    let mut entries = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            ["entry", cast, frame, label, group] => {
                let label = match *label {
                    "full" => RenderLabel::FullyRendered,
                    "partial" => RenderLabel::PartiallyRendered,
                    other => return Err(malformed(path, format!("bad label {other:?}"))),
                };
                let parse_n = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| malformed(path, format!("bad number in {line:?}")))
                };
                entries.push(DatasetEntry {
                    screencast_id: (*cast).to_owned(),
                    frame_index: parse_n(frame)?,
                    label,
                    group_id: parse_n(group)?,
                });
            }
            _ => return Err(malformed(path, format!("unrecognized line {line:?}"))),
        }
    }
    Ok(LabeledDataset { entries })
}

pub fn save_checkpoint(path: &Path, model: &RenderNet) -> Result<(), FsioError> {
    fs::write(path, model.to_bytes()).map_err(io_at(path))
}

pub fn load_checkpoint(path: &Path) -> Result<RenderNet, FsioError> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    Ok(RenderNet::from_bytes(&bytes)?)
}

/// The app a screencast came from: everything before the `--` script
/// suffix, or the whole id when there is none.
pub fn app_id_of_cast(cast_id: &str) -> &str {
    cast_id.split_once("--").map_or(cast_id, |(app, _)| app)
}

/// Turn dataset entries into preprocessed training examples, loading each
/// referenced screencast directory under `<root>/casts/`. Entries are
/// processed in manifest order; casts are loaded once per contiguous run.
pub fn load_examples(
    root: &Path,
    dataset: &LabeledDataset,
    input_hw: (usize, usize),
) -> Result<Vec<TrainExample>, FsioError> {
    let (h, w) = input_hw;
    let mut cached: Option<Screencast> = None;
    let mut examples = Vec::with_capacity(dataset.entries.len());
    for entry in &dataset.entries {
        if cached.as_ref().map(|c| c.id != entry.screencast_id).unwrap_or(true) {
            let dir = root.join(CASTS_DIR).join(&entry.screencast_id);
            cached = Some(load_screencast(&dir)?.0);
        }
        let cast = cached.as_ref().unwrap();
        let frame = cast.frames.get(entry.frame_index).ok_or_else(|| {
            FsioError::FrameOutOfRange {
                cast: entry.screencast_id.clone(),
                index: entry.frame_index,
                frames: cast.frames.len(),
            }
        })?;
        examples.push(TrainExample {
            input: preprocess(frame, h, w),
            label: entry.label,
            app_id: app_id_of_cast(&entry.screencast_id).to_owned(),
        });
    }
    Ok(examples)
}

/// Every screencast directory under `<root>/casts/`, sorted by id.
pub fn list_casts(root: &Path) -> Result<Vec<PathBuf>, FsioError> {
    let casts = root.join(CASTS_DIR);
    let mut dirs = BTreeMap::new();
    for entry in fs::read_dir(&casts).map_err(io_at(&casts))? {
        let entry = entry.map_err(io_at(&casts))?;
        let path = entry.path();
        if path.join(CAST_MANIFEST).exists() {
            dirs.insert(entry.file_name().to_string_lossy().into_owned(), path);
        }
    }
    Ok(dirs.into_values().collect())
}

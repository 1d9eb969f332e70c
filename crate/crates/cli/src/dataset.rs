//! Dataset layout and ingestion.
//!
//! ```text
//! <root>/rgb/<id>.png          RGB frames; ids are numeric and sort numerically
//! <root>/depth/<id>.png        single-channel 8/16-bit depth, or
//! <root>/depth/<id>.f32        raw little-endian f32, row-major, frame-sized
//! <root>/gt/<id>.png           optional ground truth, 255 = unsafe
//! <root>/frames.txt            optional explicit frame selection (one id per line)
//! <root>/pad_truth.json        optional {frame id: pad is safe}
//! <root>/prefs.json            optional {batch id: preference text}
//! <root>/stub.json             stub backend scene
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dropzone_core::agents::BATCH_FRAMES;
use dropzone_core::{BinaryMask, RgbImage, ScalarGrid};
use image::DynamicImage;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub id: String,
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub gt: Option<PathBuf>,
}

/// Five consecutive selected frames; the last one is the decision frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameBatch {
    pub id: String,
    pub frames: Vec<FrameRecord>,
}

impl FrameBatch {
    pub fn decision_frame(&self) -> &FrameRecord {
        self.frames.last().expect("batches always hold five frames")
    }
}

fn numeric_key(id: &str) -> Option<u64> {
    id.parse().ok()
}

fn frame_ids(rgb_dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(rgb_dir).with_context(|| format!("listing {}", rgb_dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "png") {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if numeric_key(&stem).is_none() {
                bail!("frame id `{stem}` in {} is not numeric", rgb_dir.display());
            }
            ids.push(stem);
        }
    }
    ids.sort_by_key(|id| numeric_key(id));
    Ok(ids)
}

fn depth_path(root: &Path, id: &str) -> Option<PathBuf> {
    ["png", "f32"]
        .iter()
        .map(|ext| root.join("depth").join(format!("{id}.{ext}")))
        .find(|p| p.exists())
}

/// Selects frames (explicit list or every `stride`-th) and groups them into
/// consecutive batches of five. A trailing partial batch is dropped.
pub fn ingest_dataset(root: &Path, stride: usize) -> Result<Vec<FrameBatch>> {
    if stride == 0 {
        bail!("stride must be at least 1");
    }
    let all = frame_ids(&root.join("rgb"))?;
    let list = root.join("frames.txt");
    let selected: Vec<String> = if list.exists() {
        let text = fs::read_to_string(&list).with_context(|| format!("reading {}", list.display()))?;
        let ids: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        for id in &ids {
            if !all.contains(id) {
                bail!("frames.txt lists `{id}` but rgb/{id}.png does not exist");
            }
        }
        ids
    } else {
        let samples = all.len() / stride;
        (0..samples).map(|k| all[k * stride].clone()).collect()
    };
    let mut prev: Option<u64> = None;
    for id in &selected {
        let key = numeric_key(id).ok_or_else(|| anyhow!("frame id `{id}` is not numeric"))?;
        if prev.is_some_and(|p| key <= p) {
            bail!("selected frame ids must be strictly increasing, `{id}` is not");
        }
        prev = Some(key);
    }

    let leftover = selected.len() % BATCH_FRAMES;
    if leftover > 0 {
        log::warn!("dropping {leftover} trailing frame(s) that do not fill a batch of {BATCH_FRAMES}");
    }
    let mut batches = Vec::new();
    for (k, chunk) in selected.chunks_exact(BATCH_FRAMES).enumerate() {
        let frames = chunk
            .iter()
            .map(|id| {
                let depth = depth_path(root, id).ok_or_else(|| anyhow!("frame {id}: no depth/{id}.png or depth/{id}.f32"))?;
                let gt = root.join("gt").join(format!("{id}.png"));
                Ok(FrameRecord {
                    id: id.clone(),
                    rgb: root.join("rgb").join(format!("{id}.png")),
                    depth,
                    gt: gt.exists().then_some(gt),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        batches.push(FrameBatch {
            id: format!("batch_{k:03}"),
            frames,
        });
    }
    if batches.is_empty() {
        log::warn!("{}: no complete batch of {BATCH_FRAMES} frames", root.display());
    }
    Ok(batches)
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path).with_context(|| format!("reading {}", path.display()))?.into_rgb8())
}

/// Depth as a grid of the given frame size.
pub fn load_depth(path: &Path, width: usize, height: usize) -> Result<ScalarGrid> {
    let grid = if path.extension().is_some_and(|e| e == "f32") {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        if bytes.len() != width * height * 4 {
            bail!(
                "{}: {} bytes, expected {} for a {width}x{height} f32 grid",
                path.display(),
                bytes.len(),
                width * height * 4
            );
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        ScalarGrid::new(width, height, values)?
    } else {
        let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let values: Vec<f64> = match img {
            DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(f64::from).collect(),
            DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(f64::from).collect(),
            other => bail!("{}: depth must be single-channel, got {:?}", path.display(), other.color()),
        };
        ScalarGrid::new(w, h, values)?
    };
    if grid.dims() != (width, height) {
        bail!(
            "{}: depth is {:?} but the frame is {:?}",
            path.display(),
            grid.dims(),
            (width, height)
        );
    }
    Ok(grid)
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BinaryMask::from_gray_image(&img.into_luma8())?)
}

fn read_json_map<V: for<'de> Deserialize<'de>>(path: &Path) -> Result<BTreeMap<String, V>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Batch id to preference text.
pub fn load_preferences(path: &Path) -> Result<BTreeMap<String, String>> {
    read_json_map(path)
}

/// Decision-frame id to "the pad is safe".
pub fn load_pad_truth(path: &Path) -> Result<BTreeMap<String, bool>> {
    read_json_map(path)
}

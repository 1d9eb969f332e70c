//! Semantic branch: open-vocabulary hazard masks from a pluggable detector,
//! pixelwise-max aggregation and thresholding into a binary unsafe map.

mod backends;
mod rle;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BackendError, Error, Result};
use crate::imgcore::{BinaryMask, ScalarGrid};
use crate::RgbImage;

pub use backends::{
    DetectionFixture, FixtureMask, LiveDetection, LiveDetectionConfig, RecordingDetection,
    ReplayDetection, StubDetection, StubShape,
};
pub use rle::{BinaryRle, ValueRuns};

/// Initial vocabulary: the ten VisDrone categories.
pub const VISDRONE_CLASSES: [&str; 10] = [
    "person",
    "pedestrian",
    "people",
    "bicycle",
    "car",
    "van",
    "truck",
    "awning-tricycle",
    "bus",
    "motor",
];

/// Ordered list of detector prompts. Entries are trimmed, empty entries are
/// dropped and duplicates are removed case-insensitively (first one wins).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct PromptVocabulary {
    classes: Vec<String>,
}

impl PromptVocabulary {
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let classes = items
            .into_iter()
            .filter_map(|s| {
                let t = s.as_ref().trim();
                (!t.is_empty() && seen.insert(t.to_lowercase())).then(|| t.to_string())
            })
            .collect();
        Self { classes }
    }

    pub fn visdrone() -> Self {
        Self::new(VISDRONE_CLASSES)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, class: &str) -> bool {
        let key = class.trim().to_lowercase();
        self.classes.iter().any(|c| c.to_lowercase() == key)
    }

    /// Order-independent digest (first 16 hex chars of SHA-256 over the
    /// sorted, lowercased entries). Used to key replay fixtures.
    pub fn hash(&self) -> String {
        let mut keys: Vec<String> = self.classes.iter().map(|c| c.to_lowercase()).collect();
        keys.sort();
        let mut hasher = Sha256::new();
        for k in &keys {
            hasher.update(k.as_bytes());
            hasher.update([0u8]);
        }
        hasher
            .finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// The list rendered as a compact JSON array, e.g. `["person","car"]`.
    pub fn to_json_list(&self) -> String {
        serde_json::to_string(&self.classes).expect("strings always serialize")
    }
}

impl From<Vec<String>> for PromptVocabulary {
    fn from(v: Vec<String>) -> Self {
        Self::new(v)
    }
}

impl From<PromptVocabulary> for Vec<String> {
    fn from(v: PromptVocabulary) -> Self {
        v.classes
    }
}

/// Per-class confidence grids in `[0, 1]`, all sharing one size.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMaskSet {
    width: usize,
    height: usize,
    masks: Vec<(String, ScalarGrid)>,
}

impl ClassMaskSet {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            masks: Vec::new(),
        }
    }

    pub fn insert(&mut self, class: impl Into<String>, grid: ScalarGrid) -> Result<()> {
        Error::check_dims((self.width, self.height), grid.dims())?;
        if grid.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("class mask values must lie in [0, 1]"));
        }
        self.masks.push((class.into(), grid));
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn masks(&self) -> &[(String, ScalarGrid)] {
        &self.masks
    }

    pub fn get(&self, class: &str) -> Option<&ScalarGrid> {
        self.masks.iter().find(|(c, _)| c == class).map(|(_, g)| g)
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// Axis-aligned box in pixels: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// A frame handed to a detector. `id` keys replay fixtures.
#[derive(Debug, Clone, Copy)]
pub struct FrameRef<'a> {
    pub id: &'a str,
    pub image: &'a RgbImage,
}

impl FrameRef<'_> {
    pub fn dims(&self) -> (usize, usize) {
        (self.image.width() as usize, self.image.height() as usize)
    }
}

/// Open-vocabulary detector. `detect` is total over the vocabulary: classes
/// the model does not find come back as all-zero masks or are omitted.
pub trait DetectionBackend: Send + Sync {
    fn detect(&self, frame: FrameRef<'_>, vocab: &PromptVocabulary)
        -> Result<ClassMaskSet, BackendError>;

    /// Bounding box of the H landing pad, when the backend can find one.
    fn locate_hpad(&self, _frame: FrameRef<'_>) -> Result<Option<BBox>, BackendError> {
        Ok(None)
    }
}

impl<T: DetectionBackend + ?Sized> DetectionBackend for &T {
    fn detect(&self, frame: FrameRef<'_>, vocab: &PromptVocabulary) -> Result<ClassMaskSet, BackendError> {
        (**self).detect(frame, vocab)
    }

    fn locate_hpad(&self, frame: FrameRef<'_>) -> Result<Option<BBox>, BackendError> {
        (**self).locate_hpad(frame)
    }
}

impl<T: DetectionBackend + ?Sized> DetectionBackend for Box<T> {
    fn detect(&self, frame: FrameRef<'_>, vocab: &PromptVocabulary) -> Result<ClassMaskSet, BackendError> {
        (**self).detect(frame, vocab)
    }

    fn locate_hpad(&self, frame: FrameRef<'_>) -> Result<Option<BBox>, BackendError> {
        (**self).locate_hpad(frame)
    }
}

/// Pixelwise maximum over class masks; an empty set gives an all-zero grid.
pub fn aggregate_unsafe(masks: &ClassMaskSet) -> Result<ScalarGrid> {
    let (w, h) = masks.dims();
    let mut out = vec![0.0f64; w * h];
    for (_, grid) in masks.masks() {
        Error::check_dims((w, h), grid.dims())?;
        for (o, &v) in out.iter_mut().zip(grid.values()) {
            *o = o.max(v);
        }
    }
    ScalarGrid::new(w, h, out)
}

/// `1` where the unsafe score is at least `theta_d`.
pub fn binarize(unsafe_map: &ScalarGrid, theta_d: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&theta_d) {
        return Err(Error::param(format!("theta_d must lie in [0, 1], got {theta_d}")));
    }
    let (w, h) = unsafe_map.dims();
    BinaryMask::new(w, h, unsafe_map.values().iter().map(|&v| v >= theta_d).collect())
}

/// Detect, aggregate and binarize in one step.
pub fn detect_and_binarize<B: DetectionBackend + ?Sized>(
    backend: &B,
    frame: FrameRef<'_>,
    vocab: &PromptVocabulary,
    theta_d: f64,
) -> Result<BinaryMask> {
    let masks = backend.detect(frame, vocab)?;
    Error::check_dims(frame.dims(), masks.dims())?;
    binarize(&aggregate_unsafe(&masks)?, theta_d)
}

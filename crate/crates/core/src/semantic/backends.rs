//! Detector backends: live HTTP, replay from fixtures, deterministic stub,
//! and a recorder that captures any backend's output as fixtures.

use std::path::{Path, PathBuf};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BBox, BinaryRle, ClassMaskSet, DetectionBackend, FrameRef, PromptVocabulary, ValueRuns};
use crate::error::BackendError;
use crate::http::{env_key, JsonClient, RetryPolicy};
use crate::imgcore::{encode_png, ScalarGrid};

/// One per-class mask inside a [`DetectionFixture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMask {
    pub class: String,
    pub runs: ValueRuns,
}

/// Recorded detector output for one (frame, vocabulary) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFixture {
    pub frame_id: String,
    pub vocab_hash: String,
    pub width: usize,
    pub height: usize,
    pub classes: Vec<String>,
    pub masks: Vec<FixtureMask>,
}

impl DetectionFixture {
    pub fn from_masks(frame_id: &str, vocab: &PromptVocabulary, set: &ClassMaskSet) -> Self {
        let (width, height) = set.dims();
        Self {
            frame_id: frame_id.to_string(),
            vocab_hash: vocab.hash(),
            width,
            height,
            classes: vocab.classes().to_vec(),
            masks: set
                .masks()
                .iter()
                .map(|(c, g)| FixtureMask {
                    class: c.clone(),
                    runs: ValueRuns::encode(g),
                })
                .collect(),
        }
    }

    pub fn to_masks(&self) -> Result<ClassMaskSet, BackendError> {
        let mut set = ClassMaskSet::empty(self.width, self.height);
        for m in &self.masks {
            let grid = m
                .runs
                .decode(self.width, self.height)
                .map_err(|e| BackendError::Config(format!("fixture for {}: {e}", self.frame_id)))?;
            set.insert(m.class.clone(), grid)
                .map_err(|e| BackendError::Config(e.to_string()))?;
        }
        Ok(set)
    }

    /// `<dir>/detect/<frame_id>__<vocab hash>.json`
    pub fn path(dir: &Path, frame_id: &str, vocab: &PromptVocabulary) -> PathBuf {
        dir.join("detect")
            .join(format!("{frame_id}__{}.json", vocab.hash()))
    }

    /// `<dir>/detect/<frame_id>__hpad.json`
    pub fn hpad_path(dir: &Path, frame_id: &str) -> PathBuf {
        dir.join("detect").join(format!("{frame_id}__hpad.json"))
    }
}

#[derive(Serialize, Deserialize)]
struct HpadFixture {
    frame_id: String,
    hpad: Option<BBox>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), BackendError> {
    let io = |e: std::io::Error| BackendError::Config(format!("writing {}: {e}", path.display()));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| BackendError::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, BackendError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(BackendError::MissingFixture(path.to_path_buf()))
        }
        Err(e) => return Err(BackendError::Config(format!("{}: {e}", path.display()))),
    };
    serde_json::from_str(&text)
        .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
}

/// Serves detections recorded by [`RecordingDetection`].
#[derive(Debug, Clone)]
pub struct ReplayDetection {
    dir: PathBuf,
}

impl ReplayDetection {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl DetectionBackend for ReplayDetection {
    fn detect(&self, frame: FrameRef<'_>, vocab: &PromptVocabulary) -> Result<ClassMaskSet, BackendError> {
        if vocab.is_empty() {
            let (w, h) = frame.dims();
            return Ok(ClassMaskSet::empty(w, h));
        }
        let fixture: DetectionFixture = read_json(&DetectionFixture::path(&self.dir, frame.id, vocab))?;
        fixture.to_masks()
    }

    fn locate_hpad(&self, frame: FrameRef<'_>) -> Result<Option<BBox>, BackendError> {
        let path = DetectionFixture::hpad_path(&self.dir, frame.id);
        match read_json::<HpadFixture>(&path) {
            Ok(f) => Ok(f.hpad),
            Err(BackendError::MissingFixture(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Wraps a backend and writes every answer as a replay fixture.
#[derive(Debug)]
pub struct RecordingDetection<B> {
    inner: B,
    dir: PathBuf,
}

impl<B> RecordingDetection<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl<B: DetectionBackend> DetectionBackend for RecordingDetection<B> {
    fn detect(&self, frame: FrameRef<'_>, vocab: &PromptVocabulary) -> Result<ClassMaskSet, BackendError> {
        let set = self.inner.detect(frame, vocab)?;
        if !vocab.is_empty() {
            let fixture = DetectionFixture::from_masks(frame.id, vocab, &set);
            write_json(&DetectionFixture::path(&self.dir, frame.id, vocab), &fixture)?;
        }
        Ok(set)
    }

    fn locate_hpad(&self, frame: FrameRef<'_>) -> Result<Option<BBox>, BackendError> {
        let hpad = self.inner.locate_hpad(frame)?;
        write_json(
            &DetectionFixture::hpad_path(&self.dir, frame.id),
            &HpadFixture {
                frame_id: frame.id.to_string(),
                hpad,
            },
        )?;
        Ok(hpad)
    }
}

/// A synthetic hazard: class name plus a half-open pixel rectangle
/// `[x0, y0, x1, y1)` filled with `confidence`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubShape {
    pub class: String,
    pub rect: [f64; 4],
    #[serde(default = "one")]
    pub confidence: f64,
    /// Restricts the shape to these frame ids; `None` means every frame.
    #[serde(default)]
    pub frames: Option<Vec<String>>,
}

fn one() -> f64 {
    1.0
}

/// Deterministic detector that paints configured rectangles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubDetection {
    #[serde(default)]
    pub shapes: Vec<StubShape>,
    #[serde(default)]
    pub hpad: Option<BBox>,
}

impl DetectionBackend for StubDetection {
    fn detect(&self, frame: FrameRef<'_>, vocab: &PromptVocabulary) -> Result<ClassMaskSet, BackendError> {
        let (w, h) = frame.dims();
        let mut set = ClassMaskSet::empty(w, h);
        for class in vocab.classes() {
            let key = class.to_lowercase();
            let shapes: Vec<&StubShape> = self
                .shapes
                .iter()
                .filter(|s| s.class.to_lowercase() == key)
                .filter(|s| s.frames.as_ref().is_none_or(|f| f.iter().any(|id| id == frame.id)))
                .collect();
            let grid = ScalarGrid::from_fn(w, h, |x, y| {
                let (px, py) = (x as f64, y as f64);
                shapes
                    .iter()
                    .filter(|s| px >= s.rect[0] && px < s.rect[2] && py >= s.rect[1] && py < s.rect[3])
                    .map(|s| s.confidence.clamp(0.0, 1.0))
                    .fold(0.0, f64::max)
            })
            .map_err(|e| BackendError::Config(e.to_string()))?;
            set.insert(class.clone(), grid)
                .map_err(|e| BackendError::Config(e.to_string()))?;
        }
        Ok(set)
    }

    fn locate_hpad(&self, _frame: FrameRef<'_>) -> Result<Option<BBox>, BackendError> {
        Ok(self.hpad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveDetectionConfig {
    pub endpoint: String,
    /// Endpoint returning `{"bbox": [x, y, w, h] | null}` for the H pad.
    pub hpad_endpoint: Option<String>,
    pub api_key_env: String,
    pub retry: RetryPolicy,
}

impl Default for LiveDetectionConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            hpad_endpoint: None,
            api_key_env: "DETECTION_API_KEY".to_string(),
            retry: RetryPolicy::default(),
        }
    }
}

/// JSON-over-HTTP detector client.
///
/// Request: `{"image": <base64 PNG>, "prompts": [..]}`.
/// Response: `{"masks": [{"class": .., "confidence": .., "rle": {"counts": [..]}}]}`
/// where `counts` is a row-major clear/set run-length mask.
pub struct LiveDetection {
    config: LiveDetectionConfig,
    client: JsonClient,
}

impl LiveDetection {
    pub fn new(config: LiveDetectionConfig) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::Config("detection endpoint is not set".into()));
        }
        let client = JsonClient::new(env_key(&config.api_key_env), config.retry);
        Ok(Self { config, client })
    }

    pub fn encode_request(frame: FrameRef<'_>, vocab: &PromptVocabulary) -> Result<Value, BackendError> {
        let png = encode_png(frame.image).map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(json!({
            "image": base64::engine::general_purpose::STANDARD.encode(png),
            "prompts": vocab.classes(),
        }))
    }

    /// Turns a response into class masks. Every vocabulary class is present
    /// in the result; classes the service did not return are all zero.
    pub fn decode_response(
        body: &Value,
        width: usize,
        height: usize,
        vocab: &PromptVocabulary,
    ) -> Result<ClassMaskSet, BackendError> {
        #[derive(Deserialize)]
        struct Entry {
            class: String,
            #[serde(default = "one")]
            confidence: f64,
            rle: BinaryRle,
        }
        #[derive(Deserialize)]
        struct Body {
            #[serde(default)]
            masks: Vec<Entry>,
        }
        let parsed: Body = serde_json::from_value(body.clone())
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let mut set = ClassMaskSet::empty(width, height);
        for class in vocab.classes() {
            let key = class.to_lowercase();
            let mut acc = vec![0.0f64; width * height];
            for e in parsed.masks.iter().filter(|e| e.class.trim().to_lowercase() == key) {
                let mask = e
                    .rle
                    .decode(width, height)
                    .map_err(|err| BackendError::Protocol(err.to_string()))?;
                let c = e.confidence.clamp(0.0, 1.0);
                for (a, &b) in acc.iter_mut().zip(mask.bits()) {
                    if b {
                        *a = a.max(c);
                    }
                }
            }
            let grid = ScalarGrid::new(width, height, acc)
                .map_err(|e| BackendError::Protocol(e.to_string()))?;
            set.insert(class.clone(), grid)
                .map_err(|e| BackendError::Protocol(e.to_string()))?;
        }
        Ok(set)
    }
}

impl DetectionBackend for LiveDetection {
    fn detect(&self, frame: FrameRef<'_>, vocab: &PromptVocabulary) -> Result<ClassMaskSet, BackendError> {
        let (w, h) = frame.dims();
        if vocab.is_empty() {
            return Ok(ClassMaskSet::empty(w, h));
        }
        let body = self.client.post(&self.config.endpoint, &Self::encode_request(frame, vocab)?)?;
        Self::decode_response(&body, w, h, vocab)
    }

    fn locate_hpad(&self, frame: FrameRef<'_>) -> Result<Option<BBox>, BackendError> {
        let Some(url) = &self.config.hpad_endpoint else {
            return Ok(None);
        };
        let png = encode_png(frame.image).map_err(|e| BackendError::Config(e.to_string()))?;
        let body = self.client.post(
            url,
            &json!({ "image": base64::engine::general_purpose::STANDARD.encode(png) }),
        )?;
        match body.get("bbox") {
            None | Some(Value::Null) => Ok(None),
            Some(v) => {
                let [x, y, w, h]: [f64; 4] = serde_json::from_value(v.clone())
                    .map_err(|e| BackendError::Protocol(format!("bbox: {e}")))?;
                Ok(Some(BBox { x, y, w, h }))
            }
        }
    }
}

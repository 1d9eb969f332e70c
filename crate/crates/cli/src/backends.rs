//! Backend construction from configuration.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dropzone_core::agents::{LiveVlm, RecordingVlm, ReplayVlm, ScriptedVlm, VlmBackend};
use dropzone_core::semantic::{LiveDetection, RecordingDetection, ReplayDetection, StubDetection};
use dropzone_core::DetectionBackend;
use serde::{Deserialize, Serialize};

use crate::config::{BackendKind, RunConfig};

/// Offline scene description for the stub backends: hazard rectangles for
/// the detector and canned agent replies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StubScene {
    pub detection: StubDetection,
    pub vlm: ScriptedVlm,
}

impl StubScene {
    pub fn load(dataset: &Path) -> Result<Self> {
        let path = dataset.join("stub.json");
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("the stub backend needs {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub struct Backends {
    pub detection: Box<dyn DetectionBackend>,
    pub vlm: Box<dyn VlmBackend>,
}

pub fn build_backends(cfg: &RunConfig, kind: BackendKind, dataset: &Path) -> Result<Backends> {
    Ok(match kind {
        BackendKind::Live => Backends {
            detection: Box::new(LiveDetection::new(cfg.live.detection.clone())?),
            vlm: Box::new(LiveVlm::new(cfg.live.vlm.clone())?),
        },
        BackendKind::Replay => {
            let dir = cfg.fixtures_dir(dataset);
            if !dir.is_dir() {
                bail!("replay fixtures not found at {}", dir.display());
            }
            Backends {
                detection: Box::new(ReplayDetection::new(&dir)),
                vlm: Box::new(ReplayVlm::new(dir.join("vlm"))),
            }
        }
        BackendKind::Stub => {
            let scene = StubScene::load(dataset)?;
            Backends {
                detection: Box::new(scene.detection),
                vlm: Box::new(scene.vlm),
            }
        }
    })
}

/// Backends of `kind` whose responses are also written as replay fixtures
/// under `fixtures`.
pub fn recording_backends(cfg: &RunConfig, kind: BackendKind, dataset: &Path, fixtures: &Path) -> Result<Backends> {
    if kind == BackendKind::Replay {
        bail!("recording from the replay backend would only copy fixtures");
    }
    let inner = build_backends(cfg, kind, dataset)?;
    Ok(Backends {
        detection: Box::new(RecordingDetection::new(inner.detection, fixtures)),
        vlm: Box::new(RecordingVlm::new(inner.vlm, fixtures.join("vlm"))),
    })
}

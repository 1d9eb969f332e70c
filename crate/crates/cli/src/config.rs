//! Run configuration, read from TOML. Every field has a default, so an
//! empty file is a valid configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dropzone_core::agents::{Agent1Mode, LiveVlmConfig};
use dropzone_core::semantic::LiveDetectionConfig;
use dropzone_core::{FlatnessParams, PromptVocabulary, ZoneParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// HTTP detector and chat-completions VLM.
    Live,
    /// Recorded fixtures.
    Replay,
    /// Rectangles and canned replies from the dataset's `stub.json`.
    #[default]
    Stub,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    pub detection: LiveDetectionConfig,
    pub vlm: LiveVlmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub flatness: FlatnessParams,
    pub zones: ZoneParams,
    /// Binarization threshold for the semantic unsafe map.
    pub theta_d: f64,
    /// Detector vocabulary every batch starts from.
    pub vocabulary: PromptVocabulary,
    pub agent1_mode: Agent1Mode,
    /// Agent-1 refinement rounds per batch.
    pub refinement_iterations: usize,
    /// Stochastic repetitions of each batch.
    pub runs: usize,
    /// Parallel batch jobs; 0 uses one per core.
    pub workers: usize,
    /// Keep every `stride`-th frame. Ignored when the dataset lists frames
    /// explicitly in `frames.txt`.
    pub stride: usize,
    pub backend: BackendKind,
    /// Replay fixture directory; defaults to `<dataset>/fixtures`.
    pub fixtures_dir: Option<PathBuf>,
    /// Preference used for batches missing from the preference file.
    pub default_preference: String,
    pub out: PathBuf,
    pub live: LiveConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            flatness: FlatnessParams::default(),
            zones: ZoneParams::default(),
            theta_d: 0.5,
            vocabulary: PromptVocabulary::visdrone(),
            agent1_mode: Agent1Mode::MultiFrame,
            refinement_iterations: 1,
            runs: 5,
            workers: 0,
            stride: 29,
            backend: BackendKind::Stub,
            fixtures_dir: None,
            default_preference: "No specific preference.".to_string(),
            out: PathBuf::from("out"),
            live: LiveConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.flatness.validate()?;
        self.zones.validate()?;
        if !(0.0..=1.0).contains(&self.theta_d) {
            bail!("theta_d must lie in [0, 1], got {}", self.theta_d);
        }
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        if self.stride == 0 {
            bail!("stride must be at least 1");
        }
        Ok(())
    }

    pub fn fixtures_dir(&self, dataset: &Path) -> PathBuf {
        self.fixtures_dir.clone().unwrap_or_else(|| dataset.join("fixtures"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.runs, 5);
        assert_eq!(cfg.stride, 29);
        assert_eq!(cfg.zones.top_k, 30);
        assert_eq!(cfg.vocabulary.len(), 10);
        cfg.validate().unwrap();
    }

    #[test]
    fn nested_overrides() {
        let cfg: RunConfig = toml::from_str(
            r#"
            theta_d = 0.4
            vocabulary = ["person", "tree"]
            backend = "replay"
            agent1_mode = "single-frame"
            [flatness]
            grad_threshold = 0.05
            [zones]
            eta = 0.9
            [live.vlm]
            model = "other-model"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.flatness.grad_threshold, 0.05);
        assert_eq!(cfg.flatness.sigma, 1.0);
        assert_eq!(cfg.zones.eta, 0.9);
        assert_eq!(cfg.backend, BackendKind::Replay);
        assert_eq!(cfg.agent1_mode, Agent1Mode::SingleFrame);
        assert_eq!(cfg.live.vlm.model, "other-model");
        assert_eq!(cfg.vocabulary.classes(), ["person", "tree"]);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(toml::from_str::<RunConfig>("typo = 1").is_err());
        let bad: RunConfig = toml::from_str("theta_d = 1.5").unwrap();
        assert!(bad.validate().is_err());
        let bad: RunConfig = toml::from_str("runs = 0").unwrap();
        assert!(bad.validate().is_err());
    }
}

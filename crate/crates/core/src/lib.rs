//! Safe drop-zone detection for delivery drones.
//!
//! The crate is organized along the pipeline:
//!
//! 1. [`imgcore`] – pixel-grid primitives (smoothing, gradients, morphology,
//!    connected components, disk rasterization).
//! 2. [`flatness`] – depth normalization and the gradient flatness mask.
//! 3. [`semantic`] – open-vocabulary hazard detection behind
//!    [`semantic::DetectionBackend`], aggregation and binarization.
//! 4. [`fusion`] – pessimistic union of unsafe masks and overlay rendering.
//! 5. [`zones`] – hex-lattice drop-zone candidates and safe-ratio scoring.
//! 6. [`agents`] – the two VLM agents: request builders, strict-JSON parsing,
//!    vocabulary refinement and preference-guided ranking with heuristic fallback.
//! 7. [`metrics`] – pixel, zone and agreement metrics plus the stochastic
//!    aggregation protocol.
//!
//! Everything except the live HTTP backends is a pure function over
//! in-memory grids.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod error;
pub mod flatness;
pub mod fusion;
pub mod imgcore;
pub mod metrics;
pub mod semantic;
pub mod zones;

pub mod http;

pub use agents::{AgentVerdict, PadSafety, RankedZone, VlmBackend, VlmRequest};
pub use error::{BackendError, Error, Result};
pub use flatness::{FlatnessParams, NormalizedDepth};
pub use fusion::{Provenance, SafetyMap};
pub use imgcore::{BinaryMask, ScalarGrid, StructuringElement};
pub use metrics::{ConfusionCounts, MetricReport, PixelMetrics, ZoneSample};
pub use semantic::{ClassMaskSet, DetectionBackend, PromptVocabulary};
pub use zones::{CandidateZone, ZoneParams};

/// RGB frame type used throughout the pipeline.
pub type RgbImage = image::RgbImage;

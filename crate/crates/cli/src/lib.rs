//! Dataset ingestion, batch orchestration, evaluation and fixture
//! recording for the `dropzone` command.

pub mod backends;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod pipeline;
pub mod synth;

pub use backends::{build_backends, recording_backends, Backends, StubScene};
pub use config::{BackendKind, RunConfig};
pub use dataset::{ingest_dataset, FrameBatch, FrameRecord};
pub use evaluate::{evaluate, write_report, EvalReport};
pub use pipeline::{run_batch, run_dataset, BatchResult, RunSummary};

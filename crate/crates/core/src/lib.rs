//! Online retrieval-augmented question answering.
//!
//! A question is distilled into search key-phrases, matching articles are
//! fetched from a pluggable source at query time, chunked and embedded into an
//! index that lives only for that question, and the closest chunks are handed
//! to a chat model as context. The [`evaluation`] module scores the resulting
//! traces and produces paired-bootstrap statistics.
//!
//! Everything runs offline against fixture sources and deterministic mock
//! backends, which is how the test suites exercise the pipeline end to end.

pub mod browser;
pub mod clock;
pub mod dataset;
pub mod evaluation;
pub mod gateway;
pub mod index;
pub mod offline;
pub mod pipeline;

pub use clock::{Clock, ManualClock, SystemClock};
pub use dataset::{Dataset, DatasetError, DatasetFormat, PatientSex, QaItem};
pub use gateway::{
    BackendProfile, ChatRequest, EmbeddingVector, Gateway, GatewayError, SamplingParams,
};

/// Directory holding the fixtures shipped with this crate (datasets, offline
/// corpus, scripted backends, golden files).
pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

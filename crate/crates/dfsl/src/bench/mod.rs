//! Benchmark harness: dataset loaders, run configuration, pipeline
//! orchestration, and report emission.

mod config;
mod dataset;
mod report;
mod run;

pub use config::{BackendSpec, EmbedderSpec, ExecutorSpec, RunConfig, SelectionStrategy};
pub use dataset::{load_dataset, local_name, BenchmarkRecord, DatasetFormat, LoadOutcome};
pub use report::{load_reports, render, ReportLayout};
pub use run::{
    builtin_static_examples, replay_artifacts, run_benchmark, HermeticExecutor, QueryExecutor,
    QuestionArtifact, RemoteExecutor, TranscriptFile,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no usable records in {path}")]
    NoRecords { path: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("reports cover different dataset sets: {details}")]
    DatasetMismatch { details: String },
    #[error(transparent)]
    Graph(#[from] crate::kg::GraphError),
    #[error(transparent)]
    Store(#[from] crate::retrieval::StoreError),
    #[error(transparent)]
    Prompt(#[from] crate::prompt::PromptError),
    #[error(transparent)]
    Endpoint(#[from] crate::endpoint::ExecutionFailure),
    #[error(transparent)]
    Generation(#[from] crate::generate::GenerationError),
}

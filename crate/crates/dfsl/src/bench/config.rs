//! Run configuration: paths, pipeline mode, hyperparameters, and the
//! service/backend wiring. Loadable from a TOML file; individual fields
//! are overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::prompt::{Ablation, DemoOrder, PromptMode};

use super::dataset::DatasetFormat;
use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Execute only the best beam.
    Single,
    /// Largest Set over all beams.
    Ls,
    /// First Set: first beam with a non-empty answer.
    Fs,
}

impl SelectionStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionStrategy::Single => "single",
            SelectionStrategy::Ls => "ls",
            SelectionStrategy::Fs => "fs",
        }
    }
}

impl std::str::FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(SelectionStrategy::Single),
            "ls" => Ok(SelectionStrategy::Ls),
            "fs" => Ok(SelectionStrategy::Fs),
            other => Err(format!("unknown selection strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutorSpec {
    /// Evaluate on a local graph with the subset engine.
    Hermetic { graph: PathBuf },
    /// Standard SPARQL protocol against a remote endpoint.
    Remote { url: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Echoes the most similar retrieved demonstration's query.
    Echo,
    /// Echo wrapped so beams are [flipped variant, correct query].
    FlipEcho,
    /// Fixture transcript; see [`super::run::TranscriptFile`].
    Scripted { transcript: PathBuf },
    /// Remote completion server; URL and credentials come from the
    /// `DFSL_BACKEND_URL` / `DFSL_BACKEND_TOKEN` environment.
    Http {
        model: String,
        #[serde(default = "default_true")]
        beam_capable: bool,
        #[serde(default)]
        sampling_fallback: bool,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    Trigram {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Remote {
        url: String,
        model_id: String,
        dimension: usize,
    },
}

fn default_dimension() -> usize {
    256
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Trigram { dimension: 256 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub dataset_format: DatasetFormat,
    /// Demonstration pool (the training split). Required for retrieval
    /// modes; defaults to the dataset itself when omitted.
    #[serde(default)]
    pub storage: Option<PathBuf>,
    #[serde(default)]
    pub storage_format: Option<DatasetFormat>,
    pub mode: PromptMode,
    #[serde(default = "default_kg_name")]
    pub kg_name: String,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Beam width. Defaults to 3 for single-query selection and 10 for
    /// multi-query selection.
    #[serde(default)]
    pub b: Option<usize>,
    #[serde(default = "default_selection")]
    pub selection: SelectionStrategy,
    pub executor: ExecutorSpec,
    #[serde(default = "default_backend")]
    pub backend: BackendSpec,
    #[serde(default)]
    pub embedder: EmbedderSpec,
    #[serde(default = "default_ablation")]
    pub ablation: Ablation,
    #[serde(default = "default_demo_order")]
    pub demo_order: DemoOrder,
    #[serde(default)]
    pub seed: u64,
    /// Prompt template file; the built-in template when omitted.
    #[serde(default)]
    pub template: Option<PathBuf>,
    /// Static few-shot fixture; the built-in five examples when omitted.
    #[serde(default)]
    pub static_examples: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub artifacts_dir: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Leakage guard: exclude stored examples whose question text
    /// exactly equals the input question.
    #[serde(default)]
    pub strict_no_leak: bool,
    /// Report row label; derived from mode and selection when omitted.
    #[serde(default)]
    pub approach: Option<String>,
    /// Extra namespace prefixes, merged over the built-in
    /// Wikidata/DBpedia table wherever queries are parsed.
    #[serde(default)]
    pub prefixes: std::collections::BTreeMap<String, String>,
}

fn default_kg_name() -> String {
    "Wikidata".to_string()
}

fn default_k() -> usize {
    5
}

fn default_selection() -> SelectionStrategy {
    SelectionStrategy::Single
}

fn default_backend() -> BackendSpec {
    BackendSpec::Echo
}

fn default_ablation() -> Ablation {
    Ablation::Full
}

fn default_demo_order() -> DemoOrder {
    DemoOrder::MostSimilarLast
}

fn default_workers() -> usize {
    4
}

impl RunConfig {
    pub fn prefix_map(&self) -> crate::sparql::PrefixMap {
        let mut map = crate::sparql::PrefixMap::default();
        for (prefix, namespace) in &self.prefixes {
            map.insert(prefix.clone(), namespace.clone());
        }
        map
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| BenchError::Config(e.to_string()))?;
        // relative paths resolve against the config file's directory
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        for path in [&mut self.dataset]
            .into_iter()
            .chain(self.storage.as_mut())
            .chain(self.template.as_mut())
            .chain(self.static_examples.as_mut())
            .chain(self.cache_dir.as_mut())
            .chain(self.artifacts_dir.as_mut())
        {
            if path.is_relative() {
                *path = base.join(&path);
            }
        }
        if let ExecutorSpec::Hermetic { graph } = &mut self.executor {
            if graph.is_relative() {
                *graph = base.join(&graph);
            }
        }
        if let BackendSpec::Scripted { transcript } = &mut self.backend {
            if transcript.is_relative() {
                *transcript = base.join(&transcript);
            }
        }
    }

    /// Beam width, defaulted per selection strategy: 3 when only the
    /// best beam is executed, 10 for multi-query selection.
    pub fn beam_width(&self) -> usize {
        self.b.unwrap_or(match self.selection {
            SelectionStrategy::Single => 3,
            SelectionStrategy::Ls | SelectionStrategy::Fs => 10,
        })
    }

    pub fn storage_path(&self) -> &Path {
        self.storage.as_deref().unwrap_or(&self.dataset)
    }

    pub fn storage_format(&self) -> DatasetFormat {
        self.storage_format.unwrap_or(self.dataset_format)
    }

    /// Report row label.
    pub fn approach_label(&self) -> String {
        if let Some(label) = &self.approach {
            return label.clone();
        }
        let base = match self.mode {
            PromptMode::Plain => "plain",
            PromptMode::ZeroShot => "zero_shot",
            PromptMode::FewShotStatic => "few_shot",
            PromptMode::Dfsl => "dfsl",
            PromptMode::DfslMqp => "dfsl-mqp",
        };
        match (self.mode, self.selection) {
            (PromptMode::Dfsl, SelectionStrategy::Ls) => "dfsl-mq_ls".to_string(),
            (PromptMode::Dfsl, SelectionStrategy::Fs) => "dfsl-mq_fs".to_string(),
            (PromptMode::DfslMqp, SelectionStrategy::Ls) => "dfsl-mqp_ls".to_string(),
            (PromptMode::DfslMqp, SelectionStrategy::Fs) => "dfsl-mqp_fs".to_string(),
            _ => base.to_string(),
        }
    }

    pub fn dataset_label(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.display().to_string())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.k == 0 && self.mode.uses_demos() {
            return Err(BenchError::Config(
                "k must be at least 1 for few-shot modes".into(),
            ));
        }
        if self.workers == 0 {
            return Err(BenchError::Config("workers must be at least 1".into()));
        }
        if let Some(b) = self.b {
            if b == 0 {
                return Err(BenchError::Config("b must be at least 1".into()));
            }
            if b == 1 && self.selection != SelectionStrategy::Single {
                return Err(BenchError::Config(
                    "multi-query selection needs b greater than 1".into(),
                ));
            }
        }
        Ok(())
    }
}

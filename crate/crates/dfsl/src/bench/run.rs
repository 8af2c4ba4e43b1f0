//! End-to-end benchmark orchestration: load records, retrieve
//! demonstrations, build prompts, generate hypotheses, execute, select,
//! score, and aggregate. Per-record failures land in flags and never
//! abort the run; configuration problems abort before the first record.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::endpoint::{
    answer_to_json, parse_results, EndpointClient, EndpointConfig, ExecutionFailure,
};
use crate::eval::{
    aggregate, detect_triple_flip, f1, select_fs, select_ls, CandidateAnswer, EvalFlags,
    EvalRecord, EvalReport, FlipDetection, Selection,
};
use crate::generate::{
    dedupe_hypotheses, extract_query, CachedClient, EchoMock, FlipMock, GenerationClient,
    GenerationRequest, HttpGenerationClient, ScriptedMock,
};
use crate::kg::load_graph;
use crate::prompt::{build_prompt, Prompt, PromptConfig, PromptTemplate};
use crate::retrieval::{
    build_store, Embedder, Example, ExampleStore, RemoteEmbedder, RetrievalOptions,
    TrigramEmbedder,
};
use crate::sparql::{evaluate, parse_with_prefixes, AnswerSet, PrefixMap};

use super::config::{BackendSpec, EmbedderSpec, ExecutorSpec, RunConfig, SelectionStrategy};
use super::dataset::{load_dataset, BenchmarkRecord};
use super::BenchError;

pub trait QueryExecutor: Send + Sync {
    fn execute(&self, query: &str) -> Result<AnswerSet, ExecutionFailure>;
}

/// Executes queries on an in-memory graph with the subset engine. A
/// query outside the fragment is an [`ExecutionFailure::InvalidQuery`].
pub struct HermeticExecutor {
    graph: crate::kg::KnowledgeGraph,
    prefixes: PrefixMap,
}

impl HermeticExecutor {
    pub fn new(graph: crate::kg::KnowledgeGraph) -> Self {
        Self {
            graph,
            prefixes: PrefixMap::default(),
        }
    }

    pub fn with_prefixes(mut self, prefixes: PrefixMap) -> Self {
        self.prefixes = prefixes;
        self
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let file = std::fs::File::open(path)?;
        let graph = load_graph(BufReader::new(file))?;
        Ok(Self::new(graph))
    }

    pub fn graph(&self) -> &crate::kg::KnowledgeGraph {
        &self.graph
    }
}

impl QueryExecutor for HermeticExecutor {
    fn execute(&self, query: &str) -> Result<AnswerSet, ExecutionFailure> {
        let ast = parse_with_prefixes(query, &self.prefixes)
            .map_err(|e| ExecutionFailure::InvalidQuery(e.to_string()))?;
        evaluate(&ast, &self.graph).map_err(|e| ExecutionFailure::InvalidQuery(e.to_string()))
    }
}

pub struct RemoteExecutor {
    client: EndpointClient,
}

impl RemoteExecutor {
    pub fn new(client: EndpointClient) -> Self {
        Self { client }
    }
}

impl QueryExecutor for RemoteExecutor {
    fn execute(&self, query: &str) -> Result<AnswerSet, ExecutionFailure> {
        self.client.execute(query)
    }
}

/// Scripted transcript fixture. Entries may be keyed by question id
/// (translated to prompt fingerprints in a preparation pass) or directly
/// by fingerprint.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TranscriptFile {
    #[serde(default)]
    pub by_question_id: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub by_fingerprint: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub default: Option<Vec<String>>,
}

impl TranscriptFile {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Everything persisted for one question; sufficient to recompute the
/// report without calling any backend again.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionArtifact {
    pub question_id: String,
    pub question: String,
    pub prompt_fingerprint: String,
    pub prompt_text: String,
    pub raw_hypotheses: Vec<String>,
    pub extracted_queries: Vec<String>,
    pub selected_query: Option<String>,
    pub selected_rank: Option<usize>,
    /// Failure before generation (retrieval or prompt assembly).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prepare_error: Option<String>,
    /// SPARQL JSON results documents.
    pub predicted_answer: Value,
    pub gold_answer: Value,
    pub f1: f64,
    pub flags: EvalFlags,
}

struct Prepared {
    record: BenchmarkRecord,
    prompt: Option<Prompt>,
    prepare_error: Option<String>,
}

struct Pipeline {
    config: RunConfig,
    prompt_config: PromptConfig,
    executor: Box<dyn QueryExecutor>,
    prefixes: PrefixMap,
}

pub fn run_benchmark(config: &RunConfig) -> Result<EvalReport, BenchError> {
    config.validate()?;
    let outcome = load_dataset(&config.dataset, config.dataset_format)?;
    let records = outcome.records;

    let template = match &config.template {
        Some(path) => PromptTemplate::from_file(path)?,
        None => PromptTemplate::default(),
    };
    let template_version = template.version().to_string();

    let mut prompt_config = PromptConfig::new(config.mode, config.kg_name.clone());
    prompt_config.ablation = config.ablation;
    prompt_config.demo_order = config.demo_order;
    prompt_config.template = template;

    let embedder = make_embedder(&config.embedder);
    let store = if config.mode.uses_retrieval() {
        let storage = load_dataset(config.storage_path(), config.storage_format())?;
        let examples: Vec<Example> = storage
            .records
            .into_iter()
            .map(|r| Example::new(r.question, r.gold_entities, r.gold_relations, r.gold_query))
            .collect();
        Some(build_store(
            examples,
            embedder.as_ref(),
            config.ablation.encode_mode(),
        )?)
    } else {
        None
    };

    if config.mode == crate::prompt::PromptMode::FewShotStatic {
        prompt_config.static_examples = match &config.static_examples {
            Some(path) => load_static_examples(path)?,
            None => builtin_static_examples()?,
        };
        prompt_config.k = prompt_config.static_examples.len();
        if config.k != prompt_config.k && config.static_examples.is_none() {
            // an explicit k different from the builtin fixture size is a
            // configuration contradiction, not something to paper over
            if config.k != default_static_k() {
                return Err(BenchError::Config(format!(
                    "static few-shot fixture has {} examples but k = {}",
                    prompt_config.k, config.k
                )));
            }
        }
    }

    let executor: Box<dyn QueryExecutor> = match &config.executor {
        ExecutorSpec::Hermetic { graph } => Box::new(
            HermeticExecutor::from_file(graph)?.with_prefixes(config.prefix_map()),
        ),
        ExecutorSpec::Remote { url } => {
            let url = std::env::var("DFSL_ENDPOINT_URL").unwrap_or_else(|_| url.clone());
            Box::new(RemoteExecutor::new(EndpointClient::new(
                EndpointConfig::new(url),
            )?))
        }
    };

    let pipeline = Pipeline {
        config: config.clone(),
        prompt_config,
        executor,
        prefixes: config.prefix_map(),
    };

    // preparation pass: retrieval and prompt assembly (deterministic)
    let prepared: Vec<Prepared> = records
        .into_iter()
        .map(|record| pipeline.prepare(record, store.as_ref(), embedder.as_ref()))
        .collect();

    let client = make_client(&config.backend, config.seed, &prepared)?;
    let client: Box<dyn GenerationClient> = match &config.cache_dir {
        Some(dir) => Box::new(CachedClient::with_disk(client, dir)?),
        None => Box::new(CachedClient::new(client)),
    };

    let degraded = AtomicUsize::new(0);
    let results = parallel_map(&prepared, config.workers.max(1), |item| {
        pipeline.score(item, client.as_ref(), &degraded)
    });

    let mut eval_records = Vec::with_capacity(results.len());
    let mut artifacts = Vec::with_capacity(results.len());
    for (record, artifact) in results {
        eval_records.push(record);
        artifacts.push(artifact);
    }

    let mut report = aggregate(&eval_records);
    report.approach = config.approach_label();
    report.dataset = config.dataset_label();
    report.template_version = template_version;
    report.degraded_sampling = degraded.load(Ordering::SeqCst) > 0;
    report.skipped_records = outcome.skipped;

    if let Some(dir) = &config.artifacts_dir {
        write_artifacts(dir, config, &report, &artifacts)?;
    }
    Ok(report)
}

fn default_static_k() -> usize {
    5
}

impl Pipeline {
    fn prepare(
        &self,
        record: BenchmarkRecord,
        store: Option<&ExampleStore>,
        embedder: &dyn Embedder,
    ) -> Prepared {
        let mut prompt_config = self.prompt_config.clone();
        let demos: Vec<Example> = if self.config.mode.uses_retrieval() {
            let Some(store) = store else {
                return Prepared {
                    record,
                    prompt: None,
                    prepare_error: Some("retrieval mode without a storage".into()),
                };
            };
            let vector = store.query_vector(
                embedder,
                &record.question,
                &record.gold_entities,
                &record.gold_relations,
                self.config.ablation.encode_mode(),
            );
            let options = RetrievalOptions {
                exclude_exact_question: self
                    .config
                    .strict_no_leak
                    .then_some(record.question.as_str()),
            };
            match vector.and_then(|v| store.top_k_with(&v, self.config.k, options)) {
                Ok(hits) => hits.into_iter().map(|(example, _)| example.clone()).collect(),
                Err(e) => {
                    return Prepared {
                        record,
                        prompt: None,
                        prepare_error: Some(e.to_string()),
                    }
                }
            }
        } else if self.config.mode == crate::prompt::PromptMode::FewShotStatic {
            prompt_config.static_examples.clone()
        } else {
            Vec::new()
        };
        if self.config.mode.uses_demos() {
            prompt_config.k = demos.len();
        }
        match build_prompt(
            &prompt_config,
            &record.question,
            &record.gold_entities,
            &record.gold_relations,
            &demos,
        ) {
            Ok(prompt) => Prepared {
                record,
                prompt: Some(prompt),
                prepare_error: None,
            },
            Err(e) => Prepared {
                record,
                prompt: None,
                prepare_error: Some(e.to_string()),
            },
        }
    }

    fn gold_answer(&self, record: &BenchmarkRecord, flags: &mut EvalFlags) -> AnswerSet {
        if let Some(answers) = &record.gold_answers {
            return answers.clone();
        }
        match self.executor.execute(&record.gold_query) {
            Ok(answer) => answer,
            Err(_) => {
                flags.execution_failure = true;
                AnswerSet::empty()
            }
        }
    }

    fn score(
        &self,
        prepared: &Prepared,
        client: &dyn GenerationClient,
        degraded: &AtomicUsize,
    ) -> (EvalRecord, QuestionArtifact) {
        let record = &prepared.record;
        let mut flags = EvalFlags::default();
        let mut raw_hypotheses: Vec<String> = Vec::new();
        let mut extracted: Vec<String> = Vec::new();

        let (prompt_text, prompt_fingerprint) = match &prepared.prompt {
            Some(p) => (p.text.clone(), p.fingerprint.clone()),
            None => (String::new(), String::new()),
        };

        if let Some(prompt) = &prepared.prompt {
            let request = GenerationRequest::new(prompt.clone(), self.config.beam_width());
            match client.generate(&request) {
                Ok(output) => {
                    if output.degraded_sampling {
                        degraded.fetch_add(1, Ordering::SeqCst);
                    }
                    raw_hypotheses = output.hypotheses;
                    let mut any_lenient = false;
                    for raw in &raw_hypotheses {
                        match extract_query(raw) {
                            Ok(extraction) => {
                                any_lenient |= extraction.lenient;
                                extracted.push(extraction.query);
                            }
                            Err(_) => {}
                        }
                    }
                    flags.lenient_extraction = any_lenient;
                    if extracted.is_empty() {
                        flags.extraction_failure = true;
                    }
                }
                Err(_) => {
                    flags.extraction_failure = true;
                }
            }
        } else {
            flags.extraction_failure = true;
        }

        let queries = dedupe_hypotheses(&extracted, &self.prefixes);
        let selection = self.select(&queries, &mut flags);
        let selected_query = selection
            .as_ref()
            .and_then(|s| queries.get(s.rank - 1).cloned());
        let selected_rank = selection.as_ref().map(|s| s.rank);
        let predicted = selection
            .map(|s| s.answer)
            .unwrap_or_else(AnswerSet::empty);

        let gold = self.gold_answer(record, &mut flags);
        let score = f1(&predicted, &gold);

        if let Some(query) = &selected_query {
            if detect_triple_flip(query, &record.gold_query, &self.prefixes) == FlipDetection::Flip
            {
                flags.triple_flip_detected = true;
            }
        }

        let eval_record = EvalRecord {
            question_id: record.question_id.clone(),
            f1: score,
            selected_query: selected_query.clone(),
            selected_rank,
            flags: flags.clone(),
        };
        let artifact = QuestionArtifact {
            question_id: record.question_id.clone(),
            question: record.question.clone(),
            prompt_fingerprint,
            prompt_text,
            raw_hypotheses,
            extracted_queries: queries,
            selected_query,
            selected_rank,
            prepare_error: prepared.prepare_error.clone(),
            predicted_answer: answer_to_json(&predicted),
            gold_answer: answer_to_json(&gold),
            f1: score,
            flags,
        };
        (eval_record, artifact)
    }

    fn select(&self, queries: &[String], flags: &mut EvalFlags) -> Option<Selection> {
        if queries.is_empty() {
            return None;
        }
        match self.config.selection {
            SelectionStrategy::Single => {
                let query = &queries[0];
                let answer = match self.executor.execute(query) {
                    Ok(answer) => answer,
                    Err(_) => {
                        flags.execution_failure = true;
                        AnswerSet::empty()
                    }
                };
                Some(Selection { answer, rank: 1 })
            }
            SelectionStrategy::Ls => {
                let candidates: Vec<CandidateAnswer> = queries
                    .iter()
                    .enumerate()
                    .map(|(i, query)| {
                        let answer = self.executor.execute(query);
                        if answer.is_err() {
                            flags.execution_failure = true;
                        }
                        CandidateAnswer {
                            query: query.clone(),
                            beam_rank: i + 1,
                            answer,
                        }
                    })
                    .collect();
                select_ls(&candidates).ok()
            }
            SelectionStrategy::Fs => {
                let mut failed = false;
                let selection = select_fs(queries, |query| {
                    let outcome = self.executor.execute(query);
                    if outcome.is_err() {
                        failed = true;
                    }
                    outcome
                })
                .ok();
                if failed {
                    flags.execution_failure = true;
                }
                selection
            }
        }
    }
}

fn make_embedder(spec: &EmbedderSpec) -> Box<dyn Embedder> {
    match spec {
        EmbedderSpec::Trigram { dimension } => Box::new(TrigramEmbedder::new(*dimension)),
        EmbedderSpec::Remote {
            url,
            model_id,
            dimension,
        } => {
            let url = std::env::var("DFSL_EMBEDDER_URL").unwrap_or_else(|_| url.clone());
            Box::new(RemoteEmbedder::new(url, model_id.clone(), *dimension))
        }
    }
}

fn make_client(
    spec: &BackendSpec,
    seed: u64,
    prepared: &[Prepared],
) -> Result<Box<dyn GenerationClient>, BenchError> {
    Ok(match spec {
        BackendSpec::Echo => Box::new(EchoMock::default()),
        BackendSpec::FlipEcho => Box::new(FlipMock::new(EchoMock::default())),
        BackendSpec::Scripted { transcript } => {
            let file = TranscriptFile::load(transcript)?;
            let mut by_fingerprint = file.by_fingerprint.clone();
            for item in prepared {
                let Some(prompt) = &item.prompt else { continue };
                if let Some(hyps) = file.by_question_id.get(&item.record.question_id) {
                    by_fingerprint.insert(prompt.fingerprint.clone(), hyps.clone());
                }
            }
            let mut mock = ScriptedMock::new(by_fingerprint.into_iter().collect());
            if let Some(default) = file.default {
                mock = mock.with_fallback(default);
            }
            Box::new(mock)
        }
        BackendSpec::Http {
            model,
            beam_capable,
            sampling_fallback,
        } => {
            let url = std::env::var(crate::generate::ENV_BACKEND_URL).map_err(|_| {
                BenchError::Config(format!(
                    "{} must be set for the http backend",
                    crate::generate::ENV_BACKEND_URL
                ))
            })?;
            let mut client = HttpGenerationClient::new(url, model.clone())
                .with_beam_capable(*beam_capable)
                .with_sampling_fallback(*sampling_fallback)
                .with_seed(seed);
            if let Ok(token) = std::env::var(crate::generate::ENV_BACKEND_TOKEN) {
                client = client.with_token(token);
            }
            Box::new(client)
        }
    })
}

fn load_static_examples(path: &Path) -> Result<Vec<Example>, BenchError> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn builtin_static_examples() -> Result<Vec<Example>, BenchError> {
    Ok(serde_json::from_str(include_str!(
        "../../fixtures/static_few_shot.json"
    ))?)
}

/// Maps items across a bounded worker pool; output order matches input
/// order, so worker scheduling cannot affect the report.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    if items.is_empty() {
        return Vec::new();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_artifacts(
    dir: &Path,
    config: &RunConfig,
    report: &EvalReport,
    artifacts: &[QuestionArtifact],
) -> Result<(), BenchError> {
    let records_dir = dir.join("records");
    std::fs::create_dir_all(&records_dir)?;
    // the exact configuration (including the seed) rides along for audit
    std::fs::write(dir.join("config.json"), serde_json::to_vec_pretty(config)?)?;
    for (i, artifact) in artifacts.iter().enumerate() {
        let name = format!("{:04}_{}.json", i, sanitize_id(&artifact.question_id));
        std::fs::write(
            records_dir.join(name),
            serde_json::to_vec_pretty(artifact)?,
        )?;
    }
    std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;
    Ok(())
}

/// Rebuilds the report from per-question artifacts alone: F1 is
/// recomputed from the stored answer documents, with no backend or
/// executor involved.
pub fn replay_artifacts(dir: &Path) -> Result<EvalReport, BenchError> {
    let stored: EvalReport =
        serde_json::from_reader(BufReader::new(std::fs::File::open(dir.join("report.json"))?))?;
    let records_dir = dir.join("records");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&records_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    paths.sort();
    let mut records = Vec::new();
    for path in paths {
        let artifact: QuestionArtifact =
            serde_json::from_reader(BufReader::new(std::fs::File::open(&path)?))?;
        let predicted = parse_results(artifact.predicted_answer.to_string().as_bytes())
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let gold = parse_results(artifact.gold_answer.to_string().as_bytes())
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        records.push(EvalRecord {
            question_id: artifact.question_id,
            f1: f1(&predicted, &gold),
            selected_query: artifact.selected_query,
            selected_rank: artifact.selected_rank,
            flags: artifact.flags,
        });
    }
    let mut report = aggregate(&records);
    report.approach = stored.approach;
    report.dataset = stored.dataset;
    report.template_version = stored.template_version;
    report.degraded_sampling = stored.degraded_sampling;
    report.skipped_records = stored.skipped_records;
    Ok(report)
}

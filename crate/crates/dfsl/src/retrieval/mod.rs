//! Storage of solved text-to-SPARQL examples with embedding-based
//! retrieval: each example is encoded as a single input sequence
//! (question, entities, relations), embedded, and scored against the
//! query by cosine similarity. Retrieval is an exact linear scan; the
//! largest storage in play is ~24k examples.

mod embed;

pub use embed::{Embedder, EmbeddingVector, RemoteEmbedder, TrigramEmbedder};

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("vector dimension mismatch: store has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("encoding mode mismatch: store built with {store}, queried with {query}")]
    ModeMismatch { store: EncodeMode, query: EncodeMode },
    #[error("encoder mismatch: store built with {store:?}, queried with {query:?}")]
    EncoderMismatch { store: String, query: String },
    #[error("embedding failed for example {index}: {message}")]
    EmbedFailed { index: usize, message: String },
    #[error("embedding service failure: {0}")]
    Remote(String),
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("store has {examples} examples but {vectors} vectors")]
    CountMismatch { examples: usize, vectors: usize },
    #[error("stores cannot be merged: {0}")]
    MergeIncompatible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// A solved example: question, its gold entities and relations, and the
/// associated SPARQL query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub question: String,
    /// (iri, label) pairs, in dataset order.
    #[serde(default)]
    pub entities: Vec<(String, String)>,
    #[serde(default)]
    pub relations: Vec<(String, String)>,
    pub query: String,
    #[serde(default)]
    pub source_index: usize,
}

impl Example {
    pub fn new(
        question: impl Into<String>,
        entities: Vec<(String, String)>,
        relations: Vec<(String, String)>,
        query: impl Into<String>,
    ) -> Self {
        Self {
            question: question.into(),
            entities,
            relations,
            query: query.into(),
            source_index: 0,
        }
    }
}

/// What goes into the embedded input sequence (and, downstream, into the
/// prompt): the full question/entities/relations concatenation, or an
/// ablated variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    Full,
    QuestionOnly,
    NoEntities,
    NoRelations,
}

impl EncodeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncodeMode::Full => "full",
            EncodeMode::QuestionOnly => "question_only",
            EncodeMode::NoEntities => "no_entities",
            EncodeMode::NoRelations => "no_relations",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "full" => Some(EncodeMode::Full),
            "question_only" => Some(EncodeMode::QuestionOnly),
            "no_entities" => Some(EncodeMode::NoEntities),
            "no_relations" => Some(EncodeMode::NoRelations),
            _ => None,
        }
    }
}

impl std::fmt::Display for EncodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Serializes (iri, label) pairs as `label (iri)` joined by `"; "`.
pub fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(iri, label)| format!("{label} ({iri})"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Concatenates question, entities and relations into the single input
/// sequence handed to the encoder.
pub fn encode_input(
    question: &str,
    entities: &[(String, String)],
    relations: &[(String, String)],
    mode: EncodeMode,
) -> String {
    match mode {
        EncodeMode::QuestionOnly => question.to_string(),
        EncodeMode::Full => format!(
            "{question}\nEntities: {}\nRelations: {}",
            format_pairs(entities),
            format_pairs(relations)
        ),
        EncodeMode::NoEntities => {
            format!("{question}\nRelations: {}", format_pairs(relations))
        }
        EncodeMode::NoRelations => {
            format!("{question}\nEntities: {}", format_pairs(entities))
        }
    }
}

fn example_input(example: &Example, mode: EncodeMode) -> String {
    encode_input(&example.question, &example.entities, &example.relations, mode)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RetrievalOptions<'a> {
    /// Leakage guard for self-retrieval experiments: exclude any stored
    /// example whose question text exactly equals this one. Off by
    /// default; benchmark storage and test questions are disjoint sets.
    pub exclude_exact_question: Option<&'a str>,
}

#[derive(Debug, Clone)]
pub struct ExampleStore {
    examples: Vec<Example>,
    vectors: Vec<EmbeddingVector>,
    encoder_id: String,
    mode: EncodeMode,
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    encoder_id: String,
    mode: EncodeMode,
    dimension: usize,
    vectors: Vec<Vec<f32>>,
}

impl ExampleStore {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mode(&self) -> EncodeMode {
        self.mode
    }

    /// Identifies the embedder and encoding mode used at build time.
    pub fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    /// Encodes a query input with the same embedder and mode the store
    /// was built with; any mismatch is an error rather than a silently
    /// incomparable vector.
    pub fn query_vector(
        &self,
        embedder: &dyn Embedder,
        question: &str,
        entities: &[(String, String)],
        relations: &[(String, String)],
        mode: EncodeMode,
    ) -> Result<EmbeddingVector, StoreError> {
        if mode != self.mode {
            return Err(StoreError::ModeMismatch {
                store: self.mode,
                query: mode,
            });
        }
        let expected = store_encoder_id(embedder, mode);
        if expected != self.encoder_id {
            return Err(StoreError::EncoderMismatch {
                store: self.encoder_id.clone(),
                query: expected,
            });
        }
        let text = encode_input(question, entities, relations, mode);
        embedder.embed(&text)
    }

    pub fn top_k(
        &self,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<(&Example, f32)>, StoreError> {
        self.top_k_with(query, k, RetrievalOptions::default())
    }

    /// Ranked by descending cosine similarity, ties broken by ascending
    /// source index. Returns `min(k, usable_examples)` entries.
    pub fn top_k_with(
        &self,
        query: &EmbeddingVector,
        k: usize,
        options: RetrievalOptions<'_>,
    ) -> Result<Vec<(&Example, f32)>, StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidK);
        }
        if query.dimension() != self.dimension {
            return Err(StoreError::DimensionMismatch {
                expected: self.dimension,
                got: query.dimension(),
            });
        }
        let query_norm = query.norm();
        let mut scored: Vec<(usize, f32)> = self
            .examples
            .iter()
            .zip(&self.vectors)
            .enumerate()
            .filter(|(_, (example, _))| {
                options.exclude_exact_question != Some(example.question.as_str())
            })
            .map(|(idx, (_, vector))| (idx, cosine_against_unit(query, query_norm, vector)))
            .collect();
        scored.sort_by(|(ia, sa), (ib, sb)| sb.total_cmp(sa).then(ia.cmp(ib)));
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(idx, score)| (&self.examples[idx], score))
            .collect())
    }

    /// Merges two stores built with the same embedder and mode; the
    /// result equals building the concatenated example list at once.
    pub fn merge(mut self, other: ExampleStore) -> Result<ExampleStore, StoreError> {
        if self.encoder_id != other.encoder_id
            || self.mode != other.mode
            || self.dimension != other.dimension
        {
            return Err(StoreError::MergeIncompatible(format!(
                "{} vs {}",
                self.encoder_id, other.encoder_id
            )));
        }
        let offset = self.examples.len();
        for (mut example, vector) in other.examples.into_iter().zip(other.vectors) {
            example.source_index += offset;
            self.examples.push(example);
            self.vectors.push(vector);
        }
        Ok(self)
    }

    /// Writes the vector sidecar so the store can be reloaded without
    /// re-embedding.
    pub fn save_vectors(&self, path: &Path) -> Result<(), StoreError> {
        let sidecar = Sidecar {
            encoder_id: self.encoder_id.clone(),
            mode: self.mode,
            dimension: self.dimension,
            vectors: self.vectors.iter().map(|v| v.values().to_vec()).collect(),
        };
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &sidecar)?;
        Ok(())
    }

    /// Rebuilds a store from examples plus a previously saved sidecar.
    pub fn load_with_vectors(examples: Vec<Example>, path: &Path) -> Result<Self, StoreError> {
        let file = std::fs::File::open(path)?;
        let sidecar: Sidecar = serde_json::from_reader(std::io::BufReader::new(file))?;
        if sidecar.vectors.len() != examples.len() {
            return Err(StoreError::CountMismatch {
                examples: examples.len(),
                vectors: sidecar.vectors.len(),
            });
        }
        let mut vectors = Vec::with_capacity(sidecar.vectors.len());
        for values in sidecar.vectors {
            if values.len() != sidecar.dimension {
                return Err(StoreError::DimensionMismatch {
                    expected: sidecar.dimension,
                    got: values.len(),
                });
            }
            vectors.push(EmbeddingVector::new(values)?);
        }
        let examples = reindex(examples);
        Ok(Self {
            examples,
            vectors,
            encoder_id: sidecar.encoder_id,
            mode: sidecar.mode,
            dimension: sidecar.dimension,
        })
    }
}

fn store_encoder_id(embedder: &dyn Embedder, mode: EncodeMode) -> String {
    format!("{}|{}", embedder.id(), mode.as_str())
}

fn reindex(mut examples: Vec<Example>) -> Vec<Example> {
    for (i, example) in examples.iter_mut().enumerate() {
        example.source_index = i;
    }
    examples
}

fn cosine_against_unit(query: &EmbeddingVector, query_norm: f32, unit: &EmbeddingVector) -> f32 {
    if query_norm == 0.0 {
        return 0.0;
    }
    query.dot(unit) / query_norm
}

/// Encodes and embeds every example; source indexes follow input order.
/// Vectors are L2-normalized at build time so cosine is a dot product.
pub fn build_store(
    examples: Vec<Example>,
    embedder: &dyn Embedder,
    mode: EncodeMode,
) -> Result<ExampleStore, StoreError> {
    let examples = reindex(examples);
    let dimension = embedder.dimension();
    let mut vectors = Vec::with_capacity(examples.len());
    for chunk_start in (0..examples.len()).step_by(EMBED_BATCH) {
        let chunk = &examples[chunk_start..(chunk_start + EMBED_BATCH).min(examples.len())];
        let texts: Vec<String> = chunk.iter().map(|e| example_input(e, mode)).collect();
        let embedded = match embedder.embed_batch(&texts) {
            Ok(embedded) => embedded,
            Err(_) => {
                // retry one by one to attribute the failure to an example
                let mut singles = Vec::with_capacity(texts.len());
                for (offset, text) in texts.iter().enumerate() {
                    let vector = embedder.embed(text).map_err(|e| StoreError::EmbedFailed {
                        index: chunk_start + offset,
                        message: e.to_string(),
                    })?;
                    singles.push(vector);
                }
                singles
            }
        };
        if embedded.len() != texts.len() {
            return Err(StoreError::Remote(format!(
                "embedder returned {} vectors for {} texts",
                embedded.len(),
                texts.len()
            )));
        }
        for (offset, vector) in embedded.into_iter().enumerate() {
            if vector.dimension() != dimension {
                return Err(StoreError::EmbedFailed {
                    index: chunk_start + offset,
                    message: format!(
                        "vector dimension {} differs from declared {}",
                        vector.dimension(),
                        dimension
                    ),
                });
            }
            vectors.push(vector.normalized());
        }
    }
    let unique: BTreeSet<usize> = examples.iter().map(|e| e.source_index).collect();
    debug_assert_eq!(unique.len(), examples.len());
    Ok(ExampleStore {
        examples,
        vectors,
        encoder_id: store_encoder_id(embedder, mode),
        mode,
        dimension,
    })
}

const EMBED_BATCH: usize = 64;

#[cfg(test)]
mod tests {
    use super::*;

    fn example(question: &str, query: &str) -> Example {
        Example::new(question, Vec::new(), Vec::new(), query)
    }

    fn pair(iri: &str, label: &str) -> (String, String) {
        (iri.to_string(), label.to_string())
    }

    #[test]
    fn encode_input_with_empty_lists_keeps_block_headers() {
        assert_eq!(
            encode_input("Who?", &[], &[], EncodeMode::Full),
            "Who?\nEntities: \nRelations: "
        );
    }

    #[test]
    fn encode_input_question_only_drops_everything() {
        let entities = vec![pair("Q1", "universe")];
        let relations = vec![pair("P31", "instance of")];
        assert_eq!(
            encode_input("Who?", &entities, &relations, EncodeMode::QuestionOnly),
            "Who?"
        );
    }

    #[test]
    fn encode_input_full_mode_golden() {
        let entities = vec![
            pair("http://www.wikidata.org/entity/Q142", "France"),
            pair("http://www.wikidata.org/entity/Q6256", "country"),
        ];
        let relations = vec![pair("http://www.wikidata.org/prop/direct/P36", "capital")];
        let got = encode_input(
            "What is the capital of France?",
            &entities,
            &relations,
            EncodeMode::Full,
        );
        assert_eq!(
            got,
            "What is the capital of France?\n\
             Entities: France (http://www.wikidata.org/entity/Q142); country (http://www.wikidata.org/entity/Q6256)\n\
             Relations: capital (http://www.wikidata.org/prop/direct/P36)"
        );
    }

    #[test]
    fn partial_ablations_drop_one_block() {
        let entities = vec![pair("Q1", "a")];
        let relations = vec![pair("P1", "b")];
        let no_e = encode_input("Q?", &entities, &relations, EncodeMode::NoEntities);
        assert!(!no_e.contains("Entities:"));
        assert!(no_e.contains("Relations:"));
        let no_r = encode_input("Q?", &entities, &relations, EncodeMode::NoRelations);
        assert!(no_r.contains("Entities:"));
        assert!(!no_r.contains("Relations:"));
    }

    #[test]
    fn build_store_assigns_indexes_and_is_deterministic() {
        let embedder = TrigramEmbedder::default();
        let examples = vec![
            example("one", "SELECT ?x { <a> <p> ?x }"),
            example("two", "SELECT ?x { <b> <p> ?x }"),
            example("three", "SELECT ?x { <c> <p> ?x }"),
        ];
        let s1 = build_store(examples.clone(), &embedder, EncodeMode::Full).unwrap();
        let s2 = build_store(examples, &embedder, EncodeMode::Full).unwrap();
        assert_eq!(s1.len(), 3);
        assert_eq!(s1.dimension(), 256);
        assert_eq!(
            s1.examples().iter().map(|e| e.source_index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        for (a, b) in s1.vectors().iter().zip(s2.vectors()) {
            let a_bits: Vec<u32> = a.values().iter().map(|v| v.to_bits()).collect();
            let b_bits: Vec<u32> = b.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a_bits, b_bits);
        }
    }

    #[test]
    fn chunked_build_merges_to_single_build() {
        let embedder = TrigramEmbedder::default();
        let all: Vec<Example> = (0..10)
            .map(|i| example(&format!("question number {i}"), &format!("SELECT ?x {{ <e{i}> <p> ?x }}")))
            .collect();
        let whole = build_store(all.clone(), &embedder, EncodeMode::Full).unwrap();
        let first = build_store(all[..4].to_vec(), &embedder, EncodeMode::Full).unwrap();
        let second = build_store(all[4..].to_vec(), &embedder, EncodeMode::Full).unwrap();
        let merged = first.merge(second).unwrap();
        assert_eq!(whole.examples(), merged.examples());
        assert_eq!(whole.encoder_id(), merged.encoder_id());
        for (a, b) in whole.vectors().iter().zip(merged.vectors()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn top_k_of_single_example_store() {
        let embedder = TrigramEmbedder::default();
        let store = build_store(
            vec![example("only one", "ASK { <a> <p> <b> }")],
            &embedder,
            EncodeMode::Full,
        )
        .unwrap();
        let q = store
            .query_vector(&embedder, "anything else", &[], &[], EncodeMode::Full)
            .unwrap();
        let hits = store.top_k(&q, 5).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0.question, "only one");
    }

    #[test]
    fn identical_query_scores_one_and_ranks_first() {
        let embedder = TrigramEmbedder::default();
        let store = build_store(
            vec![
                example("what rivers flow through berlin", "q0"),
                example("who wrote the hobbit", "q1"),
                example("capital of france", "q2"),
            ],
            &embedder,
            EncodeMode::Full,
        )
        .unwrap();
        let q = store
            .query_vector(&embedder, "who wrote the hobbit", &[], &[], EncodeMode::Full)
            .unwrap();
        let hits = store.top_k(&q, 2).unwrap();
        assert_eq!(hits[0].0.question, "who wrote the hobbit");
        assert!((hits[0].1 - 1.0).abs() < 1e-5, "score {}", hits[0].1);
    }

    #[test]
    fn ties_break_by_source_index() {
        let embedder = TrigramEmbedder::default();
        let store = build_store(
            vec![
                example("zebra", "q0"),
                example("same question", "q1"),
                example("same question", "q2"),
            ],
            &embedder,
            EncodeMode::Full,
        )
        .unwrap();
        let q = store
            .query_vector(&embedder, "same question", &[], &[], EncodeMode::Full)
            .unwrap();
        let hits = store.top_k(&q, 3).unwrap();
        assert_eq!(hits[0].0.source_index, 1);
        assert_eq!(hits[1].0.source_index, 2);
    }

    #[test]
    fn ranking_is_scale_invariant() {
        let embedder = TrigramEmbedder::default();
        let store = build_store(
            (0..50)
                .map(|i| example(&format!("question about topic {i} and {}", i * 7 % 13), "q"))
                .collect(),
            &embedder,
            EncodeMode::Full,
        )
        .unwrap();
        let q = store
            .query_vector(&embedder, "question about topic 21", &[], &[], EncodeMode::Full)
            .unwrap();
        let scaled = EmbeddingVector::new(q.values().iter().map(|v| v * 41.5).collect()).unwrap();
        let base: Vec<usize> = store.top_k(&q, 7).unwrap().iter().map(|(e, _)| e.source_index).collect();
        let scaled: Vec<usize> = store
            .top_k(&scaled, 7)
            .unwrap()
            .iter()
            .map(|(e, _)| e.source_index)
            .collect();
        assert_eq!(base, scaled);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let embedder = TrigramEmbedder::default();
        let store = build_store(vec![example("a", "q")], &embedder, EncodeMode::Full).unwrap();
        let bad = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            store.top_k(&bad, 1),
            Err(StoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mode_mismatch_is_an_error() {
        let embedder = TrigramEmbedder::default();
        let store = build_store(vec![example("a", "q")], &embedder, EncodeMode::Full).unwrap();
        let err = store
            .query_vector(&embedder, "a", &[], &[], EncodeMode::QuestionOnly)
            .unwrap_err();
        assert!(matches!(err, StoreError::ModeMismatch { .. }));
    }

    #[test]
    fn strict_mode_excludes_exact_duplicate_question() {
        let embedder = TrigramEmbedder::default();
        let store = build_store(
            vec![example("who is here", "q0"), example("who was there", "q1")],
            &embedder,
            EncodeMode::Full,
        )
        .unwrap();
        let q = store
            .query_vector(&embedder, "who is here", &[], &[], EncodeMode::Full)
            .unwrap();
        let hits = store
            .top_k_with(
                &q,
                2,
                RetrievalOptions {
                    exclude_exact_question: Some("who is here"),
                },
            )
            .unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0.question, "who was there");
    }

    #[test]
    fn sidecar_roundtrip_preserves_vectors_exactly() {
        let embedder = TrigramEmbedder::default();
        let examples = vec![example("first", "q0"), example("second", "q1")];
        let store = build_store(examples.clone(), &embedder, EncodeMode::Full).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.json");
        store.save_vectors(&path).unwrap();
        let reloaded = ExampleStore::load_with_vectors(examples, &path).unwrap();
        assert_eq!(reloaded.encoder_id(), store.encoder_id());
        for (a, b) in store.vectors().iter().zip(reloaded.vectors()) {
            let a_bits: Vec<u32> = a.values().iter().map(|v| v.to_bits()).collect();
            let b_bits: Vec<u32> = b.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a_bits, b_bits);
        }
    }
}

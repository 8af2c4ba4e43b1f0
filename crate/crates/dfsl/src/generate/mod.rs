//! Language-model client contract: backends produce up to `b` ranked
//! hypotheses for a prompt, raw model output is parsed for the SPARQL
//! payload, and beam lists are deduplicated by canonical query form.

mod cache;
mod http;
mod mock;

pub use cache::{cache_entries, clear_cache, CacheEntry, CachedClient};
pub use http::{HttpGenerationClient, ENV_BACKEND_MODEL, ENV_BACKEND_TOKEN, ENV_BACKEND_URL};
pub use mock::{DemoPosition, EchoMock, FlipMock, FlipOrder, ScriptedMock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::Prompt;
use crate::sparql::{normalize, parse_with_prefixes, PrefixMap};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("backend cannot return multiple hypotheses: {0}")]
    MultiHypothesisUnsupported(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Beam,
    Single,
}

#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub prompt: Prompt,
    /// Beam width b: how many ranked hypotheses to return.
    pub num_hypotheses: usize,
    pub max_tokens: usize,
    pub decode_mode: DecodeMode,
}

pub const DEFAULT_MAX_TOKENS: usize = 256;

impl GenerationRequest {
    pub fn new(prompt: Prompt, num_hypotheses: usize) -> Self {
        Self {
            prompt,
            num_hypotheses,
            max_tokens: DEFAULT_MAX_TOKENS,
            decode_mode: if num_hypotheses == 1 {
                DecodeMode::Single
            } else {
                DecodeMode::Beam
            },
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.num_hypotheses == 0 {
            return Err(GenerationError::InvalidRequest(
                "num_hypotheses must be at least 1".into(),
            ));
        }
        if self.decode_mode == DecodeMode::Single && self.num_hypotheses != 1 {
            return Err(GenerationError::InvalidRequest(
                "single decode mode implies exactly one hypothesis".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutput {
    /// Raw hypothesis texts, best first (the backend's beam order).
    pub hypotheses: Vec<String>,
    /// Optional model log-scores parallel to `hypotheses`.
    pub scores: Option<Vec<f64>>,
    pub backend_id: String,
    /// Set when multiple hypotheses came from repeated sampling rather
    /// than real beam search.
    #[serde(default)]
    pub degraded_sampling: bool,
}

impl GenerationOutput {
    pub fn truncated(mut self, limit: usize) -> Self {
        self.hypotheses.truncate(limit);
        if let Some(scores) = &mut self.scores {
            scores.truncate(limit);
        }
        self
    }
}

pub trait GenerationClient: Send + Sync {
    /// Stable backend identifier; part of the cache key.
    fn id(&self) -> String;

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationOutput, GenerationError>;
}

impl<T: GenerationClient + ?Sized> GenerationClient for Box<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationOutput, GenerationError> {
        (**self).generate(request)
    }
}

/// The SPARQL payload recovered from raw model output.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub query: String,
    /// True when no tags were found and a query-keyword heuristic was
    /// used instead.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model output contains no SPARQL tags and no query-like text")]
pub struct ExtractionFailure;

const OPEN_TAG: &str = "<SPARQL>";
const CLOSE_TAG: &str = "</SPARQL>";

/// Returns the content of the first well-formed `<SPARQL>...</SPARQL>`
/// pair. Without tags, falls back to the text from the first
/// SELECT/ASK/PREFIX keyword onward, flagged as lenient.
pub fn extract_query(raw: &str) -> Result<Extraction, ExtractionFailure> {
    if let Some(start) = raw.find(OPEN_TAG) {
        let after = &raw[start + OPEN_TAG.len()..];
        if let Some(end) = after.find(CLOSE_TAG) {
            return Ok(Extraction {
                query: after[..end].trim().to_string(),
                lenient: false,
            });
        }
    }
    if let Some(at) = first_query_keyword(raw) {
        return Ok(Extraction {
            query: raw[at..].trim().to_string(),
            lenient: true,
        });
    }
    Err(ExtractionFailure)
}

fn first_query_keyword(text: &str) -> Option<usize> {
    let lower = text.to_lowercase();
    let bytes = lower.as_bytes();
    let mut best: Option<usize> = None;
    for keyword in ["select", "ask", "prefix"] {
        let mut from = 0;
        while let Some(pos) = lower[from..].find(keyword) {
            let at = from + pos;
            let bounded_left = at == 0 || !bytes[at - 1].is_ascii_alphanumeric();
            let right = at + keyword.len();
            let bounded_right = right >= bytes.len() || !bytes[right].is_ascii_alphanumeric();
            if bounded_left && bounded_right {
                best = Some(best.map_or(at, |b| b.min(at)));
                break;
            }
            from = at + 1;
        }
    }
    best
}

/// Removes duplicate hypotheses: parseable queries compare by their
/// canonical form, unparseable ones by trimmed text. The earliest
/// occurrence wins and order is preserved.
pub fn dedupe_hypotheses(hypotheses: &[String], prefixes: &PrefixMap) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for hypothesis in hypotheses {
        let key = match parse_with_prefixes(hypothesis, prefixes) {
            Ok(ast) => normalize(&ast),
            Err(_) => hypothesis.trim().to_string(),
        };
        if seen.insert(key) {
            out.push(hypothesis.clone());
        }
    }
    out
}

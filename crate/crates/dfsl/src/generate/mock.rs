//! Deterministic mock backends. The 46-70B backbones behind the real
//! pipeline are out of desk scope; these mocks make every downstream
//! contract testable hermetically.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::sparql::{flip_triples, normalize, parse_with_prefixes, PrefixMap};

use super::{GenerationClient, GenerationError, GenerationOutput, GenerationRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoPosition {
    /// The demonstration adjacent to the input question under the
    /// default most-similar-last ordering.
    Last,
    First,
}

/// Returns the query of the most similar retrieved demonstration, read
/// back out of the prompt text and wrapped in tags. With questions that
/// duplicate storage entries this echoes the gold query.
pub struct EchoMock {
    pub demo_position: DemoPosition,
}

impl Default for EchoMock {
    fn default() -> Self {
        Self {
            demo_position: DemoPosition::Last,
        }
    }
}

fn tagged_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("<SPARQL>") {
        let after = &rest[start + 8..];
        let Some(end) = after.find("</SPARQL>") else {
            break;
        };
        out.push(after[..end].trim());
        rest = &after[end + 9..];
    }
    out
}

impl GenerationClient for EchoMock {
    fn id(&self) -> String {
        "echo-mock".to_string()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationOutput, GenerationError> {
        request.validate()?;
        // skip the header's tag-contract mention, which is an empty-ish
        // pair only when the template changes; demo blocks carry queries
        let queries: Vec<&str> = tagged_blocks(&request.prompt.text)
            .into_iter()
            .filter(|q| !q.is_empty() && *q != "your query here")
            .collect();
        let hypothesis = match self.demo_position {
            DemoPosition::Last => queries.last(),
            DemoPosition::First => queries.first(),
        };
        let hypotheses = match hypothesis {
            Some(query) => vec![format!("<SPARQL>{query}</SPARQL>")],
            None => vec![String::new()],
        };
        Ok(GenerationOutput {
            hypotheses,
            scores: None,
            backend_id: self.id(),
            degraded_sampling: false,
        }
        .truncated(request.num_hypotheses))
    }
}

/// Replays a fixture transcript keyed by prompt fingerprint.
pub struct ScriptedMock {
    transcripts: HashMap<String, Vec<String>>,
    fallback: Option<Vec<String>>,
    calls: AtomicUsize,
}

impl ScriptedMock {
    pub fn new(transcripts: HashMap<String, Vec<String>>) -> Self {
        Self {
            transcripts,
            fallback: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Served when no transcript matches the fingerprint.
    pub fn with_fallback(mut self, hypotheses: Vec<String>) -> Self {
        self.fallback = Some(hypotheses);
        self
    }

    /// Number of generate calls that reached this backend.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GenerationClient for ScriptedMock {
    fn id(&self) -> String {
        "scripted-mock".to_string()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationOutput, GenerationError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hypotheses = self
            .transcripts
            .get(&request.prompt.fingerprint)
            .or(self.fallback.as_ref())
            .ok_or_else(|| {
                GenerationError::Backend(format!(
                    "no transcript for prompt fingerprint {}",
                    &request.prompt.fingerprint[..12.min(request.prompt.fingerprint.len())]
                ))
            })?;
        Ok(GenerationOutput {
            hypotheses: hypotheses.clone(),
            scores: None,
            backend_id: self.id(),
            degraded_sampling: false,
        }
        .truncated(request.num_hypotheses))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipOrder {
    FlippedFirst,
    CorrectFirst,
}

/// Wraps another backend and emits both the inner backend's query and
/// its subject-object flipped variant, in a configurable beam order.
/// Reproduces the triple-flip beam structure at desk scale.
pub struct FlipMock<C> {
    inner: C,
    order: FlipOrder,
    prefixes: PrefixMap,
}

impl<C: GenerationClient> FlipMock<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            order: FlipOrder::FlippedFirst,
            prefixes: PrefixMap::default(),
        }
    }

    pub fn with_order(mut self, order: FlipOrder) -> Self {
        self.order = order;
        self
    }
}

impl<C: GenerationClient> GenerationClient for FlipMock<C> {
    fn id(&self) -> String {
        format!("flip-mock({})", self.inner.id())
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationOutput, GenerationError> {
        request.validate()?;
        let inner = self.inner.generate(request)?;
        let Some(first) = inner.hypotheses.first() else {
            return Ok(inner);
        };
        let correct = match super::extract_query(first) {
            Ok(extraction) => extraction.query,
            Err(_) => {
                return Ok(GenerationOutput {
                    hypotheses: inner.hypotheses,
                    scores: None,
                    backend_id: self.id(),
                    degraded_sampling: false,
                }
                .truncated(request.num_hypotheses))
            }
        };
        let flipped = parse_with_prefixes(&correct, &self.prefixes)
            .ok()
            .and_then(|ast| flip_triples(&ast).into_iter().next())
            .map(|variant| normalize(&variant));
        let hypotheses = match (flipped, self.order) {
            (Some(flip), FlipOrder::FlippedFirst) => vec![
                format!("<SPARQL>{flip}</SPARQL>"),
                format!("<SPARQL>{correct}</SPARQL>"),
            ],
            (Some(flip), FlipOrder::CorrectFirst) => vec![
                format!("<SPARQL>{correct}</SPARQL>"),
                format!("<SPARQL>{flip}</SPARQL>"),
            ],
            (None, _) => vec![format!("<SPARQL>{correct}</SPARQL>")],
        };
        Ok(GenerationOutput {
            hypotheses,
            scores: None,
            backend_id: self.id(),
            degraded_sampling: false,
        }
        .truncated(request.num_hypotheses))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{build_prompt, PromptConfig, PromptMode};
    use crate::retrieval::Example;

    fn demo(question: &str, query: &str) -> Example {
        Example::new(question, Vec::new(), Vec::new(), query)
    }

    fn dfsl_prompt() -> crate::prompt::Prompt {
        let mut config = PromptConfig::new(PromptMode::Dfsl, "Wikidata");
        config.k = 3;
        let demos = vec![
            demo("most similar", "SELECT ?x WHERE { <hit> <p> ?x }"),
            demo("mid", "SELECT ?x WHERE { <mid> <p> ?x }"),
            demo("least", "SELECT ?x WHERE { <miss> <p> ?x }"),
        ];
        build_prompt(&config, "input?", &[], &[], &demos).unwrap()
    }

    #[test]
    fn echo_returns_the_most_similar_demo_query() {
        let prompt = dfsl_prompt();
        let output = EchoMock::default()
            .generate(&GenerationRequest::new(prompt, 1))
            .unwrap();
        assert_eq!(
            output.hypotheses,
            vec!["<SPARQL>SELECT ?x WHERE { <hit> <p> ?x }</SPARQL>".to_string()]
        );
    }

    #[test]
    fn echo_without_demos_yields_unextractable_text() {
        let config = PromptConfig::new(PromptMode::ZeroShot, "Wikidata");
        let prompt = build_prompt(&config, "input?", &[], &[], &[]).unwrap();
        let output = EchoMock::default()
            .generate(&GenerationRequest::new(prompt, 1))
            .unwrap();
        assert!(super::super::extract_query(&output.hypotheses[0]).is_err());
    }

    #[test]
    fn scripted_mock_replays_in_order_and_truncates() {
        let prompt = dfsl_prompt();
        let mut transcripts = HashMap::new();
        transcripts.insert(
            prompt.fingerprint.clone(),
            vec!["h1".to_string(), "h2".to_string(), "h3".to_string()],
        );
        let mock = ScriptedMock::new(transcripts);
        let out = mock.generate(&GenerationRequest::new(prompt.clone(), 3)).unwrap();
        assert_eq!(out.hypotheses, vec!["h1", "h2", "h3"]);
        let out = mock.generate(&GenerationRequest::new(prompt, 2)).unwrap();
        assert_eq!(out.hypotheses, vec!["h1", "h2"]);
        assert_eq!(mock.calls(), 2);
    }

    #[test]
    fn scripted_mock_without_transcript_is_a_backend_error() {
        let mock = ScriptedMock::new(HashMap::new());
        let err = mock
            .generate(&GenerationRequest::new(dfsl_prompt(), 1))
            .unwrap_err();
        assert!(matches!(err, GenerationError::Backend(_)));
    }

    #[test]
    fn flip_mock_emits_flipped_then_correct() {
        let prompt = dfsl_prompt();
        let mock = FlipMock::new(EchoMock::default());
        let out = mock.generate(&GenerationRequest::new(prompt.clone(), 2)).unwrap();
        assert_eq!(out.hypotheses.len(), 2);
        assert!(out.hypotheses[0].contains("<p> <hit>") || out.hypotheses[0].contains("?v0 <p>"));
        assert!(out.hypotheses[1].contains("<hit> <p>"));

        let out = mock
            .generate(&GenerationRequest::new(prompt.clone(), 1))
            .unwrap();
        assert_eq!(out.hypotheses.len(), 1, "b=1 keeps only the flipped beam");

        let mock = FlipMock::new(EchoMock::default()).with_order(FlipOrder::CorrectFirst);
        let out = mock.generate(&GenerationRequest::new(prompt, 2)).unwrap();
        assert!(out.hypotheses[0].contains("<hit> <p>"));
    }
}

//! Embedding interfaces: the deterministic character-trigram fallback
//! used for hermetic runs, and the JSON-over-HTTP client for a remote
//! sentence-encoder service.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::StoreError;

/// A fixed-dimension real vector. Components are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, StoreError> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(StoreError::InvalidVector(format!(
                "non-finite component {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f32 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f32 {
        self.dot(self).sqrt()
    }

    /// L2-normalized copy; the zero vector stays zero.
    pub fn normalized(&self) -> EmbeddingVector {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        EmbeddingVector {
            values: self.values.iter().map(|v| v / norm).collect(),
        }
    }
}

pub trait Embedder: Send + Sync {
    /// Stable identifier recorded in the store's `encoder_id`.
    fn id(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, StoreError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, StoreError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop()
            .ok_or_else(|| StoreError::Remote("embedder returned no vector".into()))
    }
}

/// Hermetic fallback embedder: character trigrams hashed into a fixed
/// number of buckets, counted, then L2-normalized. Deterministic across
/// runs and processes; identical texts embed identically and lexically
/// close texts land close in cosine space.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self { dimension: 256 }
    }
}

impl TrigramEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for TrigramEmbedder {
    fn id(&self) -> String {
        format!("trigram-{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, StoreError> {
        texts
            .iter()
            .map(|text| {
                let mut counts = vec![0.0f32; self.dimension];
                let chars: Vec<char> = text.chars().collect();
                let mut bump = |gram: &[char]| {
                    let gram: String = gram.iter().collect();
                    let bucket = (fnv1a(gram.as_bytes()) % self.dimension as u64) as usize;
                    counts[bucket] += 1.0;
                };
                if chars.len() < 3 {
                    if !chars.is_empty() {
                        bump(&chars);
                    }
                } else {
                    for window in chars.windows(3) {
                        bump(window);
                    }
                }
                Ok(EmbeddingVector { values: counts }.normalized())
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model_id: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for a remote embedding service: POST `{model_id, texts}`,
/// response `{vectors}`. A service failure is an error; there is no
/// silent fallback to the hermetic embedder.
pub struct RemoteEmbedder {
    url: String,
    model_id: String,
    dimension: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>, model_id: impl Into<String>, dimension: usize) -> Self {
        Self {
            url: url.into(),
            model_id: model_id.into(),
            dimension,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(120))
                .build(),
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote-{}", self.model_id)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, StoreError> {
        let request = EmbedRequest {
            model_id: &self.model_id,
            texts,
        };
        let response = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json")
            .send_string(&serde_json::to_string(&request)?)
            .map_err(|e| StoreError::Remote(e.to_string()))?;
        let parsed: EmbedResponse = serde_json::from_reader(response.into_reader())
            .map_err(|e| StoreError::Remote(format!("bad response: {e}")))?;
        if parsed.vectors.len() != texts.len() {
            return Err(StoreError::Remote(format!(
                "{} vectors for {} texts",
                parsed.vectors.len(),
                texts.len()
            )));
        }
        parsed
            .vectors
            .into_iter()
            .map(|values| {
                if values.len() != self.dimension {
                    return Err(StoreError::Remote(format!(
                        "vector dimension {} differs from declared {}",
                        values.len(),
                        self.dimension
                    )));
                }
                EmbeddingVector::new(values)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_embed_identically() {
        let e = TrigramEmbedder::default();
        let a = e.embed("what rivers flow through berlin").unwrap();
        let b = e.embed("what rivers flow through berlin").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unrelated_trigrams_score_below_one() {
        // independent check from the definition: "abc" and "xyz" are
        // single distinct trigrams, so their bucket vectors are disjoint
        // unless the two hashes collide mod 256 (they do not)
        let e = TrigramEmbedder::default();
        let a = e.embed("abc").unwrap();
        let b = e.embed("xyz").unwrap();
        let h_abc = fnv1a(b"abc") % 256;
        let h_xyz = fnv1a(b"xyz") % 256;
        assert_ne!(h_abc, h_xyz);
        let cosine = a.dot(&b);
        assert_eq!(cosine, 0.0);
        assert!(cosine < 1.0);
    }

    #[test]
    fn shared_trigrams_raise_similarity() {
        let e = TrigramEmbedder::default();
        let base = e.embed("who wrote the hobbit").unwrap();
        let close = e.embed("who wrote the hobbits").unwrap();
        let far = e.embed("capital city of mongolia").unwrap();
        assert!(base.dot(&close) > base.dot(&far));
    }

    #[test]
    fn short_and_empty_texts_are_handled() {
        let e = TrigramEmbedder::default();
        let short = e.embed("ab").unwrap();
        assert!((short.norm() - 1.0).abs() < 1e-6);
        let empty = e.embed("").unwrap();
        assert_eq!(empty.norm(), 0.0);
    }

    #[test]
    fn non_finite_components_are_rejected() {
        assert!(EmbeddingVector::new(vec![1.0, f32::NAN]).is_err());
        assert!(EmbeddingVector::new(vec![1.0, f32::INFINITY]).is_err());
    }

    #[test]
    fn remote_embedder_returns_served_vector() {
        let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
        let port = server.server_addr().to_ip().unwrap().port();
        let handle = std::thread::spawn(move || {
            let request = server.recv().unwrap();
            let response = tiny_http::Response::from_string(
                r#"{"vectors": [[0.5, 0.25, 0.0, 1.0]]}"#,
            );
            request.respond(response).unwrap();
        });
        let embedder = RemoteEmbedder::new(format!("http://127.0.0.1:{port}/embed"), "test-model", 4);
        let v = embedder.embed("anything").unwrap();
        assert_eq!(v.values(), &[0.5, 0.25, 0.0, 1.0]);
        handle.join().unwrap();
    }

    #[test]
    fn remote_failure_is_an_error_not_a_fallback() {
        let embedder = RemoteEmbedder::new("http://127.0.0.1:1/embed", "down", 4);
        assert!(matches!(
            embedder.embed("anything"),
            Err(StoreError::Remote(_))
        ));
    }
}

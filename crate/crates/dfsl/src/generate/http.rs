//! JSON-over-HTTP completion client compatible with common inference
//! servers: request `{model, prompt, n, max_tokens, decode}`, response
//! `{hypotheses: [{text, score}]}`. When the server cannot return real
//! beams, `b` greedy samples with distinct seeds are accepted as a
//! degraded substitute and flagged in the output.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DecodeMode, GenerationClient, GenerationError, GenerationOutput, GenerationRequest};

pub const ENV_BACKEND_URL: &str = "DFSL_BACKEND_URL";
pub const ENV_BACKEND_MODEL: &str = "DFSL_BACKEND_MODEL";
pub const ENV_BACKEND_TOKEN: &str = "DFSL_BACKEND_TOKEN";

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    n: usize,
    max_tokens: usize,
    decode: WireDecode,
}

#[derive(Serialize)]
struct WireDecode {
    mode: &'static str,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireResponse {
    hypotheses: Vec<WireHypothesis>,
}

#[derive(Deserialize)]
struct WireHypothesis {
    text: String,
    #[serde(default)]
    score: Option<f64>,
}

pub struct HttpGenerationClient {
    url: String,
    model: String,
    token: Option<String>,
    /// Whether the server implements n-best beam search.
    beam_capable: bool,
    /// Accept repeated greedy sampling when beams are unavailable.
    allow_sampling_fallback: bool,
    seed: u64,
    max_retries: u32,
    agent: ureq::Agent,
}

impl HttpGenerationClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            token: None,
            beam_capable: true,
            allow_sampling_fallback: false,
            seed: 0,
            max_retries: 2,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(300))
                .build(),
        }
    }

    /// Reads `DFSL_BACKEND_URL`, `DFSL_BACKEND_MODEL` and the optional
    /// `DFSL_BACKEND_TOKEN`.
    pub fn from_env() -> Result<Self, GenerationError> {
        let url = std::env::var(ENV_BACKEND_URL).map_err(|_| {
            GenerationError::Backend(format!("{ENV_BACKEND_URL} is not set"))
        })?;
        let model = std::env::var(ENV_BACKEND_MODEL).map_err(|_| {
            GenerationError::Backend(format!("{ENV_BACKEND_MODEL} is not set"))
        })?;
        let mut client = Self::new(url, model);
        client.token = std::env::var(ENV_BACKEND_TOKEN).ok();
        Ok(client)
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn with_beam_capable(mut self, beam_capable: bool) -> Self {
        self.beam_capable = beam_capable;
        self
    }

    pub fn with_sampling_fallback(mut self, allow: bool) -> Self {
        self.allow_sampling_fallback = allow;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn call(&self, wire: &WireRequest<'_>) -> Result<WireResponse, GenerationError> {
        let body = serde_json::to_string(wire)
            .map_err(|e| GenerationError::Backend(e.to_string()))?;
        let mut attempt = 0;
        loop {
            let mut request = self
                .agent
                .post(&self.url)
                .set("Content-Type", "application/json");
            if let Some(token) = &self.token {
                request = request.set("Authorization", &format!("Bearer {token}"));
            }
            match request.send_string(&body) {
                Ok(response) => {
                    return serde_json::from_reader(response.into_reader()).map_err(|e| {
                        GenerationError::Backend(format!("bad backend response: {e}"))
                    });
                }
                Err(ureq::Error::Status(code, _)) if code >= 500 && attempt < self.max_retries => {}
                Err(ureq::Error::Transport(_)) if attempt < self.max_retries => {}
                Err(ureq::Error::Status(code, _)) => {
                    return Err(GenerationError::Backend(format!("HTTP status {code}")))
                }
                Err(ureq::Error::Transport(t)) => {
                    return Err(GenerationError::Transport(t.to_string()))
                }
            }
            attempt += 1;
            std::thread::sleep(Duration::from_millis(100) * 2u32.saturating_pow(attempt));
        }
    }
}

impl GenerationClient for HttpGenerationClient {
    fn id(&self) -> String {
        format!("http-{}", self.model)
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationOutput, GenerationError> {
        request.validate()?;
        let wants_beams = request.num_hypotheses > 1 && request.decode_mode == DecodeMode::Beam;
        if wants_beams && !self.beam_capable && !self.allow_sampling_fallback {
            return Err(GenerationError::MultiHypothesisUnsupported(format!(
                "backend {} is configured without beam support; run with a single hypothesis \
                 (selection=single, b=1) or enable the sampling fallback",
                self.id()
            )));
        }

        if wants_beams && !self.beam_capable {
            // degraded substitute: b greedy samples with distinct seeds
            let mut hypotheses = Vec::with_capacity(request.num_hypotheses);
            let mut scores = Vec::with_capacity(request.num_hypotheses);
            for i in 0..request.num_hypotheses {
                let wire = WireRequest {
                    model: &self.model,
                    prompt: &request.prompt.text,
                    n: 1,
                    max_tokens: request.max_tokens,
                    decode: WireDecode {
                        mode: "sample",
                        temperature: 0.0,
                        seed: Some(self.seed.wrapping_add(i as u64)),
                    },
                };
                let response = self.call(&wire)?;
                let first = response.hypotheses.into_iter().next().ok_or_else(|| {
                    GenerationError::Backend("backend returned no hypotheses".into())
                })?;
                hypotheses.push(first.text);
                scores.push(first.score.unwrap_or(0.0));
            }
            return Ok(GenerationOutput {
                hypotheses,
                scores: Some(scores),
                backend_id: self.id(),
                degraded_sampling: true,
            });
        }

        let wire = WireRequest {
            model: &self.model,
            prompt: &request.prompt.text,
            n: request.num_hypotheses,
            max_tokens: request.max_tokens,
            decode: WireDecode {
                mode: match request.decode_mode {
                    DecodeMode::Beam => "beam",
                    DecodeMode::Single => "single",
                },
                temperature: 0.0,
                seed: None,
            },
        };
        let response = self.call(&wire)?;
        if response.hypotheses.is_empty() {
            return Err(GenerationError::Backend(
                "backend returned no hypotheses".into(),
            ));
        }
        let mut hypotheses = Vec::new();
        let mut scores = Vec::new();
        for h in response.hypotheses {
            hypotheses.push(h.text);
            scores.push(h.score.unwrap_or(0.0));
        }
        Ok(GenerationOutput {
            hypotheses,
            scores: Some(scores),
            backend_id: self.id(),
            degraded_sampling: false,
        }
        .truncated(request.num_hypotheses))
    }
}

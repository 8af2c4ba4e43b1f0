//! SPARQL-protocol client for remote endpoints, plus a local stub server
//! backed by the subset evaluator so remote and hermetic execution are
//! interchangeable in tests and examples.
//!
//! Queries are sent verbatim: the remote engine, not the subset parser,
//! is authoritative for what it accepts.

mod stub;

pub use stub::StubEndpoint;

use std::io::Read;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::kg::Term;
use crate::sparql::{AnswerSet, Row};

pub const RESULTS_JSON: &str = "application/sparql-results+json";

#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub user_agent: String,
    /// Minimum delay between request starts (public-endpoint etiquette).
    pub min_request_interval: Duration,
    /// Bound on concurrent in-flight requests.
    pub max_concurrent: usize,
    /// Base delay for exponential retry backoff.
    pub retry_base_delay: Duration,
    pub extra_headers: Vec<(String, String)>,
    pub method: HttpMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HttpMethod {
    Get,
    Post,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout: Duration::from_secs(30),
            max_retries: 2,
            user_agent: concat!("dfsl/", env!("CARGO_PKG_VERSION")).to_string(),
            min_request_interval: Duration::from_millis(200),
            max_concurrent: 4,
            retry_base_delay: Duration::from_millis(100),
            extra_headers: Vec::new(),
            method: HttpMethod::Get,
        }
    }

    fn validate(&self) -> Result<(), ExecutionFailure> {
        if self.timeout.is_zero() {
            return Err(ExecutionFailure::Config("timeout must be positive".into()));
        }
        if self.max_concurrent == 0 {
            return Err(ExecutionFailure::Config(
                "max_concurrent must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Why a query produced no answer. The selection layer treats any of
/// these as an empty answer set, but the category is kept for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecutionFailure {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    Http(u16),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("query rejected: {0}")]
    InvalidQuery(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl ExecutionFailure {
    pub fn category(&self) -> &'static str {
        match self {
            ExecutionFailure::Timeout => "timeout",
            ExecutionFailure::Http(_) => "http_status",
            ExecutionFailure::Transport(_) => "transport",
            ExecutionFailure::MalformedResponse(_) => "malformed_response",
            ExecutionFailure::InvalidQuery(_) => "invalid_query",
            ExecutionFailure::Config(_) => "config",
        }
    }

    /// Transient failures are retried; client errors and malformed
    /// payloads are not.
    fn is_transient(&self) -> bool {
        match self {
            ExecutionFailure::Timeout | ExecutionFailure::Transport(_) => true,
            ExecutionFailure::Http(status) => *status >= 500,
            _ => false,
        }
    }
}

struct GateState {
    in_flight: usize,
    next_slot: Option<Instant>,
}

/// Serializes request starts: at most `max_concurrent` in flight, at
/// least `min_request_interval` between consecutive starts.
struct RequestGate {
    state: Mutex<GateState>,
    available: Condvar,
}

impl RequestGate {
    fn new() -> Self {
        Self {
            state: Mutex::new(GateState {
                in_flight: 0,
                next_slot: None,
            }),
            available: Condvar::new(),
        }
    }

    fn acquire(&self, max_concurrent: usize, interval: Duration) {
        let mut state = self.state.lock().unwrap();
        while state.in_flight >= max_concurrent {
            state = self.available.wait(state).unwrap();
        }
        state.in_flight += 1;
        let now = Instant::now();
        let scheduled = match state.next_slot {
            Some(slot) if slot > now => slot,
            _ => now,
        };
        state.next_slot = Some(scheduled + interval);
        drop(state);
        let now = Instant::now();
        if scheduled > now {
            std::thread::sleep(scheduled - now);
        }
    }

    fn release(&self) {
        let mut state = self.state.lock().unwrap();
        state.in_flight -= 1;
        drop(state);
        self.available.notify_one();
    }
}

pub struct EndpointClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    gate: RequestGate,
}

impl EndpointClient {
    pub fn new(config: EndpointConfig) -> Result<Self, ExecutionFailure> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(config.timeout)
            .user_agent(&config.user_agent)
            .build();
        Ok(Self {
            config,
            agent,
            gate: RequestGate::new(),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Issues the query, retrying transient failures up to `max_retries`
    /// with exponential backoff.
    pub fn execute(&self, query: &str) -> Result<AnswerSet, ExecutionFailure> {
        let mut attempt = 0u32;
        loop {
            self.gate
                .acquire(self.config.max_concurrent, self.config.min_request_interval);
            let outcome = self.send(query);
            self.gate.release();
            match outcome {
                Ok(body) => return parse_results(&body),
                Err(failure) if failure.is_transient() && attempt < self.config.max_retries => {
                    let delay = self.config.retry_base_delay * 2u32.saturating_pow(attempt);
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(failure) => return Err(failure),
            }
        }
    }

    fn send(&self, query: &str) -> Result<Vec<u8>, ExecutionFailure> {
        let mut request = match self.config.method {
            HttpMethod::Get => self.agent.get(&self.config.url).query("query", query),
            HttpMethod::Post => self.agent.post(&self.config.url),
        };
        request = request.set("Accept", RESULTS_JSON);
        for (name, value) in &self.config.extra_headers {
            request = request.set(name, value);
        }
        let response = match self.config.method {
            HttpMethod::Get => request.call(),
            HttpMethod::Post => request.send_form(&[("query", query)]),
        };
        match response {
            Ok(resp) => {
                let mut body = Vec::new();
                resp.into_reader()
                    .take(64 * 1024 * 1024)
                    .read_to_end(&mut body)
                    .map_err(|e| ExecutionFailure::Transport(e.to_string()))?;
                Ok(body)
            }
            Err(ureq::Error::Status(code, _)) => Err(ExecutionFailure::Http(code)),
            Err(ureq::Error::Transport(t)) => Err(classify_transport(&t)),
        }
    }
}

fn classify_transport(t: &ureq::Transport) -> ExecutionFailure {
    let mut source: Option<&(dyn std::error::Error + 'static)> = Some(t);
    while let Some(err) = source {
        if let Some(io) = err.downcast_ref::<std::io::Error>() {
            if matches!(
                io.kind(),
                std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
            ) {
                return ExecutionFailure::Timeout;
            }
        }
        source = err.source();
    }
    let message = t.to_string();
    if message.contains("timed out") || message.contains("timeout") {
        ExecutionFailure::Timeout
    } else {
        ExecutionFailure::Transport(message)
    }
}

/// One-shot convenience around [`EndpointClient`].
pub fn execute_remote(
    config: &EndpointConfig,
    query: &str,
) -> Result<AnswerSet, ExecutionFailure> {
    EndpointClient::new(config.clone())?.execute(query)
}

/// Parses a standard SPARQL JSON results document into an [`AnswerSet`].
pub fn parse_results(body: &[u8]) -> Result<AnswerSet, ExecutionFailure> {
    let doc: Value = serde_json::from_slice(body)
        .map_err(|e| ExecutionFailure::MalformedResponse(e.to_string()))?;
    if let Some(boolean) = doc.get("boolean") {
        let truth = boolean.as_bool().ok_or_else(|| {
            ExecutionFailure::MalformedResponse("'boolean' is not a boolean".into())
        })?;
        return Ok(AnswerSet::Boolean(truth));
    }
    let Some(results) = doc.get("results") else {
        return Err(ExecutionFailure::MalformedResponse(
            "document has neither 'boolean' nor 'results'".into(),
        ));
    };
    let bindings = results
        .get("bindings")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            ExecutionFailure::MalformedResponse("'results.bindings' missing or not an array".into())
        })?;
    let mut rows = std::collections::BTreeSet::new();
    for binding in bindings {
        let object = binding.as_object().ok_or_else(|| {
            ExecutionFailure::MalformedResponse("binding row is not an object".into())
        })?;
        let mut row = Row::new();
        for (var, term) in object {
            row.0.insert(var.clone(), json_to_term(term)?);
        }
        rows.insert(row);
    }
    Ok(AnswerSet::Bindings(rows))
}

fn json_to_term(value: &Value) -> Result<Term, ExecutionFailure> {
    let object = value.as_object().ok_or_else(|| {
        ExecutionFailure::MalformedResponse("term is not an object".into())
    })?;
    let kind = object.get("type").and_then(Value::as_str).ok_or_else(|| {
        ExecutionFailure::MalformedResponse("term has no 'type'".into())
    })?;
    let text = object
        .get("value")
        .and_then(Value::as_str)
        .ok_or_else(|| ExecutionFailure::MalformedResponse("term has no 'value'".into()))?;
    match kind {
        "uri" => Ok(Term::iri(text)),
        // blank node labels have no place in the graph model; keep them
        // comparable by mapping to an IRI-kind term
        "bnode" => Ok(Term::iri(format!("_:{text}"))),
        "literal" | "typed-literal" => {
            let datatype = object
                .get("datatype")
                .and_then(Value::as_str)
                .map(str::to_string);
            let language = object
                .get("xml:lang")
                .and_then(Value::as_str)
                .map(str::to_string);
            Ok(Term::Literal {
                value: text.to_string(),
                datatype,
                language,
            })
        }
        other => Err(ExecutionFailure::MalformedResponse(format!(
            "unknown term type {other:?}"
        ))),
    }
}

/// Renders an [`AnswerSet`] as a standard SPARQL JSON results document.
pub fn answer_to_json(answer: &AnswerSet) -> Value {
    match answer {
        AnswerSet::Boolean(truth) => json!({"head": {}, "boolean": truth}),
        AnswerSet::Bindings(rows) => {
            let mut vars: Vec<String> = rows
                .iter()
                .flat_map(|r| r.0.keys().cloned())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect::<Vec<_>>();
            vars.sort();
            let bindings: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let mut obj = Map::new();
                    for (var, term) in &row.0 {
                        obj.insert(var.clone(), term_to_json(term));
                    }
                    Value::Object(obj)
                })
                .collect();
            json!({
                "head": {"vars": vars},
                "results": {"bindings": bindings},
            })
        }
    }
}

fn term_to_json(term: &Term) -> Value {
    match term {
        Term::Iri(v) => json!({"type": "uri", "value": v}),
        Term::Literal {
            value,
            datatype,
            language,
        } => {
            let mut obj = Map::new();
            obj.insert("type".into(), Value::String("literal".into()));
            obj.insert("value".into(), Value::String(value.clone()));
            if let Some(dt) = datatype {
                obj.insert("datatype".into(), Value::String(dt.clone()));
            }
            if let Some(lang) = language {
                obj.insert("xml:lang".into(), Value::String(lang.clone()));
            }
            Value::Object(obj)
        }
        Term::Variable(v) => json!({"type": "literal", "value": format!("?{v}")}),
    }
}

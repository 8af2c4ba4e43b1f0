//! Local SPARQL endpoint backed by the in-memory graph and the subset
//! evaluator. Speaks enough of the SPARQL protocol (GET and POST with a
//! `query` parameter, JSON results) to stand in for a remote endpoint.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Method, Response, Server};

use crate::kg::KnowledgeGraph;
use crate::sparql::{evaluate, parse_with_prefixes, PrefixMap};

use super::{answer_to_json, RESULTS_JSON};

pub struct StubEndpoint {
    url: String,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubEndpoint {
    /// Binds an ephemeral local port and serves the graph until dropped.
    pub fn serve(graph: KnowledgeGraph, prefixes: PrefixMap) -> std::io::Result<Self> {
        let server = Server::http("127.0.0.1:0")
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|addr| addr.port())
            .ok_or_else(|| std::io::Error::other("no ip address bound"))?;
        let url = format!("http://127.0.0.1:{port}/sparql");
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let graph = Arc::new(graph);
        let handle = std::thread::spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                match server.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(request)) => handle_request(request, &graph, &prefixes),
                    Ok(None) => {}
                    Err(_) => break,
                }
            }
        });
        Ok(Self {
            url,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Drop for StubEndpoint {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_request(mut request: tiny_http::Request, graph: &KnowledgeGraph, prefixes: &PrefixMap) {
    let query = extract_query(&mut request);
    let response = match query {
        Some(text) => match parse_with_prefixes(&text, prefixes).and_then(|ast| evaluate(&ast, graph)) {
            Ok(answer) => {
                let body = answer_to_json(&answer).to_string();
                Response::from_string(body).with_status_code(200).with_header(
                    Header::from_bytes("Content-Type", RESULTS_JSON).expect("static header"),
                )
            }
            Err(e) => Response::from_string(format!("query error: {e}")).with_status_code(400),
        },
        None => Response::from_string("missing 'query' parameter").with_status_code(400),
    };
    let _ = request.respond(response);
}

fn extract_query(request: &mut tiny_http::Request) -> Option<String> {
    match *request.method() {
        Method::Get => {
            let raw = request.url();
            let (_, query_string) = raw.split_once('?')?;
            form_value(query_string, "query")
        }
        Method::Post => {
            let content_type = request
                .headers()
                .iter()
                .find(|h| h.field.equiv("Content-Type"))
                .map(|h| h.value.as_str().to_ascii_lowercase())
                .unwrap_or_default();
            let mut body = String::new();
            request.as_reader().read_to_string(&mut body).ok()?;
            if content_type.starts_with("application/sparql-query") {
                Some(body)
            } else {
                form_value(&body, "query")
            }
        }
        _ => None,
    }
}

fn form_value(encoded: &str, key: &str) -> Option<String> {
    url::form_urlencoded::parse(encoded.as_bytes())
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.into_owned())
}

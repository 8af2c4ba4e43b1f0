//! Parser, canonicalizer, and evaluator for the SPARQL fragment used by
//! the KGQA benchmarks: SELECT / ASK, DISTINCT, COUNT, basic graph
//! patterns, `;` predicate lists, `/` property paths, FILTER equality,
//! LIMIT, and PREFIX declarations.

mod answer;
mod ast;
mod eval;
mod parser;

pub use answer::{AnswerSet, Row};
pub use ast::{flip_triples, normalize, CountAggregate, Filter, QueryAst, QueryForm};
pub use eval::{evaluate, filter_equal};
pub use parser::{parse_with_prefixes, PrefixMap};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparqlError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("invalid query: {0}")]
    Validation(String),
    #[error("query has no patterns to evaluate")]
    EmptyPatterns,
}

/// Parses with the default Wikidata/DBpedia prefix table.
pub fn parse(text: &str) -> Result<QueryAst, SparqlError> {
    parse_with_prefixes(text, &PrefixMap::default())
}

/// Convenience: parse then canonicalize.
pub fn normalize_text(text: &str) -> Result<String, SparqlError> {
    Ok(normalize(&parse(text)?))
}

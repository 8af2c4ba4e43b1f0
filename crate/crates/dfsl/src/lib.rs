//! Dynamic few-shot SPARQL generation pipeline for knowledge-graph
//! question answering: retrieve the most similar solved examples for a
//! question, build an in-context prompt, obtain candidate queries from a
//! pluggable language-model backend, execute them on a knowledge graph,
//! select an answer, and score the result.
//!
//! Every stage runs hermetically at desk scale: an in-memory triple
//! store with a SPARQL-subset engine stands in for a remote endpoint,
//! and deterministic mock backends stand in for the language model. See
//! the `examples/` directory, one runnable example per capability.

pub mod bench;
pub mod endpoint;
pub mod eval;
pub mod generate;
pub mod kg;
pub mod prompt;
pub mod retrieval;
pub mod sparql;

pub use bench::{run_benchmark, RunConfig};
pub use eval::{f1, select_fs, select_ls, EvalReport};
pub use kg::{KnowledgeGraph, Term, Triple, TriplePattern};
pub use prompt::{build_prompt, Prompt, PromptConfig, PromptMode};
pub use retrieval::{build_store, Example, ExampleStore, TrigramEmbedder};
pub use sparql::{evaluate, normalize, parse, AnswerSet, QueryAst};

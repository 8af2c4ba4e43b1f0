//! Query evaluation over a [`KnowledgeGraph`]: left-to-right nested-loop
//! join of the basic graph patterns, then filters, projection, distinct,
//! count, limit. Rows are ordered lexicographically on their serialized
//! form before LIMIT so output is deterministic.

use std::collections::BTreeSet;

use crate::kg::{Bindings, KnowledgeGraph, Term, TriplePattern};

use super::answer::{AnswerSet, Row};
use super::ast::{QueryAst, QueryForm};
use super::SparqlError;

pub fn evaluate(query: &QueryAst, graph: &KnowledgeGraph) -> Result<AnswerSet, SparqlError> {
    if query.patterns.is_empty() {
        return Err(SparqlError::EmptyPatterns);
    }
    let mut solutions: Vec<Bindings> = vec![Bindings::new()];
    for pattern in &query.patterns {
        let mut next = Vec::new();
        for solution in &solutions {
            let bound = substitute(pattern, solution);
            for found in graph.match_pattern(&bound) {
                let mut merged = solution.clone();
                merged.extend(found);
                next.push(merged);
            }
        }
        solutions = next;
        if solutions.is_empty() {
            break;
        }
    }

    solutions.retain(|solution| {
        query.filters.iter().all(|filter| {
            solution
                .get(&filter.variable)
                .is_some_and(|term| filter_equal(term, &filter.operand))
        })
    });

    match query.form {
        QueryForm::Ask => Ok(AnswerSet::Boolean(!solutions.is_empty())),
        QueryForm::Select => {
            if let Some(agg) = &query.aggregate {
                let distinct_values: BTreeSet<&Term> = solutions
                    .iter()
                    .filter_map(|s| s.get(&agg.variable))
                    .collect();
                let count = distinct_values.len();
                let variable = agg.alias.clone().unwrap_or_else(|| "count".to_string());
                let row = Row::single(
                    variable,
                    Term::literal_typed(
                        count.to_string(),
                        "http://www.w3.org/2001/XMLSchema#integer",
                    ),
                );
                return Ok(AnswerSet::from_rows([row]));
            }
            let mut rows = BTreeSet::new();
            for solution in &solutions {
                let mut row = Row::new();
                for var in &query.projected {
                    if let Some(term) = solution.get(var) {
                        row.0.insert(var.clone(), term.clone());
                    }
                }
                rows.insert(row);
            }
            if let Some(limit) = query.limit {
                rows = rows.into_iter().take(limit).collect();
            }
            Ok(AnswerSet::Bindings(rows))
        }
    }
}

fn substitute(pattern: &TriplePattern, solution: &Bindings) -> TriplePattern {
    let resolve = |term: &Term| match term {
        Term::Variable(name) => solution.get(name).cloned().unwrap_or_else(|| term.clone()),
        other => other.clone(),
    };
    TriplePattern {
        subject: resolve(&pattern.subject),
        predicate: resolve(&pattern.predicate),
        object: resolve(&pattern.object),
    }
}

/// FILTER equality: numeric literals compare by value when both sides are
/// numeric, other literals by lexical form, IRIs exactly.
pub fn filter_equal(a: &Term, b: &Term) -> bool {
    match (a, b) {
        (Term::Literal { .. }, Term::Literal { .. }) => {
            match (a.numeric_value(), b.numeric_value()) {
                (Some(x), Some(y)) => x == y,
                _ => a.value() == b.value(),
            }
        }
        _ => a == b,
    }
}

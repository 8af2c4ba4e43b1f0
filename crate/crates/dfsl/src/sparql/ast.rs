//! Query AST, canonical rendering, and subject-object flip variants.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::kg::{Term, TriplePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryForm {
    Select,
    Ask,
}

/// `COUNT(?var)` in the projection, optionally `(COUNT(?var) AS ?alias)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountAggregate {
    pub variable: String,
    pub alias: Option<String>,
    pub distinct: bool,
}

/// Equality filter: `FILTER(?variable = operand)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub variable: String,
    pub operand: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub form: QueryForm,
    /// Projected variable names, in projection order. Empty for ASK and
    /// for pure COUNT projections.
    pub projected: Vec<String>,
    pub distinct: bool,
    pub aggregate: Option<CountAggregate>,
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<Filter>,
    pub limit: Option<usize>,
}

impl QueryAst {
    /// Variable names bound by the graph patterns, in first-use order.
    pub fn pattern_variables(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for p in &self.patterns {
            for v in p.variables() {
                if !seen.iter().any(|s| s == v) {
                    seen.push(v.to_string());
                }
            }
        }
        seen
    }
}

/// Canonical text: single-space tokens, uppercase keywords, variables
/// renamed `?v0..?vN` in first-use order, pattern order preserved.
/// Idempotent: `normalize(parse(normalize(q))) == normalize(q)`.
pub fn normalize(query: &QueryAst) -> String {
    let renames = rename_map(query);
    let var = |name: &str| format!("?{}", renames.get(name).map(String::as_str).unwrap_or(name));
    let term = |t: &Term| match t {
        Term::Variable(name) => var(name),
        other => other.to_string(),
    };

    let mut out = String::new();
    match query.form {
        QueryForm::Select => {
            out.push_str("SELECT ");
            if query.distinct {
                out.push_str("DISTINCT ");
            }
            if let Some(agg) = &query.aggregate {
                let inner = if agg.distinct {
                    format!("COUNT(DISTINCT {})", var(&agg.variable))
                } else {
                    format!("COUNT({})", var(&agg.variable))
                };
                match &agg.alias {
                    Some(alias) => {
                        let _ = write!(out, "({inner} AS {})", var(alias));
                    }
                    None => out.push_str(&inner),
                }
            } else {
                let vars: Vec<String> = query.projected.iter().map(|v| var(v)).collect();
                out.push_str(&vars.join(" "));
            }
            out.push_str(" WHERE ");
        }
        QueryForm::Ask => out.push_str("ASK WHERE "),
    }
    out.push_str("{ ");
    let patterns: Vec<String> = query
        .patterns
        .iter()
        .map(|p| format!("{} {} {}", term(&p.subject), term(&p.predicate), term(&p.object)))
        .collect();
    out.push_str(&patterns.join(" . "));
    for f in &query.filters {
        let _ = write!(out, " FILTER({} = {})", var(&f.variable), f.operand);
    }
    out.push_str(" }");
    if let Some(limit) = query.limit {
        let _ = write!(out, " LIMIT {limit}");
    }
    out
}

fn rename_map(query: &QueryAst) -> BTreeMap<String, String> {
    let mut collected: Vec<String> = Vec::new();
    let record = |name: &str, collected: &mut Vec<String>| {
        if !collected.iter().any(|n| n == name) {
            collected.push(name.to_string());
        }
    };
    for v in &query.projected {
        record(v, &mut collected);
    }
    if let Some(agg) = &query.aggregate {
        record(&agg.variable, &mut collected);
        if let Some(alias) = &agg.alias {
            record(alias, &mut collected);
        }
    }
    for p in &query.patterns {
        for v in p.variables() {
            record(v, &mut collected);
        }
    }
    for f in &query.filters {
        record(&f.variable, &mut collected);
    }
    collected
        .into_iter()
        .enumerate()
        .map(|(i, name)| (name, format!("v{i}")))
        .collect()
}

/// One variant per pattern whose subject and object may be swapped (the
/// object must be an IRI or a variable, never a literal). The original
/// query is excluded, as is any swap that leaves the pattern unchanged.
pub fn flip_triples(query: &QueryAst) -> Vec<QueryAst> {
    let mut variants = Vec::new();
    for (i, pattern) in query.patterns.iter().enumerate() {
        if pattern.object.is_literal() {
            continue;
        }
        if pattern.subject == pattern.object {
            continue;
        }
        let mut flipped = query.clone();
        let target = &mut flipped.patterns[i];
        std::mem::swap(&mut target.subject, &mut target.object);
        variants.push(flipped);
    }
    variants
}

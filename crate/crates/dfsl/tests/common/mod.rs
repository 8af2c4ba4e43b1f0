//! Helpers shared by the integration suites: fixture paths, seeded
//! random generators, and independent oracles.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use dfsl::kg::{KnowledgeGraph, Term, Triple, TriplePattern};
use dfsl::sparql::{AnswerSet, Filter, QueryAst, QueryForm, Row};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_fixture_graph(name: &str) -> KnowledgeGraph {
    let file = std::fs::File::open(fixture(name)).unwrap();
    dfsl::kg::load_graph(std::io::BufReader::new(file)).unwrap()
}

const WORDS: &[&str] = &[
    "river", "capital", "author", "country", "city", "moon", "planet", "wrote", "borders",
    "through", "flows", "many", "which", "who", "what", "where", "located", "instance",
    "spouse", "code", "anthem", "father", "neighborhood", "novel", "republic", "federal",
];

pub fn random_question(rng: &mut StdRng) -> String {
    let len = rng.gen_range(3..10);
    (0..len)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Small term universe so exhaustive assignment enumeration stays cheap.
pub struct TermUniverse {
    pub subjects: Vec<Term>,
    pub predicates: Vec<Term>,
    pub objects: Vec<Term>,
}

impl TermUniverse {
    pub fn small() -> Self {
        let subjects: Vec<Term> = (0..6).map(|i| Term::iri(format!("http://kg/s{i}"))).collect();
        let predicates: Vec<Term> =
            (0..4).map(|i| Term::iri(format!("http://kg/p{i}"))).collect();
        let mut objects: Vec<Term> = (0..4).map(|i| Term::iri(format!("http://kg/o{i}"))).collect();
        objects.push(Term::literal("alpha"));
        objects.push(Term::literal_typed(
            "42",
            "http://www.w3.org/2001/XMLSchema#integer",
        ));
        // subjects can appear in object position too
        objects.push(subjects[0].clone());
        objects.push(subjects[1].clone());
        Self {
            subjects,
            predicates,
            objects,
        }
    }
}

pub fn random_graph(rng: &mut StdRng, universe: &TermUniverse, max_triples: usize) -> KnowledgeGraph {
    let mut graph = KnowledgeGraph::new();
    let n = rng.gen_range(0..=max_triples);
    for _ in 0..n {
        let s = universe.subjects.choose(rng).unwrap().clone();
        let p = universe.predicates.choose(rng).unwrap().clone();
        let o = universe.objects.choose(rng).unwrap().clone();
        graph.insert(Triple::new(s, p, o).unwrap());
    }
    graph
}

/// A random fragment query over the universe: 1..=3 patterns drawing on
/// at most 3 distinct variables, sometimes DISTINCT / ASK / COUNT /
/// FILTER / LIMIT.
pub fn random_query(rng: &mut StdRng, universe: &TermUniverse) -> QueryAst {
    let var_names = ["a", "b", "c"];
    let n_vars = rng.gen_range(1..=3usize);
    let n_patterns = rng.gen_range(1..=3usize);
    let mut patterns = Vec::new();
    for _ in 0..n_patterns {
        let subject = if rng.gen_bool(0.6) {
            Term::variable(var_names[rng.gen_range(0..n_vars)])
        } else {
            universe.subjects.choose(rng).unwrap().clone()
        };
        let predicate = if rng.gen_bool(0.25) {
            Term::variable(var_names[rng.gen_range(0..n_vars)])
        } else {
            universe.predicates.choose(rng).unwrap().clone()
        };
        let object = if rng.gen_bool(0.6) {
            Term::variable(var_names[rng.gen_range(0..n_vars)])
        } else {
            universe.objects.choose(rng).unwrap().clone()
        };
        patterns.push(TriplePattern::new(subject, predicate, object).unwrap());
    }
    let bound: Vec<String> = {
        let mut seen = Vec::new();
        for p in &patterns {
            for v in p.variables() {
                if !seen.iter().any(|s| s == v) {
                    seen.push(v.to_string());
                }
            }
        }
        seen
    };
    if bound.is_empty() {
        // all-concrete patterns: make it an ASK
        return QueryAst {
            form: QueryForm::Ask,
            projected: Vec::new(),
            distinct: false,
            aggregate: None,
            patterns,
            filters: Vec::new(),
            limit: None,
        };
    }

    let filters = if rng.gen_bool(0.3) {
        let variable = bound.choose(rng).unwrap().clone();
        let operand = universe.objects.choose(rng).unwrap().clone();
        vec![Filter { variable, operand }]
    } else {
        Vec::new()
    };

    if rng.gen_bool(0.2) {
        return QueryAst {
            form: QueryForm::Ask,
            projected: Vec::new(),
            distinct: false,
            aggregate: None,
            patterns,
            filters,
            limit: None,
        };
    }
    if rng.gen_bool(0.15) {
        let variable = bound.choose(rng).unwrap().clone();
        return QueryAst {
            form: QueryForm::Select,
            projected: Vec::new(),
            distinct: false,
            aggregate: Some(dfsl::sparql::CountAggregate {
                variable,
                alias: Some("n".to_string()),
                distinct: false,
            }),
            patterns,
            filters,
            limit: None,
        };
    }
    let mut projected = bound.clone();
    projected.shuffle(rng);
    projected.truncate(rng.gen_range(1..=projected.len()));
    QueryAst {
        form: QueryForm::Select,
        projected,
        distinct: rng.gen_bool(0.4),
        aggregate: None,
        patterns,
        filters,
        limit: None,
    }
}

fn oracle_filter_equal(a: &Term, b: &Term) -> bool {
    if a.is_literal() && b.is_literal() {
        match (a.numeric_value(), b.numeric_value()) {
            (Some(x), Some(y)) => x == y,
            _ => a.value() == b.value(),
        }
    } else {
        a == b
    }
}

/// Exhaustive-assignment oracle: every total assignment of the query's
/// variables to terms of the graph is checked pattern by pattern.
pub fn oracle_evaluate(query: &QueryAst, graph: &KnowledgeGraph) -> AnswerSet {
    let terms: Vec<Term> = graph.terms().into_iter().collect();
    let vars: Vec<String> = {
        let mut seen = Vec::new();
        for p in &query.patterns {
            for v in p.variables() {
                if !seen.iter().any(|s| s == v) {
                    seen.push(v.to_string());
                }
            }
        }
        seen
    };
    let mut solutions: Vec<std::collections::BTreeMap<String, Term>> = Vec::new();
    let mut assignment = vec![0usize; vars.len()];
    'outer: loop {
        let binding: std::collections::BTreeMap<String, Term> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), terms[assignment[i]].clone()))
            .collect();
        let substitute = |term: &Term| -> Term {
            match term {
                Term::Variable(name) => binding[name].clone(),
                other => other.clone(),
            }
        };
        let satisfied = query.patterns.iter().all(|p| {
            let s = substitute(&p.subject);
            let pr = substitute(&p.predicate);
            let o = substitute(&p.object);
            match Triple::new(s, pr, o) {
                Ok(t) => graph.contains(&t),
                Err(_) => false,
            }
        });
        let passes = satisfied
            && query.filters.iter().all(|f| {
                binding
                    .get(&f.variable)
                    .is_some_and(|t| oracle_filter_equal(t, &f.operand))
            });
        if passes {
            solutions.push(binding);
        }
        // odometer increment
        for i in 0..vars.len() {
            assignment[i] += 1;
            if assignment[i] < terms.len() {
                continue 'outer;
            }
            assignment[i] = 0;
        }
        break;
    }

    match query.form {
        QueryForm::Ask => AnswerSet::Boolean(!solutions.is_empty()),
        QueryForm::Select => {
            if let Some(agg) = &query.aggregate {
                let distinct: BTreeSet<Term> = solutions
                    .iter()
                    .filter_map(|s| s.get(&agg.variable).cloned())
                    .collect();
                let name = agg.alias.clone().unwrap_or_else(|| "count".to_string());
                return AnswerSet::from_rows([Row::single(
                    name,
                    Term::literal_typed(
                        distinct.len().to_string(),
                        "http://www.w3.org/2001/XMLSchema#integer",
                    ),
                )]);
            }
            let rows: BTreeSet<Row> = solutions
                .iter()
                .map(|s| {
                    let mut row = Row::new();
                    for v in &query.projected {
                        if let Some(t) = s.get(v) {
                            row.0.insert(v.clone(), t.clone());
                        }
                    }
                    row
                })
                .collect();
            AnswerSet::Bindings(rows)
        }
    }
}

/// Special case: a graph with no terms still has the empty assignment.
pub fn oracle_evaluate_handling_empty(query: &QueryAst, graph: &KnowledgeGraph) -> AnswerSet {
    if graph.is_empty() {
        return match query.form {
            QueryForm::Ask => AnswerSet::Boolean(false),
            QueryForm::Select => {
                if let Some(agg) = &query.aggregate {
                    let name = agg.alias.clone().unwrap_or_else(|| "count".to_string());
                    AnswerSet::from_rows([Row::single(
                        name,
                        Term::literal_typed("0", "http://www.w3.org/2001/XMLSchema#integer"),
                    )])
                } else {
                    AnswerSet::empty()
                }
            }
        };
    }
    oracle_evaluate(query, graph)
}

//! Execution results: a set of variable bindings, or a boolean for ASK.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::kg::Term;

/// One solution row. Ordered lexicographically on its serialized form so
/// result iteration (and LIMIT truncation) is reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Row(pub BTreeMap<String, Term>);

impl Row {
    pub fn new() -> Self {
        Row(BTreeMap::new())
    }

    pub fn single(variable: impl Into<String>, term: Term) -> Self {
        let mut m = BTreeMap::new();
        m.insert(variable.into(), term);
        Row(m)
    }

    pub fn serialized(&self) -> String {
        self.0
            .iter()
            .map(|(var, term)| format!("?{var}={term}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The row's term values, sorted, with variable names dropped.
    pub fn values(&self) -> Vec<Term> {
        let mut terms: Vec<Term> = self.0.values().cloned().collect();
        terms.sort();
        terms
    }
}

impl Default for Row {
    fn default() -> Self {
        Self::new()
    }
}

impl Ord for Row {
    fn cmp(&self, other: &Self) -> Ordering {
        self.serialized().cmp(&other.serialized())
    }
}

impl PartialOrd for Row {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.serialized())
    }
}

/// The result of executing a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerSet {
    Bindings(BTreeSet<Row>),
    Boolean(bool),
}

impl AnswerSet {
    pub fn empty() -> Self {
        AnswerSet::Bindings(BTreeSet::new())
    }

    pub fn from_rows(rows: impl IntoIterator<Item = Row>) -> Self {
        AnswerSet::Bindings(rows.into_iter().collect())
    }

    /// A boolean answer counts as one element.
    pub fn cardinality(&self) -> usize {
        match self {
            AnswerSet::Bindings(rows) => rows.len(),
            AnswerSet::Boolean(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality() == 0
    }

    pub fn is_boolean(&self) -> bool {
        matches!(self, AnswerSet::Boolean(_))
    }

    /// Value-level equality: rows compared as multisets of their terms,
    /// ignoring the variable names the query happened to project.
    pub fn values_equal(&self, other: &AnswerSet) -> bool {
        match (self, other) {
            (AnswerSet::Boolean(a), AnswerSet::Boolean(b)) => a == b,
            (AnswerSet::Bindings(a), AnswerSet::Bindings(b)) => {
                let mut av: Vec<Vec<Term>> = a.iter().map(Row::values).collect();
                let mut bv: Vec<Vec<Term>> = b.iter().map(Row::values).collect();
                av.sort();
                bv.sort();
                av == bv
            }
            _ => false,
        }
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerSet::Boolean(b) => write!(f, "{b}"),
            AnswerSet::Bindings(rows) => {
                let rendered: Vec<String> = rows.iter().map(Row::to_string).collect();
                write!(f, "[{}]", rendered.join(", "))
            }
        }
    }
}

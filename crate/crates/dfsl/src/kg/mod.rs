//! In-memory knowledge graph with SPO/POS/OSP triple indexes.
//!
//! The graph is the hermetic execution substrate: facts are loaded once
//! from a line-oriented triple file, then matched against patterns by the
//! query evaluator. All three indexes hold the same fact set; iteration
//! order is lexicographic on serialized terms, so results are reproducible.

mod term;

pub use term::{Term, TriplePattern, Triple};

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use thiserror::Error;

pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("fact contains a variable: {0}")]
    VariableInFact(String),
    #[error("literal not allowed in {position} position")]
    LiteralPosition { position: &'static str },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One solution of a pattern match: variable name (without `?`) to term.
pub type Bindings = BTreeMap<String, Term>;

type NestedIndex = BTreeMap<Term, BTreeMap<Term, BTreeSet<Term>>>;

fn nested_insert(index: &mut NestedIndex, a: &Term, b: &Term, c: &Term) -> bool {
    index
        .entry(a.clone())
        .or_default()
        .entry(b.clone())
        .or_default()
        .insert(c.clone())
}

fn nested_len(index: &NestedIndex) -> usize {
    index
        .values()
        .map(|m| m.values().map(BTreeSet::len).sum::<usize>())
        .sum()
}

/// An immutable-after-load triple store over three index orderings.
#[derive(Debug, Default, Clone)]
pub struct KnowledgeGraph {
    spo: NestedIndex,
    pos: NestedIndex,
    osp: NestedIndex,
    len: usize,
    labels: BTreeMap<Term, String>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct facts.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cardinality of each index, in (SPO, POS, OSP) order.
    pub fn index_cardinalities(&self) -> (usize, usize, usize) {
        (
            nested_len(&self.spo),
            nested_len(&self.pos),
            nested_len(&self.osp),
        )
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.spo
            .get(&triple.subject)
            .and_then(|m| m.get(&triple.predicate))
            .is_some_and(|s| s.contains(&triple.object))
    }

    /// Inserts a fact into all three indexes. Returns true when the fact
    /// was absent. Duplicate insertion is a no-op.
    pub fn insert(&mut self, triple: Triple) -> bool {
        let Triple {
            subject,
            predicate,
            object,
        } = &triple;
        let fresh = nested_insert(&mut self.spo, subject, predicate, object);
        if fresh {
            nested_insert(&mut self.pos, predicate, object, subject);
            nested_insert(&mut self.osp, object, subject, predicate);
            self.len += 1;
            if predicate.value() == RDFS_LABEL {
                if let Term::Literal { value, .. } = object {
                    self.labels.entry(subject.clone()).or_insert(value.clone());
                }
            }
        }
        fresh
    }

    /// All facts in SPO index order.
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().flat_map(|(s, pm)| {
            pm.iter().flat_map(move |(p, os)| {
                os.iter().map(move |o| Triple {
                    subject: s.clone(),
                    predicate: p.clone(),
                    object: o.clone(),
                })
            })
        })
    }

    /// Every distinct term appearing in some fact.
    pub fn terms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for t in self.iter() {
            out.insert(t.subject);
            out.insert(t.predicate);
            out.insert(t.object);
        }
        out
    }

    pub fn set_label(&mut self, term: Term, label: impl Into<String>) {
        self.labels.insert(term, label.into());
    }

    /// Human-readable label, falling back to the raw IRI text.
    pub fn label_of<'a>(&'a self, term: &'a Term) -> &'a str {
        self.labels
            .get(term)
            .map(String::as_str)
            .unwrap_or_else(|| term.value())
    }

    /// Every binding of the pattern's variables such that substitution
    /// yields a fact. Uses the index matching the pattern's concrete
    /// positions; output order follows that index.
    pub fn match_pattern(&self, pattern: &TriplePattern) -> Vec<Bindings> {
        let candidates = self.candidates(pattern);
        let mut out = Vec::new();
        for triple in candidates {
            if let Some(binding) = unify(pattern, &triple) {
                out.push(binding);
            }
        }
        out
    }

    fn candidates(&self, pattern: &TriplePattern) -> Vec<Triple> {
        let s = (!pattern.subject.is_variable()).then_some(&pattern.subject);
        let p = (!pattern.predicate.is_variable()).then_some(&pattern.predicate);
        let o = (!pattern.object.is_variable()).then_some(&pattern.object);
        let mut out = Vec::new();
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                if self
                    .spo
                    .get(s)
                    .and_then(|m| m.get(p))
                    .is_some_and(|set| set.contains(o))
                {
                    out.push(triple(s, p, o));
                }
            }
            (Some(s), Some(p), None) => {
                if let Some(objects) = self.spo.get(s).and_then(|m| m.get(p)) {
                    out.extend(objects.iter().map(|o| triple(s, p, o)));
                }
            }
            (Some(s), None, Some(o)) => {
                if let Some(preds) = self.osp.get(o).and_then(|m| m.get(s)) {
                    out.extend(preds.iter().map(|p| triple(s, p, o)));
                }
            }
            (Some(s), None, None) => {
                if let Some(pm) = self.spo.get(s) {
                    for (p, objects) in pm {
                        out.extend(objects.iter().map(|o| triple(s, p, o)));
                    }
                }
            }
            (None, Some(p), Some(o)) => {
                if let Some(subjects) = self.pos.get(p).and_then(|m| m.get(o)) {
                    out.extend(subjects.iter().map(|s| triple(s, p, o)));
                }
            }
            (None, Some(p), None) => {
                if let Some(om) = self.pos.get(p) {
                    for (o, subjects) in om {
                        out.extend(subjects.iter().map(|s| triple(s, p, o)));
                    }
                }
            }
            (None, None, Some(o)) => {
                if let Some(sm) = self.osp.get(o) {
                    for (s, preds) in sm {
                        out.extend(preds.iter().map(|p| triple(s, p, o)));
                    }
                }
            }
            (None, None, None) => out.extend(self.iter()),
        }
        out
    }
}

fn triple(s: &Term, p: &Term, o: &Term) -> Triple {
    Triple {
        subject: s.clone(),
        predicate: p.clone(),
        object: o.clone(),
    }
}

fn unify(pattern: &TriplePattern, fact: &Triple) -> Option<Bindings> {
    let mut bindings = Bindings::new();
    for (slot, value) in [
        (&pattern.subject, &fact.subject),
        (&pattern.predicate, &fact.predicate),
        (&pattern.object, &fact.object),
    ] {
        match slot {
            Term::Variable(name) => match bindings.get(name) {
                Some(bound) if bound != value => return None,
                Some(_) => {}
                None => {
                    bindings.insert(name.clone(), value.clone());
                }
            },
            concrete if concrete == value => {}
            _ => return None,
        }
    }
    Some(bindings)
}

/// Loads a graph from the line-oriented triple format: one fact per line,
/// `<s> <p> <o> .`, literals in double quotes with optional `^^<datatype>`
/// or `@lang`. `#`-prefixed comment lines and blank lines are ignored.
pub fn load_graph(source: impl BufRead) -> Result<KnowledgeGraph, GraphError> {
    let mut graph = KnowledgeGraph::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let triple = parse_triple_line(trimmed).map_err(|message| GraphError::Parse {
            line: line_no,
            message,
        })?;
        graph.insert(triple);
    }
    Ok(graph)
}

pub fn load_graph_str(source: &str) -> Result<KnowledgeGraph, GraphError> {
    load_graph(source.as_bytes())
}

fn parse_triple_line(line: &str) -> Result<Triple, String> {
    let mut cursor = LineCursor::new(line);
    let subject = cursor.term()?;
    let predicate = cursor.term()?;
    let object = cursor.term()?;
    cursor.skip_ws();
    if !cursor.eat('.') {
        return Err("expected terminating '.'".to_string());
    }
    cursor.skip_ws();
    if !cursor.at_end() {
        return Err(format!("trailing content after '.': {:?}", cursor.rest()));
    }
    if subject.is_literal() {
        return Err("literal not allowed in subject position".to_string());
    }
    if predicate.is_literal() {
        return Err("literal not allowed in predicate position".to_string());
    }
    Triple::new(subject, predicate, object).map_err(|e| e.to_string())
}

struct LineCursor {
    chars: Vec<char>,
    pos: usize,
}

impl LineCursor {
    fn new(raw: &str) -> Self {
        Self {
            chars: raw.chars().collect(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn rest(&self) -> String {
        self.chars[self.pos.min(self.chars.len())..].iter().collect()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn term(&mut self) -> Result<Term, String> {
        self.skip_ws();
        match self.peek() {
            Some('<') => self.iri(),
            Some('"') => self.literal(),
            Some(c) => Err(format!("unexpected character {c:?} where a term was expected")),
            None => Err("unexpected end of line".to_string()),
        }
    }

    fn iri(&mut self) -> Result<Term, String> {
        self.eat('<');
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == '>' {
                let value: String = self.chars[start..self.pos].iter().collect();
                self.pos += 1;
                if value.is_empty() {
                    return Err("empty IRI".to_string());
                }
                if value.chars().any(char::is_whitespace) {
                    return Err(format!("IRI contains whitespace: <{value}>"));
                }
                return Ok(Term::iri(value));
            }
            self.pos += 1;
        }
        Err("unterminated IRI (missing '>')".to_string())
    }

    fn literal(&mut self) -> Result<Term, String> {
        self.eat('"');
        let mut value = String::new();
        loop {
            match self.peek() {
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some('\\') => value.push('\\'),
                        Some('"') => value.push('"'),
                        Some('n') => value.push('\n'),
                        Some('r') => value.push('\r'),
                        Some('t') => value.push('\t'),
                        Some(c) => return Err(format!("unknown escape \\{c}")),
                        None => return Err("unterminated escape".to_string()),
                    }
                    self.pos += 1;
                }
                Some('"') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => {
                    value.push(c);
                    self.pos += 1;
                }
                None => return Err("unterminated literal (missing '\"')".to_string()),
            }
        }
        if self.eat('@') {
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '-' {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if self.pos == start {
                return Err("empty language tag".to_string());
            }
            let lang: String = self.chars[start..self.pos].iter().collect();
            return Ok(Term::literal_lang(value, lang));
        }
        if self.eat('^') {
            if !self.eat('^') {
                return Err("expected '^^' before datatype".to_string());
            }
            let Term::Iri(dt) = self.iri()? else {
                unreachable!()
            };
            return Ok(Term::literal_typed(value, dt));
        }
        Ok(Term::literal(value))
    }
}

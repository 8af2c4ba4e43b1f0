//! Recursive-descent parser for the supported SPARQL fragment:
//! SELECT / ASK, DISTINCT, COUNT, basic graph patterns with `;` predicate
//! lists and `/` property paths, FILTER equality, LIMIT, PREFIX.
//!
//! Anything outside the fragment raises [`SparqlError::Unsupported`]
//! naming the construct, so gaps stay visible instead of silently
//! producing wrong answers.

use std::collections::{BTreeMap, BTreeSet};

use crate::kg::{Term, TriplePattern};

use super::ast::{CountAggregate, Filter, QueryAst, QueryForm};
use super::SparqlError;

const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Namespace prefix table. Parsing starts from an injectable base map
/// (Wikidata/DBpedia namespaces by default); in-query PREFIX declarations
/// extend or override it.
#[derive(Debug, Clone)]
pub struct PrefixMap {
    map: BTreeMap<String, String>,
}

impl Default for PrefixMap {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        for (prefix, ns) in [
            ("wd", "http://www.wikidata.org/entity/"),
            ("wdt", "http://www.wikidata.org/prop/direct/"),
            ("p", "http://www.wikidata.org/prop/"),
            ("ps", "http://www.wikidata.org/prop/statement/"),
            ("pq", "http://www.wikidata.org/prop/qualifier/"),
            ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
            ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
            ("xsd", "http://www.w3.org/2001/XMLSchema#"),
            ("dbr", "http://dbpedia.org/resource/"),
            ("res", "http://dbpedia.org/resource/"),
            ("dbo", "http://dbpedia.org/ontology/"),
            ("dbp", "http://dbpedia.org/property/"),
            ("foaf", "http://xmlns.com/foaf/0.1/"),
        ] {
            map.insert(prefix.to_string(), ns.to_string());
        }
        Self { map }
    }
}

impl PrefixMap {
    pub fn empty() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.map.insert(prefix.into(), namespace.into());
    }

    pub fn resolve(&self, prefix: &str, local: &str) -> Option<String> {
        self.map.get(prefix).map(|ns| format!("{ns}{local}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Iri(String),
    Pname { prefix: String, local: String },
    Literal {
        value: String,
        language: Option<String>,
        datatype: Option<DatatypeRef>,
    },
    Number(String),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq)]
enum DatatypeRef {
    Iri(String),
    Pname { prefix: String, local: String },
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

type Spanned = (usize, Tok);

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, SparqlError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            if self.pos >= self.bytes.len() {
                break;
            }
            let start = self.pos;
            let tok = self.next_token()?;
            out.push((start, tok));
        }
        Ok(out)
    }

    fn skip_trivia(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn err(&self, offset: usize, message: impl Into<String>) -> SparqlError {
        SparqlError::Syntax {
            offset,
            message: message.into(),
        }
    }

    fn next_token(&mut self) -> Result<Tok, SparqlError> {
        let b = self.bytes[self.pos];
        match b {
            b'<' => self.angle(),
            b'?' | b'$' => self.variable(),
            b'"' => self.literal(),
            b'0'..=b'9' => self.number(),
            b'+' | b'-' if self.peek_ahead(1).is_some_and(|c| c.is_ascii_digit()) => {
                self.number()
            }
            b'.' if self.peek_ahead(1).is_some_and(|c| c.is_ascii_digit()) => self.number(),
            b'{' | b'}' | b'(' | b')' | b'.' | b';' | b'=' | b'/' | b'*' | b',' | b'|' | b'^'
            | b'>' | b'!' | b'+' | b'-' => {
                self.pos += 1;
                Ok(Tok::Punct(b as char))
            }
            b':' => self.pname(String::new()),
            _ if b.is_ascii_alphabetic() || b == b'_' => self.word(),
            _ => {
                let c = self.text[self.pos..].chars().next().unwrap_or('?');
                Err(self.err(self.pos, format!("unexpected character {c:?}")))
            }
        }
    }

    fn peek_ahead(&self, n: usize) -> Option<u8> {
        self.bytes.get(self.pos + n).copied()
    }

    /// `<` opens an IRI only when a `>` closes it before any whitespace;
    /// otherwise it is the `<` comparison operator.
    fn angle(&mut self) -> Result<Tok, SparqlError> {
        let mut i = self.pos + 1;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'>' => {
                    let value = &self.text[self.pos + 1..i];
                    self.pos = i + 1;
                    if value.is_empty() {
                        return Err(self.err(self.pos, "empty IRI"));
                    }
                    return Ok(Tok::Iri(value.to_string()));
                }
                b if b.is_ascii_whitespace() => break,
                _ => i += 1,
            }
        }
        self.pos += 1;
        Ok(Tok::Punct('<'))
    }

    fn variable(&mut self) -> Result<Tok, SparqlError> {
        let start = self.pos;
        self.pos += 1;
        let name_start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if self.pos == name_start {
            return Err(self.err(start, "variable name expected after '?'"));
        }
        Ok(Tok::Var(self.text[name_start..self.pos].to_string()))
    }

    fn number(&mut self) -> Result<Tok, SparqlError> {
        let start = self.pos;
        if matches!(self.bytes[self.pos], b'+' | b'-') {
            self.pos += 1;
        }
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            if self.peek_ahead(1).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let mut j = self.pos + 1;
            if j < self.bytes.len() && matches!(self.bytes[j], b'+' | b'-') {
                j += 1;
            }
            if j < self.bytes.len() && self.bytes[j].is_ascii_digit() {
                self.pos = j;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        Ok(Tok::Number(self.text[start..self.pos].to_string()))
    }

    fn literal(&mut self) -> Result<Tok, SparqlError> {
        let start = self.pos;
        self.pos += 1;
        let mut value = String::new();
        loop {
            if self.pos >= self.bytes.len() {
                return Err(self.err(start, "unterminated string literal"));
            }
            match self.bytes[self.pos] {
                b'\\' => {
                    self.pos += 1;
                    let esc = self
                        .bytes
                        .get(self.pos)
                        .ok_or_else(|| self.err(start, "unterminated escape"))?;
                    match esc {
                        b'\\' => value.push('\\'),
                        b'"' => value.push('"'),
                        b'n' => value.push('\n'),
                        b'r' => value.push('\r'),
                        b't' => value.push('\t'),
                        other => {
                            return Err(self.err(
                                self.pos,
                                format!("unknown escape \\{}", *other as char),
                            ))
                        }
                    }
                    self.pos += 1;
                }
                b'"' => {
                    self.pos += 1;
                    break;
                }
                _ => {
                    let c = self.text[self.pos..].chars().next().unwrap();
                    value.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'@' {
            self.pos += 1;
            let tag_start = self.pos;
            while self.pos < self.bytes.len()
                && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos == tag_start {
                return Err(self.err(tag_start, "empty language tag"));
            }
            return Ok(Tok::Literal {
                value,
                language: Some(self.text[tag_start..self.pos].to_string()),
                datatype: None,
            });
        }
        if self.pos + 1 < self.bytes.len()
            && self.bytes[self.pos] == b'^'
            && self.bytes[self.pos + 1] == b'^'
        {
            self.pos += 2;
            let dt = match self.bytes.get(self.pos) {
                Some(b'<') => match self.angle()? {
                    Tok::Iri(iri) => DatatypeRef::Iri(iri),
                    _ => return Err(self.err(self.pos, "datatype IRI expected after '^^'")),
                },
                Some(b) if b.is_ascii_alphabetic() || *b == b'_' || *b == b':' => {
                    match self.next_token()? {
                        Tok::Pname { prefix, local } => DatatypeRef::Pname { prefix, local },
                        _ => return Err(self.err(self.pos, "datatype expected after '^^'")),
                    }
                }
                _ => return Err(self.err(self.pos, "datatype expected after '^^'")),
            };
            return Ok(Tok::Literal {
                value,
                language: None,
                datatype: Some(dt),
            });
        }
        Ok(Tok::Literal {
            value,
            language: None,
            datatype: None,
        })
    }

    fn word(&mut self) -> Result<Tok, SparqlError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let word = self.text[start..self.pos].to_string();
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b':' {
            return self.pname(word);
        }
        Ok(Tok::Word(word))
    }

    fn pname(&mut self, prefix: String) -> Result<Tok, SparqlError> {
        self.pos += 1; // ':'
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'%') {
                self.pos += 1;
            } else if b == b'.' && self.peek_ahead(1).is_some_and(|c| c.is_ascii_alphanumeric()) {
                // dots are legal inside a local name but a trailing dot
                // terminates the triple
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(Tok::Pname {
            prefix,
            local: self.text[start..self.pos].to_string(),
        })
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end_offset: usize,
    prefixes: PrefixMap,
    fresh_counter: usize,
    used_vars: BTreeSet<String>,
}

pub fn parse_with_prefixes(text: &str, base: &PrefixMap) -> Result<QueryAst, SparqlError> {
    let tokens = Lexer::new(text).tokenize()?;
    let used_vars = tokens
        .iter()
        .filter_map(|(_, t)| match t {
            Tok::Var(name) => Some(name.clone()),
            _ => None,
        })
        .collect();
    let mut parser = Parser {
        tokens,
        pos: 0,
        end_offset: text.len(),
        prefixes: base.clone(),
        fresh_counter: 0,
        used_vars,
    };
    parser.query()
}

const UNSUPPORTED_KEYWORDS: &[(&str, &str)] = &[
    ("optional", "OPTIONAL"),
    ("union", "UNION"),
    ("minus", "MINUS"),
    ("order", "ORDER BY"),
    ("group", "GROUP BY"),
    ("having", "HAVING"),
    ("offset", "OFFSET"),
    ("bind", "BIND"),
    ("values", "VALUES"),
    ("service", "SERVICE"),
    ("graph", "GRAPH"),
    ("construct", "CONSTRUCT"),
    ("describe", "DESCRIBE"),
    ("base", "BASE"),
    ("exists", "EXISTS"),
    ("reduced", "REDUCED"),
];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.end_offset)
    }

    fn advance(&mut self) -> Option<Tok> {
        let tok = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn syntax(&self, message: impl Into<String>) -> SparqlError {
        SparqlError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn is_word(&self, keyword: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(keyword))
    }

    fn eat_word(&mut self, keyword: &str) -> bool {
        if self.is_word(keyword) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SparqlError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("expected {c:?}"))),
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn check_unsupported(&self) -> Result<(), SparqlError> {
        if let Some(Tok::Word(w)) = self.peek() {
            let lower = w.to_ascii_lowercase();
            if let Some((_, name)) = UNSUPPORTED_KEYWORDS.iter().find(|(kw, _)| *kw == lower) {
                return Err(SparqlError::Unsupported((*name).to_string()));
            }
        }
        Ok(())
    }

    fn fresh_variable(&mut self) -> String {
        loop {
            let candidate = format!("pathv{}", self.fresh_counter);
            self.fresh_counter += 1;
            if !self.used_vars.contains(&candidate) {
                self.used_vars.insert(candidate.clone());
                return candidate;
            }
        }
    }

    fn query(&mut self) -> Result<QueryAst, SparqlError> {
        while self.eat_word("prefix") {
            self.prefix_declaration()?;
        }
        self.check_unsupported()?;
        let form = if self.eat_word("select") {
            QueryForm::Select
        } else if self.eat_word("ask") {
            QueryForm::Ask
        } else {
            return Err(self.syntax("expected SELECT or ASK"));
        };

        let mut ast = QueryAst {
            form,
            projected: Vec::new(),
            distinct: false,
            aggregate: None,
            patterns: Vec::new(),
            filters: Vec::new(),
            limit: None,
        };

        if form == QueryForm::Select {
            self.projection(&mut ast)?;
        }

        self.eat_word("where");
        self.expect_punct('{')?;
        self.group(&mut ast)?;

        if self.eat_word("limit") {
            match self.advance() {
                Some(Tok::Number(n)) => {
                    let value: usize = n
                        .parse()
                        .map_err(|_| self.syntax(format!("invalid LIMIT value {n:?}")))?;
                    if value == 0 {
                        return Err(SparqlError::Validation(
                            "LIMIT must be a positive integer".to_string(),
                        ));
                    }
                    ast.limit = Some(value);
                }
                _ => return Err(self.syntax("LIMIT requires an integer")),
            }
        }
        self.check_unsupported()?;
        if self.peek().is_some() {
            return Err(self.syntax("unexpected trailing content"));
        }
        self.validate(&ast)?;
        Ok(ast)
    }

    fn prefix_declaration(&mut self) -> Result<(), SparqlError> {
        let (prefix, local) = match self.advance() {
            Some(Tok::Pname { prefix, local }) => (prefix, local),
            _ => return Err(self.syntax("expected prefix name in PREFIX declaration")),
        };
        if !local.is_empty() {
            return Err(self.syntax("prefix declaration must end with ':'"));
        }
        match self.advance() {
            Some(Tok::Iri(ns)) => {
                self.prefixes.insert(prefix, ns);
                Ok(())
            }
            _ => Err(self.syntax("expected <IRI> in PREFIX declaration")),
        }
    }

    fn projection(&mut self, ast: &mut QueryAst) -> Result<(), SparqlError> {
        if self.eat_word("distinct") {
            ast.distinct = true;
        } else if self.is_word("reduced") {
            return Err(SparqlError::Unsupported("REDUCED".to_string()));
        }
        loop {
            match self.peek() {
                Some(Tok::Var(_)) => {
                    if let Some(Tok::Var(name)) = self.advance() {
                        ast.projected.push(name);
                    }
                }
                Some(Tok::Punct('(')) => {
                    self.pos += 1;
                    let aggregate = self.count_aggregate(true)?;
                    if ast.aggregate.is_some() {
                        return Err(SparqlError::Unsupported(
                            "multiple aggregates in projection".to_string(),
                        ));
                    }
                    ast.aggregate = Some(aggregate);
                }
                Some(Tok::Word(w)) if w.eq_ignore_ascii_case("count") => {
                    self.pos += 1;
                    let aggregate = self.count_aggregate(false)?;
                    if ast.aggregate.is_some() {
                        return Err(SparqlError::Unsupported(
                            "multiple aggregates in projection".to_string(),
                        ));
                    }
                    ast.aggregate = Some(aggregate);
                }
                Some(Tok::Punct('*')) => {
                    return Err(SparqlError::Unsupported("SELECT *".to_string()))
                }
                Some(Tok::Word(w)) if w.eq_ignore_ascii_case("where") => break,
                Some(Tok::Punct('{')) => break,
                Some(_) => {
                    self.check_unsupported()?;
                    return Err(self.syntax("expected variable or aggregate in projection"));
                }
                None => return Err(self.syntax("unexpected end of query in projection")),
            }
        }
        if ast.projected.is_empty() && ast.aggregate.is_none() {
            return Err(self.syntax("projection is empty"));
        }
        if !ast.projected.is_empty() && ast.aggregate.is_some() {
            return Err(SparqlError::Unsupported(
                "aggregate mixed with plain variables in projection".to_string(),
            ));
        }
        Ok(())
    }

    /// Parses `COUNT(?x)` innards. When `parenthesized`, the caller saw a
    /// leading `(` and an `AS ?alias )` suffix is accepted.
    fn count_aggregate(&mut self, parenthesized: bool) -> Result<CountAggregate, SparqlError> {
        if parenthesized && !self.eat_word("count") {
            self.check_unsupported()?;
            return Err(SparqlError::Unsupported(
                "non-COUNT expression in projection".to_string(),
            ));
        }
        self.expect_punct('(')?;
        let distinct = self.eat_word("distinct");
        if matches!(self.peek(), Some(Tok::Punct('*'))) {
            return Err(SparqlError::Unsupported("COUNT(*)".to_string()));
        }
        let variable = match self.advance() {
            Some(Tok::Var(name)) => name,
            _ => return Err(self.syntax("COUNT requires a variable argument")),
        };
        self.expect_punct(')')?;
        let mut alias = None;
        if parenthesized {
            if self.eat_word("as") {
                alias = match self.advance() {
                    Some(Tok::Var(name)) => Some(name),
                    _ => return Err(self.syntax("expected variable after AS")),
                };
            }
            self.expect_punct(')')?;
        }
        Ok(CountAggregate {
            variable,
            alias,
            distinct,
        })
    }

    fn group(&mut self, ast: &mut QueryAst) -> Result<(), SparqlError> {
        loop {
            match self.peek() {
                None => return Err(self.syntax("unterminated group (missing '}')")),
                Some(Tok::Punct('}')) => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(Tok::Punct('.')) => {
                    self.pos += 1;
                }
                Some(Tok::Punct('{')) => {
                    return Err(SparqlError::Unsupported("nested group".to_string()))
                }
                Some(Tok::Word(w)) if w.eq_ignore_ascii_case("filter") => {
                    self.pos += 1;
                    let filter = self.filter()?;
                    ast.filters.push(filter);
                }
                Some(_) => {
                    self.check_unsupported()?;
                    self.triples_same_subject(ast)?;
                }
            }
        }
    }

    fn triples_same_subject(&mut self, ast: &mut QueryAst) -> Result<(), SparqlError> {
        let subject = self.term(Position::Subject)?;
        loop {
            let predicates = self.predicate_path()?;
            let object = self.term(Position::Object)?;
            if self.eat_punct(',') {
                return Err(SparqlError::Unsupported("object list ','".to_string()));
            }
            self.expand_path(ast, subject.clone(), predicates, object)?;
            if self.eat_punct(';') {
                // dangling ';' before '.' or '}' is allowed
                if matches!(self.peek(), Some(Tok::Punct('.')) | Some(Tok::Punct('}')) | None) {
                    break;
                }
                continue;
            }
            break;
        }
        match self.peek() {
            Some(Tok::Punct('.')) | Some(Tok::Punct('}')) | None => Ok(()),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("filter") => Ok(()),
            Some(_) => {
                self.check_unsupported()?;
                Err(self.syntax("expected '.', ';', FILTER or '}' after triple"))
            }
        }
    }

    fn predicate_path(&mut self) -> Result<Vec<Term>, SparqlError> {
        let mut steps = vec![self.term(Position::Predicate)?];
        loop {
            match self.peek() {
                Some(Tok::Punct('/')) => {
                    self.pos += 1;
                    steps.push(self.term(Position::Predicate)?);
                }
                Some(Tok::Punct(op @ ('|' | '^' | '*' | '+' | '?'))) => {
                    return Err(SparqlError::Unsupported(format!(
                        "property path operator '{op}'"
                    )));
                }
                _ => break,
            }
        }
        Ok(steps)
    }

    fn expand_path(
        &mut self,
        ast: &mut QueryAst,
        subject: Term,
        predicates: Vec<Term>,
        object: Term,
    ) -> Result<(), SparqlError> {
        let mut current = subject;
        let last = predicates.len() - 1;
        for (i, predicate) in predicates.into_iter().enumerate() {
            let target = if i == last {
                object.clone()
            } else {
                Term::variable(self.fresh_variable())
            };
            let pattern = TriplePattern::new(current, predicate, target.clone())
                .map_err(|e| SparqlError::Validation(e.to_string()))?;
            ast.patterns.push(pattern);
            current = target;
        }
        Ok(())
    }

    fn filter(&mut self) -> Result<Filter, SparqlError> {
        self.expect_punct('(')?;
        let left = self.filter_operand()?;
        match self.peek() {
            Some(Tok::Punct('=')) => {
                self.pos += 1;
            }
            Some(Tok::Punct(op @ ('<' | '>' | '!'))) => {
                return Err(SparqlError::Unsupported(format!("FILTER comparator '{op}'")));
            }
            _ => return Err(self.syntax("expected '=' in FILTER")),
        }
        let right = self.filter_operand()?;
        self.expect_punct(')')?;
        match (left, right) {
            (Term::Variable(v), operand) if !operand.is_variable() => {
                Ok(Filter { variable: v, operand })
            }
            (operand, Term::Variable(v)) if !operand.is_variable() => {
                Ok(Filter { variable: v, operand })
            }
            (Term::Variable(_), Term::Variable(_)) => Err(SparqlError::Unsupported(
                "FILTER comparing two variables".to_string(),
            )),
            _ => Err(SparqlError::Unsupported(
                "FILTER without a variable side".to_string(),
            )),
        }
    }

    fn filter_operand(&mut self) -> Result<Term, SparqlError> {
        if let Some(Tok::Word(w)) = self.peek() {
            let lower = w.to_ascii_lowercase();
            if matches!(
                lower.as_str(),
                "regex" | "lang" | "str" | "contains" | "bound" | "isiri" | "isliteral"
                    | "langmatches" | "strstarts" | "year" | "now" | "not"
            ) {
                return Err(SparqlError::Unsupported(format!(
                    "FILTER function {}",
                    lower.to_uppercase()
                )));
            }
        }
        self.term(Position::Object)
    }

    fn term(&mut self, position: Position) -> Result<Term, SparqlError> {
        let offset = self.offset();
        let tok = self
            .advance()
            .ok_or_else(|| self.syntax("unexpected end of query"))?;
        let term = match tok {
            Tok::Var(name) => Term::variable(name),
            Tok::Iri(iri) => Term::iri(iri),
            Tok::Pname { prefix, local } => {
                let iri = self.prefixes.resolve(&prefix, &local).ok_or_else(|| {
                    SparqlError::Syntax {
                        offset,
                        message: format!("undeclared prefix {prefix:?}"),
                    }
                })?;
                Term::iri(iri)
            }
            Tok::Literal {
                value,
                language,
                datatype,
            } => {
                let datatype = match datatype {
                    Some(DatatypeRef::Iri(iri)) => Some(iri),
                    Some(DatatypeRef::Pname { prefix, local }) => {
                        Some(self.prefixes.resolve(&prefix, &local).ok_or_else(|| {
                            SparqlError::Syntax {
                                offset,
                                message: format!("undeclared prefix {prefix:?}"),
                            }
                        })?)
                    }
                    None => None,
                };
                Term::Literal {
                    value,
                    datatype,
                    language,
                }
            }
            Tok::Number(lexical) => {
                let datatype = if lexical.contains('e') || lexical.contains('E') {
                    format!("{XSD}double")
                } else if lexical.contains('.') {
                    format!("{XSD}decimal")
                } else {
                    format!("{XSD}integer")
                };
                Term::literal_typed(lexical, datatype)
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("true") => {
                Term::literal_typed("true", format!("{XSD}boolean"))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("false") => {
                Term::literal_typed("false", format!("{XSD}boolean"))
            }
            Tok::Word(w) if w == "a" && position == Position::Predicate => Term::iri(RDF_TYPE),
            Tok::Word(w) => {
                self.pos -= 1;
                self.check_unsupported()?;
                self.pos += 1;
                return Err(SparqlError::Syntax {
                    offset,
                    message: format!("unexpected word {w:?} where a term was expected"),
                });
            }
            Tok::Punct(c) => {
                return Err(SparqlError::Syntax {
                    offset,
                    message: format!("unexpected {c:?} where a term was expected"),
                })
            }
        };
        match position {
            Position::Subject if term.is_literal() => Err(SparqlError::Validation(
                "literal not allowed in subject position".to_string(),
            )),
            Position::Predicate if term.is_literal() => Err(SparqlError::Validation(
                "literal not allowed in predicate position".to_string(),
            )),
            _ => Ok(term),
        }
    }

    fn validate(&self, ast: &QueryAst) -> Result<(), SparqlError> {
        let pattern_vars: BTreeSet<String> = ast
            .patterns
            .iter()
            .flat_map(|p| p.variables().map(str::to_string))
            .collect();
        for v in &ast.projected {
            if !pattern_vars.contains(v) {
                return Err(SparqlError::Validation(format!(
                    "projected variable ?{v} does not appear in any pattern"
                )));
            }
        }
        if let Some(agg) = &ast.aggregate {
            if !pattern_vars.contains(&agg.variable) {
                return Err(SparqlError::Validation(format!(
                    "aggregated variable ?{} does not appear in any pattern",
                    agg.variable
                )));
            }
        }
        for f in &ast.filters {
            if !pattern_vars.contains(&f.variable) {
                return Err(SparqlError::Validation(format!(
                    "filter variable ?{} does not appear in any pattern",
                    f.variable
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    Subject,
    Predicate,
    Object,
}

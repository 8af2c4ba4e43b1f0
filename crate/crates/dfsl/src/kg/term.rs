//! RDF-style terms and triples.

use std::cmp::Ordering;
use std::fmt;

use super::GraphError;

/// A term: an IRI, a literal, or (inside query patterns only) a variable.
///
/// Equality is structural: kind, value, datatype and language tag all
/// participate. Ordering is lexicographic on the serialized form, which
/// keeps index iteration and result ordering reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Iri(String),
    Literal {
        value: String,
        datatype: Option<String>,
        language: Option<String>,
    },
    Variable(String),
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri(value.into())
    }

    pub fn literal(value: impl Into<String>) -> Self {
        Term::Literal {
            value: value.into(),
            datatype: None,
            language: None,
        }
    }

    pub fn literal_typed(value: impl Into<String>, datatype: impl Into<String>) -> Self {
        Term::Literal {
            value: value.into(),
            datatype: Some(datatype.into()),
            language: None,
        }
    }

    pub fn literal_lang(value: impl Into<String>, language: impl Into<String>) -> Self {
        Term::Literal {
            value: value.into(),
            datatype: None,
            language: Some(language.into()),
        }
    }

    /// A variable named without the leading `?`.
    pub fn variable(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    /// The raw value: IRI text, literal lexical form, or variable name.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(v) => v,
            Term::Literal { value, .. } => value,
            Term::Variable(v) => v,
        }
    }

    /// Numeric interpretation used by FILTER and answer comparison.
    ///
    /// A literal is numeric when its datatype is one of the XSD numeric
    /// types, or when it is plain (no datatype, no language tag) and its
    /// lexical form parses as a finite number.
    pub fn numeric_value(&self) -> Option<f64> {
        let Term::Literal {
            value,
            datatype,
            language,
        } = self
        else {
            return None;
        };
        if language.is_some() {
            return None;
        }
        match datatype.as_deref() {
            Some(dt) if is_numeric_datatype(dt) => {
                value.trim().parse::<f64>().ok().filter(|v| v.is_finite())
            }
            Some(_) => None,
            None => value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite()),
        }
    }
}

fn is_numeric_datatype(dt: &str) -> bool {
    matches!(
        dt.strip_prefix("http://www.w3.org/2001/XMLSchema#"),
        Some(
            "integer"
                | "decimal"
                | "double"
                | "float"
                | "int"
                | "long"
                | "short"
                | "byte"
                | "nonNegativeInteger"
                | "nonPositiveInteger"
                | "positiveInteger"
                | "negativeInteger"
                | "unsignedInt"
                | "unsignedLong"
                | "unsignedShort"
                | "unsignedByte"
        )
    )
}

fn escape_literal(value: &str, out: &mut String) {
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(v) => write!(f, "<{v}>"),
            Term::Literal {
                value,
                datatype,
                language,
            } => {
                let mut escaped = String::with_capacity(value.len());
                escape_literal(value, &mut escaped);
                write!(f, "\"{escaped}\"")?;
                if let Some(lang) = language {
                    write!(f, "@{lang}")?;
                } else if let Some(dt) = datatype {
                    write!(f, "^^<{dt}>")?;
                }
                Ok(())
            }
            Term::Variable(v) => write!(f, "?{v}"),
        }
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A fact: subject and predicate are IRIs, the object is an IRI or a
/// literal. Facts never contain variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, GraphError> {
        for (term, position) in [(&subject, "subject"), (&predicate, "predicate"), (&object, "object")] {
            if term.is_variable() {
                return Err(GraphError::VariableInFact(term.to_string()));
            }
            if term.is_literal() && position != "object" {
                return Err(GraphError::LiteralPosition { position });
            }
        }
        if !subject.is_iri() || !predicate.is_iri() {
            return Err(GraphError::LiteralPosition {
                position: if subject.is_iri() { "predicate" } else { "subject" },
            });
        }
        Ok(Self {
            subject,
            predicate,
            object,
        })
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// A triple pattern: each position is either a concrete term or a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, GraphError> {
        if subject.is_literal() {
            return Err(GraphError::LiteralPosition { position: "subject" });
        }
        if predicate.is_literal() {
            return Err(GraphError::LiteralPosition {
                position: "predicate",
            });
        }
        Ok(Self {
            subject,
            predicate,
            object,
        })
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms().into_iter().filter_map(|t| match t {
            Term::Variable(name) => Some(name.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

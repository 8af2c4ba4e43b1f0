//! Benchmark dataset loaders: QALD-style JSON, LC-QuAD 2.0 JSON, and a
//! generic JSONL format for fixtures and custom data.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::endpoint::parse_results;
use crate::sparql::{parse_with_prefixes, AnswerSet, PrefixMap};

use super::BenchError;

#[derive(Debug, Clone)]
pub struct BenchmarkRecord {
    pub question_id: String,
    pub question: String,
    pub gold_entities: Vec<(String, String)>,
    pub gold_relations: Vec<(String, String)>,
    pub gold_query: String,
    /// Pre-materialized answers, preferred over executing the gold query.
    pub gold_answers: Option<AnswerSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    QaldJson,
    Lcquad2Json,
    GenericJsonl,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qald_json" => Ok(DatasetFormat::QaldJson),
            "lcquad2_json" => Ok(DatasetFormat::Lcquad2Json),
            "generic_jsonl" => Ok(DatasetFormat::GenericJsonl),
            other => Err(format!(
                "unknown dataset format {other:?} (expected qald_json, lcquad2_json or generic_jsonl)"
            )),
        }
    }
}

#[derive(Debug)]
pub struct LoadOutcome {
    pub records: Vec<BenchmarkRecord>,
    /// Records dropped for missing gold queries or usable question text.
    pub skipped: usize,
    /// Records whose entity/relation annotations had to be derived from
    /// the gold query's IRIs.
    pub derived_annotations: usize,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LoadOutcome, BenchError> {
    let mut outcome = match format {
        DatasetFormat::GenericJsonl => load_generic_jsonl(path)?,
        DatasetFormat::QaldJson => load_qald(path)?,
        DatasetFormat::Lcquad2Json => load_lcquad2(path)?,
    };
    for record in &mut outcome.records {
        if record.gold_entities.is_empty() && record.gold_relations.is_empty() {
            let (entities, relations) = derive_annotations(&record.gold_query);
            if !entities.is_empty() || !relations.is_empty() {
                record.gold_entities = entities;
                record.gold_relations = relations;
                outcome.derived_annotations += 1;
            }
        }
    }
    if outcome.records.is_empty() {
        return Err(BenchError::NoRecords {
            path: path.display().to_string(),
        });
    }
    Ok(outcome)
}

#[derive(Deserialize)]
struct GenericRecord {
    id: Option<Value>,
    question: String,
    #[serde(default)]
    entities: Vec<(String, String)>,
    #[serde(default)]
    relations: Vec<(String, String)>,
    #[serde(default)]
    query: Option<String>,
    #[serde(default)]
    answers: Option<Value>,
}

fn load_generic_jsonl(path: &Path) -> Result<LoadOutcome, BenchError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut skipped = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: GenericRecord = serde_json::from_str(&line).map_err(|e| {
            BenchError::Config(format!("{}:{}: {e}", path.display(), idx + 1))
        })?;
        let Some(query) = raw.query.filter(|q| !q.trim().is_empty()) else {
            skipped += 1;
            continue;
        };
        let gold_answers = match raw.answers {
            Some(Value::Null) | None => None,
            Some(doc) => Some(parse_results(doc.to_string().as_bytes()).map_err(|e| {
                BenchError::Config(format!("{}:{}: bad answers: {e}", path.display(), idx + 1))
            })?),
        };
        records.push(BenchmarkRecord {
            question_id: raw
                .id
                .map(id_to_string)
                .unwrap_or_else(|| format!("line{}", idx + 1)),
            question: raw.question,
            gold_entities: raw.entities,
            gold_relations: raw.relations,
            gold_query: query,
            gold_answers,
        });
    }
    Ok(LoadOutcome {
        records,
        skipped,
        derived_annotations: 0,
    })
}

fn id_to_string(value: Value) -> String {
    match value {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn load_qald(path: &Path) -> Result<LoadOutcome, BenchError> {
    let file = std::fs::File::open(path)?;
    let doc: Value = serde_json::from_reader(std::io::BufReader::new(file))?;
    let questions = doc
        .get("questions")
        .and_then(Value::as_array)
        .ok_or_else(|| BenchError::Config("QALD document has no 'questions' array".into()))?;
    let mut records = Vec::new();
    let mut skipped = 0;
    for (idx, entry) in questions.iter().enumerate() {
        let id = entry
            .get("id")
            .map(|v| id_to_string(v.clone()))
            .unwrap_or_else(|| format!("q{idx}"));
        let english = entry
            .get("question")
            .and_then(Value::as_array)
            .and_then(|langs| {
                langs.iter().find(|l| {
                    l.get("language").and_then(Value::as_str) == Some("en")
                })
            })
            .and_then(|l| l.get("string").and_then(Value::as_str));
        let sparql = entry
            .get("query")
            .and_then(|q| q.get("sparql"))
            .and_then(Value::as_str)
            .filter(|s| !s.trim().is_empty());
        let (Some(question), Some(query)) = (english, sparql) else {
            skipped += 1;
            continue;
        };
        let gold_answers = entry
            .get("answers")
            .and_then(Value::as_array)
            .and_then(|docs| docs.first())
            .and_then(|doc| parse_results(doc.to_string().as_bytes()).ok());
        records.push(BenchmarkRecord {
            question_id: id,
            question: question.to_string(),
            gold_entities: annotation_pairs(entry.get("entities")),
            gold_relations: annotation_pairs(entry.get("relations")),
            gold_query: query.to_string(),
            gold_answers,
        });
    }
    Ok(LoadOutcome {
        records,
        skipped,
        derived_annotations: 0,
    })
}

fn load_lcquad2(path: &Path) -> Result<LoadOutcome, BenchError> {
    let file = std::fs::File::open(path)?;
    let doc: Value = serde_json::from_reader(std::io::BufReader::new(file))?;
    let entries = doc
        .as_array()
        .ok_or_else(|| BenchError::Config("LC-QuAD 2.0 document is not a JSON array".into()))?;
    let mut records = Vec::new();
    let mut skipped = 0;
    for (idx, entry) in entries.iter().enumerate() {
        let id = entry
            .get("uid")
            .map(|v| id_to_string(v.clone()))
            .unwrap_or_else(|| format!("uid{idx}"));
        let question = entry
            .get("question")
            .and_then(Value::as_str)
            .filter(|q| !q.trim().is_empty())
            .or_else(|| {
                entry
                    .get("NNQT_question")
                    .and_then(Value::as_str)
                    .filter(|q| !q.trim().is_empty())
            });
        let sparql = entry
            .get("sparql_wikidata")
            .and_then(Value::as_str)
            .filter(|s| !s.trim().is_empty());
        let (Some(question), Some(query)) = (question, sparql) else {
            skipped += 1;
            continue;
        };
        records.push(BenchmarkRecord {
            question_id: id,
            question: question.to_string(),
            gold_entities: annotation_pairs(entry.get("entities")),
            gold_relations: annotation_pairs(entry.get("relations")),
            gold_query: query.to_string(),
            gold_answers: None,
        });
    }
    Ok(LoadOutcome {
        records,
        skipped,
        derived_annotations: 0,
    })
}

/// Accepts either `[["iri", "label"], ...]` or
/// `[{"uri": ..., "label": ...}, ...]`.
fn annotation_pairs(value: Option<&Value>) -> Vec<(String, String)> {
    let Some(Value::Array(items)) = value else {
        return Vec::new();
    };
    let mut pairs = Vec::new();
    for item in items {
        match item {
            Value::Array(pair) if pair.len() == 2 => {
                if let (Some(iri), Some(label)) = (pair[0].as_str(), pair[1].as_str()) {
                    pairs.push((iri.to_string(), label.to_string()));
                }
            }
            Value::Object(map) => {
                let iri = map
                    .get("uri")
                    .or_else(|| map.get("iri"))
                    .and_then(Value::as_str);
                let label = map.get("label").and_then(Value::as_str);
                if let Some(iri) = iri {
                    pairs.push((
                        iri.to_string(),
                        label.unwrap_or(local_name(iri)).to_string(),
                    ));
                }
            }
            _ => {}
        }
    }
    pairs
}

pub fn local_name(iri: &str) -> &str {
    iri.rsplit(['/', '#', ':'])
        .next()
        .filter(|s| !s.is_empty())
        .unwrap_or(iri)
}

/// Entity and relation lists recovered from the gold query when the
/// dataset release carries no annotations: subject/object IRIs become
/// entities, predicate IRIs become relations, labels fall back to the
/// IRI local name.
fn derive_annotations(query: &str) -> (Vec<(String, String)>, Vec<(String, String)>) {
    let Ok(ast) = parse_with_prefixes(query, &PrefixMap::default()) else {
        return (Vec::new(), Vec::new());
    };
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    let mut seen_e = BTreeSet::new();
    let mut seen_r = BTreeSet::new();
    for pattern in &ast.patterns {
        for term in [&pattern.subject, &pattern.object] {
            if let crate::kg::Term::Iri(iri) = term {
                if seen_e.insert(iri.clone()) {
                    entities.push((iri.clone(), local_name(iri).to_string()));
                }
            }
        }
        if let crate::kg::Term::Iri(iri) = &pattern.predicate {
            if seen_r.insert(iri.clone()) {
                relations.push((iri.clone(), local_name(iri).to_string()));
            }
        }
    }
    (entities, relations)
}

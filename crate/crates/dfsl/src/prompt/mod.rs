//! In-context prompt assembly for every prompting mode: plain question,
//! zero-shot, static few-shot, dynamic few-shot (with retrieved
//! demonstrations), and multi-query prompting. Prompts have three parts:
//! a task-description header with numbered guidelines, the demonstration
//! blocks (each terminated by a `###` line), and the input question with
//! its gold entities and relations.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::retrieval::{format_pairs, EncodeMode, Example};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{mode} prompts require exactly {expected} demonstrations, got {got}")]
    DemoCountMismatch {
        mode: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("static few-shot configuration provides {got} examples but k = {expected}")]
    StaticExampleCount { expected: usize, got: usize },
    #[error("template error: {0}")]
    Template(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Plain,
    ZeroShot,
    FewShotStatic,
    Dfsl,
    DfslMqp,
}

impl PromptMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptMode::Plain => "plain",
            PromptMode::ZeroShot => "zero_shot",
            PromptMode::FewShotStatic => "few_shot_static",
            PromptMode::Dfsl => "dfsl",
            PromptMode::DfslMqp => "dfsl_mqp",
        }
    }

    /// Modes whose prompt carries demonstration blocks.
    pub fn uses_demos(&self) -> bool {
        matches!(
            self,
            PromptMode::FewShotStatic | PromptMode::Dfsl | PromptMode::DfslMqp
        )
    }

    /// Modes that retrieve demonstrations by similarity.
    pub fn uses_retrieval(&self) -> bool {
        matches!(self, PromptMode::Dfsl | PromptMode::DfslMqp)
    }
}

impl std::fmt::Display for PromptMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which gold information is removed, from both the storage encoding and
/// the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    NoEntities,
    NoRelations,
    NoBoth,
}

impl Ablation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoEntities => "no_entities",
            Ablation::NoRelations => "no_relations",
            Ablation::NoBoth => "no_both",
        }
    }

    pub fn include_entities(&self) -> bool {
        matches!(self, Ablation::Full | Ablation::NoRelations)
    }

    pub fn include_relations(&self) -> bool {
        matches!(self, Ablation::Full | Ablation::NoEntities)
    }

    /// The matching storage encoding mode.
    pub fn encode_mode(&self) -> EncodeMode {
        match self {
            Ablation::Full => EncodeMode::Full,
            Ablation::NoEntities => EncodeMode::NoEntities,
            Ablation::NoRelations => EncodeMode::NoRelations,
            Ablation::NoBoth => EncodeMode::QuestionOnly,
        }
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoOrder {
    /// The most similar demonstration sits last, adjacent to the input
    /// question.
    MostSimilarLast,
    MostSimilarFirst,
}

/// Reorders a similarity-ranked demonstration list (most similar first)
/// into prompt order.
pub fn order_demos(demos: Vec<Example>, order: DemoOrder) -> Vec<Example> {
    match order {
        DemoOrder::MostSimilarFirst => demos,
        DemoOrder::MostSimilarLast => {
            let mut demos = demos;
            demos.reverse();
            demos
        }
    }
}

/// Prompt wording lives in a versioned template with `{kg_name}`,
/// `{guidelines}`, `{demos}` and `{question_block}` placeholders; the
/// version is recorded in evaluation reports so runs stay comparable
/// when wording changes.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    text: String,
    version: String,
}

pub const BUILTIN_TEMPLATE_VERSION: &str = "builtin-v1";

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            text: include_str!("../../templates/default.txt").to_string(),
            version: BUILTIN_TEMPLATE_VERSION.to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn from_file(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)?;
        let digest = Sha256::digest(text.as_bytes());
        let version = hex_prefix(&digest, 12);
        let template = Self { text, version };
        template.check_placeholders()?;
        Ok(template)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    fn check_placeholders(&self) -> Result<(), PromptError> {
        for placeholder in ["{kg_name}", "{guidelines}", "{demos}", "{question_block}"] {
            if !self.text.contains(placeholder) {
                return Err(PromptError::Template(format!(
                    "template is missing the {placeholder} placeholder"
                )));
            }
        }
        Ok(())
    }

    fn render(&self, kg_name: &str, guidelines: &str, demos: &str, question_block: &str) -> String {
        self.text
            .replace("{kg_name}", kg_name)
            .replace("{guidelines}", guidelines)
            .replace("{demos}", demos)
            .replace("{question_block}", question_block)
    }
}

fn hex_prefix(digest: &[u8], chars: usize) -> String {
    let mut out = String::with_capacity(chars);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
        if out.len() >= chars {
            break;
        }
    }
    out.truncate(chars);
    out
}

#[derive(Debug, Clone)]
pub struct PromptConfig {
    pub mode: PromptMode,
    /// Knowledge graph named in the header, e.g. "Wikidata" or "DBpedia".
    pub kg_name: String,
    /// Demonstration count for few-shot modes.
    pub k: usize,
    pub ablation: Ablation,
    /// Fixed demonstrations for [`PromptMode::FewShotStatic`].
    pub static_examples: Vec<Example>,
    pub demo_order: DemoOrder,
    pub template: PromptTemplate,
}

impl PromptConfig {
    pub fn new(mode: PromptMode, kg_name: impl Into<String>) -> Self {
        Self {
            mode,
            kg_name: kg_name.into(),
            k: 5,
            ablation: Ablation::Full,
            static_examples: Vec::new(),
            demo_order: DemoOrder::MostSimilarLast,
            template: PromptTemplate::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.mode == PromptMode::FewShotStatic && self.static_examples.len() != self.k {
            return Err(PromptError::StaticExampleCount {
                expected: self.k,
                got: self.static_examples.len(),
            });
        }
        self.template.check_placeholders()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub text: String,
    pub demo_count: usize,
    /// Hash of the full text; cache key and scripted-transcript key.
    pub fingerprint: String,
}

pub fn fingerprint_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Assembles the prompt for one input question. `demos` must be ranked
/// most similar first; demo ordering policy is applied here.
pub fn build_prompt(
    config: &PromptConfig,
    question: &str,
    entities: &[(String, String)],
    relations: &[(String, String)],
    demos: &[Example],
) -> Result<Prompt, PromptError> {
    config.validate()?;
    let expected = if config.mode.uses_demos() { config.k } else { 0 };
    if demos.len() != expected {
        return Err(PromptError::DemoCountMismatch {
            mode: config.mode.as_str(),
            expected,
            got: demos.len(),
        });
    }

    let guidelines = guidelines_for(config);
    let ordered = order_demos(demos.to_vec(), config.demo_order);
    let demo_text: String = ordered
        .iter()
        .map(|demo| demo_block(demo, config))
        .collect();
    let question_block = question_block(question, entities, relations, config);
    let text = config
        .template
        .render(&config.kg_name, &guidelines, &demo_text, &question_block);
    let fingerprint = fingerprint_text(&text);
    Ok(Prompt {
        text,
        demo_count: ordered.len(),
        fingerprint,
    })
}

fn guidelines_for(config: &PromptConfig) -> String {
    let mut lines: Vec<String> = Vec::new();
    lines.push(format!(
        "Write a single SPARQL query that answers the question using the {} vocabulary.",
        config.kg_name
    ));
    if config.mode != PromptMode::Plain {
        match config.ablation {
            Ablation::Full => lines.push(
                "Use the gold entities and relations provided with the question; each is written as label (IRI)."
                    .to_string(),
            ),
            Ablation::NoEntities => lines.push(
                "Use the gold relations provided with the question; each is written as label (IRI)."
                    .to_string(),
            ),
            Ablation::NoRelations => lines.push(
                "Use the gold entities provided with the question; each is written as label (IRI)."
                    .to_string(),
            ),
            Ablation::NoBoth => {}
        }
    }
    lines.push("Return the query as <SPARQL>your query here</SPARQL> and nothing else.".to_string());
    if config.mode.uses_demos() {
        lines.push("Solved examples are provided below; follow the same format.".to_string());
    }
    if config.mode == PromptMode::DfslMqp {
        lines.push(
            "Propose multiple candidate queries, including variants with the subject and object of a triple inverted; enclose each candidate in its own SPARQL tags."
                .to_string(),
        );
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| format!("{}. {line}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn demo_block(demo: &Example, config: &PromptConfig) -> String {
    let mut block = format!("Question: {}\n", demo.question);
    push_gold_lines(&mut block, &demo.entities, &demo.relations, config);
    block.push_str(&format!("<SPARQL>{}</SPARQL>\n###\n", demo.query));
    block
}

fn question_block(
    question: &str,
    entities: &[(String, String)],
    relations: &[(String, String)],
    config: &PromptConfig,
) -> String {
    let mut block = format!("Question: {question}\n");
    push_gold_lines(&mut block, entities, relations, config);
    block
}

fn push_gold_lines(
    block: &mut String,
    entities: &[(String, String)],
    relations: &[(String, String)],
    config: &PromptConfig,
) {
    if config.mode == PromptMode::Plain {
        return;
    }
    if config.ablation.include_entities() {
        block.push_str(&format!("Entities: {}\n", format_pairs(entities)));
    }
    if config.ablation.include_relations() {
        block.push_str(&format!("Relations: {}\n", format_pairs(relations)));
    }
}

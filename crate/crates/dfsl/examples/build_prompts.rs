//! Assemble prompts for every mode: plain question, zero-shot, static
//! few-shot, dynamic few-shot, and multi-query prompting, plus the
//! gold-information ablations.
//!
//! ```text
//! cargo run -p dfsl --example build_prompts
//! ```

use std::path::Path;

use dfsl::bench::{builtin_static_examples, load_dataset, DatasetFormat};
use dfsl::prompt::{build_prompt, Ablation, PromptConfig, PromptMode};
use dfsl::retrieval::{build_store, EncodeMode, Example, TrigramEmbedder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let outcome = load_dataset(&fixtures.join("toy_benchmark.jsonl"), DatasetFormat::GenericJsonl)?;
    let records = outcome.records;
    let target = &records[0];
    let pool: Vec<Example> = records
        .iter()
        .map(|r| {
            Example::new(
                r.question.clone(),
                r.gold_entities.clone(),
                r.gold_relations.clone(),
                r.gold_query.clone(),
            )
        })
        .collect();

    let embedder = TrigramEmbedder::default();
    let store = build_store(pool, &embedder, EncodeMode::Full)?;
    let query = store.query_vector(
        &embedder,
        &target.question,
        &target.gold_entities,
        &target.gold_relations,
        EncodeMode::Full,
    )?;
    let demos: Vec<Example> = store
        .top_k(&query, 3)?
        .into_iter()
        .map(|(e, _)| e.clone())
        .collect();

    for mode in [
        PromptMode::Plain,
        PromptMode::ZeroShot,
        PromptMode::FewShotStatic,
        PromptMode::Dfsl,
        PromptMode::DfslMqp,
    ] {
        let mut config = PromptConfig::new(mode, "Wikidata");
        let mode_demos: Vec<Example> = match mode {
            PromptMode::FewShotStatic => {
                config.static_examples = builtin_static_examples()?;
                config.static_examples.clone()
            }
            PromptMode::Dfsl | PromptMode::DfslMqp => demos.clone(),
            _ => Vec::new(),
        };
        config.k = mode_demos.len();
        let prompt = build_prompt(
            &config,
            &target.question,
            &target.gold_entities,
            &target.gold_relations,
            &mode_demos,
        )?;
        println!(
            "=== {mode} | {} demos | fingerprint {} | {} chars",
            prompt.demo_count,
            &prompt.fingerprint[..12],
            prompt.text.len()
        );
        if mode == PromptMode::Dfsl {
            println!("{}", prompt.text);
        }
    }

    println!("=== ablations (zero-shot, marker presence)");
    for ablation in [
        Ablation::Full,
        Ablation::NoEntities,
        Ablation::NoRelations,
        Ablation::NoBoth,
    ] {
        let mut config = PromptConfig::new(PromptMode::ZeroShot, "Wikidata");
        config.ablation = ablation;
        let prompt = build_prompt(
            &config,
            &target.question,
            &target.gold_entities,
            &target.gold_relations,
            &[],
        )?;
        println!(
            "{ablation:12}  Entities-line={}  Relations-line={}",
            prompt.text.contains("Entities:"),
            prompt.text.contains("Relations:")
        );
    }
    Ok(())
}

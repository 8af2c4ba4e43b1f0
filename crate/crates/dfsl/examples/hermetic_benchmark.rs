//! The full pipeline end to end on the toy fixtures, hermetically:
//! dynamic few-shot retrieval, prompting, mock generation, execution on
//! the in-memory graph, selection, and a rendered comparison table.
//!
//! ```text
//! cargo run -p dfsl --example hermetic_benchmark
//! ```

use std::path::Path;

use dfsl::bench::{render, run_benchmark, ReportLayout, RunConfig, SelectionStrategy};
use dfsl::prompt::{Ablation, PromptMode};

fn base_config() -> RunConfig {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let toml_text = format!(
        r#"
dataset = "{dataset}"
dataset_format = "generic_jsonl"
mode = "dfsl"

[executor]
kind = "hermetic"
graph = "{graph}"
"#,
        dataset = fixtures.join("toy_benchmark.jsonl").display(),
        graph = fixtures.join("toy_graph.nt").display(),
    );
    toml::from_str(&toml_text).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut reports = Vec::new();
    for mode in [PromptMode::Plain, PromptMode::ZeroShot, PromptMode::Dfsl] {
        let mut config = base_config();
        config.mode = mode;
        reports.push(run_benchmark(&config)?);
    }
    println!("prompting modes (echo backend, hermetic executor):\n");
    print!("{}", render(&reports, ReportLayout::Table, Some("zero_shot"))?);

    // multi-query selection against flipped beams
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut flip_reports = Vec::new();
    for (selection, b, label) in [
        (SelectionStrategy::Single, 1, "dfsl (top beam only)"),
        (SelectionStrategy::Fs, 2, "dfsl-mq_fs"),
        (SelectionStrategy::Ls, 2, "dfsl-mq_ls"),
    ] {
        let mut config = base_config();
        config.dataset = fixtures.join("flip_benchmark.jsonl");
        config.backend = dfsl::bench::BackendSpec::FlipEcho;
        config.selection = selection;
        config.b = Some(b);
        config.approach = Some(label.to_string());
        flip_reports.push(run_benchmark(&config)?);
    }
    println!("\nflipped-beam recovery (flip-echo backend):\n");
    print!("{}", render(&flip_reports, ReportLayout::Table, None)?);

    // gold-information ablations on the decoy storage
    let mut ablation_reports = Vec::new();
    for ablation in [
        Ablation::Full,
        Ablation::NoEntities,
        Ablation::NoRelations,
        Ablation::NoBoth,
    ] {
        let mut config = base_config();
        config.storage = Some(fixtures.join("ablation_storage.jsonl"));
        config.ablation = ablation;
        config.approach = Some(format!("dfsl ({})", ablation.as_str()));
        ablation_reports.push(run_benchmark(&config)?);
    }
    println!("\ngold-information ablations (decoy storage):\n");
    print!("{}", render(&ablation_reports, ReportLayout::Table, None)?);
    Ok(())
}

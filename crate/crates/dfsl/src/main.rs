//! Batch CLI for the pipeline: run a benchmark, sweep k, run the
//! ablation grid, render reports, and manage the generation cache.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dfsl::bench::{
    load_reports, render, replay_artifacts, run_benchmark, ReportLayout, RunConfig,
    SelectionStrategy,
};
use dfsl::generate::{cache_entries, clear_cache};
use dfsl::prompt::{Ablation, PromptMode};

#[derive(Parser)]
#[command(name = "dfsl", version, about = "Dynamic few-shot SPARQL generation benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark configuration and print the report.
    Run(RunArgs),
    /// Run the same configuration for k in a set of values.
    #[command(name = "sweep-k")]
    SweepK(SweepArgs),
    /// Run the four gold-information ablations.
    Ablate(AblateArgs),
    /// Render stored reports as a table or JSON.
    Report(ReportArgs),
    /// Inspect or clear the generation cache.
    Cache(CacheArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the prompting mode.
    #[arg(long)]
    mode: Option<String>,
    /// Override the answer selection strategy (single, ls, fs).
    #[arg(long)]
    selection: Option<SelectionStrategy>,
    /// Override the demonstration count.
    #[arg(long)]
    k: Option<usize>,
    /// Override the beam width.
    #[arg(long)]
    b: Option<usize>,
    /// Override the ablation (full, no_entities, no_relations, no_both).
    #[arg(long)]
    ablation: Option<String>,
    /// Override the random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Persist per-question artifacts and report.json here.
    #[arg(long)]
    artifacts_dir: Option<PathBuf>,
    /// Disk cache directory for generation results.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut config = RunConfig::from_toml_file(&self.config)?;
        if let Some(mode) = &self.mode {
            config.mode = parse_mode(mode)?;
        }
        if let Some(selection) = self.selection {
            config.selection = selection;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(b) = self.b {
            config.b = Some(b);
        }
        if let Some(ablation) = &self.ablation {
            config.ablation = parse_ablation(ablation)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.artifacts_dir {
            config.artifacts_dir = Some(dir.clone());
        }
        if let Some(dir) = &self.cache_dir {
            config.cache_dir = Some(dir.clone());
        }
        Ok(config)
    }
}

fn parse_mode(text: &str) -> anyhow::Result<PromptMode> {
    Ok(match text {
        "plain" => PromptMode::Plain,
        "zero_shot" => PromptMode::ZeroShot,
        "few_shot_static" => PromptMode::FewShotStatic,
        "dfsl" => PromptMode::Dfsl,
        "dfsl_mqp" => PromptMode::DfslMqp,
        other => anyhow::bail!("unknown mode {other:?}"),
    })
}

fn parse_ablation(text: &str) -> anyhow::Result<Ablation> {
    Ok(match text {
        "full" => Ablation::Full,
        "no_entities" => Ablation::NoEntities,
        "no_relations" => Ablation::NoRelations,
        "no_both" => Ablation::NoBoth,
        other => anyhow::bail!("unknown ablation {other:?}"),
    })
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the report JSON here in addition to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated demonstration counts.
    #[arg(long, default_value = "1,3,5,7", value_delimiter = ',')]
    values: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON files produced by `run --out` (or artifacts dirs via
    /// --artifacts).
    #[arg(long, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Recompute reports from artifacts directories instead of files.
    #[arg(long, num_args = 0..)]
    artifacts: Vec<PathBuf>,
    #[arg(long, default_value = "table")]
    layout: ReportLayout,
    /// Baseline approach for the delta column (default: first row).
    #[arg(long)]
    baseline: Option<String>,
}

#[derive(Args)]
struct CacheArgs {
    #[command(subcommand)]
    action: CacheAction,
}

#[derive(Subcommand)]
enum CacheAction {
    /// List cache records.
    Inspect {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Remove every cache record.
    Clear {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let config = args.config.load()?;
            let report = run_benchmark(&config)?;
            print!("{}", render(std::slice::from_ref(&report), ReportLayout::Table, None)?);
            println!(
                "count={} skipped={} template={} flags: extraction={} execution={} lenient={} flips={}",
                report.count,
                report.skipped_records,
                report.template_version,
                report.flag_counts.extraction_failures,
                report.flag_counts.execution_failures,
                report.flag_counts.lenient_extractions,
                report.flag_counts.triple_flips_detected,
            );
            if let Some(out) = &args.out {
                std::fs::write(out, serde_json::to_vec_pretty(&report)?)?;
            }
            // success requires at least one evaluated record
            Ok(if report.count > 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::SweepK(args) => {
            let base = args.config.load()?;
            let mut reports = Vec::new();
            for k in &args.values {
                let mut config = base.clone();
                config.k = *k;
                config.approach = Some(format!("{} (k={k})", base.approach_label()));
                reports.push(run_benchmark(&config)?);
            }
            print!("{}", render(&reports, ReportLayout::Table, None)?);
            if let Some(out) = &args.out {
                std::fs::write(out, serde_json::to_vec_pretty(&reports)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate(args) => {
            let base = args.config.load()?;
            let mut reports = Vec::new();
            for ablation in [
                Ablation::Full,
                Ablation::NoEntities,
                Ablation::NoRelations,
                Ablation::NoBoth,
            ] {
                let mut config = base.clone();
                config.ablation = ablation;
                config.approach =
                    Some(format!("{} ({})", base.approach_label(), ablation.as_str()));
                reports.push(run_benchmark(&config)?);
            }
            print!("{}", render(&reports, ReportLayout::Table, None)?);
            if let Some(out) = &args.out {
                std::fs::write(out, serde_json::to_vec_pretty(&reports)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            let mut reports = load_reports(&args.inputs)?;
            for dir in &args.artifacts {
                reports.push(replay_artifacts(dir)?);
            }
            if reports.is_empty() {
                anyhow::bail!("no reports given (use --inputs or --artifacts)");
            }
            print!(
                "{}",
                render(&reports, args.layout, args.baseline.as_deref())?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Cache(args) => match args.action {
            CacheAction::Inspect { dir } => {
                let entries = cache_entries(&dir)?;
                for entry in &entries {
                    println!(
                        "{}  backend={} b={} {} bytes",
                        entry.file.display(),
                        entry.backend_id,
                        entry.num_hypotheses,
                        entry.size_bytes,
                    );
                }
                println!("{} cache records", entries.len());
                Ok(ExitCode::SUCCESS)
            }
            CacheAction::Clear { dir } => {
                let removed = clear_cache(&dir)?;
                println!("removed {removed} cache records");
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

//! The generation layer with deterministic mock backends: echo,
//! scripted transcripts, flip beams, payload extraction, and the
//! request cache.
//!
//! ```text
//! cargo run -p dfsl --example mock_generation
//! ```

use std::collections::HashMap;

use dfsl::generate::{
    extract_query, CachedClient, EchoMock, FlipMock, GenerationClient, GenerationRequest,
    ScriptedMock,
};
use dfsl::prompt::{build_prompt, PromptConfig, PromptMode};
use dfsl::retrieval::Example;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // ranked most similar first, as retrieval returns them
    let demos = vec![
        Example::new(
            "What is the capital city of France?",
            vec![("http://www.wikidata.org/entity/Q9001".into(), "France".into())],
            vec![("http://www.wikidata.org/prop/direct/P36".into(), "capital".into())],
            "SELECT ?x WHERE { wd:Q9001 wdt:P36 ?x }",
        ),
        Example::new(
            "Who wrote Dune?",
            vec![("http://www.wikidata.org/entity/Q9010".into(), "Dune".into())],
            vec![("http://www.wikidata.org/prop/direct/P50".into(), "author".into())],
            "SELECT ?x WHERE { wd:Q9010 wdt:P50 ?x }",
        ),
    ];
    let mut config = PromptConfig::new(PromptMode::Dfsl, "Wikidata");
    config.k = 2;
    let prompt = build_prompt(&config, "What is the capital of France?", &[], &[], &demos)?;

    // echo: the most similar demonstration's query, wrapped in tags
    let echo = EchoMock::default();
    let output = echo.generate(&GenerationRequest::new(prompt.clone(), 1))?;
    println!("echo-mock hypothesis: {}", output.hypotheses[0]);
    let extraction = extract_query(&output.hypotheses[0])?;
    println!("extracted (lenient={}): {}", extraction.lenient, extraction.query);

    // flip wrapper: beams are [flipped variant, correct query]
    let flip = FlipMock::new(EchoMock::default());
    let output = flip.generate(&GenerationRequest::new(prompt.clone(), 2))?;
    println!("\nflip-mock beams:");
    for (i, hypothesis) in output.hypotheses.iter().enumerate() {
        println!("  beam {}: {}", i + 1, extract_query(hypothesis)?.query);
    }

    // scripted transcripts replay fixed hypotheses per prompt
    let mut transcripts = HashMap::new();
    transcripts.insert(
        prompt.fingerprint.clone(),
        vec!["<SPARQL>ASK { wd:Q9001 wdt:P36 wd:Q9002 }</SPARQL>".to_string()],
    );
    let scripted = CachedClient::new(ScriptedMock::new(transcripts));
    let request = GenerationRequest::new(prompt, 1);
    scripted.generate(&request)?;
    scripted.generate(&request)?;
    println!(
        "\nscripted-mock calls after two identical requests: {} (second was a cache hit)",
        scripted.inner().calls()
    );

    // lenient extraction recovers untagged output; junk is an error
    let lenient = extract_query("sure thing: SELECT ?x WHERE { <a> <p> ?x }")?;
    println!("\nlenient extraction: lenient={} query={}", lenient.lenient, lenient.query);
    println!("no query at all: {:?}", extract_query("I have no idea.").err());
    Ok(())
}

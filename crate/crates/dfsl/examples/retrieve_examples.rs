//! Build the example storage, embed a question, and retrieve the most
//! similar solved examples by cosine similarity.
//!
//! ```text
//! cargo run -p dfsl --example retrieve_examples
//! ```

use std::path::Path;

use dfsl::bench::{load_dataset, DatasetFormat};
use dfsl::retrieval::{build_store, encode_input, EncodeMode, Example, ExampleStore, TrigramEmbedder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let outcome = load_dataset(&fixtures.join("toy_benchmark.jsonl"), DatasetFormat::GenericJsonl)?;
    let examples: Vec<Example> = outcome
        .records
        .into_iter()
        .map(|r| Example::new(r.question, r.gold_entities, r.gold_relations, r.gold_query))
        .collect();

    let question = "Which rivers can be found in Berlin?";
    let entities = vec![(
        "http://www.wikidata.org/entity/Q9004".to_string(),
        "Berlin".to_string(),
    )];
    let relations = vec![(
        "http://www.wikidata.org/prop/direct/P31".to_string(),
        "instance of the class".to_string(),
    )];

    println!("input sequence handed to the encoder:");
    println!("---\n{}\n---", encode_input(question, &entities, &relations, EncodeMode::Full));

    let embedder = TrigramEmbedder::default();
    let store = build_store(examples, &embedder, EncodeMode::Full)?;
    println!(
        "\nstorage: {} examples, d={}, encoder {}",
        store.len(),
        store.dimension(),
        store.encoder_id()
    );

    let query = store.query_vector(&embedder, question, &entities, &relations, EncodeMode::Full)?;
    println!("\ntop 3 by cosine similarity:");
    for (example, score) in store.top_k(&query, 3)? {
        println!("  {score:.4}  [{}] {}", example.source_index, example.question);
    }

    // the vector sidecar reloads without re-embedding
    let dir = std::env::temp_dir().join("dfsl_store_demo");
    std::fs::create_dir_all(&dir)?;
    let sidecar = dir.join("vectors.json");
    store.save_vectors(&sidecar)?;
    let reloaded = ExampleStore::load_with_vectors(store.examples().to_vec(), &sidecar)?;
    println!(
        "\nsidecar round-trip: {} vectors reloaded from {}",
        reloaded.len(),
        sidecar.display()
    );
    Ok(())
}

//! Canonicalize query text, deduplicate beam hypotheses, enumerate
//! subject-object flip variants, and detect flips against a gold query.
//!
//! ```text
//! cargo run -p dfsl --example normalize_and_flip
//! ```

use dfsl::eval::{detect_triple_flip, FlipDetection};
use dfsl::generate::dedupe_hypotheses;
use dfsl::sparql::{flip_triples, normalize, parse, PrefixMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let messy = "select  distinct ?Obj\nwhere { wd:Q340 wdt:P501 ?Obj . ?Obj wdt:P31 wd:Q171441 }";
    let ast = parse(messy)?;
    println!("raw:       {messy:?}");
    println!("canonical: {}", normalize(&ast));

    println!("\nflip variants (one per flippable pattern):");
    for variant in flip_triples(&ast) {
        println!("  {}", normalize(&variant));
    }

    let beams = vec![
        "select distinct ?obj where { wd:Q340 wdt:P501 ?obj . ?obj wdt:P31 wd:Q171441 }".to_string(),
        "SELECT DISTINCT ?x WHERE { wd:Q340 wdt:P501 ?x . ?x wdt:P31 wd:Q171441 }".to_string(),
        "select distinct ?sbj where { ?sbj wdt:P501 wd:Q340 . ?sbj wdt:P31 wd:Q171441 }".to_string(),
    ];
    let deduped = dedupe_hypotheses(&beams, &PrefixMap::default());
    println!("\n{} beams dedupe to {}:", beams.len(), deduped.len());
    for query in &deduped {
        println!("  {query}");
    }

    // the second survivor is the flipped orientation of the first
    let verdict = detect_triple_flip(&deduped[0], &deduped[1], &PrefixMap::default());
    println!(
        "\nflip detected between the two survivors: {}",
        verdict == FlipDetection::Flip
    );
    Ok(())
}

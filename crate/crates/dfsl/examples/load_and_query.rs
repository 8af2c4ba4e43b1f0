//! Load a triple file into the in-memory graph and run queries from the
//! supported SPARQL fragment against it.
//!
//! ```text
//! cargo run -p dfsl --example load_and_query
//! ```

use std::io::BufReader;
use std::path::Path;

use dfsl::kg::{load_graph, Term, TriplePattern};
use dfsl::sparql::{evaluate, parse};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let graph = load_graph(BufReader::new(std::fs::File::open(
        fixtures.join("toy_graph.nt"),
    )?))?;
    println!("loaded {} facts", graph.len());
    let (spo, pos, osp) = graph.index_cardinalities();
    println!("index cardinalities: SPO={spo} POS={pos} OSP={osp}");

    // raw pattern matching: which entities are rivers?
    let pattern = TriplePattern::new(
        Term::variable("river"),
        Term::iri("http://www.wikidata.org/prop/direct/P31"),
        Term::iri("http://www.wikidata.org/entity/Q9020"),
    )?;
    println!("\npattern {pattern}:");
    for binding in graph.match_pattern(&pattern) {
        let river = &binding["river"];
        println!("  {river} ({})", graph.label_of(river));
    }

    // the same question through the query engine, plus other forms
    let queries = [
        "SELECT DISTINCT ?x WHERE { ?x wdt:P31 wd:Q9020 . ?x wdt:P131 wd:Q9004 }",
        "ASK { wd:Q9001 wdt:P36 wd:Q9002 }",
        "SELECT (COUNT(?moon) AS ?n) WHERE { wd:Q9030 wdt:P398 ?moon }",
        "SELECT ?city WHERE { ?city wdt:P281 ?code FILTER(?code = 10115) }",
        "SELECT ?grandfather WHERE { wd:Q9070 wdt:P22/wdt:P22 ?grandfather }",
    ];
    for text in queries {
        let answer = evaluate(&parse(text)?, &graph)?;
        println!("\n{text}\n  => {answer}");
    }
    Ok(())
}

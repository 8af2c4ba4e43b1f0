//! Serve the toy graph over the SPARQL protocol on a local port, query
//! it with the endpoint client, and show that remote and hermetic
//! execution agree.
//!
//! ```text
//! cargo run -p dfsl --example stub_endpoint
//! ```

use std::path::Path;
use std::time::Duration;

use dfsl::endpoint::{EndpointClient, EndpointConfig, HttpMethod, StubEndpoint};
use dfsl::kg::load_graph;
use dfsl::sparql::{evaluate, parse, PrefixMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let graph = load_graph(std::io::BufReader::new(std::fs::File::open(
        fixtures.join("toy_graph.nt"),
    )?))?;
    let stub = StubEndpoint::serve(graph.clone(), PrefixMap::default())?;
    println!("stub endpoint listening at {}", stub.url());

    let mut config = EndpointConfig::new(stub.url());
    config.min_request_interval = Duration::from_millis(10);
    config.method = HttpMethod::Post;
    let client = EndpointClient::new(config)?;

    let queries = [
        "SELECT DISTINCT ?x WHERE { ?x wdt:P31 wd:Q9020 }",
        "ASK { wd:Q9003 wdt:P36 wd:Q9004 }",
        "SELECT (COUNT(?m) AS ?n) WHERE { wd:Q9030 wdt:P398 ?m }",
    ];
    for text in queries {
        let remote = client.execute(text)?;
        let hermetic = evaluate(&parse(text)?, &graph)?;
        println!("\n{text}");
        println!("  remote:   {remote}");
        println!("  hermetic: {hermetic}");
        assert_eq!(remote, hermetic);
    }
    println!("\nremote and hermetic execution agree on all queries");
    Ok(())
}

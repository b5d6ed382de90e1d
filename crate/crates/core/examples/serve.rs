//! Builds the demo store in a temporary directory and serves it over HTTP.
//!
//! ```text
//! cargo run --example serve -- 8080
//! curl -s localhost:8080/healthz
//! curl -s localhost:8080/v1/query -H 'content-type: application/json' \
//!      -d '{"text":"backup for windows","constraints":{"max_price":60}}'
//! curl -s localhost:8080/v1/products/B00UT00006
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use llmrs::app::config::{EngineConfig, Overrides};
use llmrs::app::server::serve_blocking;
use llmrs::catalog::ingest;
use llmrs::embed::{precompute, FallbackEmbedder};
use llmrs::sentiment::LexiconSentiment;
use llmrs::store::{BuildParams, IngestParams, Store, EMBEDDINGS};

fn main() -> llmrs::Result<()> {
    let port: u16 = std::env::args().nth(1).map_or(8080, |p| p.parse().expect("port"));
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let dir = std::env::temp_dir().join("llmrs-serve-demo");
    let open = |name: &str| File::open(data.join(name)).map(BufReader::new).expect("demo data");
    let params = IngestParams {
        metadata: "examples/data/meta.jsonl".into(),
        reviews: "examples/data/reviews.jsonl".into(),
    };
    let mut store = Store::create(&dir, ingest(open("meta.jsonl"), open("reviews.jsonl"))?, params)?;
    precompute(
        store.catalog(),
        &FallbackEmbedder::new(FallbackEmbedder::DEFAULT_DIM)?,
        &store.path(EMBEDDINGS),
        32,
    )?;
    let mut build = BuildParams::default();
    build.kmeans.k = 4;
    store.build(&LexiconSentiment, build)?;

    let cfg = EngineConfig::load(&dir, None, &Overrides::default())?;
    println!(
        "serving {} on port {port}; send SIGHUP to reload, Ctrl-C to stop",
        dir.display()
    );
    serve_blocking(cfg, port)
}

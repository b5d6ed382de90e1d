//! The whole pipeline on the demo data: ingest into a store, precompute
//! embeddings and sentiments, build clusters, then query with both rankers.
//!
//! ```text
//! cargo run --example end_to_end -- "HR software for employee records" 100
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use llmrs::app::report::{render_comparison, render_query};
use llmrs::catalog::ingest;
use llmrs::embed::{precompute, FallbackEmbedder};
use llmrs::rank::{Budget, QueryRequest};
use llmrs::sentiment::{
    write_sentiments, FileSentiment, LexiconSentiment, ReviewText, SentimentHeader, SentimentProvider,
};
use llmrs::store::{BuildParams, IngestParams, Store, EMBEDDINGS, SENTIMENTS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let text = args
        .next()
        .unwrap_or_else(|| "HR software for employee records on Windows".into());
    let max_price = args
        .next()
        .map(|s| s.parse::<f64>().expect("max price must be a number"));

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let dir = std::env::temp_dir().join(format!("llmrs-demo-{}", std::process::id()));
    let open = |name: &str| File::open(data.join(name)).map(BufReader::new).expect("demo data");
    let ingested = ingest(open("meta.jsonl"), open("reviews.jsonl"))?;
    let params = IngestParams {
        metadata: "examples/data/meta.jsonl".into(),
        reviews: "examples/data/reviews.jsonl".into(),
    };
    let mut store = Store::create(&dir, ingested, params)?;
    println!("store at {}: {:?}", dir.display(), store.manifest().counts);

    // Interchange files, as an external model service would produce them.
    let embedder = FallbackEmbedder::new(FallbackEmbedder::DEFAULT_DIM)?;
    precompute(store.catalog(), &embedder, &store.path(EMBEDDINGS), 32)?;
    let reviews = store.reviews().reviews();
    let texts: Vec<ReviewText<'_>> = reviews
        .iter()
        .map(|r| ReviewText {
            review_id: &r.review_id,
            text: &r.text,
        })
        .collect();
    let scores = LexiconSentiment.score_batch(&texts)?;
    let out = File::create(store.path(SENTIMENTS))?;
    write_sentiments(
        BufWriter::new(out),
        &SentimentHeader::new(LexiconSentiment::NAME, true),
        reviews.iter().map(|r| r.review_id.as_str()).zip(scores),
    )?;

    let mut build = BuildParams::default();
    build.kmeans.k = 4;
    let info = store.build(&FileSentiment::open(&store.path(SENTIMENTS))?, build)?;
    println!(
        "built: {} terms, {} clustered / {} unclustered reviews, SSE {:.4}\n",
        info.vocabulary_size, info.clustered_reviews, info.unclustered_reviews, info.final_sse
    );

    let engine = store.engine_from_file(&store.path(EMBEDDINGS))?;
    let mut request = QueryRequest::new(text.clone());
    request.budget = Budget {
        max_price,
        ..Default::default()
    };
    println!("query: {text} (max price {max_price:?})\n");
    println!("{}", render_query(&engine.query(&request, &embedder)?, true));
    println!("{}", render_comparison(&engine.compare(&request, &embedder)?, true));

    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

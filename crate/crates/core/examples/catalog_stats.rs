//! Ingests the demo metadata and reviews, then prints the ingest report and
//! descriptive statistics of prices and simulated costs.
//!
//! ```text
//! cargo run --example catalog_stats
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use llmrs::app::report::{format_money, render_stats};
use llmrs::catalog::{descriptive_stats, ingest};
use llmrs::sentiment::{aggregate, lexicon_score};

fn main() -> llmrs::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let open = |name: &str| File::open(data.join(name)).map(BufReader::new).expect("demo data");
    let ingested = ingest(open("meta.jsonl"), open("reviews.jsonl"))?;
    println!("{}", serde_json::to_string_pretty(&ingested.report)?);

    for p in ingested.catalog.products() {
        println!(
            "{:<11} {:>10} license {:>10} implementation {:>10} maintenance {:>8}",
            p.id,
            format_money(p.price, false),
            format_money(p.license_fee, false),
            format_money(p.implementation_cost, false),
            format_money(p.maintenance_cost, false),
        );
    }

    let mut aggregates = BTreeMap::new();
    for p in ingested.catalog.products() {
        if let Some(a) = aggregate(ingested.reviews.for_product(&p.id).map(|r| lexicon_score(&r.text))) {
            aggregates.insert(p.id.clone(), a);
        }
    }
    println!(
        "\n{}",
        render_stats(&descriptive_stats(&ingested.catalog, &aggregates)?)
    );
    Ok(())
}

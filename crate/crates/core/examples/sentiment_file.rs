//! Scores reviews with the lexicon provider, round-trips them through the
//! sentiment interchange format and aggregates per product.
//!
//! ```text
//! cargo run --example sentiment_file
//! ```

use std::collections::BTreeMap;
use std::io::BufReader;

use llmrs::rank::rank_score;
use llmrs::sentiment::{
    aggregate, read_sentiments, write_sentiments, LexiconSentiment, ReviewText, SentimentHeader, SentimentProvider,
};

const REVIEWS: &[(&str, &str)] = &[
    ("B00HR00001#0", "great program, works perfectly"),
    ("B00HR00001#1", "excellent, but a bit slow"),
    ("B00HR00001#2", "crashes constantly"),
    ("B00HR00002#0", "excellent"),
    ("B00PH00004#0", "arrived on time"),
];

fn main() -> llmrs::Result<()> {
    let provider = LexiconSentiment;
    let texts: Vec<ReviewText<'_>> = REVIEWS
        .iter()
        .map(|&(review_id, text)| ReviewText { review_id, text })
        .collect();
    let scores = provider.score_batch(&texts)?;

    let mut file = Vec::new();
    let header = SentimentHeader::new(provider.name(), provider.normalized());
    write_sentiments(
        &mut file,
        &header,
        REVIEWS.iter().map(|r| r.0).zip(scores.iter().copied()),
    )?;
    print!("{}", String::from_utf8_lossy(&file));

    let loaded = read_sentiments(BufReader::new(file.as_slice()), "memory")?;
    let mut by_product: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for (id, score) in &loaded.scores {
        let product = id.split('#').next().unwrap();
        by_product.entry(product).or_default().push(*score);
    }
    println!();
    for (product, scores) in by_product {
        let agg = aggregate(scores).unwrap();
        println!(
            "{product}: P = {:.2}, N = {:.2}, S = {}, R = {:.2}",
            agg.positive,
            agg.negative,
            agg.count,
            rank_score(&agg)
        );
    }
    Ok(())
}

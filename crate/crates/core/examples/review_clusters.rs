//! TF-IDF over review text, k-means, and per-cluster ratings derived from
//! the share of positive reviews in each cluster.
//!
//! ```text
//! cargo run --example review_clusters
//! ```

use llmrs::cluster::{cluster_stats, kmeans, label_review, KMeansParams};
use llmrs::sentiment::lexicon_score;
use llmrs::vectorize::{TfidfModel, TfidfOptions};

const REVIEWS: &[&str] = &[
    "great program, works perfectly",
    "excellent payroll reports, great support",
    "works perfectly on windows",
    "slow and buggy installer",
    "crashes constantly, buggy and slow",
    "poor documentation and confusing menus",
    "confusing menus, poor support",
    "photo filters are excellent",
    "love the photo layers",
    "arrived on time",
];

fn main() -> llmrs::Result<()> {
    let model = TfidfModel::fit(REVIEWS, TfidfOptions::default())?;
    println!("vocabulary: {} terms", model.vocabulary_size());
    let rows: Vec<_> = REVIEWS.iter().map(|r| model.transform(r)).collect();

    let params = KMeansParams {
        k: 3,
        ..Default::default()
    };
    let result = kmeans(&rows, model.vocabulary_size(), params)?;
    println!(
        "k-means: {} iterations, SSE history {:?}",
        result.iterations_run, result.sse_history
    );

    let labels: Vec<_> = REVIEWS.iter().map(|r| label_review(lexicon_score(r))).collect();
    let stats = cluster_stats(params.k, &result.assignments, &labels)?;
    for s in &stats {
        println!(
            "cluster {}: {} positive, {} negative, Y = {:.2}, rating {}",
            s.index, s.x_p, s.x_n, s.rate, s.rating
        );
        for (text, _) in REVIEWS.iter().zip(&result.assignments).filter(|(_, &a)| a == s.index) {
            println!("    {text}");
        }
    }
    Ok(())
}

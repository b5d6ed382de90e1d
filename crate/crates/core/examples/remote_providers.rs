//! Talks to a running model service. Endpoints come from the environment:
//!
//! ```text
//! LLMRS_EMBED_ENDPOINT=http://localhost:8000/embed \
//! LLMRS_SENTIMENT_ENDPOINT=http://localhost:8000/sentiment \
//!     cargo run --example remote_providers
//! ```
//!
//! Both endpoints take `{"texts": [...]}`; the embedder answers with
//! `{"vectors": [[...]]}` and the classifier with `{"scores": [{"pos", "neg"}]}`.

use llmrs::embed::{EmbedProvider, HttpEmbedder};
use llmrs::remote::RemoteClient;
use llmrs::sentiment::{HttpSentiment, ReviewText, SentimentProvider};

fn main() -> llmrs::Result<()> {
    let embed = std::env::var(HttpEmbedder::ENDPOINT_VAR).ok();
    let sentiment = std::env::var(HttpSentiment::ENDPOINT_VAR).ok();
    if embed.is_none() && sentiment.is_none() {
        eprintln!(
            "set {} and/or {} to a running model service",
            HttpEmbedder::ENDPOINT_VAR,
            HttpSentiment::ENDPOINT_VAR
        );
        return Ok(());
    }

    if let Some(endpoint) = embed {
        let dim = std::env::var("LLMRS_EMBED_DIM")
            .ok()
            .map_or(768, |d| d.parse().expect("LLMRS_EMBED_DIM"));
        let provider = HttpEmbedder::new(RemoteClient::new(endpoint)?, "remote", dim, 32);
        let v = provider.embed("HR software for employee records")?;
        println!("embedding: dim {}, norm {:.4}", v.dim(), v.norm());
    }

    if let Some(endpoint) = sentiment {
        let provider = HttpSentiment::new(RemoteClient::new(endpoint)?, "remote", 32);
        let reviews = [
            ReviewText {
                review_id: "demo#0",
                text: "Great program, it saved us hours.",
            },
            ReviewText {
                review_id: "demo#1",
                text: "Crashes every time I export.",
            },
        ];
        for (r, s) in reviews.iter().zip(provider.score_batch(&reviews)?) {
            println!("{:<40} pos {:.3} neg {:.3}", r.text, s.pos, s.neg);
        }
    }
    Ok(())
}

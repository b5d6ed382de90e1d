//! Exhaustive cosine top-k over hashed description embeddings.
//!
//! ```text
//! cargo run --example cosine_search -- "photo editor with layers"
//! ```

use llmrs::embed::{EmbedProvider, EmbeddingIndex, FallbackEmbedder};

const PRODUCTS: &[(&str, &str)] = &[
    (
        "B00HR00001",
        "HR program for managing employee records, leave and payroll on Windows",
    ),
    (
        "B00HR00002",
        "Employee records and personnel files for Windows, with org charts",
    ),
    ("B00AC00003", "Small business accounting, invoicing and payroll"),
    ("B00PH00004", "Photo editor with layers, filters and RAW import"),
    ("B00PH00005", "Organize and batch-resize photo libraries"),
    ("B00UT00006", "Automatic disk backup and restore for Windows PCs"),
];

fn main() -> llmrs::Result<()> {
    let query = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "employee payroll software".into());
    let embedder = FallbackEmbedder::new(128)?;

    let mut index = EmbeddingIndex::new(embedder.dim(), embedder.name());
    for (id, text) in PRODUCTS {
        index.insert(*id, embedder.embed(text)?)?;
    }

    println!("query: {query}");
    for n in index.top_k_similar(&embedder.embed(&query)?, 3)? {
        let text = PRODUCTS.iter().find(|(id, _)| *id == n.id).unwrap().1;
        println!("  {:.4}  {}  {}", n.similarity, n.id, text);
    }
    Ok(())
}

//! Review-aware product recommendation.
//!
//! A query passes through four stages:
//!
//! 1. [`rank::monetary_filter`] drops products outside the requested budget
//!    (price, license fee, implementation and maintenance cost).
//! 2. The query text is embedded and the cosine top-M of the remaining
//!    products is preselected ([`embed::EmbeddingIndex::top_k_filtered`]).
//! 3. Candidates are ordered by the rank score `(P − N) × S`, where `P` and
//!    `N` sum the positive and negative sentiment of a product's reviews and
//!    `S` counts them ([`rank::rank_score`]), or by mean star rating for the
//!    baseline ranker.
//! 4. The top-k survive.
//!
//! Offline, [`store::Store::build`] scores reviews, clusters their TF-IDF
//! rows with K-means ([`cluster::kmeans`]) and turns each cluster's share of
//! positive reviews into a consistent 1..k rating.
//!
//! Model inference sits behind [`embed::EmbedProvider`] and
//! [`sentiment::SentimentProvider`]: precomputed files, remote HTTP services,
//! or deterministic fallbacks that need no model at all.

pub mod app;
pub mod catalog;
pub mod cluster;
pub mod embed;
pub mod error;
pub mod rank;
pub mod remote;
pub mod sentiment;
pub mod store;
pub mod vectorize;

pub use error::{Error, Result};

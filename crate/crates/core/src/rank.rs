//! Rank scoring, the average-rating baseline and the end-to-end query
//! pipeline: budget filter, query embedding, cosine preselection, ranking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Product};
use crate::embed::{EmbedProvider, EmbeddingIndex};
use crate::error::{Error, Result};
use crate::sentiment::ProductSentimentAggregate;

/// `(P − N) × S`: the summed sentiment margin weighted by review count.
pub fn rank_score(agg: &ProductSentimentAggregate) -> f64 {
    (agg.positive - agg.negative) * agg.count as f64
}

/// Mean of the original star ratings, `None` without ratings.
pub fn baseline_avg_rating(ratings: impl IntoIterator<Item = u8>) -> Option<f64> {
    let (sum, n) = ratings
        .into_iter()
        .fold((0u64, 0u64), |(s, n), r| (s + r as u64, n + 1));
    (n > 0).then(|| sum as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_license_fee: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_implementation_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_maintenance_cost: Option<f64>,
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        let bounds = [
            ("max_price", self.max_price),
            ("max_license_fee", self.max_license_fee),
            ("max_implementation_cost", self.max_implementation_cost),
            ("max_maintenance_cost", self.max_maintenance_cost),
        ];
        for (name, b) in bounds {
            if let Some(v) = b {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!(
                        "{name} must be a non-negative number, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every present bound holds inclusively.
    pub fn admits(&self, p: &Product) -> bool {
        let within = |bound: Option<f64>, value: f64| bound.is_none_or(|b| value <= b);
        within(self.max_price, p.price)
            && within(self.max_license_fee, p.license_fee)
            && within(self.max_implementation_cost, p.implementation_cost)
            && within(self.max_maintenance_cost, p.maintenance_cost)
    }
}

pub fn monetary_filter<'a>(catalog: &'a Catalog, budget: &Budget) -> Vec<&'a Product> {
    catalog.products().iter().filter(|p| budget.admits(p)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Ranker {
    #[default]
    Llmrs,
    Baseline,
}

impl std::fmt::Display for Ranker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ranker::Llmrs => "llmrs",
            Ranker::Baseline => "baseline",
        })
    }
}

pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_PRESELECT_M: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub text: String,
    #[serde(default)]
    pub budget: Budget,
    pub top_k: usize,
    pub preselect_m: usize,
    pub ranker: Ranker,
}

impl QueryRequest {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            budget: Budget::default(),
            top_k: DEFAULT_TOP_K,
            preselect_m: DEFAULT_PRESELECT_M,
            ranker: Ranker::Llmrs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Validation("query text must not be empty".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Validation("top_k must be at least 1".into()));
        }
        if self.preselect_m == 0 {
            return Err(Error::Validation("preselect_m must be at least 1".into()));
        }
        self.budget.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub product_id: String,
    pub description: String,
    pub price: f64,
    pub license_fee: f64,
    pub implementation_cost: f64,
    pub maintenance_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_rating: Option<f64>,
    pub similarity: f64,
    /// Review-cluster derived rating; informational, never used for ordering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistent_rating: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    Ok,
    NoProductsWithinBudget,
}

impl QueryStatus {
    pub fn message(&self) -> &'static str {
        match self {
            QueryStatus::Ok => "ok",
            QueryStatus::NoProductsWithinBudget => "no products within budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub status: QueryStatus,
    pub ranker: Ranker,
    /// Products passing the budget filter.
    pub within_budget: usize,
    /// Preselected products.
    pub preselected: usize,
    /// Preselected products dropped for lacking a ranking signal.
    pub excluded_unranked: usize,
    pub results: Vec<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub llmrs: QueryResponse,
    pub baseline: QueryResponse,
    /// Ids recommended by exactly one of the two rankers, sorted.
    pub difference: Vec<String>,
}

/// Per-product ranking inputs derived from the review store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProductSignals {
    pub aggregate: Option<ProductSentimentAggregate>,
    pub avg_rating: Option<f64>,
    pub consistent_rating: Option<u8>,
}

/// Immutable query-time state.
#[derive(Debug, Clone)]
pub struct Engine {
    catalog: Catalog,
    index: EmbeddingIndex,
    signals: BTreeMap<String, ProductSignals>,
}

struct Ranked<'a> {
    product: &'a Product,
    key: f64,
    similarity: f64,
    signals: ProductSignals,
}

impl Engine {
    pub fn new(catalog: Catalog, index: EmbeddingIndex, signals: BTreeMap<String, ProductSignals>) -> Self {
        Self {
            catalog,
            index,
            signals,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn index(&self) -> &EmbeddingIndex {
        &self.index
    }

    pub fn signals(&self, product_id: &str) -> Option<&ProductSignals> {
        self.signals.get(product_id)
    }

    pub fn aggregates(&self) -> BTreeMap<String, ProductSentimentAggregate> {
        self.signals
            .iter()
            .filter_map(|(id, s)| s.aggregate.map(|a| (id.clone(), a)))
            .collect()
    }

    fn check_provider(&self, provider: &dyn EmbedProvider) -> Result<()> {
        if provider.name() != self.index.provider() || provider.dim() != self.index.dim() {
            return Err(Error::ProviderConfig(format!(
                "query provider {} (dim {}) does not match index provider {} (dim {})",
                provider.name(),
                provider.dim(),
                self.index.provider(),
                self.index.dim()
            )));
        }
        Ok(())
    }

    /// Budget-filtered cosine top-`preselect_m` candidates.
    fn preselect(&self, request: &QueryRequest, provider: &dyn EmbedProvider) -> Result<(usize, Vec<(&Product, f64)>)> {
        request.validate()?;
        self.check_provider(provider)?;
        let admitted: BTreeSet<&str> = monetary_filter(&self.catalog, &request.budget)
            .into_iter()
            .map(|p| p.id.as_str())
            .collect();
        if admitted.is_empty() {
            return Ok((0, Vec::new()));
        }
        let query = provider.embed(&request.text)?;
        let neighbors = self
            .index
            .top_k_filtered(&query, request.preselect_m, |id| admitted.contains(id))?;
        let candidates = neighbors
            .into_iter()
            .filter_map(|n| self.catalog.get(&n.id).map(|p| (p, n.similarity)))
            .collect();
        Ok((admitted.len(), candidates))
    }

    fn rank(
        &self,
        ranker: Ranker,
        within_budget: usize,
        candidates: &[(&Product, f64)],
        top_k: usize,
    ) -> QueryResponse {
        let preselected = candidates.len();
        let mut ranked: Vec<Ranked<'_>> = candidates
            .iter()
            .filter_map(|&(product, similarity)| {
                let signals = self.signals.get(&product.id).copied().unwrap_or_default();
                let key = match ranker {
                    Ranker::Llmrs => signals.aggregate.as_ref().map(rank_score),
                    Ranker::Baseline => signals.avg_rating,
                }?;
                Some(Ranked {
                    product,
                    key,
                    similarity,
                    signals,
                })
            })
            .collect();
        let excluded_unranked = preselected - ranked.len();
        ranked.sort_by(|a, b| {
            compare_ranked(
                (a.key, a.similarity, &a.product.id),
                (b.key, b.similarity, &b.product.id),
            )
        });
        ranked.truncate(top_k);

        let results = ranked
            .into_iter()
            .map(|r| Recommendation {
                product_id: r.product.id.clone(),
                description: r.product.description.clone(),
                price: r.product.price,
                license_fee: r.product.license_fee,
                implementation_cost: r.product.implementation_cost,
                maintenance_cost: r.product.maintenance_cost,
                rank_score: (ranker == Ranker::Llmrs).then_some(r.key),
                avg_rating: (ranker == Ranker::Baseline).then_some(r.key),
                similarity: r.similarity,
                consistent_rating: r.signals.consistent_rating,
            })
            .collect();
        QueryResponse {
            status: if within_budget == 0 {
                QueryStatus::NoProductsWithinBudget
            } else {
                QueryStatus::Ok
            },
            ranker,
            within_budget,
            preselected,
            excluded_unranked,
            results,
        }
    }

    pub fn query(&self, request: &QueryRequest, provider: &dyn EmbedProvider) -> Result<QueryResponse> {
        let (within_budget, candidates) = self.preselect(request, provider)?;
        Ok(self.rank(request.ranker, within_budget, &candidates, request.top_k))
    }

    /// Runs both rankers over one shared candidate set.
    pub fn compare(&self, request: &QueryRequest, provider: &dyn EmbedProvider) -> Result<Comparison> {
        let (within_budget, candidates) = self.preselect(request, provider)?;
        let llmrs = self.rank(Ranker::Llmrs, within_budget, &candidates, request.top_k);
        let baseline = self.rank(Ranker::Baseline, within_budget, &candidates, request.top_k);
        let ids = |r: &QueryResponse| -> BTreeSet<String> { r.results.iter().map(|x| x.product_id.clone()).collect() };
        let difference = ids(&llmrs).symmetric_difference(&ids(&baseline)).cloned().collect();
        Ok(Comparison {
            llmrs,
            baseline,
            difference,
        })
    }
}

/// Orders `(key, similarity, id)` triples: key descending, then similarity
/// descending, then id ascending.
pub fn compare_ranked(a: (f64, f64, &str), b: (f64, f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| b.1.total_cmp(&a.1))
        .then_with(|| a.2.cmp(b.2))
}

//! Product metadata and review ingestion, cost simulation and descriptive
//! statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sentiment::{ProductSentimentAggregate, SentimentScore};

/// Share of the category minimum price charged as a license fee.
pub const LICENSE_FEE_RATE: f64 = 0.8;
/// Share of the product price charged once for implementation.
pub const IMPLEMENTATION_RATE: f64 = 0.5;
/// Share of the product price charged monthly for maintenance.
pub const MAINTENANCE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub description: String,
    pub category: String,
    pub price: f64,
    pub license_fee: f64,
    pub implementation_cost: f64,
    pub maintenance_cost: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub brand: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub product_id: String,
    pub text: String,
    pub summary: String,
    pub rating: u8,
    pub verified: bool,
    /// Filled in by the build step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<SentimentScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_rating: Option<u8>,
}

/// Strips a leading currency symbol and thousands separators. Returns `None`
/// for empty, negative or otherwise unparseable input.
pub fn parse_price(raw: &str) -> Option<f64> {
    let s = raw.trim();
    let s = s.strip_prefix('$').unwrap_or(s).trim();
    if s.is_empty() {
        return None;
    }
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    if !cleaned.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|p| p.is_finite() && *p >= 0.0)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    products: Vec<Product>,
    positions: HashMap<String, usize>,
}

impl Catalog {
    pub fn from_products(products: impl IntoIterator<Item = Product>) -> Result<Self> {
        let mut c = Self::default();
        for p in products {
            if c.positions.contains_key(&p.id) {
                return Err(Error::Validation(format!("duplicate product id {}", p.id)));
            }
            c.positions.insert(p.id.clone(), c.products.len());
            c.products.push(p);
        }
        Ok(c)
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn get(&self, id: &str) -> Option<&Product> {
        self.positions.get(id).map(|&i| &self.products[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    /// Fills the three simulated cost fields from price and the per-category
    /// minimum price over this catalog.
    pub fn simulate_costs(&mut self) {
        let mut min_by_category: HashMap<&str, f64> = HashMap::new();
        for p in &self.products {
            min_by_category
                .entry(p.category.as_str())
                .and_modify(|m| *m = m.min(p.price))
                .or_insert(p.price);
        }
        let minima: Vec<f64> = self
            .products
            .iter()
            .map(|p| min_by_category[p.category.as_str()])
            .collect();
        for (p, min) in self.products.iter_mut().zip(minima) {
            p.license_fee = LICENSE_FEE_RATE * min;
            p.implementation_cost = IMPLEMENTATION_RATE * p.price;
            p.maintenance_cost = MAINTENANCE_RATE * p.price;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReviewStore {
    reviews: Vec<Review>,
    by_product: HashMap<String, Vec<usize>>,
}

impl ReviewStore {
    pub fn from_reviews(reviews: Vec<Review>) -> Self {
        let mut by_product: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in reviews.iter().enumerate() {
            by_product.entry(r.product_id.clone()).or_default().push(i);
        }
        Self { reviews, by_product }
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn reviews_mut(&mut self) -> &mut [Review] {
        &mut self.reviews
    }

    pub fn for_product<'a>(&'a self, product_id: &str) -> impl Iterator<Item = &'a Review> + 'a {
        self.by_product
            .get(product_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.reviews[i])
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }
}

/// Record counts from one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub metadata_records: u64,
    pub malformed_metadata: u64,
    pub duplicate_products: u64,
    pub products_without_price: u64,
    pub products: u64,
    pub review_records: u64,
    pub malformed_reviews: u64,
    pub dropped_reviews: u64,
    pub linked_reviews: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub catalog: Catalog,
    pub reviews: ReviewStore,
    pub report: IngestReport,
}

fn text_field(v: Option<&Value>, leaf: bool) -> String {
    match v {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Array(items)) => {
            let parts: Vec<&str> = items
                .iter()
                .filter_map(Value::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            if leaf {
                parts.last().map(|s| s.to_string()).unwrap_or_default()
            } else {
                parts.join(" ")
            }
        }
        _ => String::new(),
    }
}

fn price_field(v: Option<&Value>) -> Option<f64> {
    match v {
        Some(Value::String(s)) => parse_price(s),
        Some(Value::Number(n)) => n.as_f64().filter(|p| p.is_finite() && *p >= 0.0),
        _ => None,
    }
}

fn rating_field(v: Option<&Value>) -> Option<u8> {
    let r = v?.as_f64()?;
    (r.fract() == 0.0 && (1.0..=5.0).contains(&r)).then_some(r as u8)
}

enum MetaRecord {
    Product(Product),
    NoPrice(String),
}

fn parse_metadata(line: &str) -> Option<MetaRecord> {
    let v: Value = serde_json::from_str(line).ok()?;
    let obj = v.as_object()?;
    let id = obj.get("asin")?.as_str()?.trim();
    if id.is_empty() {
        return None;
    }
    let Some(price) = price_field(obj.get("price")) else {
        return Some(MetaRecord::NoPrice(id.to_string()));
    };
    Some(MetaRecord::Product(Product {
        id: id.to_string(),
        description: text_field(obj.get("description"), false),
        category: text_field(obj.get("category"), true),
        price,
        license_fee: 0.0,
        implementation_cost: 0.0,
        maintenance_cost: 0.0,
        title: text_field(obj.get("title"), false),
        brand: text_field(obj.get("brand"), false),
    }))
}

fn for_each_line(reader: impl BufRead, source: &str, mut f: impl FnMut(&str)) -> Result<()> {
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if !line.trim().is_empty() {
            f(&line);
        }
    }
    Ok(())
}

/// Reads product metadata and reviews (JSON Lines).
///
/// The first metadata record of an id wins; records without a usable price
/// claim their id but are left out of the catalog. Every review with a string
/// `asin` takes the next per-product ordinal, giving ids `"<asin>#<n>"`
/// (0-based), whether or not it is kept afterwards. Reviews for products not
/// in the catalog are dropped; unparseable records are counted as malformed.
pub fn ingest(metadata: impl BufRead, reviews: impl BufRead) -> Result<Ingested> {
    let mut report = IngestReport::default();
    let mut products = Vec::new();
    let mut claimed: HashSet<String> = HashSet::new();

    for_each_line(metadata, "metadata", |line| {
        report.metadata_records += 1;
        match parse_metadata(line) {
            None => report.malformed_metadata += 1,
            Some(MetaRecord::NoPrice(id)) => {
                if claimed.insert(id) {
                    report.products_without_price += 1;
                } else {
                    report.duplicate_products += 1;
                }
            }
            Some(MetaRecord::Product(p)) => {
                if claimed.insert(p.id.clone()) {
                    products.push(p);
                } else {
                    report.duplicate_products += 1;
                }
            }
        }
    })?;

    let mut catalog = Catalog::from_products(products)?;
    catalog.simulate_costs();
    report.products = catalog.len() as u64;

    let mut ordinals: HashMap<String, u64> = HashMap::new();
    let mut linked = Vec::new();
    for_each_line(reviews, "reviews", |line| {
        report.review_records += 1;
        let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(line) else {
            report.malformed_reviews += 1;
            return;
        };
        let Some(asin) = obj.get("asin").and_then(Value::as_str) else {
            report.malformed_reviews += 1;
            return;
        };
        let ordinal = ordinals.entry(asin.to_string()).or_insert(0);
        let review_id = format!("{asin}#{ordinal}");
        *ordinal += 1;

        let Some(rating) = rating_field(obj.get("overall")) else {
            report.malformed_reviews += 1;
            return;
        };
        if !catalog.contains(asin) {
            report.dropped_reviews += 1;
            return;
        }
        linked.push(Review {
            review_id,
            product_id: asin.to_string(),
            text: text_field(obj.get("reviewText"), false),
            summary: text_field(obj.get("summary"), false),
            rating,
            verified: obj.get("verified").and_then(Value::as_bool).unwrap_or(false),
            sentiment: None,
            cluster: None,
            cluster_rating: None,
        });
    })?;
    report.linked_reviews = linked.len() as u64;

    Ok(Ingested {
        catalog,
        reviews: ReviewStore::from_reviews(linked),
        report,
    })
}

/// Summary of one numeric column. `std` uses the n−1 denominator (0 for a
/// single value); quartiles interpolate linearly between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl ColumnStats {
    pub fn compute(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("statistics of an empty column".into()));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            count: n,
            mean,
            std,
            min: sorted[0],
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            max: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogStats {
    pub price: ColumnStats,
    pub license_fee: ColumnStats,
    pub implementation_cost: ColumnStats,
    pub maintenance_cost: ColumnStats,
    pub positive_score: ColumnStats,
    pub negative_score: ColumnStats,
    pub num_reviews: ColumnStats,
}

impl CatalogStats {
    /// Column label and statistics, in display order.
    pub fn columns(&self) -> [(&'static str, &ColumnStats); 7] {
        [
            ("Price", &self.price),
            ("License fee", &self.license_fee),
            ("Implementation cost", &self.implementation_cost),
            ("Maintenance cost", &self.maintenance_cost),
            ("Positive score", &self.positive_score),
            ("Negative score", &self.negative_score),
            ("Number of reviews", &self.num_reviews),
        ]
    }
}

/// Per-product statistics over the whole catalog. Products without an
/// aggregate contribute zero sentiment and zero reviews.
pub fn descriptive_stats(
    catalog: &Catalog,
    aggregates: &BTreeMap<String, ProductSentimentAggregate>,
) -> Result<CatalogStats> {
    if catalog.is_empty() {
        return Err(Error::Validation("statistics of an empty catalog".into()));
    }
    let col = |f: &dyn Fn(&Product) -> f64| -> Result<ColumnStats> {
        let values: Vec<f64> = catalog.products().iter().map(f).collect();
        ColumnStats::compute(&values)
    };
    let agg = |p: &Product| aggregates.get(&p.id).copied();
    Ok(CatalogStats {
        price: col(&|p| p.price)?,
        license_fee: col(&|p| p.license_fee)?,
        implementation_cost: col(&|p| p.implementation_cost)?,
        maintenance_cost: col(&|p| p.maintenance_cost)?,
        positive_score: col(&|p| agg(p).map_or(0.0, |a| a.positive))?,
        negative_score: col(&|p| agg(p).map_or(0.0, |a| a.negative))?,
        num_reviews: col(&|p| agg(p).map_or(0.0, |a| a.count as f64))?,
    })
}

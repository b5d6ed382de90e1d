//! On-disk store: normalized products and reviews plus the artifacts written
//! by the build step.
//!
//! ```text
//! <store>/
//!   manifest.json     counts and parameters of ingest and build
//!   products.jsonl    one Product per line
//!   reviews.jsonl     one Review per line, derived fields filled after build
//!   tfidf.json        fitted vocabulary and idf (after build)
//!   clusters.json     per-cluster rates/ratings and assignments (after build)
//!   embeddings.jsonl  default location of the product embedding index
//!   sentiments.jsonl  default location of precomputed review sentiments
//! ```
//!
//! Every file is written to a `.partial` sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, IngestReport, Ingested, Review, ReviewStore};
use crate::cluster::{self, ClusterModel, KMeansParams, Label};
use crate::embed::{load_embedding_file, tmp_sibling, EmbeddingIndex};
use crate::error::{Error, Result};
use crate::rank::{baseline_avg_rating, Engine, ProductSignals};
use crate::sentiment::{aggregate, ReviewText, SentimentProvider};
use crate::vectorize::{TfidfModel, TfidfOptions};

pub const MANIFEST: &str = "manifest.json";
pub const PRODUCTS: &str = "products.jsonl";
pub const REVIEWS: &str = "reviews.jsonl";
pub const TFIDF: &str = "tfidf.json";
pub const CLUSTERS: &str = "clusters.json";
pub const EMBEDDINGS: &str = "embeddings.jsonl";
pub const SENTIMENTS: &str = "sentiments.jsonl";

pub const STORE_FORMAT: &str = "llmrs-store";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestParams {
    pub metadata: String,
    pub reviews: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub min_df: usize,
    pub max_features: Option<usize>,
    pub sentiment_provider: String,
    pub sentiment_normalized: bool,
    pub vocabulary_size: usize,
    pub clustered_reviews: usize,
    pub unclustered_reviews: usize,
    pub iterations_run: usize,
    pub final_sse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub ingest_params: IngestParams,
    pub counts: IngestReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build: Option<BuildInfo>,
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
    manifest: Manifest,
    catalog: Catalog,
    reviews: ReviewStore,
}

fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = tmp_sibling(path);
    let result = (|| {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut out = BufWriter::new(file);
        f(&mut out)?;
        out.flush().map_err(|e| Error::io(&tmp, e))
    })();
    match result {
        Ok(()) => std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e)),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, |out| {
        for r in rows {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::format(&name, i + 1, e.to_string()))?);
    }
    Ok(rows)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&raw).map_err(|e| Error::format(path.display().to_string(), e.line(), e.to_string()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BuildParams {
    pub kmeans: KMeansParams,
    pub tfidf: TfidfOptions,
}

impl Store {
    /// Writes a freshly ingested catalog to `dir`, creating it if needed.
    pub fn create(dir: &Path, ingested: Ingested, params: IngestParams) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let store = Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                format: STORE_FORMAT.into(),
                version: STORE_VERSION,
                ingest_params: params,
                counts: ingested.report,
                build: None,
            },
            catalog: ingested.catalog,
            reviews: ingested.reviews,
        };
        write_jsonl(&dir.join(PRODUCTS), store.catalog.products())?;
        write_jsonl(&dir.join(REVIEWS), store.reviews.reviews())?;
        for stale in [TFIDF, CLUSTERS] {
            let _ = std::fs::remove_file(dir.join(stale));
        }
        write_json(&dir.join(MANIFEST), &store.manifest)?;
        Ok(store)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.is_file() {
            return Err(Error::StoreMissing(dir.to_path_buf()));
        }
        let manifest: Manifest = read_json(&manifest_path)?;
        if manifest.format != STORE_FORMAT || manifest.version != STORE_VERSION {
            return Err(Error::Validation(format!(
                "{}: unsupported store format {} v{}",
                manifest_path.display(),
                manifest.format,
                manifest.version
            )));
        }
        let catalog = Catalog::from_products(read_jsonl(&dir.join(PRODUCTS))?)?;
        let reviews: Vec<Review> = read_jsonl(&dir.join(REVIEWS))?;
        if let Some(r) = reviews.iter().find(|r| !catalog.contains(&r.product_id)) {
            return Err(Error::Validation(format!(
                "review {} refers to unknown product {}",
                r.review_id, r.product_id
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            catalog,
            reviews: ReviewStore::from_reviews(reviews),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn reviews(&self) -> &ReviewStore {
        &self.reviews
    }

    pub fn is_built(&self) -> bool {
        self.manifest.build.is_some()
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn load_clusters(&self) -> Result<ClusterModel> {
        let model: ClusterModel = read_json(&self.path(CLUSTERS))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load_tfidf(&self) -> Result<TfidfModel> {
        TfidfModel::load(&self.path(TFIDF))
    }

    /// Sentiment aggregate, mean star rating and consistent rating per product.
    pub fn signals(&self) -> BTreeMap<String, ProductSignals> {
        self.catalog
            .products()
            .iter()
            .map(|p| {
                let reviews: Vec<&Review> = self.reviews.for_product(&p.id).collect();
                let cluster_ratings: Vec<u8> = reviews.iter().filter_map(|r| r.cluster_rating).collect();
                let signals = ProductSignals {
                    aggregate: aggregate(reviews.iter().filter_map(|r| r.sentiment)),
                    avg_rating: baseline_avg_rating(reviews.iter().map(|r| r.rating)),
                    consistent_rating: cluster::consistent_rating(&cluster_ratings),
                };
                (p.id.clone(), signals)
            })
            .collect()
    }

    /// Query engine over this store and an embedding index.
    pub fn engine(&self, index: EmbeddingIndex) -> Result<Engine> {
        if !self.is_built() {
            return Err(Error::Validation(format!(
                "store {} has not been built; run `llmrs build` first",
                self.dir.display()
            )));
        }
        let missing = self
            .catalog
            .products()
            .iter()
            .filter(|p| index.get(&p.id).is_none())
            .count();
        if missing > 0 {
            return Err(Error::Validation(format!(
                "{missing} catalog product(s) have no embedding in the index"
            )));
        }
        Ok(Engine::new(self.catalog.clone(), index, self.signals()))
    }

    pub fn engine_from_file(&self, embeddings: &Path) -> Result<Engine> {
        self.engine(load_embedding_file(embeddings)?)
    }

    /// Scores every review, fits TF-IDF, clusters the non-empty rows, derives
    /// cluster ratings and rewrites the store's derived artifacts.
    pub fn build(&mut self, provider: &dyn SentimentProvider, params: BuildParams) -> Result<BuildInfo> {
        if self.reviews.is_empty() {
            return Err(Error::Validation("store has no linked reviews to build from".into()));
        }

        let texts: Vec<ReviewText<'_>> = self
            .reviews
            .reviews()
            .iter()
            .map(|r| ReviewText {
                review_id: &r.review_id,
                text: &r.text,
            })
            .collect();
        let scores = provider.score_batch(&texts)?;
        if scores.len() != texts.len() {
            return Err(Error::Provider(format!(
                "{} returned {} scores for {} reviews",
                provider.name(),
                scores.len(),
                texts.len()
            )));
        }
        for (r, s) in texts.iter().zip(&scores) {
            s.validate()
                .map_err(|e| Error::Provider(format!("review {}: {e}", r.review_id)))?;
            if provider.normalized() && !s.is_normalized() {
                return Err(Error::Provider(format!(
                    "review {}: provider declares normalized output but pos + neg = {}",
                    r.review_id,
                    s.pos + s.neg
                )));
            }
        }

        let tfidf = TfidfModel::fit(
            &self
                .reviews
                .reviews()
                .iter()
                .map(|r| r.text.as_str())
                .collect::<Vec<_>>(),
            params.tfidf,
        )?;
        let rows: Vec<_> = self
            .reviews
            .reviews()
            .par_iter()
            .map(|r| tfidf.transform(&r.text))
            .collect();
        let clustered: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].is_empty()).collect();
        let points: Vec<_> = clustered.iter().map(|&i| rows[i].clone()).collect();
        let km = cluster::kmeans(&points, tfidf.vocabulary_size(), params.kmeans)?;
        let labels: Vec<Label> = clustered.iter().map(|&i| cluster::label_review(scores[i])).collect();
        let per_cluster = cluster::cluster_stats(km.k, &km.assignments, &labels)?;
        let fallback_rating = cluster::median_rating(km.k);

        let mut assignment_of = vec![None; rows.len()];
        for (&i, &c) in clustered.iter().zip(&km.assignments) {
            assignment_of[i] = Some(c);
        }
        let mut assignments = BTreeMap::new();
        for ((r, s), c) in self.reviews.reviews_mut().iter_mut().zip(&scores).zip(&assignment_of) {
            r.sentiment = Some(*s);
            r.cluster = *c;
            r.cluster_rating = Some(c.map_or(fallback_rating, |c| per_cluster[c].rating));
            if let Some(c) = c {
                assignments.insert(r.review_id.clone(), *c);
            }
        }

        let model = ClusterModel {
            k: km.k,
            seed: km.seed,
            iterations_run: km.iterations_run,
            final_sse: km.final_sse,
            per_cluster,
            assignments,
        };
        let info = BuildInfo {
            k: km.k,
            seed: km.seed,
            max_iters: params.kmeans.max_iters,
            tol: params.kmeans.tol,
            min_df: params.tfidf.min_df,
            max_features: params.tfidf.max_features,
            sentiment_provider: provider.name().to_string(),
            sentiment_normalized: provider.normalized(),
            vocabulary_size: tfidf.vocabulary_size(),
            clustered_reviews: clustered.len(),
            unclustered_reviews: rows.len() - clustered.len(),
            iterations_run: km.iterations_run,
            final_sse: km.final_sse,
        };

        write_jsonl(&self.path(REVIEWS), self.reviews.reviews())?;
        tfidf.save(&self.path(TFIDF))?;
        write_json(&self.path(CLUSTERS), &model)?;
        self.manifest.build = Some(info.clone());
        write_json(&self.path(MANIFEST), &self.manifest)?;
        Ok(info)
    }
}

//! Engine configuration.
//!
//! Values resolve in this order: command-line flags, then the environment
//! (`LLMRS_EMBED_ENDPOINT`, `LLMRS_SENTIMENT_ENDPOINT`, `LLMRS_SEED`), then a
//! flat `key = value` config file, then built-in defaults. The config file is
//! TOML restricted to top-level keys:
//!
//! ```toml
//! embed_provider = "fallback"      # file | http | fallback
//! embed_path = "embeddings.jsonl"  # index file, relative to the store
//! embed_endpoint = "http://localhost:8080/embed"
//! embed_model = "all-mpnet-base-v2"
//! embed_dim = 768
//! sentiment_provider = "file"      # file | http | fallback
//! sentiment_path = "sentiments.jsonl"
//! sentiment_endpoint = "http://localhost:8080/sentiment"
//! sentiment_model = "bart-large-mnli"
//! sentiment_normalized = true
//! batch_size = 32
//! seed = 42
//! k_clusters = 5
//! max_iters = 100
//! tol = 1e-4
//! min_df = 1
//! max_features = 50000
//! preselect_m = 50
//! display_x100 = true
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::embed::{EmbedProvider, EmbeddingIndex, FallbackEmbedder, HttpEmbedder};
use crate::error::{Error, Result};
use crate::rank::DEFAULT_PRESELECT_M;
use crate::remote::RemoteClient;
use crate::sentiment::{FileSentiment, HttpSentiment, LexiconSentiment, SentimentProvider};
use crate::store::{EMBEDDINGS, SENTIMENTS};

pub const CONFIG_FILE_NAME: &str = "llmrs.toml";
pub const ENV_EMBED_ENDPOINT: &str = "LLMRS_EMBED_ENDPOINT";
pub const ENV_SENTIMENT_ENDPOINT: &str = "LLMRS_SENTIMENT_ENDPOINT";
pub const ENV_SEED: &str = "LLMRS_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    File,
    Http,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSettings {
    pub kind: ProviderKind,
    pub path: PathBuf,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub dim: Option<usize>,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentSettings {
    pub kind: ProviderKind,
    pub path: PathBuf,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub normalized: bool,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub store_dir: PathBuf,
    pub embed: EmbedSettings,
    pub sentiment: SentimentSettings,
    pub seed: u64,
    pub k_clusters: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub min_df: usize,
    pub max_features: Option<usize>,
    pub preselect_m: usize,
    pub display_x100: bool,
}

/// Keys accepted in the config file; all optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub embed_provider: Option<ProviderKind>,
    pub embed_path: Option<PathBuf>,
    pub embed_endpoint: Option<String>,
    pub embed_model: Option<String>,
    pub embed_dim: Option<usize>,
    pub sentiment_provider: Option<ProviderKind>,
    pub sentiment_path: Option<PathBuf>,
    pub sentiment_endpoint: Option<String>,
    pub sentiment_model: Option<String>,
    pub sentiment_normalized: Option<bool>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub k_clusters: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub min_df: Option<usize>,
    pub max_features: Option<usize>,
    pub preselect_m: Option<usize>,
    pub display_x100: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("{source}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Values supplied on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k_clusters: Option<usize>,
    pub preselect_m: Option<usize>,
    pub embed_dim: Option<usize>,
    pub display_x100: Option<bool>,
}

impl EngineConfig {
    /// Resolves a configuration for `store_dir`. `config_path` defaults to
    /// `<store>/llmrs.toml` when that file exists.
    pub fn load(store_dir: &Path, config_path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let file = match config_path {
            Some(p) => ConfigFile::load(p)?,
            None => {
                let default = store_dir.join(CONFIG_FILE_NAME);
                if default.is_file() {
                    ConfigFile::load(&default)?
                } else {
                    ConfigFile::default()
                }
            }
        };
        Self::resolve(store_dir, file, &|k| std::env::var(k).ok(), overrides)
    }

    pub fn resolve(
        store_dir: &Path,
        file: ConfigFile,
        env: &dyn Fn(&str) -> Option<String>,
        overrides: &Overrides,
    ) -> Result<Self> {
        let env_seed = match env(ENV_SEED) {
            Some(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Validation(format!("{ENV_SEED}={s:?} is not an unsigned integer")))?,
            ),
            None => None,
        };
        let in_store = |p: Option<PathBuf>, default: &str| match p {
            Some(p) if p.is_absolute() => p,
            Some(p) => store_dir.join(p),
            None => store_dir.join(default),
        };
        let batch_size = file.batch_size.unwrap_or(32);
        let cfg = Self {
            store_dir: store_dir.to_path_buf(),
            embed: EmbedSettings {
                kind: file.embed_provider.unwrap_or(ProviderKind::Fallback),
                path: in_store(file.embed_path, EMBEDDINGS),
                endpoint: env(ENV_EMBED_ENDPOINT).or(file.embed_endpoint),
                model: file.embed_model,
                dim: overrides.embed_dim.or(file.embed_dim),
                batch_size,
            },
            sentiment: SentimentSettings {
                kind: file.sentiment_provider.unwrap_or(ProviderKind::File),
                path: in_store(file.sentiment_path, SENTIMENTS),
                endpoint: env(ENV_SENTIMENT_ENDPOINT).or(file.sentiment_endpoint),
                model: file.sentiment_model,
                normalized: file.sentiment_normalized.unwrap_or(true),
                batch_size,
            },
            seed: overrides.seed.or(env_seed).or(file.seed).unwrap_or(42),
            k_clusters: overrides.k_clusters.or(file.k_clusters).unwrap_or(5),
            max_iters: file.max_iters.unwrap_or(100),
            tol: file.tol.unwrap_or(1e-4),
            min_df: file.min_df.unwrap_or(1),
            max_features: file.max_features,
            preselect_m: overrides
                .preselect_m
                .or(file.preselect_m)
                .unwrap_or(DEFAULT_PRESELECT_M),
            display_x100: overrides.display_x100.or(file.display_x100).unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_clusters < 2 {
            return Err(Error::Validation(format!(
                "k_clusters must be at least 2, got {}",
                self.k_clusters
            )));
        }
        if self.preselect_m == 0 {
            return Err(Error::Validation("preselect_m must be at least 1".into()));
        }
        if self.max_iters == 0 || !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::Validation(
                "max_iters must be positive and tol non-negative".into(),
            ));
        }
        if self.embed.batch_size == 0 {
            return Err(Error::Validation("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Provider used by `precompute embeddings` for the given kind.
    pub fn embed_provider_for_export(&self, kind: ProviderKind) -> Result<Box<dyn EmbedProvider>> {
        match kind {
            ProviderKind::Fallback => Ok(Box::new(FallbackEmbedder::new(
                self.embed.dim.unwrap_or(FallbackEmbedder::DEFAULT_DIM),
            )?)),
            ProviderKind::Http => {
                let dim = self.embed.dim.ok_or_else(|| {
                    Error::ProviderConfig("http embedding provider needs a dimension (--dim or embed_dim)".into())
                })?;
                Ok(Box::new(HttpEmbedder::new(
                    self.embed_client()?,
                    self.embed.model.clone().unwrap_or_else(|| "http".into()),
                    dim,
                    self.embed.batch_size,
                )))
            }
            ProviderKind::File => Err(Error::ProviderConfig(
                "file embedding provider re-exports an existing file; pass --in".into(),
            )),
        }
    }

    /// Provider that embeds query text against `index`.
    pub fn query_embedder(&self, index: &EmbeddingIndex) -> Result<Box<dyn EmbedProvider>> {
        match self.embed.kind {
            ProviderKind::Fallback => Ok(Box::new(FallbackEmbedder::new(index.dim())?)),
            ProviderKind::Http => Ok(Box::new(HttpEmbedder::new(
                self.embed_client()?,
                self.embed.model.clone().unwrap_or_else(|| index.provider().to_string()),
                index.dim(),
                self.embed.batch_size,
            ))),
            ProviderKind::File => Err(Error::ProviderConfig(
                "the file embedding provider cannot embed free query text; set embed_provider to http or fallback"
                    .into(),
            )),
        }
    }

    fn embed_client(&self) -> Result<RemoteClient> {
        let endpoint = self.embed.endpoint.clone().ok_or_else(|| {
            Error::ProviderConfig(format!(
                "http embedding provider needs {ENV_EMBED_ENDPOINT} or embed_endpoint"
            ))
        })?;
        RemoteClient::new(endpoint)
    }

    fn sentiment_client(&self) -> Result<RemoteClient> {
        let endpoint = self.sentiment.endpoint.clone().ok_or_else(|| {
            Error::ProviderConfig(format!(
                "http sentiment provider needs {ENV_SENTIMENT_ENDPOINT} or sentiment_endpoint"
            ))
        })?;
        RemoteClient::new(endpoint)
    }

    /// Sentiment provider of the given kind; `file_path` overrides the
    /// configured sentiment file.
    pub fn sentiment_provider(
        &self,
        kind: ProviderKind,
        file_path: Option<&Path>,
    ) -> Result<Box<dyn SentimentProvider>> {
        match kind {
            ProviderKind::Fallback => Ok(Box::new(LexiconSentiment)),
            ProviderKind::Http => Ok(Box::new(
                HttpSentiment::new(
                    self.sentiment_client()?,
                    self.sentiment.model.clone().unwrap_or_else(|| "http".into()),
                    self.sentiment.batch_size,
                )
                .with_normalized(self.sentiment.normalized),
            )),
            ProviderKind::File => {
                let path = file_path.unwrap_or(&self.sentiment.path);
                if !path.is_file() {
                    return Err(Error::ProviderConfig(format!(
                        "sentiment file {} not found; run `llmrs precompute sentiments` first",
                        path.display()
                    )));
                }
                Ok(Box::new(FileSentiment::open(path)?))
            }
        }
    }
}

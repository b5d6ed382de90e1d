//! Command-line front end. Exit codes: 0 success, 1 I/O failure, 2 missing
//! store, 3 provider misconfiguration or failure, 4 invalid input.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::app::config::{EngineConfig, Overrides, ProviderKind};
use crate::app::report::{self, crosstab};
use crate::app::server;
use crate::catalog::{descriptive_stats, ingest};
use crate::cluster::KMeansParams;
use crate::embed::{self, load_embedding_file, FileEmbedder};
use crate::error::{Error, Result};
use crate::rank::{Budget, QueryRequest, Ranker, DEFAULT_TOP_K};
use crate::sentiment::{write_sentiments, ReviewText, SentimentHeader};
use crate::store::{BuildParams, IngestParams, Store};
use crate::vectorize::TfidfOptions;

#[derive(Debug, Parser)]
#[command(name = "llmrs", version, about = "Review-aware product recommendation engine")]
pub struct Cli {
    /// Flat key = value config file (defaults to <store>/llmrs.toml).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest product metadata and reviews into a new store.
    Ingest {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce an embedding or sentiment interchange file for a store.
    Precompute {
        #[arg(value_enum)]
        what: PrecomputeKind,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum)]
        provider: ProviderKind,
        /// Existing interchange file (file provider).
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Embedding dimension (fallback and http providers).
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score reviews, fit TF-IDF, cluster and write derived artifacts.
    Build {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recommend products for a free-text need.
    Query(QueryArgs),
    /// Run both rankers on the same candidates.
    Compare(QueryArgs),
    /// Descriptive statistics of the catalog.
    Stats {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Sentiment label versus original star rating.
    Crosstab {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Serve queries over HTTP.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        port: u16,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecomputeKind {
    Embeddings,
    Sentiments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub text: String,
    #[arg(long, allow_negative_numbers = true)]
    pub max_price: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max_license: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max_implementation: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max_maintenance: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long)]
    pub preselect_m: Option<usize>,
    #[arg(long, value_enum, default_value_t = Ranker::Llmrs)]
    pub ranker: Ranker,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn config_for(store: &Path, cli_config: Option<&Path>, overrides: Overrides) -> Result<EngineConfig> {
    EngineConfig::load(store, cli_config, &overrides)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Ingest {
            metadata,
            reviews,
            out: dir,
        } => {
            let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| Error::io(p, e));
            let ingested = ingest(open(&metadata)?, open(&reviews)?)?;
            let params = IngestParams {
                metadata: metadata.display().to_string(),
                reviews: reviews.display().to_string(),
            };
            let store = Store::create(&dir, ingested, params)?;
            emit(out, &to_json(&store.manifest().counts)?)
        }
        Command::Precompute {
            what,
            store,
            provider,
            input,
            dim,
            out: dest,
        } => {
            let cfg = config_for(
                &store,
                cfg_path,
                Overrides {
                    embed_dim: dim,
                    ..Default::default()
                },
            )?;
            let store = Store::open(&store)?;
            let rows = match what {
                PrecomputeKind::Embeddings => precompute_embeddings(&cfg, &store, provider, input.as_deref(), &dest)?,
                PrecomputeKind::Sentiments => precompute_sentiments(&cfg, &store, provider, input.as_deref(), &dest)?,
            };
            emit(out, &format!("wrote {rows} rows to {}\n", dest.display()))
        }
        Command::Build { store, k, seed } => {
            let cfg = config_for(
                &store,
                cfg_path,
                Overrides {
                    k_clusters: k,
                    seed,
                    ..Default::default()
                },
            )?;
            let mut store = Store::open(&store)?;
            let provider = cfg.sentiment_provider(cfg.sentiment.kind, None)?;
            let info = store.build(
                provider.as_ref(),
                BuildParams {
                    kmeans: KMeansParams {
                        k: cfg.k_clusters,
                        seed: cfg.seed,
                        max_iters: cfg.max_iters,
                        tol: cfg.tol,
                    },
                    tfidf: TfidfOptions {
                        min_df: cfg.min_df,
                        max_features: cfg.max_features,
                    },
                },
            )?;
            emit(out, &to_json(&info)?)
        }
        Command::Query(args) => {
            let (cfg, request, format) = query_setup(&args, cfg_path)?;
            let store = Store::open(&args.store)?;
            let engine = store.engine_from_file(&cfg.embed.path)?;
            let embedder = cfg.query_embedder(engine.index())?;
            let resp = engine.query(&request, embedder.as_ref())?;
            match format {
                Format::Json => emit(out, &to_json(&resp)?),
                Format::Table => emit(out, &report::render_query(&resp, cfg.display_x100)),
            }
        }
        Command::Compare(args) => {
            let (cfg, request, format) = query_setup(&args, cfg_path)?;
            let store = Store::open(&args.store)?;
            let engine = store.engine_from_file(&cfg.embed.path)?;
            let embedder = cfg.query_embedder(engine.index())?;
            let cmp = engine.compare(&request, embedder.as_ref())?;
            match format {
                Format::Json => emit(out, &to_json(&cmp)?),
                Format::Table => emit(out, &report::render_comparison(&cmp, cfg.display_x100)),
            }
        }
        Command::Stats { store, format } => {
            let store = Store::open(&store)?;
            let aggregates = store
                .signals()
                .into_iter()
                .filter_map(|(id, s)| s.aggregate.map(|a| (id, a)))
                .collect();
            let stats = descriptive_stats(store.catalog(), &aggregates)?;
            match format {
                Format::Json => emit(out, &to_json(&stats)?),
                Format::Table => emit(out, &report::render_stats(&stats)),
            }
        }
        Command::Crosstab { store, format } => {
            let store = Store::open(&store)?;
            if !store.is_built() {
                return Err(Error::Validation(
                    "crosstab needs a built store (run `llmrs build`)".into(),
                ));
            }
            let sentiments = store
                .reviews()
                .reviews()
                .iter()
                .filter_map(|r| r.sentiment.map(|s| (r.review_id.clone(), s)))
                .collect();
            let table = crosstab(store.reviews().reviews(), &sentiments);
            match format {
                Format::Json => emit(out, &to_json(&table)?),
                Format::Table => emit(out, &report::render_crosstab(&table)),
            }
        }
        Command::Serve { store, port } => {
            let cfg = config_for(&store, cfg_path, Overrides::default())?;
            server::serve_blocking(cfg, port)
        }
    }
}

fn query_setup(args: &QueryArgs, cfg_path: Option<&Path>) -> Result<(EngineConfig, QueryRequest, Format)> {
    let cfg = config_for(
        &args.store,
        cfg_path,
        Overrides {
            preselect_m: args.preselect_m,
            ..Default::default()
        },
    )?;
    let request = QueryRequest {
        text: args.text.clone(),
        budget: Budget {
            max_price: args.max_price,
            max_license_fee: args.max_license,
            max_implementation_cost: args.max_implementation,
            max_maintenance_cost: args.max_maintenance,
        },
        top_k: args.top_k,
        preselect_m: cfg.preselect_m,
        ranker: args.ranker,
    };
    request.validate()?;
    Ok((cfg, request, args.format))
}

fn precompute_embeddings(
    cfg: &EngineConfig,
    store: &Store,
    provider: ProviderKind,
    input: Option<&Path>,
    dest: &Path,
) -> Result<usize> {
    match provider {
        ProviderKind::File => {
            let input =
                input.ok_or_else(|| Error::ProviderConfig("file provider needs --in <embeddings.jsonl>".into()))?;
            let source = FileEmbedder::new(load_embedding_file(input)?);
            embed::reindex_from_file(store.catalog(), &source, dest)
        }
        kind => {
            let p = cfg.embed_provider_for_export(kind)?;
            embed::precompute(store.catalog(), p.as_ref(), dest, cfg.embed.batch_size)
        }
    }
}

fn precompute_sentiments(
    cfg: &EngineConfig,
    store: &Store,
    provider: ProviderKind,
    input: Option<&Path>,
    dest: &Path,
) -> Result<usize> {
    if provider == ProviderKind::File && input.is_none() {
        return Err(Error::ProviderConfig(
            "file provider needs --in <sentiments.jsonl>".into(),
        ));
    }
    let p = cfg.sentiment_provider(provider, input)?;
    let reviews = store.reviews().reviews();
    let texts: Vec<ReviewText<'_>> = reviews
        .iter()
        .map(|r| ReviewText {
            review_id: &r.review_id,
            text: &r.text,
        })
        .collect();
    let scores = p.score_batch(&texts)?;
    let header = SentimentHeader::new(p.name(), p.normalized());

    let tmp = embed::tmp_sibling(dest);
    let written = (|| {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        write_sentiments(
            BufWriter::new(file),
            &header,
            reviews.iter().map(|r| r.review_id.as_str()).zip(scores.iter().copied()),
        )
    })();
    if let Err(e) = written {
        let _ = std::fs::remove_file(&tmp);
        return Err(e);
    }
    std::fs::rename(&tmp, dest).map_err(|e| Error::io(dest, e))?;
    Ok(reviews.len())
}

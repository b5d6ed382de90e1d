//! Drives the `llmrs` binary through the full ingest → precompute → build →
//! query workflow and checks exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn llmrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llmrs"))
        .args(args)
        .env_remove("LLMRS_SEED")
        .env_remove("LLMRS_EMBED_ENDPOINT")
        .env_remove("LLMRS_SENTIMENT_ENDPOINT")
        .output()
        .expect("run llmrs")
}

fn ok(args: &[&str]) -> String {
    let out = llmrs(args);
    assert!(
        out.status.success(),
        "llmrs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    llmrs(args).status.code().unwrap()
}

/// Ingests the synthetic sources and builds a store using only the CLI.
fn cli_store(root: &Path) -> String {
    let (meta, reviews) = common::write_sources(&root.join("src"));
    let store = root.join("store");
    let s = store.to_str().unwrap().to_string();
    let counts: Value = serde_json::from_str(&ok(&[
        "ingest",
        "--metadata",
        meta.to_str().unwrap(),
        "--reviews",
        reviews.to_str().unwrap(),
        "--out",
        &s,
    ]))
    .unwrap();
    assert_eq!(counts["products"], 20);
    assert_eq!(counts["malformed_reviews"], 1);
    assert_eq!(counts["dropped_reviews"], 1);

    let emb = store.join("embeddings.jsonl");
    ok(&[
        "precompute",
        "embeddings",
        "--store",
        &s,
        "--provider",
        "fallback",
        "--dim",
        "64",
        "--out",
        emb.to_str().unwrap(),
    ]);
    let sen = store.join("sentiments.jsonl");
    ok(&[
        "precompute",
        "sentiments",
        "--store",
        &s,
        "--provider",
        "fallback",
        "--out",
        sen.to_str().unwrap(),
    ]);
    let info: Value = serde_json::from_str(&ok(&["build", "--store", &s])).unwrap();
    assert_eq!(info["k"], 5);
    assert_eq!(info["sentiment_provider"], "lexicon-v1");
    s
}

#[test]
fn workflow_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let store = cli_store(tmp.path());
    let query = [
        "query",
        "--store",
        &store,
        "--text",
        common::QUERY,
        "--format",
        "json",
        "--top-k",
        "20",
    ];
    let first = ok(&query);
    assert_eq!(first, ok(&query), "query output differs between runs");

    // A second store built from the same inputs answers identically.
    let tmp2 = tempfile::tempdir().unwrap();
    let store2 = cli_store(tmp2.path());
    let again = ok(&[
        "query",
        "--store",
        &store2,
        "--text",
        common::QUERY,
        "--format",
        "json",
        "--top-k",
        "20",
    ]);
    assert_eq!(first, again);

    let resp: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(resp["status"], "ok");
    let ids: Vec<&str> = resp["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["product_id"].as_str().unwrap())
        .collect();
    assert!(!ids.contains(&common::NO_REVIEWS));
    assert_eq!(resp["excluded_unranked"], 1);
    let pos = |id: &str| ids.iter().position(|x| *x == id).unwrap();
    assert!(pos(common::MANY_REVIEWS) < pos(common::ONE_REVIEW));
}

#[test]
fn table_and_json_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let store = cli_store(tmp.path());
    for ranker in ["llmrs", "baseline"] {
        let base = [
            "query",
            "--store",
            &store,
            "--text",
            "backup utility",
            "--max-price",
            "60",
            "--ranker",
            ranker,
        ];
        let json: Value = serde_json::from_str(&ok(&[&base[..], &["--format", "json"]].concat())).unwrap();
        let table = ok(&[&base[..], &["--format", "table"]].concat());
        let results = json["results"].as_array().unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), results.len() + 2, "{table}");
        assert!(lines[0].ends_with(if ranker == "llmrs" { "Rank Score" } else { "Avg Rating" }));
        for (line, r) in lines[2..].iter().zip(results) {
            let price = r["price"].as_f64().unwrap();
            let score = r["rank_score"].as_f64().or(r["avg_rating"].as_f64()).unwrap();
            assert!(line.contains(&llmrs::app::report::format_money(price, true)), "{line}");
            assert!(line.ends_with(&format!("{score:.2}")), "{line}");
            assert!(price <= 60.0);
        }
    }
}

#[test]
fn empty_budget_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let store = cli_store(tmp.path());
    let args = [
        "query",
        "--store",
        &store,
        "--text",
        "anything",
        "--max-price",
        "0",
        "--max-license",
        "0",
        "--max-implementation",
        "0",
        "--max-maintenance",
        "0",
    ];
    let table = ok(&args);
    assert!(table.contains("no products within budget"), "{table}");
    let json: Value = serde_json::from_str(&ok(&[&args[..], &["--format", "json"]].concat())).unwrap();
    assert_eq!(json["status"], "no_products_within_budget");
    assert_eq!(json["results"].as_array().unwrap().len(), 0);
}

#[test]
fn compare_stats_and_crosstab() {
    let tmp = tempfile::tempdir().unwrap();
    let store = cli_store(tmp.path());
    let cmp: Value = serde_json::from_str(&ok(&[
        "compare",
        "--store",
        &store,
        "--text",
        common::QUERY,
        "--top-k",
        "1",
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(cmp["llmrs"]["results"][0]["product_id"], common::MANY_REVIEWS);
    assert_eq!(cmp["baseline"]["results"][0]["product_id"], common::ONE_REVIEW);
    let diff: Vec<&str> = cmp["difference"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(diff, [common::MANY_REVIEWS, common::ONE_REVIEW]);
    let text = ok(&["compare", "--store", &store, "--text", common::QUERY]);
    assert!(text.contains("LLMRS") && text.contains("Baseline"));

    let stats: Value = serde_json::from_str(&ok(&["stats", "--store", &store, "--format", "json"])).unwrap();
    assert_eq!(stats["price"]["count"], 20);
    assert_eq!(stats["num_reviews"]["max"], 100.0);
    let table = ok(&["stats", "--store", &store]);
    assert!(table.lines().next().unwrap().contains("Number of reviews"));

    let ct: Value = serde_json::from_str(&ok(&["crosstab", "--store", &store, "--format", "json"])).unwrap();
    let total: u64 = ["positive", "negative"]
        .iter()
        .flat_map(|k| ct[k].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()))
        .sum();
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(Path::new(&store).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(total, manifest["counts"]["linked_reviews"].as_u64().unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let missing = missing.to_str().unwrap();
    assert_eq!(code(&["query", "--store", missing, "--text", "x"]), 2);
    assert_eq!(code(&["stats", "--store", missing]), 2);
    assert_eq!(
        code(&["ingest", "--metadata", missing, "--reviews", missing, "--out", missing]),
        1
    );
    assert_eq!(code(&["query", "--bogus"]), 4);
    assert_eq!(code(&["--help"]), 0);

    let store = cli_store(tmp.path());
    assert_eq!(
        code(&["query", "--store", &store, "--text", "x", "--max-price", "-1"]),
        4
    );
    assert_eq!(code(&["query", "--store", &store, "--text", "x", "--top-k", "0"]), 4);
    assert_eq!(code(&["query", "--store", &store, "--text", "   "]), 4);
    assert_eq!(code(&["build", "--store", &store, "--k", "1"]), 4);

    // Sentiment file removed: the default file provider is misconfigured.
    std::fs::remove_file(Path::new(&store).join("sentiments.jsonl")).unwrap();
    assert_eq!(code(&["build", "--store", &store]), 3);
    assert_eq!(
        code(&[
            "precompute",
            "sentiments",
            "--store",
            &store,
            "--provider",
            "file",
            "--out",
            "/tmp/x"
        ]),
        3
    );
    assert_eq!(
        code(&[
            "precompute",
            "embeddings",
            "--store",
            &store,
            "--provider",
            "http",
            "--out",
            "/tmp/x"
        ]),
        3
    );
}

#[test]
fn foreign_index_needs_a_matching_query_provider() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::fixtures_dir().join("sidecar");
    let store = tmp.path().join("store");
    let s = store.to_str().unwrap();
    ok(&[
        "ingest",
        "--metadata",
        fx.join("meta.jsonl").to_str().unwrap(),
        "--reviews",
        fx.join("reviews.jsonl").to_str().unwrap(),
        "--out",
        s,
    ]);
    ok(&[
        "precompute",
        "embeddings",
        "--store",
        s,
        "--provider",
        "file",
        "--in",
        fx.join("embeddings.jsonl").to_str().unwrap(),
        "--out",
        store.join("embeddings.jsonl").to_str().unwrap(),
    ]);
    std::fs::copy(fx.join("sentiments.jsonl"), store.join("sentiments.jsonl")).unwrap();
    ok(&["build", "--store", s, "--k", "2"]);
    // The index came from another model; the hashing embedder cannot query it.
    assert_eq!(code(&["query", "--store", s, "--text", "payroll"]), 3);

    let config = tmp.path().join("file.toml");
    std::fs::write(&config, "embed_provider = \"file\"\n").unwrap();
    assert_eq!(
        code(&[
            "--config",
            config.to_str().unwrap(),
            "query",
            "--store",
            s,
            "--text",
            "payroll"
        ]),
        3
    );
    std::fs::write(&config, "no_such_key = 1\n").unwrap();
    assert_eq!(
        code(&[
            "--config",
            config.to_str().unwrap(),
            "query",
            "--store",
            s,
            "--text",
            "payroll"
        ]),
        4
    );
}

#![allow(dead_code)]

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use llmrs::catalog::ingest;
use llmrs::embed::{precompute, FallbackEmbedder};
use llmrs::sentiment::LexiconSentiment;
use llmrs::store::{BuildParams, IngestParams, Store, EMBEDDINGS};
use serde_json::json;

pub const QUERY: &str = "HR program for managing employee records on Windows platform";

/// Product with 100 net-positive reviews of middling star rating.
pub const MANY_REVIEWS: &str = "B000HRMANY";
/// Product with a single five-star review.
pub const ONE_REVIEW: &str = "B000HRONE1";
/// Product without any reviews.
pub const NO_REVIEWS: &str = "B000NOREVS";

pub const EMBED_DIM: usize = 64;

struct Spec {
    id: &'static str,
    description: &'static str,
    category: &'static str,
    price: &'static str,
}

const PRODUCTS: &[Spec] = &[
    Spec {
        id: MANY_REVIEWS,
        description: "hr program for managing employee records on windows, staff database and payroll",
        category: "Business",
        price: "$39.99",
    },
    Spec {
        id: ONE_REVIEW,
        description: "employee records hr software for windows personnel files and org charts",
        category: "Business",
        price: "$217.80",
    },
    Spec {
        id: "B000ACCT01",
        description: "small business accounting and invoicing for windows",
        category: "Business",
        price: "$59.99",
    },
    Spec {
        id: "B000ACCT02",
        description: "home finance budgeting and checkbook software",
        category: "Business",
        price: "$29.99",
    },
    Spec {
        id: "B000TAX003",
        description: "tax preparation software federal and state returns",
        category: "Business",
        price: "$49.95",
    },
    Spec {
        id: "B000RESUM4",
        description: "resume writer deluxe with cover letters and job search tools",
        category: "Business",
        price: "$19.99",
    },
    Spec {
        id: "B000ORG005",
        description: "organizer for contacts calendar and employee schedules",
        category: "Business",
        price: "$9.99",
    },
    Spec {
        id: "B000PHOTO6",
        description: "photo editing suite with filters layers and raw support",
        category: "Graphics",
        price: "$79.99",
    },
    Spec {
        id: "B000DRAW07",
        description: "vector drawing and illustration program for designers",
        category: "Graphics",
        price: "$129.00",
    },
    Spec {
        id: "B000VIDEO8",
        description: "video editor with transitions titles and dvd burning",
        category: "Graphics",
        price: "$69.99",
    },
    Spec {
        id: "B000LANG09",
        description: "language learning spanish course with speech recognition",
        category: "Education",
        price: "$179.00",
    },
    Spec {
        id: "B000TYPE10",
        description: "typing tutor for kids and adults with games",
        category: "Education",
        price: "$14.99",
    },
    Spec {
        id: "B000MATH11",
        description: "math practice software for elementary school students",
        category: "Education",
        price: "$24.99",
    },
    Spec {
        id: "B000ANTI12",
        description: "antivirus and internet security protection for three pcs",
        category: "Utilities",
        price: "$39.99",
    },
    Spec {
        id: "B000BACK13",
        description: "backup and disk imaging utility for windows",
        category: "Utilities",
        price: "$49.99",
    },
    Spec {
        id: "B000CLEAN4",
        description: "pc cleaner registry repair and speed up utility",
        category: "Utilities",
        price: "$4.99",
    },
    Spec {
        id: "B000OFFIC5",
        description: "office suite word processor spreadsheet and presentations",
        category: "Utilities",
        price: "$149.99",
    },
    Spec {
        id: "B000MAPS16",
        description: "street maps and trip planner with gps support",
        category: "Travel",
        price: "$34.99",
    },
    Spec {
        id: "B000FLIGH7",
        description: "flight simulator with realistic aircraft and airports",
        category: "Games",
        price: "$44.99",
    },
    Spec {
        id: NO_REVIEWS,
        description: "chess game with tutorials and online play",
        category: "Games",
        price: "$12.99",
    },
];

const POSITIVE_TEXTS: &[&str] = &[
    "great excellent payroll tool",
    "works perfectly and easy to install",
    "love the reports, very helpful support",
    "solid reliable program worth the money",
];

const NEGATIVE_TEXTS: &[&str] = &[
    "slow buggy interface",
    "crashes constantly, waste of money",
    "confusing menus and poor documentation",
];

const NEUTRAL_TEXTS: &[&str] = &["arrived on time in a box", "installed it on my laptop yesterday"];

fn review_lines() -> Vec<serde_json::Value> {
    let mut rows = Vec::new();
    // 70 positive (rated 4) and 30 negative (rated 1): P = 70, N = 30, S = 100.
    for i in 0..100 {
        let (text, rating) = if i % 10 < 7 {
            (POSITIVE_TEXTS[i % POSITIVE_TEXTS.len()], 4)
        } else {
            (NEGATIVE_TEXTS[i % NEGATIVE_TEXTS.len()], 1)
        };
        rows.push(json!({"asin": MANY_REVIEWS, "reviewText": text, "overall": rating, "summary": "review", "verified": true, "reviewerName": "someone"}));
    }
    rows.push(json!({"asin": ONE_REVIEW, "reviewText": "excellent", "overall": 5.0, "summary": "five stars"}));

    let others: Vec<&Spec> = PRODUCTS
        .iter()
        .filter(|p| ![MANY_REVIEWS, ONE_REVIEW, NO_REVIEWS].contains(&p.id))
        .collect();
    for (n, p) in others.iter().enumerate() {
        for j in 0..(2 + n % 4) {
            let pick = (n * 7 + j * 3) % 9;
            let (text, rating) = match pick {
                0..=3 => (POSITIVE_TEXTS[pick], 5 - (j % 2)),
                4..=6 => (NEGATIVE_TEXTS[pick - 4], 1 + (j % 2)),
                _ => (NEUTRAL_TEXTS[pick - 7], 3),
            };
            rows.push(json!({"asin": p.id, "reviewText": text, "overall": rating}));
        }
    }
    // Orphan review and a malformed line are written separately.
    rows
}

/// Writes the synthetic metadata and reviews JSON Lines into `dir`.
pub fn write_sources(dir: &Path) -> (PathBuf, PathBuf) {
    fs::create_dir_all(dir).unwrap();
    let meta_path = dir.join("meta.jsonl");
    let reviews_path = dir.join("reviews.jsonl");

    let mut meta = String::new();
    for p in PRODUCTS {
        let record = json!({
            "asin": p.id,
            "title": p.description.split(' ').take(3).collect::<Vec<_>>().join(" "),
            "description": [p.description],
            "category": ["Software", p.category],
            "price": p.price,
            "brand": "Acme",
        });
        meta.push_str(&record.to_string());
        meta.push('\n');
    }
    fs::write(&meta_path, meta).unwrap();

    let mut reviews = String::new();
    for r in review_lines() {
        reviews.push_str(&r.to_string());
        reviews.push('\n');
    }
    reviews.push_str("{\"asin\":\"B999UNKNWN\",\"reviewText\":\"great\",\"overall\":5}\n");
    reviews.push_str("{not json\n");
    fs::write(&reviews_path, reviews).unwrap();
    (meta_path, reviews_path)
}

/// Ingests, embeds (fallback), scores (lexicon) and builds a store in `dir`.
pub fn build_store(dir: &Path) -> Store {
    let src = dir.join("src");
    let (meta, reviews) = write_sources(&src);
    let store_dir = dir.join("store");
    let ingested = ingest(
        BufReader::new(fs::File::open(&meta).unwrap()),
        BufReader::new(fs::File::open(&reviews).unwrap()),
    )
    .unwrap();
    let mut store = Store::create(
        &store_dir,
        ingested,
        IngestParams {
            metadata: "meta.jsonl".into(),
            reviews: "reviews.jsonl".into(),
        },
    )
    .unwrap();
    let embedder = FallbackEmbedder::new(EMBED_DIM).unwrap();
    precompute(store.catalog(), &embedder, &store_dir.join(EMBEDDINGS), 16).unwrap();
    store.build(&LexiconSentiment, BuildParams::default()).unwrap();
    store
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

//! Plain-text tables for query results, descriptive statistics and the
//! sentiment/rating crosstab.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogStats, Review};
use crate::cluster::{label_review, Label};
use crate::rank::{Comparison, QueryResponse, QueryStatus, Ranker, Recommendation};
use crate::sentiment::SentimentScore;

const DESCRIPTION_WIDTH: usize = 44;

/// `$1,234.56`, optionally scaled by 100 first.
pub fn format_money(value: f64, x100: bool) -> String {
    let v = if x100 { value * 100.0 } else { value };
    let cents = (v.abs() * 100.0).round() as u128;
    let (whole, frac) = (cents / 100, cents % 100);
    let digits = whole.to_string();
    let mut grouped = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    let sign = if v < 0.0 && cents > 0 { "-" } else { "" };
    format!("{sign}${grouped}.{frac:02}")
}

fn truncate(text: &str, width: usize) -> String {
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= width {
        flat
    } else {
        let cut: String = flat.chars().take(width - 3).collect();
        format!("{cut}...")
    }
}

fn render_grid(header: &[String], rows: &[Vec<String>], left_align_first: bool) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, cell) in r.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let mut parts = Vec::with_capacity(cols);
        for (i, c) in cells.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            if i == 0 && left_align_first {
                parts.push(format!("{c}{}", " ".repeat(pad)));
            } else {
                parts.push(format!("{}{c}", " ".repeat(pad)));
            }
        }
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &rule);
    for r in rows {
        line(&mut out, r);
    }
    out
}

/// Score cell as shown in the table (two decimals).
pub fn format_score(r: &Recommendation) -> String {
    match (r.rank_score, r.avg_rating) {
        (Some(s), _) => format!("{s:.2}"),
        (None, Some(a)) => format!("{a:.2}"),
        (None, None) => String::new(),
    }
}

pub fn render_query(resp: &QueryResponse, x100: bool) -> String {
    let score_col = match resp.ranker {
        Ranker::Llmrs => "Rank Score",
        Ranker::Baseline => "Avg Rating",
    };
    let header: Vec<String> = [
        "Description",
        "Price",
        "Licenc. Fee",
        "Implem Fee",
        "Main. Fee",
        score_col,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = resp
        .results
        .iter()
        .map(|r| {
            vec![
                truncate(&r.description, DESCRIPTION_WIDTH),
                format_money(r.price, x100),
                format_money(r.license_fee, x100),
                format_money(r.implementation_cost, x100),
                format_money(r.maintenance_cost, x100),
                format_score(r),
            ]
        })
        .collect();
    let mut out = render_grid(&header, &rows, true);
    match resp.status {
        QueryStatus::NoProductsWithinBudget => {
            let _ = writeln!(out, "{}", resp.status.message());
        }
        QueryStatus::Ok if resp.results.is_empty() => {
            let _ = writeln!(
                out,
                "no rankable products among {} preselected ({} lack {})",
                resp.preselected,
                resp.excluded_unranked,
                match resp.ranker {
                    Ranker::Llmrs => "scored reviews",
                    Ranker::Baseline => "ratings",
                }
            );
        }
        QueryStatus::Ok => {}
    }
    out
}

pub fn render_comparison(cmp: &Comparison, x100: bool) -> String {
    let mut out = String::from("LLMRS\n");
    out.push_str(&render_query(&cmp.llmrs, x100));
    out.push_str("\nBaseline\n");
    out.push_str(&render_query(&cmp.baseline, x100));
    let _ = writeln!(
        out,
        "\nrecommended by only one ranker: {}",
        if cmp.difference.is_empty() {
            "(none)".to_string()
        } else {
            cmp.difference.join(", ")
        }
    );
    out
}

pub fn render_stats(stats: &CatalogStats) -> String {
    let columns = stats.columns();
    let mut header = vec![String::new()];
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    let row = |label: &str, f: &dyn Fn(&crate::catalog::ColumnStats) -> String| {
        let mut r = vec![label.to_string()];
        r.extend(columns.iter().map(|(_, c)| f(c)));
        r
    };
    let rows = vec![
        row("count", &|c| c.count.to_string()),
        row("mean", &|c| format!("{:.2}", c.mean)),
        row("std", &|c| format!("{:.2}", c.std)),
        row("min", &|c| format!("{:.2}", c.min)),
        row("25%", &|c| format!("{:.2}", c.q25)),
        row("50%", &|c| format!("{:.2}", c.q50)),
        row("75%", &|c| format!("{:.2}", c.q75)),
        row("max", &|c| format!("{:.2}", c.max)),
    ];
    render_grid(&header, &rows, true)
}

/// Review counts by sentiment label and original star rating.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrosstabReport {
    /// Counts for ratings 1..=5.
    pub positive: [u64; 5],
    pub negative: [u64; 5],
}

impl CrosstabReport {
    pub fn count(&self, label: Label, rating: u8) -> u64 {
        let row = match label {
            Label::Positive => &self.positive,
            Label::Negative => &self.negative,
        };
        row[(rating - 1) as usize]
    }

    pub fn total(&self) -> u64 {
        self.positive.iter().chain(&self.negative).sum()
    }
}

/// Counts `(label, rating)` pairs over reviews that have both a score and a
/// valid rating.
pub fn crosstab<'a>(
    reviews: impl IntoIterator<Item = &'a Review>,
    sentiments: &BTreeMap<String, SentimentScore>,
) -> CrosstabReport {
    let mut report = CrosstabReport::default();
    for r in reviews {
        let Some(score) = sentiments.get(&r.review_id) else {
            continue;
        };
        if !(1..=5).contains(&r.rating) {
            continue;
        }
        let row = match label_review(*score) {
            Label::Positive => &mut report.positive,
            Label::Negative => &mut report.negative,
        };
        row[(r.rating - 1) as usize] += 1;
    }
    report
}

pub fn render_crosstab(report: &CrosstabReport) -> String {
    let mut header = vec!["label".to_string()];
    header.extend((1..=5).map(|r| format!("rating {r}")));
    header.push("total".into());
    let row = |name: &str, counts: &[u64; 5]| {
        let mut r = vec![name.to_string()];
        r.extend(counts.iter().map(u64::to_string));
        r.push(counts.iter().sum::<u64>().to_string());
        r
    };
    render_grid(
        &header,
        &[row("positive", &report.positive), row("negative", &report.negative)],
        true,
    )
}

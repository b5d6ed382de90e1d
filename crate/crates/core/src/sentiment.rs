//! Per-review sentiment scores, the provider backends that produce them, and
//! product-level aggregation.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::remote::RemoteClient;
use crate::vectorize::{tokenize, word_list};

pub const SENTIMENT_FORMAT: &str = "llmrs-sentiments";
pub const SENTIMENT_VERSION: u32 = 1;

/// Tolerance on `pos + neg = 1` for providers that declare normalized output.
pub const NORMALIZED_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub pos: f64,
    pub neg: f64,
}

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore { pos: 0.5, neg: 0.5 };

    pub fn new(pos: f64, neg: f64) -> Result<Self> {
        let s = Self { pos, neg };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pos", self.pos), ("neg", self.neg)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        (self.pos + self.neg - 1.0).abs() <= NORMALIZED_TOLERANCE
    }

    pub fn margin(&self) -> f64 {
        self.pos - self.neg
    }
}

/// A review to score. The file backend looks scores up by id; model-backed
/// providers only read the text.
#[derive(Debug, Clone, Copy)]
pub struct ReviewText<'a> {
    pub review_id: &'a str,
    pub text: &'a str,
}

pub trait SentimentProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Whether every produced score satisfies `pos + neg = 1`.
    fn normalized(&self) -> bool;

    fn score_batch(&self, reviews: &[ReviewText<'_>]) -> Result<Vec<SentimentScore>>;

    fn score_review(&self, review: ReviewText<'_>) -> Result<SentimentScore> {
        Ok(self.score_batch(&[review])?.remove(0))
    }
}

const POSITIVE_RAW: &str = include_str!("../data/lexicon_positive.txt");
const NEGATIVE_RAW: &str = include_str!("../data/lexicon_negative.txt");

fn lexicons() -> &'static (HashSet<&'static str>, HashSet<&'static str>) {
    static SETS: OnceLock<(HashSet<&'static str>, HashSet<&'static str>)> = OnceLock::new();
    SETS.get_or_init(|| (word_list(POSITIVE_RAW).collect(), word_list(NEGATIVE_RAW).collect()))
}

/// Word-count sentiment: `(p / (p + n), n / (p + n))` over lexicon hits, or
/// neutral when the text has none.
pub fn lexicon_score(text: &str) -> SentimentScore {
    let (positive, negative) = lexicons();
    let (mut p, mut n) = (0u32, 0u32);
    for tok in tokenize(text) {
        if positive.contains(tok.as_str()) {
            p += 1;
        } else if negative.contains(tok.as_str()) {
            n += 1;
        }
    }
    if p + n == 0 {
        return SentimentScore::NEUTRAL;
    }
    let total = (p + n) as f64;
    SentimentScore {
        pos: p as f64 / total,
        neg: n as f64 / total,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexiconSentiment;

impl LexiconSentiment {
    pub const NAME: &'static str = "lexicon-v1";
}

impl SentimentProvider for LexiconSentiment {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn normalized(&self) -> bool {
        true
    }

    fn score_batch(&self, reviews: &[ReviewText<'_>]) -> Result<Vec<SentimentScore>> {
        Ok(reviews.iter().map(|r| lexicon_score(r.text)).collect())
    }
}

/// Header line of a sentiment interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentHeader {
    pub format: String,
    pub version: u32,
    pub labels: Vec<String>,
    pub provider: String,
    pub normalized: bool,
}

impl SentimentHeader {
    pub fn new(provider: impl Into<String>, normalized: bool) -> Self {
        Self {
            format: SENTIMENT_FORMAT.into(),
            version: SENTIMENT_VERSION,
            labels: vec!["positive".into(), "negative".into()],
            provider: provider.into(),
            normalized,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SentimentRow {
    review_id: String,
    pos: f64,
    neg: f64,
}

/// Precomputed scores read from an interchange file.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentFile {
    pub header: SentimentHeader,
    pub scores: BTreeMap<String, SentimentScore>,
}

pub fn load_sentiment_file(path: &Path) -> Result<SentimentFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sentiments(BufReader::new(file), &path.display().to_string())
}

/// Parses the interchange format; `source` names the input in errors.
pub fn read_sentiments(reader: impl BufRead, source: &str) -> Result<SentimentFile> {
    let mut lines = reader.lines().enumerate();
    let header_line = loop {
        match lines.next() {
            None => return Err(Error::format(source, 1, "missing header")),
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io(source, e))?;
                if !line.trim().is_empty() {
                    break (i + 1, line);
                }
            }
        }
    };
    let header: SentimentHeader = serde_json::from_str(&header_line.1)
        .map_err(|e| Error::format(source, header_line.0, format!("bad header: {e}")))?;
    if header.format != SENTIMENT_FORMAT {
        return Err(Error::format(
            source,
            header_line.0,
            format!("format {:?}, expected {SENTIMENT_FORMAT:?}", header.format),
        ));
    }
    if header.version != SENTIMENT_VERSION {
        return Err(Error::format(
            source,
            header_line.0,
            format!("unsupported version {}", header.version),
        ));
    }
    if header.labels != ["positive", "negative"] {
        return Err(Error::format(
            source,
            header_line.0,
            format!("labels {:?}, expected [\"positive\",\"negative\"]", header.labels),
        ));
    }

    let mut scores = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: SentimentRow =
            serde_json::from_str(&line).map_err(|e| Error::format(source, line_no, e.to_string()))?;
        let score = SentimentScore::new(row.pos, row.neg)
            .map_err(|e| Error::format(source, line_no, format!("review {}: {e}", row.review_id)))?;
        if header.normalized && !score.is_normalized() {
            return Err(Error::format(
                source,
                line_no,
                format!(
                    "review {}: pos + neg = {} in a normalized file",
                    row.review_id,
                    score.pos + score.neg
                ),
            ));
        }
        if scores.insert(row.review_id.clone(), score).is_some() {
            return Err(Error::format(
                source,
                line_no,
                format!("duplicate review_id {}", row.review_id),
            ));
        }
    }
    Ok(SentimentFile { header, scores })
}

/// Writes the interchange format; rows in the iterator's order.
pub fn write_sentiments<'a>(
    mut out: impl Write,
    header: &SentimentHeader,
    rows: impl IntoIterator<Item = (&'a str, SentimentScore)>,
) -> Result<()> {
    let io_err = |e| Error::io("<sentiment output>", e);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n").map_err(io_err)?;
    for (id, s) in rows {
        serde_json::to_writer(
            &mut out,
            &SentimentRow {
                review_id: id.to_string(),
                pos: s.pos,
                neg: s.neg,
            },
        )?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Serves scores from a loaded interchange file.
#[derive(Debug, Clone)]
pub struct FileSentiment {
    file: SentimentFile,
}

impl FileSentiment {
    pub fn new(file: SentimentFile) -> Self {
        Self { file }
    }

    pub fn open(path: &Path) -> Result<Self> {
        load_sentiment_file(path).map(Self::new)
    }

    pub fn scores(&self) -> &BTreeMap<String, SentimentScore> {
        &self.file.scores
    }
}

impl SentimentProvider for FileSentiment {
    fn name(&self) -> &str {
        &self.file.header.provider
    }

    fn normalized(&self) -> bool {
        self.file.header.normalized
    }

    fn score_batch(&self, reviews: &[ReviewText<'_>]) -> Result<Vec<SentimentScore>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(reviews.len());
        for r in reviews {
            match self.file.scores.get(r.review_id) {
                Some(s) => out.push(*s),
                None => missing.push(r.review_id),
            }
        }
        if !missing.is_empty() {
            let shown: Vec<&str> = missing.iter().take(10).copied().collect();
            return Err(Error::Provider(format!(
                "{} review id(s) missing from sentiment file: {}{}",
                missing.len(),
                shown.join(", "),
                if missing.len() > shown.len() { ", ..." } else { "" }
            )));
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct TextsRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct ScoresResponse {
    scores: Vec<SentimentScore>,
}

/// Remote zero-shot classifier: `POST {"texts": [...]}` returning
/// `{"scores": [{"pos": .., "neg": ..}]}` in request order.
#[derive(Debug, Clone)]
pub struct HttpSentiment {
    client: RemoteClient,
    name: String,
    batch_size: usize,
    normalized: bool,
}

impl HttpSentiment {
    pub const ENDPOINT_VAR: &'static str = "LLMRS_SENTIMENT_ENDPOINT";

    pub fn new(client: RemoteClient, name: impl Into<String>, batch_size: usize) -> Self {
        Self {
            client,
            name: name.into(),
            batch_size: batch_size.max(1),
            normalized: true,
        }
    }

    pub fn with_normalized(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }
}

impl SentimentProvider for HttpSentiment {
    fn name(&self) -> &str {
        &self.name
    }

    fn normalized(&self) -> bool {
        self.normalized
    }

    fn score_batch(&self, reviews: &[ReviewText<'_>]) -> Result<Vec<SentimentScore>> {
        let mut out = Vec::with_capacity(reviews.len());
        for chunk in reviews.chunks(self.batch_size) {
            let req = TextsRequest {
                texts: chunk.iter().map(|r| r.text).collect(),
            };
            let resp: ScoresResponse = self.client.post_json(&req)?;
            if resp.scores.len() != chunk.len() {
                return Err(Error::Provider(format!(
                    "{} returned {} scores for {} texts",
                    self.client.endpoint(),
                    resp.scores.len(),
                    chunk.len()
                )));
            }
            for s in resp.scores {
                s.validate().map_err(|e| Error::Provider(e.to_string()))?;
                out.push(s);
            }
        }
        Ok(out)
    }
}

/// Sums of a product's review scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductSentimentAggregate {
    /// Sum of positive scores.
    pub positive: f64,
    /// Sum of negative scores.
    pub negative: f64,
    /// Number of scored reviews.
    pub count: u64,
}

impl ProductSentimentAggregate {
    pub fn merge(self, other: Self) -> Self {
        Self {
            positive: self.positive + other.positive,
            negative: self.negative + other.negative,
            count: self.count + other.count,
        }
    }
}

pub fn aggregate(scores: impl IntoIterator<Item = SentimentScore>) -> Option<ProductSentimentAggregate> {
    let agg = scores.into_iter().fold(
        ProductSentimentAggregate {
            positive: 0.0,
            negative: 0.0,
            count: 0,
        },
        |acc, s| ProductSentimentAggregate {
            positive: acc.positive + s.pos,
            negative: acc.negative + s.neg,
            count: acc.count + 1,
        },
    );
    (agg.count > 0).then_some(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_examples() {
        assert_eq!(lexicon_score("great excellent"), SentimentScore { pos: 1.0, neg: 0.0 });
        assert_eq!(lexicon_score("the manual ships in a box"), SentimentScore::NEUTRAL);
        assert_eq!(
            lexicon_score("great but slow, buggy and crashes"),
            SentimentScore { pos: 0.25, neg: 0.75 }
        );
    }

    #[test]
    fn lexicon_words_survive_tokenization() {
        let (p, n) = lexicons();
        for w in p.iter().chain(n.iter()) {
            assert_eq!(tokenize(w), vec![w.to_string()], "{w} is not a clean token");
        }
        assert!(p.is_disjoint(n));
    }

    #[test]
    fn score_validation() {
        assert!(SentimentScore::new(1.2, 0.0).is_err());
        assert!(SentimentScore::new(f64::NAN, 0.0).is_err());
        assert!(SentimentScore::new(0.3, 0.7).unwrap().is_normalized());
    }

    fn parse(text: &str) -> Result<SentimentFile> {
        read_sentiments(text.as_bytes(), "test")
    }

    const HEADER: &str = r#"{"format":"llmrs-sentiments","version":1,"labels":["positive","negative"],"provider":"bart","normalized":true}"#;

    #[test]
    fn file_loads_valid_rows() {
        let f = parse(&format!(
            "{HEADER}\n{{\"review_id\":\"A#0\",\"pos\":0.9,\"neg\":0.1}}\n{{\"review_id\":\"A#1\",\"pos\":0.2,\"neg\":0.8}}\n"
        ))
        .unwrap();
        assert_eq!(f.scores.len(), 2);
        assert_eq!(f.header.provider, "bart");
    }

    #[test]
    fn empty_rows_are_valid() {
        assert!(parse(&format!("{HEADER}\n")).unwrap().scores.is_empty());
    }

    #[test]
    fn out_of_range_names_the_line() {
        let err = parse(&format!(
            "{HEADER}\n{{\"review_id\":\"A#0\",\"pos\":0.9,\"neg\":0.1}}\n{{\"review_id\":\"A#1\",\"pos\":1.2,\"neg\":0.0}}\n"
        ))
        .unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_headers_rejected() {
        assert!(parse("").is_err());
        assert!(parse("{\"format\":\"other\"}\n").is_err());
        let v2 = HEADER.replace("\"version\":1", "\"version\":2");
        assert!(matches!(parse(&v2), Err(Error::Format { line: 1, .. })));
        let labels = HEADER.replace("\"positive\",\"negative\"", "\"negative\",\"positive\"");
        assert!(parse(&labels).is_err());
    }

    #[test]
    fn unnormalized_row_in_normalized_file() {
        let err = parse(&format!(
            "{HEADER}\n{{\"review_id\":\"A#0\",\"pos\":0.9,\"neg\":0.9}}\n"
        ))
        .unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }));
        let loose = HEADER.replace("\"normalized\":true", "\"normalized\":false");
        assert!(parse(&format!("{loose}\n{{\"review_id\":\"A#0\",\"pos\":0.9,\"neg\":0.9}}\n")).is_ok());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let row = "{\"review_id\":\"A#0\",\"pos\":0.9,\"neg\":0.1}";
        assert!(matches!(
            parse(&format!("{HEADER}\n{row}\n{row}\n")),
            Err(Error::Format { line: 3, .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let header = SentimentHeader::new(LexiconSentiment::NAME, true);
        let mut buf = Vec::new();
        write_sentiments(
            &mut buf,
            &header,
            [
                ("B#0", SentimentScore { pos: 0.25, neg: 0.75 }),
                ("B#1", SentimentScore::NEUTRAL),
            ],
        )
        .unwrap();
        let f = read_sentiments(buf.as_slice(), "mem").unwrap();
        assert_eq!(f.header, header);
        assert_eq!(f.scores["B#0"], SentimentScore { pos: 0.25, neg: 0.75 });
    }

    #[test]
    fn file_provider_reports_missing_ids() {
        let f = parse(&format!(
            "{HEADER}\n{{\"review_id\":\"A#0\",\"pos\":0.9,\"neg\":0.1}}\n"
        ))
        .unwrap();
        let p = FileSentiment::new(f);
        let ok = p
            .score_review(ReviewText {
                review_id: "A#0",
                text: "",
            })
            .unwrap();
        assert_eq!(ok.pos, 0.9);
        let err = p
            .score_batch(&[ReviewText {
                review_id: "Z#9",
                text: "",
            }])
            .unwrap_err();
        assert!(err.to_string().contains("Z#9"));
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate([SentimentScore { pos: 0.9, neg: 0.1 }]).unwrap();
        assert_eq!((one.positive, one.negative, one.count), (0.9, 0.1, 1));

        let three = aggregate([
            SentimentScore { pos: 0.9, neg: 0.1 },
            SentimentScore { pos: 0.6, neg: 0.4 },
            SentimentScore { pos: 0.2, neg: 0.8 },
        ])
        .unwrap();
        assert!((three.positive - 1.7).abs() < 1e-12);
        assert!((three.negative - 1.3).abs() < 1e-12);
        assert_eq!(three.count, 3);

        let ten = aggregate(std::iter::repeat_n(SentimentScore { pos: 1.0, neg: 0.0 }, 10)).unwrap();
        assert_eq!((ten.positive, ten.negative, ten.count), (10.0, 0.0, 10));

        assert!(aggregate([]).is_none());
    }
}

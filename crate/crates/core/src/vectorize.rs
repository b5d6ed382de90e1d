//! Tokenization and TF-IDF weighting of review text.
//!
//! The model uses smoothed inverse document frequency,
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, raw term counts for the
//! term-frequency part, and L2-normalizes every transformed row. Vocabulary
//! columns are assigned in lexicographic term order so that two fits over the
//! same corpus (in any document order) produce the same column indices.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOPWORDS_RAW: &str = include_str!("../data/stopwords_en.txt");

/// Version tag of the shipped stopword list; persisted with every model.
pub const STOPWORD_LIST_VERSION: &str = "en-1";

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| word_list(STOPWORDS_RAW).collect())
}

/// Iterates the non-comment, non-blank lines of a shipped word list.
pub(crate) fn word_list(raw: &'static str) -> impl Iterator<Item = &'static str> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

/// Lowercases, splits on runs of non-alphanumeric characters, and drops
/// tokens shorter than two characters or present in the stopword list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|raw| !raw.is_empty())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= 2 && !is_stopword(t))
        .collect()
}

/// A sparse row: strictly increasing column indices with finite, non-zero weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from `(index, weight)` pairs in any order. Zero weights
    /// are dropped and duplicate indices are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, w) in pairs {
            *merged.entry(i).or_insert(0.0) += w;
        }
        let (indices, values) = merged.into_iter().filter(|(_, w)| *w != 0.0).unzip();
        Self { indices, values }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self::from_pairs(dense.iter().enumerate().map(|(i, &w)| (i as u32, w)))
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|w| w * w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, w)| w * dense[i as usize]).sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, w) in self.iter() {
            out[i as usize] = w;
        }
        out
    }

    /// One past the largest stored index, or 0 when empty.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TfidfOptions {
    /// Minimum number of documents a term must occur in.
    pub min_df: usize,
    /// Keep only the most document-frequent terms (ties broken lexicographically).
    pub max_features: Option<usize>,
}

impl Default for TfidfOptions {
    fn default() -> Self {
        Self {
            min_df: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    terms: Vec<String>,
    vocabulary: HashMap<String, u32>,
    idf: Vec<f64>,
    num_docs: usize,
    min_df: usize,
}

/// Smoothed inverse document frequency.
pub fn smoothed_idf(num_docs: usize, df: usize) -> f64 {
    ((1.0 + num_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(corpus: &[S], options: TfidfOptions) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Validation("cannot fit TF-IDF on an empty corpus".into()));
        }
        let tokenized: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(d.as_ref())).collect();
        Self::fit_tokens(&tokenized, options)
    }

    /// Fits on documents that are already tokenized.
    pub fn fit_tokens(docs: &[Vec<String>], options: TfidfOptions) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Validation("cannot fit TF-IDF on an empty corpus".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for term in unique {
                *df.entry(term).or_insert(0) += 1;
            }
        }

        let min_df = options.min_df.max(1);
        let mut kept: Vec<(&str, usize)> = df.into_iter().filter(|&(_, n)| n >= min_df).collect();
        if let Some(max) = options.max_features {
            if kept.len() > max {
                kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
                kept.truncate(max);
                kept.sort_by(|a, b| a.0.cmp(b.0));
            }
        }

        let num_docs = docs.len();
        let terms: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
        let idf = kept.iter().map(|&(_, n)| smoothed_idf(num_docs, n)).collect();
        let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(Self {
            terms,
            vocabulary,
            idf,
            num_docs,
            min_df,
        })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i as usize])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn transform(&self, doc: &str) -> SparseVector {
        self.transform_tokens(&tokenize(doc))
    }

    /// Raw count times idf, L2-normalized. Out-of-vocabulary tokens are ignored.
    pub fn transform_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for tok in tokens {
            if let Some(&i) = self.vocabulary.get(tok.as_ref()) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let weighted: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i, c as f64 * self.idf[i as usize]))
            .collect();
        let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SparseVector::default();
        }
        SparseVector::from_pairs(weighted.into_iter().map(|(i, w)| (i, w / norm)))
    }

    pub fn to_file(&self) -> TfidfFile {
        TfidfFile {
            terms: self
                .terms
                .iter()
                .zip(&self.idf)
                .enumerate()
                .map(|(index, (term, &idf))| TfidfTerm {
                    term: term.clone(),
                    index: index as u32,
                    idf,
                })
                .collect(),
            num_docs: self.num_docs,
            min_df: self.min_df,
            stopword_list_version: STOPWORD_LIST_VERSION.to_string(),
        }
    }

    pub fn from_file(file: TfidfFile) -> Result<Self> {
        let n = file.terms.len();
        let mut terms = vec![String::new(); n];
        let mut idf = vec![0.0; n];
        let mut seen = vec![false; n];
        for t in file.terms {
            let i = t.index as usize;
            if i >= n || seen[i] {
                return Err(Error::Validation(format!(
                    "tfidf: term indices are not a bijection onto 0..{n} (at {:?})",
                    t.term
                )));
            }
            if !(t.idf.is_finite() && t.idf > 0.0) {
                return Err(Error::Validation(format!("tfidf: non-positive idf for {:?}", t.term)));
            }
            seen[i] = true;
            terms[i] = t.term;
            idf[i] = t.idf;
        }
        let vocabulary: HashMap<String, u32> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        if vocabulary.len() != n {
            return Err(Error::Validation("tfidf: duplicate terms".into()));
        }
        Ok(Self {
            terms,
            vocabulary,
            idf,
            num_docs: file.num_docs,
            min_df: file.min_df,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(&self.to_file())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_slice(&raw)?)
    }
}

/// On-disk form of a fitted model (`tfidf.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfFile {
    pub terms: Vec<TfidfTerm>,
    pub num_docs: usize,
    pub min_df: usize,
    pub stopword_list_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfTerm {
    pub term: String,
    pub index: u32,
    pub idf: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn tokenize_keeps_two_letter_words() {
        assert_eq!(tokenize("Great HR tool!"), vec!["great", "hr", "tool"]);
    }

    #[test]
    fn tokenize_degenerate_inputs() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("the a an").is_empty());
        assert!(tokenize("x y z !!").is_empty());
    }

    #[test]
    fn idf_formula_examples() {
        let one = TfidfModel::fit(&["payroll"], TfidfOptions::default()).unwrap();
        assert_eq!(one.idf("payroll"), Some(1.0));

        let both = TfidfModel::fit(&["payroll", "payroll"], TfidfOptions::default()).unwrap();
        assert_eq!(both.idf("payroll"), Some(1.0));

        let half = TfidfModel::fit(&["payroll", "invoice"], TfidfOptions::default()).unwrap();
        assert!(close(half.idf("payroll").unwrap(), 1.4054651081081644, 1e-12));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty: [&str; 0] = [];
        assert!(TfidfModel::fit(&empty, TfidfOptions::default()).is_err());
    }

    #[test]
    fn oov_document_transforms_to_empty() {
        let m = TfidfModel::fit(&["payroll records"], TfidfOptions::default()).unwrap();
        assert!(m.transform("spreadsheet").is_empty());
        assert!(m.transform("").is_empty());
    }

    #[test]
    fn single_term_document_has_unit_weight() {
        let m = TfidfModel::fit(&["payroll records", "invoice"], TfidfOptions::default()).unwrap();
        let v = m.transform("invoice invoice");
        assert_eq!(v.nnz(), 1);
        assert_eq!(v.values()[0], 1.0);
    }

    #[test]
    fn vocabulary_is_lexicographic() {
        let m = TfidfModel::fit(&["zeta alpha", "mid"], TfidfOptions::default()).unwrap();
        assert_eq!(m.terms(), &["alpha", "mid", "zeta"]);
        assert_eq!(m.index_of("zeta"), Some(2));
    }

    #[test]
    fn min_df_and_max_features_prune() {
        let docs = ["alpha beta", "alpha gamma", "alpha beta delta"];
        let m = TfidfModel::fit(
            &docs,
            TfidfOptions {
                min_df: 2,
                max_features: None,
            },
        )
        .unwrap();
        assert_eq!(m.terms(), &["alpha", "beta"]);

        let m = TfidfModel::fit(
            &docs,
            TfidfOptions {
                min_df: 1,
                max_features: Some(2),
            },
        )
        .unwrap();
        assert_eq!(m.terms(), &["alpha", "beta"]);
    }

    #[test]
    fn file_round_trip() {
        let m = TfidfModel::fit(&["alpha beta", "alpha", "gamma"], TfidfOptions::default()).unwrap();
        let back = TfidfModel::from_file(m.to_file()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn file_with_index_gap_is_rejected() {
        let mut f = TfidfModel::fit(&["alpha beta"], TfidfOptions::default())
            .unwrap()
            .to_file();
        f.terms[1].index = 5;
        assert!(TfidfModel::from_file(f).is_err());
    }

    #[test]
    fn sparse_from_pairs_sorts_and_drops_zeros() {
        let v = SparseVector::from_pairs([(3, 1.0), (1, 0.0), (0, 2.0), (3, 1.0)]);
        assert_eq!(v.indices(), &[0, 3]);
        assert_eq!(v.values(), &[2.0, 2.0]);
        assert_eq!(v.get(3), 2.0);
        assert_eq!(v.get(1), 0.0);
        assert_eq!(v.min_dim(), 4);
    }
}

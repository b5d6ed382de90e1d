//! Dense embeddings: acquisition (precomputed file, remote service, or a
//! deterministic hashing fallback), cosine similarity and exhaustive top-k
//! preselection.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::remote::RemoteClient;
use crate::vectorize::tokenize;

pub const EMBEDDING_FORMAT: &str = "llmrs-embeddings";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("embedding component {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f32) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }
}

impl From<Vec<f32>> for EmbeddingVector {
    fn from(v: Vec<f32>) -> Self {
        Self(v)
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// `a·b / (|a||b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Validation(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Validation("cosine of a zero vector".into()));
    }
    Ok((dot(&a.0, &b.0) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone)]
struct IndexEntry {
    id: String,
    vector: EmbeddingVector,
    norm: f64,
}

/// Product embeddings sharing one provider and dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    dim: usize,
    provider: String,
    entries: Vec<IndexEntry>,
    positions: HashMap<String, usize>,
}

/// A preselected product and its cosine similarity to the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

struct Candidate<'a> {
    similarity: f64,
    id: &'a str,
}

impl Candidate<'_> {
    /// Greater means ranked earlier: higher similarity, then smaller id.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then_with(|| other.id.cmp(self.id))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rank_cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate<'_> {}
impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank_cmp(other)
    }
}

impl EmbeddingIndex {
    pub fn new(dim: usize, provider: impl Into<String>) -> Self {
        Self {
            dim,
            provider: provider.into(),
            entries: Vec::new(),
            positions: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: EmbeddingVector) -> Result<()> {
        let id = id.into();
        if vector.dim() != self.dim {
            return Err(Error::Validation(format!(
                "{id}: dimension {} does not match index dimension {}",
                vector.dim(),
                self.dim
            )));
        }
        let norm = vector.norm();
        if norm == 0.0 {
            return Err(Error::Validation(format!("{id}: zero vector cannot be indexed")));
        }
        if self.positions.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate id {id}")));
        }
        self.positions.insert(id.clone(), self.entries.len());
        self.entries.push(IndexEntry { id, vector, norm });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.positions.get(id).map(|&i| &self.entries[i].vector)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.entries.iter().map(|e| (e.id.as_str(), &e.vector))
    }

    /// The `k` most similar entries, most similar first; ties go to the
    /// smaller id.
    pub fn top_k_similar(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>> {
        self.top_k_filtered(query, k, |_| true)
    }

    /// [`top_k_similar`](Self::top_k_similar) restricted to ids accepted by `keep`.
    pub fn top_k_filtered(
        &self,
        query: &EmbeddingVector,
        k: usize,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::Validation(format!(
                "query dimension {} does not match index dimension {}",
                query.dim(),
                self.dim
            )));
        }
        let qn = query.norm();
        if qn == 0.0 {
            return Err(Error::Validation("query embedding is the zero vector".into()));
        }

        let mut heap: BinaryHeap<Reverse<Candidate<'_>>> = BinaryHeap::with_capacity(k + 1);
        for e in self.entries.iter().filter(|e| keep(&e.id)) {
            let c = Candidate {
                similarity: (dot(&query.0, &e.vector.0) / (qn * e.norm)).clamp(-1.0, 1.0),
                id: &e.id,
            };
            if heap.len() < k {
                heap.push(Reverse(c));
            } else if heap.peek().is_some_and(|worst| c > worst.0) {
                heap.pop();
                heap.push(Reverse(c));
            }
        }
        let mut best: Vec<Candidate<'_>> = heap.into_iter().map(|r| r.0).collect();
        best.sort_by(|a, b| b.cmp(a));
        Ok(best
            .into_iter()
            .map(|c| Neighbor {
                id: c.id.to_string(),
                similarity: c.similarity,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub provider: String,
}

impl EmbeddingHeader {
    pub fn new(dim: usize, provider: impl Into<String>) -> Self {
        Self {
            format: EMBEDDING_FORMAT.into(),
            version: EMBEDDING_VERSION,
            dim,
            provider: provider.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRow {
    id: String,
    vec: Vec<f32>,
}

pub fn load_embedding_file(path: &Path) -> Result<EmbeddingIndex> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), &path.display().to_string())
}

pub fn read_embeddings(reader: impl BufRead, source: &str) -> Result<EmbeddingIndex> {
    let mut lines = reader.lines().enumerate();
    let (header_no, header_line) = loop {
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
    let header: EmbeddingHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::format(source, header_no, format!("bad header: {e}")))?;
    if header.format != EMBEDDING_FORMAT {
        return Err(Error::format(
            source,
            header_no,
            format!("format {:?}, expected {EMBEDDING_FORMAT:?}", header.format),
        ));
    }
    if header.version != EMBEDDING_VERSION {
        return Err(Error::format(
            source,
            header_no,
            format!("unsupported version {}", header.version),
        ));
    }
    if header.dim == 0 {
        return Err(Error::format(source, header_no, "dim must be positive"));
    }

    let mut index = EmbeddingIndex::new(header.dim, header.provider);
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EmbeddingRow =
            serde_json::from_str(&line).map_err(|e| Error::format(source, line_no, e.to_string()))?;
        if row.vec.len() != index.dim {
            return Err(Error::format(
                source,
                line_no,
                format!(
                    "row {} has {} values, header dim is {}",
                    row.id,
                    row.vec.len(),
                    index.dim
                ),
            ));
        }
        let vector = EmbeddingVector::new(row.vec)
            .map_err(|e| Error::format(source, line_no, format!("row {}: {e}", row.id)))?;
        index
            .insert(row.id, vector)
            .map_err(|e| Error::format(source, line_no, e.to_string()))?;
    }
    Ok(index)
}

pub fn write_embeddings<'a>(
    mut out: impl Write,
    header: &EmbeddingHeader,
    rows: impl IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
) -> Result<()> {
    let io_err = |e| Error::io("<embedding output>", e);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n").map_err(io_err)?;
    for (id, v) in rows {
        serde_json::to_writer(
            &mut out,
            &EmbeddingRow {
                id: id.to_string(),
                vec: v.0.clone(),
            },
        )?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub trait EmbedProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }
}

/// Seed mixed into every token hash of the fallback embedder.
pub const FALLBACK_HASH_SEED: u64 = 0x6c6c_6d72_735f_7631;

/// 64-bit FNV-1a over the seed's little-endian bytes followed by the token.
pub fn token_hash(token: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    FALLBACK_HASH_SEED
        .to_le_bytes()
        .iter()
        .chain(token.as_bytes())
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Signed feature hashing of tokens into `dim` buckets, L2-normalized.
///
/// A token lands in bucket `h mod dim` with sign `+1` when bit 32 of `h` is
/// clear and `-1` otherwise. Texts without tokens (or whose contributions
/// cancel) map to the unit vector `e0`.
pub fn fallback_embed(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim >= 8, "fallback embedding dimension must be at least 8");
    let mut acc = vec![0.0f64; dim];
    for tok in tokenize(text) {
        let h = token_hash(&tok);
        let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
        acc[(h % dim as u64) as usize] += sign;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    let values = if norm == 0.0 {
        let mut e0 = vec![0.0f32; dim];
        e0[0] = 1.0;
        e0
    } else {
        acc.iter().map(|v| (v / norm) as f32).collect()
    };
    EmbeddingVector(values)
}

#[derive(Debug, Clone, Copy)]
pub struct FallbackEmbedder {
    dim: usize,
}

impl FallbackEmbedder {
    pub const NAME: &'static str = "fallback-hash-v1";
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Result<Self> {
        if dim < 8 {
            return Err(Error::ProviderConfig(format!(
                "fallback embedding dimension must be at least 8, got {dim}"
            )));
        }
        Ok(Self { dim })
    }
}

impl EmbedProvider for FallbackEmbedder {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| fallback_embed(t, self.dim)).collect())
    }
}

#[derive(Serialize)]
struct TextsRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct VectorsResponse {
    vectors: Vec<Vec<f32>>,
}

/// Remote sentence embedder: `POST {"texts": [...]}` returning
/// `{"vectors": [[...], ...]}` in request order.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: RemoteClient,
    name: String,
    dim: usize,
    batch_size: usize,
}

impl HttpEmbedder {
    pub const ENDPOINT_VAR: &'static str = "LLMRS_EMBED_ENDPOINT";

    pub fn new(client: RemoteClient, name: impl Into<String>, dim: usize, batch_size: usize) -> Self {
        Self {
            client,
            name: name.into(),
            dim,
            batch_size: batch_size.max(1),
        }
    }
}

impl EmbedProvider for HttpEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            let resp: VectorsResponse = self.client.post_json(&TextsRequest { texts: chunk })?;
            if resp.vectors.len() != chunk.len() {
                return Err(Error::Provider(format!(
                    "{} returned {} vectors for {} texts",
                    self.client.endpoint(),
                    resp.vectors.len(),
                    chunk.len()
                )));
            }
            for v in resp.vectors {
                if v.len() != self.dim {
                    return Err(Error::Provider(format!(
                        "{} returned dimension {}, expected {}",
                        self.client.endpoint(),
                        v.len(),
                        self.dim
                    )));
                }
                out.push(EmbeddingVector::new(v).map_err(|e| Error::Provider(e.to_string()))?);
            }
        }
        Ok(out)
    }
}

/// Serves vectors already present in an interchange file. It can re-emit
/// product embeddings but cannot embed unseen text.
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    index: EmbeddingIndex,
}

impl FileEmbedder {
    pub fn new(index: EmbeddingIndex) -> Self {
        Self { index }
    }

    pub fn index(&self) -> &EmbeddingIndex {
        &self.index
    }
}

/// Embeds every product description with `provider` and writes the index
/// file. Output goes to a temporary sibling first and is renamed into place,
/// so a failed run leaves no partial file behind.
pub fn precompute(catalog: &Catalog, provider: &dyn EmbedProvider, path: &Path, batch_size: usize) -> Result<usize> {
    let tmp = tmp_sibling(path);
    let result = (|| {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut out = BufWriter::new(file);
        let header = EmbeddingHeader::new(provider.dim(), provider.name());
        write_embeddings(&mut out, &header, std::iter::empty())?;
        let products = catalog.products();
        for chunk in products.chunks(batch_size.max(1)) {
            let texts: Vec<&str> = chunk.iter().map(|p| p.description.as_str()).collect();
            let vectors = provider.embed_batch(&texts)?;
            if vectors.len() != chunk.len() {
                return Err(Error::Provider(format!(
                    "provider returned {} vectors for {} texts",
                    vectors.len(),
                    chunk.len()
                )));
            }
            for (p, v) in chunk.iter().zip(&vectors) {
                if v.dim() != provider.dim() {
                    return Err(Error::Provider(format!(
                        "{}: dimension {} from provider declaring {}",
                        p.id,
                        v.dim(),
                        provider.dim()
                    )));
                }
                serde_json::to_writer(
                    &mut out,
                    &EmbeddingRow {
                        id: p.id.clone(),
                        vec: v.0.clone(),
                    },
                )?;
                out.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(&tmp, e))?;
        Ok(products.len())
    })();
    match result {
        Ok(n) => {
            std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
            Ok(n)
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Copies the vectors of catalog products out of an existing index (for
/// example a model export) into a fresh file, in catalog order.
pub fn reindex_from_file(catalog: &Catalog, source: &FileEmbedder, path: &Path) -> Result<usize> {
    let index = source.index();
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for p in catalog.products() {
        match index.get(&p.id) {
            Some(v) => rows.push((p.id.as_str(), v)),
            None => missing.push(p.id.as_str()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Provider(format!(
            "{} product(s) missing from embedding file, first: {}",
            missing.len(),
            missing[0]
        )));
    }
    let tmp = tmp_sibling(path);
    let write = || -> Result<()> {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        write_embeddings(
            BufWriter::new(file),
            &EmbeddingHeader::new(index.dim(), index.provider()),
            rows.iter().copied(),
        )
    };
    if let Err(e) = write() {
        let _ = std::fs::remove_file(&tmp);
        return Err(e);
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(rows.len())
}

pub(crate) fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

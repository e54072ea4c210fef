//! Embeddings, cosine similarity, and an exact-scan vector index.
//!
//! All artifact kinds — entities, memories, relations, facts, passages,
//! queries — go through the same [`TextEmbedder`] boundary. Production talks
//! to an HTTP embedding endpoint; offline runs use [`HashEmbedder`], a
//! deterministic feature-hashing embedder (L2-normalized unigram+bigram
//! counts) that makes the whole pipeline reproducible with zero network
//! traffic.
//!
//! The index is a deliberate exact scan: corpora here are desk-scale
//! (hundreds to low tens of thousands of items), where a scan is both fast
//! enough and free of recall loss. Ties in `top_k` break by ascending id so
//! rankings are total and stable.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::net;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// What a piece of text *is*; lets a provider pick kind-specific instruction
/// prefixes. The hash embedder ignores it (retrieval relies on raw token
/// overlap between queries and fact/passage strings).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingKind {
    Entity,
    Memory,
    Relation,
    Fact,
    Passage,
    Query,
}

/// A dense vector. Construction validates finiteness, so downstream math
/// never meets NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<S: Scalar> {
    values: Vec<S>,
}

impl<S: Scalar> Embedding<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Embedding("embedding has zero dimensions".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embedding("embedding contains non-finite values".into()));
        }
        Ok(Embedding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn norm(&self) -> S {
        self.values
            .iter()
            .map(|v| *v * *v)
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }
}

/// Cosine similarity. Errors on dimension mismatch or a zero-norm side —
/// callers are expected to have filtered degenerate vectors already.
pub fn cosine<S: Scalar>(a: &Embedding<S>, b: &Embedding<S>) -> Result<S> {
    if a.dim() != b.dim() {
        return Err(Error::Embedding(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut dot = S::zero();
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += *x * *y;
    }
    let na = a.norm();
    let nb = b.norm();
    if na == S::zero() || nb == S::zero() {
        return Err(Error::Embedding("cosine of a zero-norm embedding".into()));
    }
    Ok(dot / (na * nb))
}

// ---------------------------------------------------------------------------
// Vector index
// ---------------------------------------------------------------------------

/// Exact-scan index mapping item ids to embeddings of one fixed dimension.
/// Rejects duplicate ids, dimension mismatches, and zero-norm vectors, so a
/// populated index is always safe to score against.
#[derive(Debug, Clone)]
pub struct VectorIndex<S: Scalar> {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Embedding<S>>,
    by_id: HashMap<String, usize>,
}

impl<S: Scalar> VectorIndex<S> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Embedding("index dimension must be positive".into()));
        }
        Ok(VectorIndex {
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            by_id: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, embedding: Embedding<S>) -> Result<()> {
        let id = id.into();
        if embedding.dim() != self.dim {
            return Err(Error::Embedding(format!(
                "item `{id}` has dimension {}, index expects {}",
                embedding.dim(),
                self.dim
            )));
        }
        if embedding.norm() == S::zero() {
            return Err(Error::Embedding(format!("item `{id}` has zero norm")));
        }
        if self.by_id.contains_key(&id) {
            return Err(Error::Embedding(format!("duplicate item id `{id}`")));
        }
        self.by_id.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(embedding);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Embedding<S>> {
        self.by_id.get(id).map(|&i| &self.vectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding<S>)> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.vectors.iter())
    }

    // -- persistence --------------------------------------------------------

    const MAGIC: &'static str = "gistrag-index";
    const VERSION: u32 = 1;

    /// Writes a versioned line-delimited file: a header record, then one
    /// `{id, v}` record per item, sorted by id for byte-stable output.
    /// Values are stored as f64, which round-trips both scalar types.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header = serde_json::json!({
            "magic": Self::MAGIC,
            "version": Self::VERSION,
            "dim": self.dim,
            "count": self.len(),
        });
        writeln!(w, "{header}")?;

        let mut order: Vec<usize> = (0..self.ids.len()).collect();
        order.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]));
        for i in order {
            let record = IndexRecord {
                id: self.ids[i].clone(),
                v: self.vectors[i].values.iter().map(|s| s.to_f64_lossy()).collect(),
            };
            writeln!(w, "{}", serde_json::to_string(&record).expect("record serializes"))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let bad = |msg: String| Error::Persistence {
            path: display.clone(),
            msg,
        };
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();

        let header_line = lines
            .next()
            .ok_or_else(|| bad("file is empty".into()))??;
        let header: IndexHeader = serde_json::from_str(&header_line)
            .map_err(|e| bad(format!("unreadable header: {e}")))?;
        if header.magic != Self::MAGIC {
            return Err(bad(format!("`{}` is not a vector index file", header.magic)));
        }
        if header.version != Self::VERSION {
            return Err(bad(format!(
                "unsupported index version {} (expected {})",
                header.version,
                Self::VERSION
            )));
        }

        let mut index = VectorIndex::new(header.dim)?;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: IndexRecord = serde_json::from_str(&line)
                .map_err(|e| bad(format!("corrupt record on line {}: {e}", i + 2)))?;
            let values = record.v.iter().map(|&x| S::from_f64_lossy(x)).collect();
            let embedding = Embedding::new(values)
                .map_err(|e| bad(format!("invalid vector on line {}: {e}", i + 2)))?;
            index
                .insert(record.id, embedding)
                .map_err(|e| bad(format!("invalid record on line {}: {e}", i + 2)))?;
        }
        if index.len() != header.count {
            return Err(bad(format!(
                "truncated index: header promises {} records, found {}",
                header.count,
                index.len()
            )));
        }
        Ok(index)
    }
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    magic: String,
    version: u32,
    dim: usize,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexRecord {
    id: String,
    v: Vec<f64>,
}

/// Exact top-k by cosine against the whole index: descending score, ties by
/// ascending id. Returns `min(k, len)` items; an empty index yields an empty
/// list. A zero-norm query errors (cosine contract).
pub fn top_k<S: Scalar>(
    index: &VectorIndex<S>,
    query: &Embedding<S>,
    k: usize,
) -> Result<Vec<(String, S)>> {
    let mut scored = Vec::with_capacity(index.len());
    for (id, vector) in index.iter() {
        scored.push((id.to_string(), cosine(query, vector)?));
    }
    sort_scored(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

/// Shared ranking order: score descending, then id ascending. Scores are
/// finite by construction, so `partial_cmp` cannot fail meaningfully.
pub(crate) fn sort_scored<S: Scalar>(scored: &mut [(String, S)]) {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
}

// ---------------------------------------------------------------------------
// Embedders
// ---------------------------------------------------------------------------

/// Text-to-vector boundary shared by the pipeline.
pub trait TextEmbedder<S: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;

    /// Embeds a batch, preserving input order. Must error on texts with no
    /// tokens rather than return a degenerate vector.
    fn embed_batch(&self, kind: EmbeddingKind, texts: &[&str]) -> Result<Vec<Embedding<S>>>;

    fn embed(&self, kind: EmbeddingKind, text: &str) -> Result<Embedding<S>> {
        let mut batch = self.embed_batch(kind, &[text])?;
        batch
            .pop()
            .ok_or_else(|| Error::Embedding("embedder returned an empty batch".into()))
    }
}

/// Deterministic feature-hashing embedder: lowercase whitespace tokens,
/// unigram (+ optional bigram) counts hashed into `dim` buckets with FNV-1a,
/// then L2-normalized. Any non-empty token stream yields a unit-norm vector,
/// identical across platforms and runs.
#[derive(Debug, Clone)]
pub struct HashEmbedder<S: Scalar> {
    dim: usize,
    bigrams: bool,
    _scalar: PhantomData<S>,
}

/// Default bucket count for the hash embedder.
pub const DEFAULT_HASH_DIM: usize = 256;

impl<S: Scalar> HashEmbedder<S> {
    pub fn new(dim: usize, bigrams: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Embedding("embedder dimension must be positive".into()));
        }
        Ok(HashEmbedder {
            dim,
            bigrams,
            _scalar: PhantomData,
        })
    }

    fn embed_one(&self, text: &str) -> Result<Embedding<S>> {
        let lowered = text.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(Error::Embedding(
                "cannot embed text with no tokens".into(),
            ));
        }
        let mut counts = vec![S::zero(); self.dim];
        let mut bump = |feature: String| {
            let bucket = (fnv1a64(feature.as_bytes()) % self.dim as u64) as usize;
            counts[bucket] += S::one();
        };
        for t in &tokens {
            bump(format!("u:{t}"));
        }
        if self.bigrams {
            for pair in tokens.windows(2) {
                bump(format!("b:{} {}", pair[0], pair[1]));
            }
        }
        let norm = counts
            .iter()
            .map(|v| *v * *v)
            .fold(S::zero(), |a, b| a + b)
            .sqrt();
        for v in &mut counts {
            *v /= norm;
        }
        Embedding::new(counts)
    }
}

impl<S: Scalar> Default for HashEmbedder<S> {
    fn default() -> Self {
        HashEmbedder::new(DEFAULT_HASH_DIM, true).expect("default dimension is positive")
    }
}

impl<S: Scalar> TextEmbedder<S> for HashEmbedder<S> {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, _kind: EmbeddingKind, texts: &[&str]) -> Result<Vec<Embedding<S>>> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

/// FNV-1a, fixed 64-bit variant. Hand-rolled so hashed buckets are stable
/// across platforms and toolchain versions (std's hashers make no such
/// promise).
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Embedder backed by an OpenAI-compatible `/embeddings` endpoint.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key_env: &str,
        dim: usize,
        timeout_secs: u64,
    ) -> Result<Self> {
        Ok(HttpEmbedder {
            client: net::build_client(timeout_secs)?,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(api_key_env).ok(),
            dim,
        })
    }
}

impl<S: Scalar> TextEmbedder<S> for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, _kind: EmbeddingKind, texts: &[&str]) -> Result<Vec<Embedding<S>>> {
        if texts.iter().any(|t| t.split_whitespace().next().is_none()) {
            return Err(Error::Embedding("cannot embed text with no tokens".into()));
        }
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let reply = net::post_json(&self.client, &self.endpoint, self.api_key.as_deref(), &body)?;
        let data = reply["data"]
            .as_array()
            .ok_or_else(|| Error::provider("embedding response has no data array", Some(reply.to_string())))?;
        if data.len() != texts.len() {
            return Err(Error::provider(
                format!("asked for {} embeddings, received {}", texts.len(), data.len()),
                None,
            ));
        }
        let mut out = Vec::with_capacity(data.len());
        for item in data {
            let raw = item["embedding"]
                .as_array()
                .ok_or_else(|| Error::provider("embedding entry is not an array", None))?;
            let mut values = Vec::with_capacity(raw.len());
            for v in raw {
                let x = v
                    .as_f64()
                    .ok_or_else(|| Error::provider("embedding entry holds a non-number", None))?;
                values.push(S::from_f64_lossy(x));
            }
            let e = Embedding::new(values)?;
            if e.dim() != self.dim {
                return Err(Error::Embedding(format!(
                    "endpoint returned dimension {}, config expects {}",
                    e.dim(),
                    self.dim
                )));
            }
            out.push(e);
        }
        Ok(out)
    }
}

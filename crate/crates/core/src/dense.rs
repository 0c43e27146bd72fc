//! Trainable dense encoder and exact cosine index.
//!
//! Text is hashed into `F` count buckets, projected by a `D×F` matrix and L2
//! normalized. The index stores one normalized vector per passage and answers
//! top-k queries by exhaustive scoring.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::corpus::ensure_unique;
use crate::error::{Error, Result};
use crate::ranking::{desc_score_then_id, RankedList};
use crate::text::{fnv1a64, terms};

pub const DEFAULT_FEATURE_DIM: usize = 32_768;
pub const DEFAULT_EMBED_DIM: usize = 64;

const MODEL_MAGIC: &[u8; 8] = b"DRLMMDL1";
const INDEX_MAGIC: &[u8; 8] = b"DRLMIDX1";

/// SHA-256 of a model's serialized bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

/// Sparse bucket counts, sorted by bucket.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseFeatures {
    pub entries: Vec<(u32, f64)>,
}

impl SparseFeatures {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A unit-norm embedding, or the all-zero vector flagged `degenerate` when
/// the projection was exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Normalizes `raw`; a zero vector becomes a degenerate embedding.
    pub fn normalized(raw: Vec<f64>) -> Self {
        let norm = l2(&raw);
        if norm > 0.0 {
            Self {
                values: raw.into_iter().map(|x| x / norm).collect(),
                degenerate: false,
            }
        } else {
            Self {
                values: vec![0.0; raw.len()],
                degenerate: true,
            }
        }
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine of two embeddings, clamped to `[-1, 1]`; 0 if either is degenerate.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    if u.degenerate || v.degenerate {
        return Ok(0.0);
    }
    Ok(dot(&u.values, &v.values).clamp(-1.0, 1.0))
}

/// Hash-bucket features followed by a linear projection.
#[derive(Debug)]
pub struct EmbeddingModel {
    feature_dim: usize,
    embed_dim: usize,
    hash_seed: u64,
    /// Row-major `embed_dim × feature_dim`.
    weights: Vec<f64>,
    fingerprint: OnceLock<Fingerprint>,
}

impl Clone for EmbeddingModel {
    fn clone(&self) -> Self {
        Self {
            feature_dim: self.feature_dim,
            embed_dim: self.embed_dim,
            hash_seed: self.hash_seed,
            weights: self.weights.clone(),
            fingerprint: self.fingerprint.clone(),
        }
    }
}

impl PartialEq for EmbeddingModel {
    fn eq(&self, other: &Self) -> bool {
        self.feature_dim == other.feature_dim
            && self.embed_dim == other.embed_dim
            && self.hash_seed == other.hash_seed
            && self.weights == other.weights
    }
}

fn check_dims(feature_dim: usize, embed_dim: usize) -> Result<()> {
    if feature_dim == 0 || embed_dim == 0 || embed_dim > feature_dim {
        return Err(Error::Config(format!(
            "need 0 < embed_dim <= feature_dim, got D={embed_dim} F={feature_dim}"
        )));
    }
    Ok(())
}

impl EmbeddingModel {
    /// Gaussian `N(0, 1/D)` weights drawn from `init_seed`, rounded to f32 so
    /// that a saved and reloaded model is identical to the in-memory one.
    pub fn random(
        feature_dim: usize,
        embed_dim: usize,
        hash_seed: u64,
        init_seed: u64,
    ) -> Result<Self> {
        check_dims(feature_dim, embed_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let normal = Normal::new(0.0, 1.0 / (embed_dim as f64).sqrt()).expect("valid sigma");
        let weights = (0..feature_dim * embed_dim)
            .map(|_| f64::from(normal.sample(&mut rng) as f32))
            .collect();
        Self::from_weights(feature_dim, embed_dim, hash_seed, weights)
    }

    pub fn from_weights(
        feature_dim: usize,
        embed_dim: usize,
        hash_seed: u64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        check_dims(feature_dim, embed_dim)?;
        if weights.len() != feature_dim * embed_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim * embed_dim,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("projection weights must be finite".into()));
        }
        Ok(Self {
            feature_dim,
            embed_dim,
            hash_seed,
            weights,
            fingerprint: OnceLock::new(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hash_seed(&self) -> u64 {
        self.hash_seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        self.fingerprint = OnceLock::new();
        &mut self.weights
    }

    /// Rounds every weight to the nearest f32, the precision of the model file.
    pub(crate) fn round_to_storage(&mut self) {
        for w in self.weights_mut() {
            *w = f64::from(*w as f32);
        }
    }

    pub fn bucket(&self, term: &str) -> u32 {
        (fnv1a64(self.hash_seed, term.as_bytes()) % self.feature_dim as u64) as u32
    }

    pub fn featurize(&self, text: &str) -> SparseFeatures {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for t in terms(text) {
            *counts.entry(self.bucket(&t)).or_default() += 1.0;
        }
        let mut entries: Vec<_> = counts.into_iter().collect();
        entries.sort_unstable_by_key(|&(b, _)| b);
        SparseFeatures { entries }
    }

    /// `W · x` before normalization.
    pub fn project(&self, x: &SparseFeatures) -> Vec<f64> {
        let f = self.feature_dim;
        (0..self.embed_dim)
            .map(|d| {
                let row = &self.weights[d * f..(d + 1) * f];
                x.entries.iter().map(|&(j, c)| row[j as usize] * c).sum()
            })
            .collect()
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        EmbeddingVector::normalized(self.project(&self.featurize(text)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 4 * self.weights.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(self.feature_dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.embed_dim as u64).to_le_bytes());
        out.extend_from_slice(&self.hash_seed.to_le_bytes());
        for &w in &self.weights {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        let f = r.usize()?;
        let d = r.usize()?;
        let seed = r.u64()?;
        check_dims(f, d)?;
        let n = f
            .checked_mul(d)
            .ok_or_else(|| Error::Config("model dimensions overflow".into()))?;
        let weights = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<_>>()?;
        r.finish()?;
        Self::from_weights(f, d, seed, weights)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        *self
            .fingerprint
            .get_or_init(|| Fingerprint(Sha256::digest(self.to_bytes()).into()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| with_path(e, path))
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { reason, .. } => Error::Format {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    }
}

/// Exact flat index of passage embeddings stored at f32 precision.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    feature_dim: usize,
    dim: usize,
    hash_seed: u64,
    fingerprint: Fingerprint,
    ids: Vec<String>,
    /// Row-major `len × dim`.
    vectors: Vec<f32>,
}

impl VectorIndex {
    /// Embeds every `(passage_id, text)` in input order.
    pub fn build<'a, I>(model: &EmbeddingModel, passages: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let passages: Vec<_> = passages.into_iter().collect();
        ensure_unique(passages.iter().map(|(id, _)| *id))?;
        let mut index = Self::empty(model);
        for (id, text) in passages {
            index.push(id.to_string(), &model.embed(text));
        }
        Ok(index)
    }

    fn empty(model: &EmbeddingModel) -> Self {
        Self {
            feature_dim: model.feature_dim(),
            dim: model.embed_dim(),
            hash_seed: model.hash_seed(),
            fingerprint: model.fingerprint(),
            ids: Vec::new(),
            vectors: Vec::new(),
        }
    }

    /// Index over precomputed vectors, attributed to `model`.
    pub fn from_vectors(
        model: &EmbeddingModel,
        entries: Vec<(String, EmbeddingVector)>,
    ) -> Result<Self> {
        ensure_unique(entries.iter().map(|(id, _)| id.as_str()))?;
        let mut index = Self::empty(model);
        for (id, v) in entries {
            if v.dim() != index.dim {
                return Err(Error::DimensionMismatch {
                    expected: index.dim,
                    got: v.dim(),
                });
            }
            index.push(id, &v);
        }
        Ok(index)
    }

    fn push(&mut self, id: String, v: &EmbeddingVector) {
        self.ids.push(id);
        self.vectors.extend(v.values.iter().map(|&x| x as f32));
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn check_model(&self, model: &EmbeddingModel) -> Result<()> {
        let fp = model.fingerprint();
        if fp != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                index: self.fingerprint.to_string(),
                model: fp.to_string(),
            });
        }
        Ok(())
    }

    /// Score of every entry against `query`, in index order.
    pub fn scores(&self, query: &EmbeddingVector) -> Result<Vec<f64>> {
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        Ok((0..self.len())
            .map(|i| {
                self.vector(i)
                    .iter()
                    .zip(&query.values)
                    .map(|(&a, &b)| f64::from(a) * b)
                    .sum()
            })
            .collect())
    }

    /// Exact top-`k` by cosine, ties by ascending passage id. A degenerate
    /// query matches nothing.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<RankedList> {
        let scores = self.scores(query)?;
        if query.degenerate || k == 0 {
            return Ok(RankedList::default());
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let cmp = |&a: &usize, &b: &usize| {
            desc_score_then_id(scores[a], &self.ids[a], scores[b], &self.ids[b])
        };
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_unstable_by(cmp);
        Ok(RankedList::from_scored(
            order
                .into_iter()
                .map(|i| (self.ids[i].clone(), scores[i]))
                .collect(),
        ))
    }

    /// Embeds `text` with `model` (which must have built this index) and searches.
    pub fn search_text(&self, model: &EmbeddingModel, text: &str, k: usize) -> Result<RankedList> {
        self.check_model(model)?;
        self.search(&model.embed(text), k)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&(self.feature_dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&self.hash_seed.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.fingerprint.0);
        for (i, id) in self.ids.iter().enumerate() {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in self.vector(i) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(INDEX_MAGIC)?;
        let feature_dim = r.usize()?;
        let dim = r.usize()?;
        let hash_seed = r.u64()?;
        let count = r.usize()?;
        check_dims(feature_dim, dim)?;
        let mut fp = [0u8; 32];
        fp.copy_from_slice(r.take(32)?);
        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let id = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.error("passage id is not utf-8"))?;
            ids.push(id.to_string());
            for _ in 0..dim {
                vectors.push(r.f32()?);
            }
        }
        r.finish()?;
        ensure_unique(ids.iter().map(String::as_str))?;
        Ok(Self {
            feature_dim,
            dim,
            hash_seed,
            fingerprint: Fingerprint(fp),
            ids,
            vectors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| with_path(e, path))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn error(&self, reason: &str) -> Error {
        Error::Format {
            path: Default::default(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.error("unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(self.error("bad magic bytes"));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.error("size does not fit in usize"))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error("trailing bytes"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model() -> EmbeddingModel {
        EmbeddingModel::random(256, 16, 7, 1).unwrap()
    }

    #[test]
    fn featurize_normalizes_text() {
        let m = small_model();
        assert!(m.featurize("").is_empty());
        let f = m.featurize("cat cat");
        assert_eq!(f.entries, vec![(m.bucket("cat"), 2.0)]);
        assert_eq!(m.featurize("Cat, cat!"), f);
    }

    #[test]
    fn embed_is_unit_and_deterministic() {
        let m = small_model();
        let e = m.embed("");
        assert!(e.degenerate);
        assert!(e.values.iter().all(|&x| x == 0.0));
        let v = m.embed("dense passage retrieval");
        assert!(!v.degenerate);
        assert!((l2(&v.values) - 1.0).abs() <= 1e-9);
        assert_eq!(v, m.embed("dense passage retrieval"));
    }

    #[test]
    fn zero_projection_is_degenerate() {
        let m = EmbeddingModel::from_weights(4, 2, 0, vec![0.0; 8]).unwrap();
        assert!(m.embed("anything").degenerate);
    }

    #[test]
    fn cosine_values() {
        let unit = |v: Vec<f64>| EmbeddingVector::normalized(v);
        let a = unit(vec![1.0, 0.0]);
        let b = unit(vec![1.0, 1.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&a, &unit(vec![0.0, 3.0])).unwrap(), 0.0);
        assert!((cosine(&a, &b).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine(&a, &unit(vec![0.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine(&a, &unit(vec![1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn model_validation() {
        assert!(EmbeddingModel::random(4, 8, 0, 0).is_err());
        assert!(EmbeddingModel::from_weights(2, 1, 0, vec![f64::NAN, 0.0]).is_err());
        assert!(EmbeddingModel::from_weights(2, 1, 0, vec![0.0]).is_err());
    }

    #[test]
    fn model_bytes_round_trip() {
        let m = small_model();
        let back = EmbeddingModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
        let mut bytes = m.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(EmbeddingModel::from_bytes(&bytes), Err(Error::Format { .. })));
        assert!(EmbeddingModel::from_bytes(&m.to_bytes()[..40]).is_err());
    }

    #[test]
    fn index_search_and_persistence() {
        let m = small_model();
        let docs = [
            ("p1", "quantum error correction"),
            ("p2", "image segmentation networks"),
            ("p3", "stabilizer codes for qubits"),
        ];
        let idx = VectorIndex::build(&m, docs).unwrap();
        assert_eq!(idx.len(), 3);
        let hits = idx.search_text(&m, "image segmentation networks", 1).unwrap();
        assert_eq!(hits.id_vec(), ["p2"]);
        assert!((hits.items[0].score.unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(idx.search_text(&m, "stuff", 10).unwrap().len(), 3);
        assert!(idx.search_text(&m, "", 10).unwrap().is_empty());

        let back = VectorIndex::from_bytes(&idx.to_bytes()).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_bytes(), VectorIndex::build(&m, docs).unwrap().to_bytes());

        let other = EmbeddingModel::random(256, 16, 7, 2).unwrap();
        assert!(matches!(
            idx.search_text(&other, "x", 1),
            Err(Error::FingerprintMismatch { .. })
        ));
        assert!(matches!(
            VectorIndex::build(&m, [("a", "x"), ("a", "y")]),
            Err(Error::DuplicateId(_))
        ));
        assert!(VectorIndex::build(&m, std::iter::empty()).unwrap().is_empty());
    }
}

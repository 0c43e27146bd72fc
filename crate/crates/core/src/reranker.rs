//! Joint query–passage scoring applied to the retriever's candidates.
//!
//! The local scorer is a linear head over six interaction features computed
//! from the query and passage together, so passages cannot be scored ahead
//! of the query.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::{cosine, EmbeddingModel};
use crate::error::{Error, Result};
use crate::ranking::{RankedItem, RankedList};
use crate::service::HttpService;
use crate::store::Store;
use crate::text::{terms, IdfTable};

pub const FEATURE_COUNT: usize = 6;
pub const FEATURE_SPEC_VERSION: u32 = 1;
pub const DEFAULT_CANDIDATES: usize = 200;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "cosine",
    "jaccard",
    "idf_overlap",
    "query_coverage",
    "log_passage_len",
    "log_query_len",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

/// Interaction features, in [`FEATURE_NAMES`] order.
pub fn features(query: &str, passage: &str, model: &EmbeddingModel, idf: &IdfTable) -> FeatureVector {
    let q_terms = terms(query);
    let p_terms = terms(passage);
    let q: HashSet<&str> = q_terms.iter().map(String::as_str).collect();
    let p: HashSet<&str> = p_terms.iter().map(String::as_str).collect();
    let shared: Vec<&str> = q.intersection(&p).copied().collect();
    let union = q.union(&p).count();

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let q_idf: f64 = sorted_sum(q.iter().map(|t| idf.idf(t)));
    let shared_idf: f64 = sorted_sum(shared.iter().map(|t| idf.idf(t)));
    let cos = cosine(&model.embed(query), &model.embed(passage)).unwrap_or(0.0);

    FeatureVector(vec![
        cos,
        ratio(shared.len() as f64, union as f64),
        ratio(shared_idf, q_idf),
        ratio(shared.len() as f64, q.len() as f64),
        (p_terms.len() as f64).ln_1p(),
        (q_terms.len() as f64).ln_1p(),
    ])
}

// Hash-set iteration order varies; sum in a fixed order for reproducibility.
fn sorted_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Linear scoring head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossScorer {
    pub version: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Default for CrossScorer {
    /// Starts as the retriever's own ordering: all weight on the cosine feature.
    fn default() -> Self {
        let mut weights = vec![0.0; FEATURE_COUNT];
        weights[0] = 1.0;
        Self {
            version: FEATURE_SPEC_VERSION,
            weights,
            bias: 0.0,
        }
    }
}

impl CrossScorer {
    pub fn zeros() -> Self {
        Self {
            version: FEATURE_SPEC_VERSION,
            weights: vec![0.0; FEATURE_COUNT],
            bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != FEATURE_SPEC_VERSION {
            return Err(Error::Config(format!(
                "scorer feature spec version {} (expected {FEATURE_SPEC_VERSION})",
                self.version
            )));
        }
        if self.weights.len() != FEATURE_COUNT {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                got: self.weights.len(),
            });
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("scorer weights must be finite".into()));
        }
        Ok(())
    }

    pub fn score(&self, f: &FeatureVector) -> Result<f64> {
        if f.0.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: f.0.len(),
            });
        }
        Ok(self.weights.iter().zip(&f.0).map(|(w, x)| w * x).sum::<f64>() + self.bias)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Self = serde_json::from_str(&raw)?;
        s.validate()?;
        Ok(s)
    }
}

/// Scores a batch of passages for one query.
pub trait PassageScorer {
    fn score_passages(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>>;
}

/// The in-process linear scorer with the context its features need.
pub struct LocalScorer<'a> {
    pub scorer: &'a CrossScorer,
    pub model: &'a EmbeddingModel,
    pub idf: &'a IdfTable,
}

impl PassageScorer for LocalScorer<'_> {
    fn score_passages(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>> {
        passages
            .iter()
            .map(|p| self.scorer.score(&features(query, p, self.model, self.idf)))
            .collect()
    }
}

/// Scoring service reached over HTTP, queried in fixed-size batches.
pub struct RemoteScorer {
    pub service: HttpService,
    pub batch_size: usize,
}

impl PassageScorer for RemoteScorer {
    fn score_passages(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(passages.len());
        for chunk in passages.chunks(self.batch_size.max(1)) {
            let owned: Vec<String> = chunk.iter().map(|s| s.to_string()).collect();
            out.extend(self.service.score(query, &owned)?);
        }
        Ok(out)
    }
}

/// Reorders `candidates` by score descending; ties keep their incoming order.
pub fn rerank_with_scores(candidates: &RankedList, scores: &[f64]) -> Result<RankedList> {
    if scores.len() != candidates.len() {
        return Err(Error::DimensionMismatch {
            expected: candidates.len(),
            got: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // stable sort: equal scores stay in retriever order
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(RankedList::new(
        order
            .into_iter()
            .map(|i| RankedItem {
                id: candidates.items[i].id.clone(),
                score: Some(scores[i]),
            })
            .collect(),
    ))
}

/// Scores every candidate passage against `query` and reorders.
pub fn rerank(
    scorer: &dyn PassageScorer,
    query: &str,
    candidates: &RankedList,
    store: &Store,
) -> Result<RankedList> {
    let texts = candidates
        .ids()
        .map(|id| store.require_passage(id).map(|p| p.text.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let scores = scorer.score_passages(query, &texts)?;
    rerank_with_scores(candidates, &scores)
}

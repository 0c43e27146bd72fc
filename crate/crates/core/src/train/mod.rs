//! Contrastive training for the retriever and the reranker, and hard-negative
//! mining that links the two.

mod loss;
mod mining;
mod rerank;
mod retriever;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, write_jsonl};
use crate::error::{Error, Result};
use crate::store::Store;

pub use loss::{batch_loss, info_nce_loss, info_nce_with_grad};
pub use mining::mine_hard_negatives;
pub use rerank::{group_features, group_loss_grad, train_reranker, train_reranker_on_features, GroupFeatures};
pub use retriever::{accumulate_grad, retriever_grad, train_retriever, GradOutput, SparseGrad};

/// One pseudo-query with the passage it was generated from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPassagePair {
    pub query: String,
    pub positive_passage_id: String,
    #[serde(skip)]
    pub positive_text: String,
}

impl QueryPassagePair {
    pub fn new(query: impl Into<String>, passage_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            positive_passage_id: passage_id.into(),
            positive_text: text.into(),
        }
    }
}

/// A query, its positive passage and mined hard negatives (all by passage id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankTrainGroup {
    pub query: String,
    pub positive_passage_id: String,
    pub negative_passage_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub temperature: f64,
    /// Positive pairs per batch; each query sees `batch_size - 1` in-batch negatives.
    pub batch_size: usize,
    pub micro_batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub negatives_per_group: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            temperature: 0.05,
            batch_size: 32,
            micro_batch_size: 8,
            learning_rate: 0.1,
            epochs: 5,
            seed: 0,
            negatives_per_group: 7,
        }
    }
}

impl TrainConfig {
    /// Defaults for reranker training (smaller step size).
    pub fn reranker() -> Self {
        Self {
            learning_rate: 0.05,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.temperature > 0.0) {
            return bad("temperature must be > 0");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.micro_batch_size == 0 || self.micro_batch_size > self.batch_size {
            return bad("micro_batch_size must be in 1..=batch_size");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.negatives_per_group == 0 {
            return bad("negatives_per_group must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub pairs_skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.epochs)
    }
}

pub fn read_pairs(path: &Path) -> Result<Vec<QueryPassagePair>> {
    read_jsonl(path)
}

pub fn write_pairs(path: &Path, pairs: &[QueryPassagePair]) -> Result<()> {
    write_jsonl(path, pairs)
}

pub fn read_groups(path: &Path) -> Result<Vec<RerankTrainGroup>> {
    read_jsonl(path)
}

pub fn write_groups(path: &Path, groups: &[RerankTrainGroup]) -> Result<()> {
    write_jsonl(path, groups)
}

/// Fills in `positive_text` from the store.
pub fn attach_passage_text(pairs: &mut [QueryPassagePair], store: &Store) -> Result<()> {
    for p in pairs {
        p.positive_text = store.require_passage(&p.positive_passage_id)?.text.clone();
    }
    Ok(())
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::info_nce_with_grad;
use super::{EpochLog, RerankTrainGroup, TrainConfig, TrainLog};
use crate::dense::EmbeddingModel;
use crate::error::{Error, Result};
use crate::reranker::{features, CrossScorer, FeatureVector};
use crate::store::Store;

/// Precomputed features of a positive and its negatives for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFeatures {
    pub positive: FeatureVector,
    pub negatives: Vec<FeatureVector>,
}

pub fn group_features(
    group: &RerankTrainGroup,
    store: &Store,
    model: &EmbeddingModel,
) -> Result<GroupFeatures> {
    let idf = store.idf();
    let feat = |id: &str| -> Result<FeatureVector> {
        Ok(features(&group.query, &store.require_passage(id)?.text, model, idf))
    };
    Ok(GroupFeatures {
        positive: feat(&group.positive_passage_id)?,
        negatives: group
            .negative_passage_ids
            .iter()
            .map(|id| feat(id))
            .collect::<Result<_>>()?,
    })
}

/// Contrastive loss of one group and its gradient `(∂/∂weights, ∂/∂bias)`.
pub fn group_loss_grad(
    scorer: &CrossScorer,
    group: &GroupFeatures,
    tau: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    if group.negatives.is_empty() {
        return Err(Error::InvalidArgument("group has no negatives".into()));
    }
    let pos = scorer.score(&group.positive)?;
    let negs = group
        .negatives
        .iter()
        .map(|f| scorer.score(f))
        .collect::<Result<Vec<_>>>()?;
    let (loss, d_pos, d_negs) = info_nce_with_grad(pos, &negs, tau)?;
    let mut gw: Vec<f64> = group.positive.0.iter().map(|x| d_pos * x).collect();
    for (d, f) in d_negs.iter().zip(&group.negatives) {
        for (g, x) in gw.iter_mut().zip(&f.0) {
            *g += d * x;
        }
    }
    let gb = d_pos + d_negs.iter().sum::<f64>();
    Ok((loss, gw, gb))
}

/// SGD on the scorer over seeded shuffled batches of `cfg.batch_size` groups,
/// averaging the per-group gradients within a batch.
pub fn train_reranker_on_features(
    scorer: &CrossScorer,
    groups: &[GroupFeatures],
    cfg: &TrainConfig,
) -> Result<(CrossScorer, TrainLog)> {
    cfg.validate()?;
    scorer.validate()?;
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no training groups".into()));
    }
    let mut scorer = scorer.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut gw = vec![0.0; scorer.weights.len()];
            let mut gb = 0.0;
            for &i in batch {
                let (l, w, b) = group_loss_grad(&scorer, &groups[i], cfg.temperature)?;
                loss_sum += l;
                for (acc, g) in gw.iter_mut().zip(w) {
                    *acc += g;
                }
                gb += b;
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            for (w, g) in scorer.weights.iter_mut().zip(&gw) {
                *w -= scale * g;
            }
            scorer.bias -= scale * gb;
        }
        let mean_loss = loss_sum / groups.len() as f64;
        log::info!("reranker epoch {epoch}: mean loss {mean_loss:.6}");
        log.epochs.push(EpochLog {
            epoch,
            mean_loss,
            pairs_skipped: 0,
        });
    }
    Ok((scorer, log))
}

/// Computes features for every group and trains the scorer on them.
pub fn train_reranker(
    scorer: &CrossScorer,
    groups: &[RerankTrainGroup],
    store: &Store,
    model: &EmbeddingModel,
    cfg: &TrainConfig,
) -> Result<(CrossScorer, TrainLog)> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no training groups".into()));
    }
    let feats = groups
        .iter()
        .filter(|g| !g.negative_passage_ids.is_empty())
        .map(|g| group_features(g, store, model))
        .collect::<Result<Vec<_>>>()?;
    train_reranker_on_features(scorer, &feats, cfg)
}

//! In-batch contrastive gradients for the hashed linear encoder.
//!
//! For a text with features `x`, `v = W·x` and `u = v/‖v‖`. Scores are
//! `S[i][j] = u_q(i) · u_p(j)`. Given `g = ∂L/∂u`, the chain through the
//! normalization is `∂L/∂v = (g − u (u·g)) / ‖v‖` and `∂L/∂W += (∂L/∂v) xᵀ`.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::batch_loss_with_grad;
use super::{EpochLog, QueryPassagePair, TrainConfig, TrainLog};
use crate::dense::{dot, l2, EmbeddingModel, SparseFeatures};
use crate::error::{Error, Result};

/// Gradient with respect to the projection, stored by touched feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    embed_dim: usize,
    feature_dim: usize,
    columns: BTreeMap<u32, Vec<f64>>,
}

impl SparseGrad {
    pub(crate) fn new(model: &EmbeddingModel) -> Self {
        Self {
            embed_dim: model.embed_dim(),
            feature_dim: model.feature_dim(),
            columns: BTreeMap::new(),
        }
    }

    /// `∂L/∂W[row][col]`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns
            .get(&(col as u32))
            .map_or(0.0, |c| c[row])
    }

    /// Row-major `D×F` dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.embed_dim * self.feature_dim];
        for (&j, col) in &self.columns {
            for (d, &g) in col.iter().enumerate() {
                out[d * self.feature_dim + j as usize] = g;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.columns
            .values()
            .flatten()
            .fold(0.0, |m, g| m.max(g.abs()))
    }

    fn add_outer(&mut self, dv: &[f64], x: &SparseFeatures) {
        for &(j, c) in &x.entries {
            let col = self
                .columns
                .entry(j)
                .or_insert_with(|| vec![0.0; self.embed_dim]);
            for (acc, &g) in col.iter_mut().zip(dv) {
                *acc += g * c;
            }
        }
    }

    /// `W ← W − lr · grad`.
    pub(crate) fn apply(&self, model: &mut EmbeddingModel, lr: f64) {
        let f = self.feature_dim;
        let w = model.weights_mut();
        for (&j, col) in &self.columns {
            for (d, &g) in col.iter().enumerate() {
                w[d * f + j as usize] -= lr * g;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradOutput {
    pub loss: f64,
    pub grad: SparseGrad,
    /// Pairs dropped because the query or passage embedded to zero.
    pub skipped: usize,
}

struct Encoded {
    x: SparseFeatures,
    norm: f64,
    u: Vec<f64>,
}

fn encode(model: &EmbeddingModel, text: &str) -> Encoded {
    let x = model.featurize(text);
    let v = model.project(&x);
    let norm = l2(&v);
    let u = if norm > 0.0 {
        v.iter().map(|a| a / norm).collect()
    } else {
        vec![0.0; v.len()]
    };
    Encoded { x, norm, u }
}

fn chain(grad: &mut SparseGrad, e: &Encoded, g: &[f64]) {
    let ug = dot(&e.u, g);
    let dv: Vec<f64> = g
        .iter()
        .zip(&e.u)
        .map(|(gi, ui)| (gi - ui * ug) / e.norm)
        .collect();
    grad.add_outer(&dv, &e.x);
}

/// Loss and `∂L/∂u` for every query and passage embedding of the batch.
fn embedding_grads(uq: &[&[f64]], up: &[&[f64]], tau: f64) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let b = uq.len();
    let scores: Vec<Vec<f64>> = uq
        .iter()
        .map(|q| up.iter().map(|p| dot(q, p)).collect())
        .collect();
    let (loss, ds) = batch_loss_with_grad(&scores, tau)?;
    let dim = uq[0].len();
    let mut gq = vec![vec![0.0; dim]; b];
    let mut gp = vec![vec![0.0; dim]; b];
    for i in 0..b {
        for j in 0..b {
            let d = ds[i][j];
            for k in 0..dim {
                gq[i][k] += d * up[j][k];
                gp[j][k] += d * uq[i][k];
            }
        }
    }
    Ok((loss, gq, gp))
}

fn check_batch(pairs: &[QueryPassagePair]) -> Result<()> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(
            "in-batch negatives need a batch of at least 2 pairs".into(),
        ));
    }
    Ok(())
}

fn zero_output(model: &EmbeddingModel, skipped: usize) -> GradOutput {
    warn!("batch has fewer than 2 usable pairs after skipping {skipped}");
    GradOutput {
        loss: 0.0,
        grad: SparseGrad::new(model),
        skipped,
    }
}

/// Full-batch loss and analytic gradient with in-batch negatives, where
/// `s(Q, P)` is the cosine of the two embeddings.
pub fn retriever_grad(model: &EmbeddingModel, pairs: &[QueryPassagePair], tau: f64) -> Result<GradOutput> {
    check_batch(pairs)?;
    let enc: Vec<(Encoded, Encoded)> = pairs
        .iter()
        .map(|p| (encode(model, &p.query), encode(model, &p.positive_text)))
        .filter(|(q, p)| q.norm > 0.0 && p.norm > 0.0)
        .collect();
    let skipped = pairs.len() - enc.len();
    if enc.len() < 2 {
        return Ok(zero_output(model, skipped));
    }
    let uq: Vec<&[f64]> = enc.iter().map(|(q, _)| q.u.as_slice()).collect();
    let up: Vec<&[f64]> = enc.iter().map(|(_, p)| p.u.as_slice()).collect();
    let (loss, gq, gp) = embedding_grads(&uq, &up, tau)?;
    let mut grad = SparseGrad::new(model);
    for (i, (q, p)) in enc.iter().enumerate() {
        chain(&mut grad, q, &gq[i]);
        chain(&mut grad, p, &gp[i]);
    }
    Ok(GradOutput { loss, grad, skipped })
}

/// Same result as [`retriever_grad`], computed in three passes so that only
/// `micro_batch_size` pairs have features and projections alive at a time:
/// embed everything, differentiate the full score matrix with respect to the
/// embeddings, then re-encode per micro-batch and chain into `W`.
pub fn accumulate_grad(
    model: &EmbeddingModel,
    pairs: &[QueryPassagePair],
    tau: f64,
    micro_batch_size: usize,
) -> Result<GradOutput> {
    check_batch(pairs)?;
    if micro_batch_size == 0 || micro_batch_size > pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "micro_batch_size must be in 1..={}, got {micro_batch_size}",
            pairs.len()
        )));
    }

    // pass 1: embeddings only
    let mut kept = Vec::with_capacity(pairs.len());
    let mut uq = Vec::with_capacity(pairs.len());
    let mut up = Vec::with_capacity(pairs.len());
    for (chunk_start, chunk) in (0..).step_by(micro_batch_size).zip(pairs.chunks(micro_batch_size)) {
        for (off, pair) in chunk.iter().enumerate() {
            let q = encode(model, &pair.query);
            let p = encode(model, &pair.positive_text);
            if q.norm > 0.0 && p.norm > 0.0 {
                kept.push(chunk_start + off);
                uq.push(q.u);
                up.push(p.u);
            }
        }
    }
    let skipped = pairs.len() - kept.len();
    if kept.len() < 2 {
        return Ok(zero_output(model, skipped));
    }

    // pass 2: gradient cache
    let uq_ref: Vec<&[f64]> = uq.iter().map(Vec::as_slice).collect();
    let up_ref: Vec<&[f64]> = up.iter().map(Vec::as_slice).collect();
    let (loss, gq, gp) = embedding_grads(&uq_ref, &up_ref, tau)?;
    drop((uq, up));

    // pass 3: re-encode per micro-batch and chain
    let mut grad = SparseGrad::new(model);
    for (chunk_no, chunk) in kept.chunks(micro_batch_size).enumerate() {
        for (off, &i) in chunk.iter().enumerate() {
            let k = chunk_no * micro_batch_size + off;
            chain(&mut grad, &encode(model, &pairs[i].query), &gq[k]);
            chain(&mut grad, &encode(model, &pairs[i].positive_text), &gp[k]);
        }
    }
    Ok(GradOutput { loss, grad, skipped })
}

/// Plain SGD over seeded shuffled batches. The final weights are rounded to
/// the model file's f32 precision.
pub fn train_retriever(
    model: &EmbeddingModel,
    pairs: &[QueryPassagePair],
    cfg: &TrainConfig,
) -> Result<(EmbeddingModel, TrainLog)> {
    cfg.validate()?;
    if pairs.len() < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "need at least batch_size={} pairs, got {}",
            cfg.batch_size,
            pairs.len()
        )));
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut skipped = 0;
        for idx in order.chunks(cfg.batch_size).filter(|c| c.len() >= 2) {
            let batch: Vec<QueryPassagePair> = idx.iter().map(|&i| pairs[i].clone()).collect();
            let micro = cfg.micro_batch_size.min(batch.len());
            let out = accumulate_grad(&model, &batch, cfg.temperature, micro)?;
            out.grad.apply(&mut model, cfg.learning_rate);
            loss_sum += out.loss;
            batches += 1;
            skipped += out.skipped;
        }
        let mean_loss = loss_sum / batches.max(1) as f64;
        log::info!("retriever epoch {epoch}: mean loss {mean_loss:.6}, skipped {skipped}");
        log.epochs.push(EpochLog {
            epoch,
            mean_loss,
            pairs_skipped: skipped,
        });
    }
    model.round_to_storage();
    Ok((model, log))
}

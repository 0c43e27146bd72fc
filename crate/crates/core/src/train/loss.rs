//! Contrastive loss: `-log softmax(s/τ)[positive]` over one positive score and
//! its negatives.

use crate::error::{Error, Result};

fn check(neg_scores: &[f64], tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be > 0, got {tau}")));
    }
    if neg_scores.is_empty() {
        return Err(Error::InvalidArgument("at least one negative score is required".into()));
    }
    Ok(())
}

/// `log(e^{pos/τ} + Σ e^{neg/τ}) - pos/τ`, evaluated with max subtraction.
pub fn info_nce_loss(pos_score: f64, neg_scores: &[f64], tau: f64) -> Result<f64> {
    check(neg_scores, tau)?;
    let zp = pos_score / tau;
    let zmax = neg_scores.iter().map(|s| s / tau).fold(zp, f64::max);
    let neg_sum: f64 = neg_scores.iter().map(|s| (s / tau - zmax).exp()).sum();
    if zp == zmax {
        // positive is the max: loss = ln(1 + Σ e^{z_n - z_p}), keep precision near 0
        Ok(neg_sum.ln_1p())
    } else {
        Ok(zmax - zp + ((zp - zmax).exp() + neg_sum).ln())
    }
}

/// Loss with its derivatives with respect to the positive and each negative score.
pub fn info_nce_with_grad(pos_score: f64, neg_scores: &[f64], tau: f64) -> Result<(f64, f64, Vec<f64>)> {
    let loss = info_nce_loss(pos_score, neg_scores, tau)?;
    let zp = pos_score / tau;
    let zmax = neg_scores.iter().map(|s| s / tau).fold(zp, f64::max);
    let ep = (zp - zmax).exp();
    let en: Vec<f64> = neg_scores.iter().map(|s| (s / tau - zmax).exp()).collect();
    let total = ep + en.iter().sum::<f64>();
    let d_pos = (ep / total - 1.0) / tau;
    let d_negs = en.into_iter().map(|e| e / total / tau).collect();
    Ok((loss, d_pos, d_negs))
}

/// Mean in-batch loss over a `B×B` score matrix: row `i` uses `S[i][i]` as the
/// positive and the rest of the row as negatives.
pub fn batch_loss(scores: &[Vec<f64>], tau: f64) -> Result<f64> {
    let b = scores.len();
    if scores.iter().any(|row| row.len() != b) {
        return Err(Error::InvalidArgument("score matrix must be square".into()));
    }
    if b < 2 {
        return Err(Error::InvalidArgument("in-batch negatives need a batch of at least 2".into()));
    }
    let mut total = 0.0;
    for (i, row) in scores.iter().enumerate() {
        let negs: Vec<f64> = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &s)| s)
            .collect();
        total += info_nce_loss(row[i], &negs, tau)?;
    }
    Ok(total / b as f64)
}

/// [`batch_loss`] and its gradient with respect to every score.
pub(crate) fn batch_loss_with_grad(scores: &[Vec<f64>], tau: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let b = scores.len();
    let loss = batch_loss(scores, tau)?;
    let inv_b = 1.0 / b as f64;
    let mut grad = vec![vec![0.0; b]; b];
    for (i, row) in scores.iter().enumerate() {
        let negs: Vec<f64> = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &s)| s)
            .collect();
        let (_, d_pos, d_negs) = info_nce_with_grad(row[i], &negs, tau)?;
        let mut d_negs = d_negs.into_iter();
        for (j, g) in grad[i].iter_mut().enumerate() {
            let d = if j == i { d_pos } else { d_negs.next().unwrap() };
            *g = d * inv_b;
        }
    }
    Ok((loss, grad))
}

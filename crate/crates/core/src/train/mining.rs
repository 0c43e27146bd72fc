use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{QueryPassagePair, RerankTrainGroup};
use crate::dense::{EmbeddingModel, VectorIndex};
use crate::error::{Error, Result};
use crate::store::Store;

/// Retriever-mined hard negatives for reranker training.
///
/// For each pair the top `depth` passages are retrieved; every passage of the
/// positive's parent paper is excluded, and the first `per_group` survivors
/// become negatives. Short groups are padded with seeded random passages from
/// other papers.
pub fn mine_hard_negatives(
    store: &Store,
    model: &EmbeddingModel,
    index: &VectorIndex,
    pairs: &[QueryPassagePair],
    depth: usize,
    per_group: usize,
    seed: u64,
) -> Result<Vec<RerankTrainGroup>> {
    if index.is_empty() {
        return Err(Error::InvalidArgument("cannot mine negatives from an empty index".into()));
    }
    if per_group == 0 || depth < per_group {
        return Err(Error::InvalidArgument(format!(
            "need 0 < per_group <= depth, got per_group={per_group} depth={depth}"
        )));
    }
    index.check_model(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let gold_doc = store
            .doc_of(&pair.positive_passage_id)
            .ok_or_else(|| Error::UnknownPassage(pair.positive_passage_id.clone()))?;
        let other_paper = |id: &str| store.doc_of(id).is_some_and(|d| d != gold_doc);

        let hits = index.search(&model.embed(&pair.query), depth)?;
        let mut negatives: Vec<String> = hits
            .ids()
            .filter(|id| other_paper(id))
            .take(per_group)
            .map(str::to_string)
            .collect();

        if negatives.len() < per_group {
            let chosen: HashSet<String> = negatives.iter().cloned().collect();
            let mut pool: Vec<&String> = index
                .ids()
                .iter()
                .filter(|id| other_paper(id) && !chosen.contains(*id))
                .collect();
            pool.shuffle(&mut rng);
            let need = per_group - negatives.len();
            negatives.extend(pool.into_iter().take(need).cloned());
        }

        groups.push(RerankTrainGroup {
            query: pair.query.clone(),
            positive_passage_id: pair.positive_passage_id.clone(),
            negative_passage_ids: negatives,
        });
    }
    Ok(groups)
}

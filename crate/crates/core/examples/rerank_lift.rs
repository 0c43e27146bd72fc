//! Compares retrieval alone against retrieval plus a reranker trained on
//! mined hard negatives, on a synthetic corpus with cross-topic vocabulary.

use citeseek::corpus::SegmentConfig;
use citeseek::dense::{EmbeddingModel, VectorIndex};
use citeseek::eval::{evaluate, passages_to_papers, DEFAULT_KS};
use citeseek::querygen::{generate_dataset, GenConfig, QuerySource};
use citeseek::reranker::{rerank, CrossScorer, LocalScorer};
use citeseek::store::Store;
use citeseek::synthetic::{split_pairs, topic_corpus, TopicCorpusConfig};
use citeseek::train::{mine_hard_negatives, train_reranker, train_retriever, TrainConfig};

fn main() -> citeseek::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let seed = arg(1, 0.0) as u64;
    let shared = arg(2, 0.2);
    let epochs = arg(3, 5.0) as usize;

    let (corpus, _) = topic_corpus(&TopicCorpusConfig {
        seed,
        shared_fraction: shared,
        ..TopicCorpusConfig::default()
    })?;
    let store = Store::build(corpus, SegmentConfig::default())?;
    let pairs = generate_dataset(&store, &GenConfig::default(), &QuerySource::Fallback)?;
    let (train, track) = split_pairs(&pairs, &store, 100, seed)?;

    let untrained = EmbeddingModel::random(32768, 64, seed, seed)?;
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let (model, _) = train_retriever(&untrained, &train, &cfg)?;
    let index = VectorIndex::build(&model, store.passages().iter().map(|p| (p.passage_id.as_str(), p.text.as_str())))?;
    let groups = mine_hard_negatives(&store, &model, &index, &train, 200, 7, seed)?;
    let rcfg = TrainConfig {
        seed,
        epochs,
        ..TrainConfig::reranker()
    };
    let (scorer, log) = train_reranker(&CrossScorer::default(), &groups, &store, &model, &rcfg)?;
    println!("loss {:?}", log.epochs.iter().map(|e| e.mean_loss).collect::<Vec<_>>());
    println!("weights {:?} bias {}", scorer.weights, scorer.bias);

    let retrieval = evaluate(&track, |q| passages_to_papers(&index.search(&model.embed(q), 200)?, &store), &DEFAULT_KS)?;
    let local = LocalScorer { scorer: &scorer, model: &model, idf: store.idf() };
    let reranked = evaluate(
        &track,
        |q| {
            let hits = index.search(&model.embed(q), 200)?;
            passages_to_papers(&rerank(&local, q, &hits, &store)?, &store)
        },
        &DEFAULT_KS,
    )?;
    println!("retrieval {retrieval:?}");
    println!("reranked  {reranked:?}");
    Ok(())
}

//! Trains a retriever on a synthetic topic corpus and compares held-out
//! top-k accuracy against the untrained model.

use std::time::Instant;

use citeseek::corpus::SegmentConfig;
use citeseek::dense::{EmbeddingModel, VectorIndex};
use citeseek::eval::{evaluate, passages_to_papers, DEFAULT_KS};
use citeseek::querygen::{generate_dataset, GenConfig, QuerySource};
use citeseek::store::Store;
use citeseek::synthetic::{split_pairs, topic_corpus, TopicCorpusConfig};
use citeseek::train::{train_retriever, TrainConfig};

fn main() -> citeseek::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let seed = arg(1, 0.0) as u64;
    let dim = arg(2, 64.0) as usize;
    let epochs = arg(3, 5.0) as usize;
    let lr = arg(4, 0.1);
    let tau = arg(5, 0.05);
    let wps = arg(6, 18.0) as usize;
    let topic_vocab = arg(7, 80.0) as usize;

    let (corpus, _) = topic_corpus(&TopicCorpusConfig {
        seed,
        words_per_sentence: wps,
        topic_vocab,
        ..TopicCorpusConfig::default()
    })?;
    let store = Store::build(corpus, SegmentConfig::default())?;
    let pairs = generate_dataset(&store, &GenConfig::default(), &QuerySource::Fallback)?;
    let (train, track) = split_pairs(&pairs, &store, 100, seed)?;
    println!("passages {} pairs {} train {}", store.passages().len(), pairs.len(), train.len());

    let untrained = EmbeddingModel::random(32768, dim, seed, seed)?;
    let t = Instant::now();
    let cfg = TrainConfig {
        epochs,
        learning_rate: lr,
        temperature: tau,
        seed,
        ..TrainConfig::default()
    };
    let (trained, log) = train_retriever(&untrained, &train, &cfg)?;
    println!("trained in {:?}: {:?}", t.elapsed(), log.epochs.iter().map(|e| e.mean_loss).collect::<Vec<_>>());

    for (name, model) in [("untrained", &untrained), ("trained", &trained)] {
        let index = VectorIndex::build(model, store.passages().iter().map(|p| (p.passage_id.as_str(), p.text.as_str())))?;
        let acc = evaluate(
            &track,
            |q| passages_to_papers(&index.search(&model.embed(q), 200)?, &store),
            &DEFAULT_KS,
        )?;
        println!("{name:<10} {acc:?}");
    }
    Ok(())
}

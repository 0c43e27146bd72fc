//! Runs the full pipeline on a planted-citation corpus with reference
//! expansion on and off.

use citeseek::corpus::SegmentConfig;
use citeseek::dense::{EmbeddingModel, VectorIndex};
use citeseek::eval::{evaluate, DEFAULT_KS};
use citeseek::pipeline::{ExtractorMode, PipelineConfig, System};
use citeseek::querygen::{generate_dataset, GenConfig, QuerySource};
use citeseek::reranker::CrossScorer;
use citeseek::store::Store;
use citeseek::synthetic::{planted_fixture, PlantedConfig};
use citeseek::train::{train_retriever, TrainConfig};

fn main() -> citeseek::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = PlantedConfig::default();
    cfg.base.seed = seed;
    let fx = planted_fixture(&cfg)?;
    let store = Store::build(fx.corpus.clone(), SegmentConfig::default())?;
    let pairs = generate_dataset(&store, &GenConfig::default(), &QuerySource::Fallback)?;
    let untrained = EmbeddingModel::random(32768, 64, seed, seed)?;
    let (model, _) = train_retriever(&untrained, &pairs, &TrainConfig { seed, ..TrainConfig::default() })?;
    let index = VectorIndex::build(&model, store.passages().iter().map(|p| (p.passage_id.as_str(), p.text.as_str())))?;
    let system = System::new(store, model, index)?.with_scorer(CrossScorer::default())?;

    for mode in [ExtractorMode::Off, ExtractorMode::Fallback] {
        let pc = PipelineConfig { extractor: mode, ..PipelineConfig::default() };
        let acc = evaluate(&fx.track, |q| Ok(system.run_query(q, &pc)?.papers), &DEFAULT_KS)?;
        println!("{mode:?} {acc:?}");
    }
    let pc = PipelineConfig::default();
    for (qid, (citing, gold)) in fx.planted.iter().zip(&fx.citations).take(5) {
        let q = fx.track.queries.iter().find(|q| &q.query_id == qid).unwrap();
        let r = system.run_query(&q.query, &pc)?;
        println!("{qid} citing {citing} at {:?}, gold {gold} at {:?}", r.papers.position(citing), r.papers.position(gold));
    }
    Ok(())
}

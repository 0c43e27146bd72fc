//! Acceptance checks. Each test writes one `[PASS]`/`[FAIL]` line straight to
//! stdout (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::distr::{Alphanumeric, SampleString};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use citeseek::corpus::{
    find_markers, insert_ref_identifiers, parse_ref_identifier, Corpus, Document, RefMarker,
    Reference, SegmentConfig,
};
use citeseek::dense::{EmbeddingModel, EmbeddingVector, VectorIndex};
use citeseek::eval::{
    evaluate, passages_to_papers, BenchmarkQuery, BenchmarkTrack, DEFAULT_KS,
};
use citeseek::pipeline::{ExtractorMode, PipelineConfig, System};
use citeseek::querygen::{generate_dataset, GenConfig, QuerySource};
use citeseek::ranking::RankedList;
use citeseek::reranker::{rerank, CrossScorer, FeatureVector, LocalScorer, FEATURE_COUNT};
use citeseek::sparse::{Bm25Index, Bm25Params};
use citeseek::store::Store;
use citeseek::synthetic::{planted_fixture, split_pairs, topic_corpus, PlantedConfig, TopicCorpusConfig};
use citeseek::train::{
    accumulate_grad, group_loss_grad, info_nce_loss, mine_hard_negatives, retriever_grad,
    train_reranker, train_retriever, GroupFeatures, QueryPassagePair, TrainConfig,
};

fn report(n: u32, name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let within = elapsed < limit;
    let status = if ok && within { "PASS" } else { "FAIL" };
    let line = format!("[{status}] criterion {n}: {name} ({elapsed:.2?} of {limit:.0?}) {detail}\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded {limit:?}: took {elapsed:?}");
}

fn nondecreasing(acc: &[f64]) -> bool {
    acc.windows(2).all(|w| w[0] <= w[1])
}

// Independent oracles -------------------------------------------------------

/// Textbook InfoNCE, no stabilization tricks.
fn naive_info_nce(pos: f64, negs: &[f64], tau: f64) -> f64 {
    let denom: f64 = std::iter::once(pos).chain(negs.iter().copied()).map(|s| (s / tau).exp()).sum();
    -((pos / tau).exp() / denom).ln()
}

/// Mean in-batch InfoNCE computed from the model's embeddings.
fn naive_batch_loss(model: &EmbeddingModel, pairs: &[QueryPassagePair], tau: f64) -> f64 {
    let q: Vec<EmbeddingVector> = pairs.iter().map(|p| model.embed(&p.query)).collect();
    let d: Vec<EmbeddingVector> = pairs.iter().map(|p| model.embed(&p.positive_text)).collect();
    let dot = |a: &EmbeddingVector, b: &EmbeddingVector| -> f64 {
        a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum()
    };
    let b = pairs.len();
    (0..b)
        .map(|i| {
            let row: Vec<f64> = (0..b).map(|j| dot(&q[i], &d[j])).collect();
            let negs: Vec<f64> = (0..b).filter(|&j| j != i).map(|j| row[j]).collect();
            naive_info_nce(row[i], &negs, tau)
        })
        .sum::<f64>()
        / b as f64
}

fn random_text(rng: &mut ChaCha8Rng, vocab: &[&str], len: usize) -> String {
    (0..len).map(|_| *vocab.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn random_pairs(rng: &mut ChaCha8Rng, b: usize) -> Vec<QueryPassagePair> {
    const VOCAB: &[&str] = &[
        "alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa", "lam",
        "mu", "nu", "xi", "omi", "pi", "rho", "sigma", "tau", "ups", "phi", "chi", "psi", "omega",
    ];
    (0..b)
        .map(|i| {
            let (ql, pl) = (rng.random_range(2..6), rng.random_range(5..15));
            let q = random_text(rng, VOCAB, ql);
            let p = random_text(rng, VOCAB, pl);
            QueryPassagePair::new(q, format!("p{i}"), p)
        })
        .collect()
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    diff / scale
}

fn store_and_pairs(cfg: &TopicCorpusConfig) -> (Store, Vec<QueryPassagePair>) {
    let (corpus, _) = topic_corpus(cfg).unwrap();
    let store = Store::build(corpus, SegmentConfig::default()).unwrap();
    let pairs = generate_dataset(&store, &GenConfig::default(), &QuerySource::Fallback).unwrap();
    (store, pairs)
}

fn index_for(model: &EmbeddingModel, store: &Store) -> VectorIndex {
    VectorIndex::build(
        model,
        store.passages().iter().map(|p| (p.passage_id.as_str(), p.text.as_str())),
    )
    .unwrap()
}

fn retrieval_accuracy(model: &EmbeddingModel, store: &Store, track: &BenchmarkTrack) -> Vec<f64> {
    let index = index_for(model, store);
    evaluate(
        track,
        |q| passages_to_papers(&index.search(&model.embed(q), 200)?, store),
        &DEFAULT_KS,
    )
    .unwrap()
}

// Criteria ------------------------------------------------------------------

#[test]
fn criterion_1_loss_identities() {
    let start = Instant::now();
    let mut worst_uniform = 0.0f64;
    for n in [1usize, 2, 3, 7] {
        for s in [-3.0, 0.0, 0.7, 12.5] {
            let l = info_nce_loss(s, &vec![s; n], 0.05).unwrap();
            worst_uniform = worst_uniform.max((l - ((n + 1) as f64).ln()).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_shift = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..10);
        let tau = rng.random_range(0.05..2.0);
        let pos: f64 = rng.random_range(-1.0..1.0);
        let negs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: f64 = rng.random_range(-5.0..5.0);
        let shifted: Vec<f64> = negs.iter().map(|x| x + c).collect();
        let a = info_nce_loss(pos, &negs, tau).unwrap();
        let b = info_nce_loss(pos + c, &shifted, tau).unwrap();
        worst_shift = worst_shift.max((a - b).abs());
    }
    let ok = worst_uniform <= 1e-12 && worst_shift <= 1e-12;
    report(
        1,
        "loss identities",
        ok,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("max |L - ln(N+1)| = {worst_uniform:.2e}, max shift error = {worst_shift:.2e}"),
    );
}

#[test]
fn criterion_2_gradient_checks() {
    let start = Instant::now();
    let h = 1e-4;
    let tau = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_retriever = 0.0f64;
    let mut worst_reranker = 0.0f64;
    for inst in 0..20u64 {
        // retriever: F=64, D=8, batch of 5
        let model = EmbeddingModel::random(64, 8, inst, 100 + inst).unwrap();
        let pairs = random_pairs(&mut rng, 5);
        let out = retriever_grad(&model, &pairs, tau).unwrap();
        let analytic = out.grad.to_dense();
        let w = model.weights().to_vec();
        let mut numeric = vec![0.0; w.len()];
        for (i, g) in numeric.iter_mut().enumerate() {
            let at = |delta: f64| {
                let mut v = w.clone();
                v[i] += delta;
                let m = EmbeddingModel::from_weights(64, 8, inst, v).unwrap();
                naive_batch_loss(&m, &pairs, tau)
            };
            *g = (at(h) - at(-h)) / (2.0 * h);
        }
        worst_retriever = worst_retriever.max(rel_error(&analytic, &numeric));

        // reranker: K=6 features, groups of 4 (one positive, three negatives)
        let fv = |rng: &mut ChaCha8Rng| {
            FeatureVector((0..FEATURE_COUNT).map(|_| rng.random_range(-1.0..1.0)).collect())
        };
        let group = GroupFeatures {
            positive: fv(&mut rng),
            negatives: (0..3).map(|_| fv(&mut rng)).collect(),
        };
        let scorer = CrossScorer {
            weights: (0..FEATURE_COUNT).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: rng.random_range(-1.0..1.0),
            ..CrossScorer::default()
        };
        let (_, gw, gb) = group_loss_grad(&scorer, &group, tau).unwrap();
        let loss_with = |weights: &[f64], bias: f64| {
            let s = |f: &FeatureVector| -> f64 {
                weights.iter().zip(&f.0).map(|(w, x)| w * x).sum::<f64>() + bias
            };
            let negs: Vec<f64> = group.negatives.iter().map(s).collect();
            naive_info_nce(s(&group.positive), &negs, tau)
        };
        let mut analytic = gw.clone();
        analytic.push(gb);
        let mut numeric = Vec::new();
        for i in 0..FEATURE_COUNT {
            let mut plus = scorer.weights.clone();
            let mut minus = scorer.weights.clone();
            plus[i] += h;
            minus[i] -= h;
            numeric.push((loss_with(&plus, scorer.bias) - loss_with(&minus, scorer.bias)) / (2.0 * h));
        }
        numeric.push(
            (loss_with(&scorer.weights, scorer.bias + h) - loss_with(&scorer.weights, scorer.bias - h))
                / (2.0 * h),
        );
        worst_reranker = worst_reranker.max(rel_error(&analytic, &numeric));
    }
    let ok = worst_retriever <= 1e-5 && worst_reranker <= 1e-5;
    report(
        2,
        "gradient checks",
        ok,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("max rel error retriever = {worst_retriever:.2e}, reranker = {worst_reranker:.2e}"),
    );
}

#[test]
fn criterion_3_gradient_cache_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for inst in 0..10u64 {
        let model = EmbeddingModel::random(256, 16, inst, 200 + inst).unwrap();
        let pairs = random_pairs(&mut rng, 8);
        let full = retriever_grad(&model, &pairs, 0.05).unwrap();
        let reference = full.grad.to_dense();
        for micro in [1, 2, 4, 8] {
            let acc = accumulate_grad(&model, &pairs, 0.05, micro).unwrap();
            worst = worst.max((acc.loss - full.loss).abs());
            for (a, b) in acc.grad.to_dense().iter().zip(&reference) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    report(
        3,
        "gradient-cache exactness",
        worst <= 1e-10,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("max elementwise difference = {worst:.2e}"),
    );
}

#[test]
fn criterion_4_exact_search_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for inst in 0..200u64 {
        let dim = rng.random_range(2..12);
        let model = EmbeddingModel::random(64, dim, inst, inst).unwrap();
        let n = rng.random_range(1..=1000);
        let mut entries: Vec<(String, EmbeddingVector)> = Vec::with_capacity(n);
        for i in 0..n {
            // one in five entries duplicates an earlier vector to force ties
            let v = if i > 0 && rng.random_bool(0.2) {
                entries[rng.random_range(0..i)].1.clone()
            } else {
                EmbeddingVector::normalized((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            };
            entries.push((format!("{:08x}-{i}", rng.random::<u32>()), v));
        }
        let index = VectorIndex::from_vectors(&model, entries).unwrap();
        let query = EmbeddingVector::normalized((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        let k = rng.random_range(1..=n + 5);

        let mut brute: Vec<(String, f64)> = (0..index.len())
            .map(|i| {
                let s: f64 = index.vector(i).iter().zip(&query.values).map(|(&a, &b)| f64::from(a) * b).sum();
                (index.ids()[i].clone(), s)
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        brute.truncate(k);
        let got = index.search(&query, k).unwrap();
        let same = got.len() == brute.len()
            && got
                .items
                .iter()
                .zip(&brute)
                .all(|(g, (id, s))| &g.id == id && g.score == Some(*s));
        if !same {
            mismatches += 1;
        }
    }

    // three-document BM25 fixture, scored by hand
    let docs = [("d1", "quantum error correction"), ("d2", "quantum computing"), ("d3", "classical error")];
    let bm25 = Bm25Index::build(docs.iter().map(|(a, b)| (*a, *b)), Bm25Params::default()).unwrap();
    let avgdl = 7.0 / 3.0;
    let hand = |tf: f64, dl: f64, df: f64| {
        let idf = (1.0 + (3.0 - df + 0.5) / (df + 0.5)).ln();
        idf * tf * 2.2 / (tf + 1.2 * (1.0 - 0.75 + 0.75 * dl / avgdl))
    };
    let cases = [
        (vec!["correction"], "d1", hand(1.0, 3.0, 1.0)),
        (vec!["quantum"], "d2", hand(1.0, 2.0, 2.0)),
        (vec!["quantum", "error"], "d1", hand(1.0, 3.0, 2.0) * 2.0),
        (vec!["classical", "error"], "d3", hand(1.0, 2.0, 1.0) + hand(1.0, 2.0, 2.0)),
    ];
    let mut bm25_err = 0.0f64;
    for (q, d, want) in &cases {
        bm25_err = bm25_err.max((bm25.score(q, d).unwrap() - want).abs());
    }
    let idf_err = (bm25.idf("quantum") - 1.6f64.ln()).abs();
    let ok = mismatches == 0 && bm25_err <= 1e-9 && idf_err <= 1e-9 && (1.6f64.ln() - 0.470004).abs() < 1e-6;
    report(
        4,
        "exact search oracle",
        ok,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("search mismatches = {mismatches}/200, max BM25 error = {bm25_err:.2e}, idf(df=2) = {:.6}", bm25.idf("quantum")),
    );
}

#[test]
fn criterion_5_training_lift() {
    let start = Instant::now();
    let (store, pairs) = store_and_pairs(&TopicCorpusConfig::default());
    let (train, track) = split_pairs(&pairs, &store, 100, 0).unwrap();
    let untrained = EmbeddingModel::random(32768, 64, 0, 0).unwrap();
    let (trained, _) = train_retriever(&untrained, &train, &TrainConfig::default()).unwrap();
    let before = retrieval_accuracy(&untrained, &store, &track);
    let after = retrieval_accuracy(&trained, &store, &track);
    let lift = after[1] - before[1];
    let ok = track.len() == 100 && store.corpus().len() == 200 && lift >= 30.0 && nondecreasing(&before) && nondecreasing(&after);
    report(
        5,
        "end-to-end training lift",
        ok,
        start.elapsed(),
        Duration::from_secs(300),
        &format!("top-5 untrained {:.2} -> trained {:.2} (lift {lift:.2})", before[1], after[1]),
    );
}

#[test]
fn criterion_6_rerank_lift() {
    let start = Instant::now();
    let cfg = TopicCorpusConfig {
        shared_fraction: 0.2,
        ..TopicCorpusConfig::default()
    };
    let (store, pairs) = store_and_pairs(&cfg);
    let (train, track) = split_pairs(&pairs, &store, 100, 0).unwrap();
    let untrained = EmbeddingModel::random(32768, 64, 0, 0).unwrap();
    let (model, _) = train_retriever(&untrained, &train, &TrainConfig::default()).unwrap();
    let index = index_for(&model, &store);
    let groups = mine_hard_negatives(&store, &model, &index, &train, 200, 7, 0).unwrap();
    let (scorer, _) =
        train_reranker(&CrossScorer::default(), &groups, &store, &model, &TrainConfig::reranker()).unwrap();

    let retrieval = retrieval_accuracy(&model, &store, &track);
    let local = LocalScorer {
        scorer: &scorer,
        model: &model,
        idf: store.idf(),
    };
    let reranked = evaluate(
        &track,
        |q| {
            let hits = index.search(&model.embed(q), 200)?;
            passages_to_papers(&rerank(&local, q, &hits, &store)?, &store)
        },
        &DEFAULT_KS,
    )
    .unwrap();
    let ok = reranked[0] > retrieval[0]
        && reranked[3] >= retrieval[3] - 1.0
        && nondecreasing(&retrieval)
        && nondecreasing(&reranked);
    report(
        6,
        "reranker lift",
        ok,
        start.elapsed(),
        Duration::from_secs(300),
        &format!(
            "top-1 {:.2} -> {:.2}, top-20 {:.2} -> {:.2}",
            retrieval[0], reranked[0], retrieval[3], reranked[3]
        ),
    );
}

#[test]
fn criterion_7_reference_expansion_lift() {
    let start = Instant::now();
    let fx = planted_fixture(&PlantedConfig::default()).unwrap();
    let store = Store::build(fx.corpus.clone(), SegmentConfig::default()).unwrap();
    let pairs = generate_dataset(&store, &GenConfig::default(), &QuerySource::Fallback).unwrap();
    let untrained = EmbeddingModel::random(32768, 64, 0, 0).unwrap();
    let (model, _) = train_retriever(&untrained, &pairs, &TrainConfig::default()).unwrap();
    let index = index_for(&model, &store);
    let system = System::new(store, model, index)
        .unwrap()
        .with_scorer(CrossScorer::default())
        .unwrap();

    let off = PipelineConfig {
        extractor: ExtractorMode::Off,
        ..PipelineConfig::default()
    };
    let on = PipelineConfig::default();
    assert_eq!((on.expand_k, on.n_refs, on.extractor), (10, 3, ExtractorMode::Fallback));
    let acc_off = evaluate(&fx.track, |q| Ok(system.run_query(q, &off)?.papers), &DEFAULT_KS).unwrap();
    let acc_on = evaluate(&fx.track, |q| Ok(system.run_query(q, &on)?.papers), &DEFAULT_KS).unwrap();

    let mut identical = true;
    for q in &fx.track.queries {
        let pipeline = serde_json::to_vec(&system.run_query(&q.query, &off).unwrap().papers).unwrap();
        let (_, stage2) = system.stage2(&q.query, &off).unwrap();
        let stage2 = serde_json::to_vec(&passages_to_papers(&stage2, &system.store).unwrap()).unwrap();
        identical &= pipeline == stage2;
    }
    let ok = acc_on[1] > acc_off[1]
        && acc_on[2] > acc_off[2]
        && identical
        && fx.planted.len() * 10 == fx.track.len() * 3
        && nondecreasing(&acc_on)
        && nondecreasing(&acc_off);
    report(
        7,
        "reference-extraction lift",
        ok,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "top-5 {:.2} -> {:.2}, top-10 {:.2} -> {:.2}, off == stage 2: {identical}",
            acc_off[1], acc_on[1], acc_off[2], acc_on[2]
        ),
    );
}

fn random_doc_id(rng: &mut ChaCha8Rng) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._:/-";
    const LAST: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789/-_";
    let len = rng.random_range(0..16);
    let mut id: String = (0..len).map(|_| *CHARS.choose(rng).unwrap() as char).collect();
    id.push(*LAST.choose(rng).unwrap() as char);
    id
}

#[test]
fn criterion_8_format_round_trips() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();

    // corpus JSONL -> ingest -> re-export
    let mut docs = planted_fixture(&PlantedConfig::default()).unwrap().corpus.documents().to_vec();
    docs.push(Document {
        id: "hand-1".into(),
        title: "Ünïcode “quotes” and\ttabs".into(),
        abstract_text: String::new(),
        body: vec!["Cites [[1]] and [[2]].".into(), "".into()],
        references: vec![
            Reference {
                ordinal: 1,
                target_id: Some("t0-p0000".into()),
                raw_citation: "A. Author, 2020".into(),
            },
            Reference {
                ordinal: 2,
                target_id: None,
                raw_citation: "Outside the corpus".into(),
            },
        ],
    });
    let original = Corpus::new(docs).unwrap();
    let jsonl = dir.path().join("corpus.jsonl");
    original.write_jsonl(&jsonl).unwrap();
    let store = Store::build(Corpus::read_jsonl(&jsonl).unwrap(), SegmentConfig::default()).unwrap();
    store.save(&dir.path().join("store")).unwrap();
    let reloaded = Store::load(&dir.path().join("store")).unwrap();
    let export = dir.path().join("export.jsonl");
    reloaded.corpus().write_jsonl(&export).unwrap();
    let exported = Corpus::read_jsonl(&export).unwrap();
    if exported.documents() != original.documents() {
        failures.push("corpus re-export differs");
    }
    if reloaded.passages() != store.passages() {
        failures.push("passages differ after store reload");
    }

    // model and index binaries
    let model = EmbeddingModel::random(4096, 32, 7, 7).unwrap();
    let index = index_for(&model, &store);
    model.save(&dir.path().join("model.bin")).unwrap();
    index.save(&dir.path().join("index.bin")).unwrap();
    let model2 = EmbeddingModel::load(&dir.path().join("model.bin")).unwrap();
    let index2 = VectorIndex::load(&dir.path().join("index.bin")).unwrap();
    if model2.to_bytes() != model.to_bytes() || index2.to_bytes() != index.to_bytes() {
        failures.push("binary bytes differ after reload");
    }
    index2.check_model(&model2).unwrap();
    for q in ["which work discusses bakoru?", "quantum", "", "t0 p0000 error"] {
        let a = index.search(&model.embed(q), 50).unwrap();
        let b = index2.search(&model2.embed(q), 50).unwrap();
        let bits = |l: &RankedList| -> Vec<(String, Option<u64>)> {
            l.items.iter().map(|i| (i.id.clone(), i.score.map(f64::to_bits))).collect()
        };
        if bits(&a) != bits(&b) {
            failures.push("search differs after reload");
        }
    }

    // marker insert/parse
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut marker_failures = 0;
    for _ in 0..1000 {
        let ordinal = rng.random_range(1..=u32::MAX);
        let id = random_doc_id(&mut rng);
        let marker = RefMarker::new(ordinal, id.as_str());
        let text = marker.to_string();
        let parsed = parse_ref_identifier(&text).ok();
        // anchors need a reference list covering the ordinal, so keep those small
        let small = rng.random_range(1..=40u32);
        let doc = Document {
            id: id.clone(),
            title: String::new(),
            abstract_text: String::new(),
            body: Vec::new(),
            references: (1..=small)
                .map(|o| Reference {
                    ordinal: o,
                    target_id: None,
                    raw_citation: String::new(),
                })
                .collect(),
        };
        let prose = format!("{} [[{small}]]. {}", Alphanumeric.sample_string(&mut rng, 8), "tail");
        let inserted = insert_ref_identifiers(&prose, &doc).unwrap();
        let found: Vec<RefMarker> = find_markers(&inserted).into_iter().map(|m| m.marker).collect();
        let expected = RefMarker::new(small, id.as_str());
        if parsed.as_ref() != Some(&marker) || found != [expected] {
            marker_failures += 1;
        }
    }
    if marker_failures > 0 {
        failures.push("marker round-trip failures");
    }

    report(
        8,
        "format round-trips",
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(60),
        &format!("{} documents, 1000 markers, problems: {failures:?} ({marker_failures} marker)", original.len()),
    );
}

#[test]
fn criterion_9_evaluator_arithmetic() {
    let start = Instant::now();
    // gold ranks 1, 7, absent, 3
    let gold_rank = [Some(1usize), Some(7), None, Some(3)];
    let queries: Vec<BenchmarkQuery> = (0..4)
        .map(|i| BenchmarkQuery {
            query_id: format!("q{i}"),
            query: format!("query {i}"),
            gold_paper_ids: vec![format!("gold{i}")],
        })
        .collect();
    let track = BenchmarkTrack::new("worked", queries).unwrap();
    let system = |q: &str| -> citeseek::Result<RankedList> {
        let i: usize = q.trim_start_matches("query ").parse().unwrap();
        let mut ids: Vec<String> = (0..30).map(|j| format!("other{i}-{j}")).collect();
        if let Some(r) = gold_rank[i] {
            ids[r - 1] = format!("gold{i}");
        }
        Ok(RankedList::from_ids(ids))
    };
    let acc = evaluate(&track, system, &DEFAULT_KS).unwrap();
    let exact = acc == [25.0, 50.0, 75.0, 75.0];

    // monotone in k on random systems as well
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut monotone = true;
    for _ in 0..50 {
        let ranks: Vec<Option<usize>> = (0..4)
            .map(|_| rng.random_bool(0.8).then(|| rng.random_range(1..=30)))
            .collect();
        let sys = |q: &str| -> citeseek::Result<RankedList> {
            let i: usize = q.trim_start_matches("query ").parse().unwrap();
            let mut ids: Vec<String> = (0..30).map(|j| format!("x{j}")).collect();
            if let Some(r) = ranks[i] {
                ids[r - 1] = format!("gold{i}");
            }
            Ok(RankedList::from_ids(ids))
        };
        monotone &= nondecreasing(&evaluate(&track, sys, &[1, 2, 3, 5, 10, 20, 30]).unwrap());
    }
    report(
        9,
        "evaluator arithmetic",
        exact && monotone,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("worked example = {acc:?}, monotone = {monotone}"),
    );
}

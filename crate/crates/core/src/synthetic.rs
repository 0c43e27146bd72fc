//! Seeded synthetic corpora for benchmarks and tests.
//!
//! Words are pronounceable nonsense strings, so every fixture controls its
//! vocabulary exactly: each topic owns a disjoint word list, each document
//! owns a few private words, and an optional shared pool spans topics.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Reference};
use crate::error::{Error, Result};
use crate::eval::{BenchmarkQuery, BenchmarkTrack};
use crate::store::Store;
use crate::text::is_stopword;
use crate::train::QueryPassagePair;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const FILLER: &[&str] = &["the", "of", "and", "in", "with", "for", "a", "to", "is", "on"];

/// Deterministic supply of distinct three-syllable words.
#[derive(Debug, Default)]
pub struct WordSource {
    next: usize,
}

impl WordSource {
    pub fn word(&mut self) -> String {
        let base = CONSONANTS.len() * VOWELS.len();
        loop {
            let mut i = self.next;
            self.next += 1;
            let mut w = String::with_capacity(6);
            for _ in 0..3 {
                let s = i % base;
                i /= base;
                w.push(CONSONANTS[s / VOWELS.len()] as char);
                w.push(VOWELS[s % VOWELS.len()] as char);
            }
            if i == 0 && !is_stopword(&w) {
                return w;
            }
            assert!(i == 0, "word space exhausted");
        }
    }

    pub fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpusConfig {
    pub documents: usize,
    pub topics: usize,
    pub topic_vocab: usize,
    pub private_vocab: usize,
    /// Fraction of topic-word slots drawn from a pool common to all topics.
    pub shared_fraction: f64,
    pub shared_vocab: usize,
    pub paragraphs: usize,
    pub sentences_per_paragraph: usize,
    pub words_per_sentence: usize,
    /// Private words per sentence.
    pub private_per_sentence: usize,
    pub seed: u64,
}

impl Default for TopicCorpusConfig {
    fn default() -> Self {
        Self {
            documents: 200,
            topics: 8,
            topic_vocab: 80,
            private_vocab: 8,
            shared_fraction: 0.0,
            shared_vocab: 60,
            paragraphs: 3,
            sentences_per_paragraph: 4,
            words_per_sentence: 18,
            private_per_sentence: 3,
            seed: 0,
        }
    }
}

/// Vocabulary drawn for a topic corpus.
#[derive(Debug, Clone)]
pub struct TopicVocab {
    pub topics: Vec<Vec<String>>,
    pub shared: Vec<String>,
    /// Private words of each document, by document index.
    pub private: Vec<Vec<String>>,
}

pub fn topic_doc_id(topic: usize, index: usize) -> String {
    format!("t{topic}-p{index:04}")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_ascii_uppercase().to_string() + c.as_str())
        .unwrap_or_default()
}

fn sentence(
    rng: &mut ChaCha8Rng,
    cfg: &TopicCorpusConfig,
    topic: &[String],
    shared: &[String],
    private: &[String],
) -> String {
    let mut words: Vec<&str> = private
        .choose_multiple(rng, cfg.private_per_sentence.min(private.len()))
        .map(String::as_str)
        .collect();
    while words.len() < cfg.words_per_sentence {
        let w = if rng.random_bool(0.25) {
            FILLER.choose(rng).copied().unwrap()
        } else if !shared.is_empty() && rng.random_bool(cfg.shared_fraction) {
            shared.choose(rng).unwrap().as_str()
        } else {
            topic.choose(rng).unwrap().as_str()
        };
        words.push(w);
    }
    words.shuffle(rng);
    let mut s = capitalize(words[0]);
    for w in &words[1..] {
        s.push(' ');
        s.push_str(w);
    }
    s.push('.');
    s
}

/// Documents spread round-robin over disjoint topic vocabularies.
pub fn topic_corpus(cfg: &TopicCorpusConfig) -> Result<(Corpus, TopicVocab)> {
    if cfg.topics == 0 || cfg.documents == 0 || cfg.words_per_sentence <= cfg.private_per_sentence {
        return Err(Error::Config("degenerate synthetic corpus config".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut words = WordSource::default();
    let topics: Vec<Vec<String>> = (0..cfg.topics).map(|_| words.words(cfg.topic_vocab)).collect();
    let shared = if cfg.shared_fraction > 0.0 {
        words.words(cfg.shared_vocab)
    } else {
        Vec::new()
    };
    let private: Vec<Vec<String>> = (0..cfg.documents)
        .map(|_| words.words(cfg.private_vocab))
        .collect();

    let mut docs = Vec::with_capacity(cfg.documents);
    for (i, own) in private.iter().enumerate() {
        let t = i % cfg.topics;
        let body = (0..cfg.paragraphs)
            .map(|_| {
                (0..cfg.sentences_per_paragraph)
                    .map(|_| sentence(&mut rng, cfg, &topics[t], &shared, own))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        docs.push(Document {
            id: topic_doc_id(t, i),
            title: format!("{} {}", capitalize(&own[0]), own[1]),
            abstract_text: sentence(&mut rng, cfg, &topics[t], &shared, own),
            body,
            references: Vec::new(),
        });
    }
    Ok((
        Corpus::new(docs)?,
        TopicVocab {
            topics,
            shared,
            private,
        },
    ))
}

/// Splits generated pairs into training pairs and a held-out benchmark of
/// `held_out` queries whose gold paper is the positive's parent.
pub fn split_pairs(
    pairs: &[QueryPassagePair],
    store: &Store,
    held_out: usize,
    seed: u64,
) -> Result<(Vec<QueryPassagePair>, BenchmarkTrack)> {
    if held_out >= pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot hold out {held_out} of {} pairs",
            pairs.len()
        )));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test, train) = order.split_at(held_out);
    let mut test = test.to_vec();
    test.sort_unstable();
    let queries = test
        .iter()
        .enumerate()
        .map(|(n, &i)| {
            let p = &pairs[i];
            let doc = store
                .doc_of(&p.positive_passage_id)
                .ok_or_else(|| Error::UnknownPassage(p.positive_passage_id.clone()))?;
            Ok(BenchmarkQuery {
                query_id: format!("q{n:04}"),
                query: p.query.clone(),
                gold_paper_ids: vec![doc.to_string()],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut train: Vec<QueryPassagePair> = train.iter().map(|&i| pairs[i].clone()).collect();
    train.sort_by(|a, b| a.positive_passage_id.cmp(&b.positive_passage_id));
    Ok((train, BenchmarkTrack::new("held-out", queries)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub base: TopicCorpusConfig,
    pub queries: usize,
    /// Fraction of queries whose gold paper is reachable only by citation.
    pub planted_fraction: f64,
    /// Extra references per citing paper, placed far from the planted one.
    pub distractor_refs: usize,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            base: TopicCorpusConfig {
                documents: 120,
                ..TopicCorpusConfig::default()
            },
            queries: 60,
            planted_fraction: 0.3,
            distractor_refs: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub corpus: Corpus,
    pub track: BenchmarkTrack,
    /// Query ids whose gold is reachable only through a citation.
    pub planted: Vec<String>,
    /// `(citing paper, gold paper)` per planted query.
    pub citations: Vec<(String, String)>,
}

fn query_text(words: &[String]) -> String {
    match words {
        [a] => format!("which work discusses {a}?"),
        [a, b] => format!("which work discusses {a} and {b}?"),
        [a, b, c, ..] => format!("which work discusses {a}, {b} and {c}?"),
        [] => "which work discusses nothing?".into(),
    }
}

/// Topic corpus plus citation structure. A planted query uses three fresh
/// words that occur only in one citing paper, next to an anchor that cites
/// the gold paper; the gold paper shares no words with the query. The other
/// queries ask for a paper by three of its private words.
pub fn planted_fixture(cfg: &PlantedConfig) -> Result<PlantedFixture> {
    let (corpus, vocab) = topic_corpus(&cfg.base)?;
    let mut docs: Vec<Document> = corpus.documents().to_vec();
    let n = docs.len();
    let planted_count = (cfg.queries as f64 * cfg.planted_fraction).round() as usize;
    if cfg.queries == 0 || 2 * planted_count + (cfg.queries - planted_count) > n {
        return Err(Error::Config("planted fixture needs more documents".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (citing, rest) = order.split_at(planted_count);
    let (golds, rest) = rest.split_at(planted_count);
    let direct = &rest[..cfg.queries - planted_count];

    // fresh words after every word the corpus already uses
    let mut words = WordSource::default();
    let used = vocab.topics.iter().map(Vec::len).sum::<usize>()
        + vocab.shared.len()
        + vocab.private.iter().map(Vec::len).sum::<usize>();
    words.words(used);

    let mut queries = Vec::new();
    let mut planted = Vec::new();
    let mut citations = Vec::new();
    for (j, (&c, &g)) in citing.iter().zip(golds).enumerate() {
        let cue = words.words(3);
        let gold_id = docs[g].id.clone();
        let citing_doc = &mut docs[c];
        let mut refs = vec![Reference {
            ordinal: 1,
            target_id: Some(gold_id.clone()),
            raw_citation: format!("{} et al.", capitalize(&cue[0])),
        }];
        // the planted anchor opens a paragraph of its own so the distractors
        // in other paragraphs stay outside its context window
        let mut planted_par = format!(
            "{} {} {} was introduced in [[1]].",
            capitalize(&cue[0]),
            cue[1],
            cue[2]
        );
        let filler_topic = &vocab.topics[c % vocab.topics.len()];
        for _ in 0..30 {
            planted_par.push(' ');
            planted_par.push_str(filler_topic.choose(&mut rng).unwrap());
        }
        planted_par.push('.');
        for d in 0..cfg.distractor_refs {
            let ordinal = d as u32 + 2;
            let target = loop {
                let t = *order.choose(&mut rng).unwrap();
                if t != c && t != g {
                    break docs_id(&corpus, t);
                }
            };
            refs.push(Reference {
                ordinal,
                target_id: Some(target),
                raw_citation: format!("Citation {ordinal}"),
            });
            let k = (d + 1) % citing_doc.body.len();
            citing_doc.body[k].push_str(&format!(" As shown in [[{ordinal}]]."));
        }
        citing_doc.body.insert(0, planted_par);
        citing_doc.references = refs;
        let qid = format!("q{j:04}");
        queries.push(BenchmarkQuery {
            query_id: qid.clone(),
            query: query_text(&cue),
            gold_paper_ids: vec![gold_id.clone()],
        });
        planted.push(qid);
        citations.push((citing_doc.id.clone(), gold_id));
    }
    for (j, &d) in direct.iter().enumerate() {
        let own: Vec<String> = vocab.private[d]
            .choose_multiple(&mut rng, 3)
            .cloned()
            .collect();
        queries.push(BenchmarkQuery {
            query_id: format!("q{:04}", planted_count + j),
            query: query_text(&own),
            gold_paper_ids: vec![docs[d].id.clone()],
        });
    }
    Ok(PlantedFixture {
        corpus: Corpus::new(docs)?,
        track: BenchmarkTrack::new("planted", queries)?,
        planted,
        citations,
    })
}

fn docs_id(corpus: &Corpus, i: usize) -> String {
    corpus.documents()[i].id.clone()
}

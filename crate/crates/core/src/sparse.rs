//! Okapi BM25 over passages.
//!
//! `score(q, p) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·len/avgdl))`
//! with `idf(t) = ln(1 + (N − df + 0.5) / (df + 0.5))`.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::ensure_unique;
use crate::error::{Error, Result};
use crate::ranking::RankedList;
use crate::text::terms;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub passage: u32,
    pub tf: u32,
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    /// term → postings sorted by passage ordinal.
    postings: BTreeMap<String, Vec<Posting>>,
    ids: Vec<String>,
    by_id: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    avgdl: f64,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn build<'a, I>(passages: I, params: Bm25Params) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        if !(params.k1 > 0.0) || !(0.0..=1.0).contains(&params.b) {
            return Err(Error::Config(format!(
                "bm25 requires k1 > 0 and b in [0, 1], got k1={} b={}",
                params.k1, params.b
            )));
        }
        let passages: Vec<(&str, &str)> = passages.into_iter().collect();
        ensure_unique(passages.iter().map(|(id, _)| *id))?;

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(passages.len());
        for (i, (_, text)) in passages.iter().enumerate() {
            let toks = terms(text);
            doc_lengths.push(toks.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push(Posting {
                    passage: i as u32,
                    tf: n,
                });
            }
        }
        let avgdl = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / doc_lengths.len() as f64
        };
        let ids: Vec<String> = passages.iter().map(|(id, _)| id.to_string()).collect();
        let by_id = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Ok(Self {
            postings,
            ids,
            by_id,
            doc_lengths,
            avgdl,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn tf(&self, term: &str, passage_id: &str) -> u32 {
        self.by_id
            .get(passage_id)
            .and_then(|&i| self.posting(term, i))
            .map_or(0, |p| p.tf)
    }

    pub fn doc_length(&self, passage_id: &str) -> Option<u32> {
        self.by_id
            .get(passage_id)
            .map(|&i| self.doc_lengths[i as usize])
    }

    fn posting(&self, term: &str, passage: u32) -> Option<&Posting> {
        let list = self.postings.get(term)?;
        list.binary_search_by_key(&passage, |p| p.passage)
            .ok()
            .map(|i| &list[i])
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.ids.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = 1.0 - b + b * f64::from(len) / self.avgdl;
        idf * tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// BM25 score of one passage; repeated query terms count repeatedly.
    pub fn score<S: AsRef<str>>(&self, query_terms: &[S], passage_id: &str) -> Result<f64> {
        let &idx = self
            .by_id
            .get(passage_id)
            .ok_or_else(|| Error::UnknownPassage(passage_id.to_string()))?;
        let len = self.doc_lengths[idx as usize];
        Ok(query_terms
            .iter()
            .filter_map(|t| {
                let t = t.as_ref();
                self.posting(t, idx)
                    .map(|p| self.term_weight(self.idf(t), p.tf, len))
            })
            .sum())
    }

    /// Top-`k` passages with a positive score, descending, ties by passage id.
    pub fn search(&self, query: &str, k: usize) -> RankedList {
        let query_terms = terms(query);
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for t in &query_terms {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            let idf = self.idf(t);
            for p in list {
                let w = self.term_weight(idf, p.tf, self.doc_lengths[p.passage as usize]);
                *acc.entry(p.passage).or_default() += w;
            }
        }
        let scored = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(i, s)| (self.ids[i as usize].clone(), s))
            .collect();
        RankedList::top_k_by_score(scored, k)
    }
}

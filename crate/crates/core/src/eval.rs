//! Benchmark tracks, passage-to-paper aggregation and top-k accuracy.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, write_jsonl, Corpus};
use crate::error::{Error, Result};
use crate::ranking::{RankedItem, RankedList};
use crate::store::Store;

pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 20];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkQuery {
    pub query_id: String,
    pub query: String,
    pub gold_paper_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkTrack {
    pub name: String,
    pub queries: Vec<BenchmarkQuery>,
}

impl BenchmarkTrack {
    pub fn new(name: impl Into<String>, queries: Vec<BenchmarkQuery>) -> Result<Self> {
        let mut ids = HashSet::new();
        for q in &queries {
            if !ids.insert(q.query_id.as_str()) {
                return Err(Error::DuplicateId(q.query_id.clone()));
            }
            if q.gold_paper_ids.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "query {} has no gold papers",
                    q.query_id
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            queries,
        })
    }

    /// Checks that every gold id names a corpus document.
    pub fn validate_against(&self, corpus: &Corpus) -> Result<()> {
        for q in &self.queries {
            if let Some(missing) = q.gold_paper_ids.iter().find(|g| !corpus.contains(g)) {
                return Err(Error::UnknownDocument(missing.clone()));
            }
        }
        Ok(())
    }

    /// Reads a JSONL track; the name is the file stem.
    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(name, read_jsonl(path)?)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.queries)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Collapses a passage ranking to papers: each paper takes the rank (and
/// score) of its best passage.
pub fn passages_to_papers_with(
    ranked: &RankedList,
    doc_of: impl Fn(&str) -> Option<String>,
) -> Result<RankedList> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in &ranked.items {
        let doc = doc_of(&item.id).ok_or_else(|| Error::UnknownPassage(item.id.clone()))?;
        if seen.insert(doc.clone()) {
            out.push(RankedItem {
                id: doc,
                score: item.score,
            });
        }
    }
    Ok(RankedList::new(out))
}

pub fn passages_to_papers(ranked: &RankedList, store: &Store) -> Result<RankedList> {
    passages_to_papers_with(ranked, |id| store.doc_of(id).map(str::to_string))
}

/// 1 if any gold id is among the first `k` entries, else 0.
pub fn topk_hit(ranked: &RankedList, gold: &[String], k: usize) -> u32 {
    u32::from(ranked.ids().take(k).any(|id| gold.iter().any(|g| g == id)))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Accuracy at each k in percent, rounded to two decimals. A failing system
/// call counts as a miss for that query.
pub fn evaluate<F>(track: &BenchmarkTrack, system: F, ks: &[usize]) -> Result<Vec<f64>>
where
    F: Fn(&str) -> Result<RankedList>,
{
    if track.is_empty() {
        return Err(Error::InvalidArgument(format!("track {} has no queries", track.name)));
    }
    if ks.contains(&0) {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut queries: Vec<&BenchmarkQuery> = track.queries.iter().collect();
    queries.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let mut hits = vec![0u32; ks.len()];
    for q in queries {
        let ranked = match system(&q.query) {
            Ok(r) => r,
            Err(e) => {
                warn!("query {} failed: {e}", q.query_id);
                continue;
            }
        };
        for (h, &k) in hits.iter_mut().zip(ks) {
            *h += topk_hit(&ranked, &q.gold_paper_ids, k);
        }
    }
    let n = track.len() as f64;
    Ok(hits.iter().map(|&h| round2(100.0 * h as f64 / n)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    /// Percentages aligned with [`EvalReport::ks`].
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub track: String,
    pub ks: Vec<usize>,
    pub query_count: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config_digest: String,
    pub rows: Vec<MethodRow>,
}

/// A named system under evaluation.
pub type Method<'a> = (&'a str, &'a dyn Fn(&str) -> Result<RankedList>);

/// Evaluates each method in the given order on the same track.
pub fn evaluate_methods(
    track: &BenchmarkTrack,
    methods: &[Method<'_>],
    ks: &[usize],
    config_digest: &str,
) -> Result<EvalReport> {
    let rows = methods
        .iter()
        .map(|(name, system)| {
            Ok(MethodRow {
                method: name.to_string(),
                accuracy: evaluate(track, system, ks)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(EvalReport {
        track: track.name.clone(),
        ks: ks.to_vec(),
        query_count: track.len(),
        timestamp,
        config_digest: config_digest.to_string(),
        rows,
    })
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Accuracy of `method` at `k`, if both were evaluated.
    pub fn accuracy(&self, method: &str, k: usize) -> Option<f64> {
        let col = self.ks.iter().position(|&x| x == k)?;
        self.row(method).map(|r| r.accuracy[col])
    }

    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.method.len())
            .max()
            .unwrap_or(0)
            .max("method".len());
        let mut out = format!("{:<width$}", "method");
        for k in &self.ks {
            write!(out, "  {:>7}", format!("top-{k}")).unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{:<width$}", row.method).unwrap();
            for a in &row.accuracy {
                write!(out, "  {a:>7.2}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

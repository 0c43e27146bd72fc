//! Reference extraction: read the top papers' passages, pick the cited works
//! that best answer the query, and splice them into the ranking right after
//! the citing paper.

use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{find_markers, Corpus, RefMarker};
use crate::error::Result;
use crate::prompts;
use crate::ranking::{RankedItem, RankedList};
use crate::service::GenerationClient;
use crate::store::Store;
use crate::text::{is_stopword, terms, whitespace_spans, IdfTable};

pub const DEFAULT_EXPAND_K: usize = 10;
pub const DEFAULT_N_REFS: usize = 3;
/// Whitespace tokens on each side of a marker considered its context.
pub const CONTEXT_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRequest {
    pub query: String,
    pub paper_id: String,
    pub passages: Vec<String>,
    pub n_refs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub paper_id: String,
    pub extracted: Vec<RefMarker>,
    /// The extractor judged the paper itself to be the answer.
    pub self_selected: bool,
}

impl ExtractionResult {
    pub fn empty(paper_id: &str) -> Self {
        Self {
            paper_id: paper_id.to_string(),
            extracted: Vec::new(),
            self_selected: false,
        }
    }
}

pub trait ReferenceExtractor {
    fn extract(&self, request: &ExtractionRequest) -> Result<ExtractionResult>;
}

/// Offline extractor: ranks markers by how much of the query appears in the
/// words around them.
pub struct RuleExtractor<'a> {
    pub idf: &'a IdfTable,
}

impl ReferenceExtractor for RuleExtractor<'_> {
    fn extract(&self, request: &ExtractionRequest) -> Result<ExtractionResult> {
        Ok(extract_refs_rule(request, self.idf))
    }
}

/// Query terms worth matching: distinct, non-stopword.
fn content_terms(text: &str) -> HashSet<String> {
    terms(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Terms of the ±[`CONTEXT_WINDOW`] whitespace tokens around `text[start..end]`.
fn context_terms(text: &str, spans: &[(usize, usize)], start: usize, end: usize) -> HashSet<String> {
    let first = spans.partition_point(|&(_, e)| e <= start);
    let last = spans.partition_point(|&(s, _)| s < end);
    let lo = first.saturating_sub(CONTEXT_WINDOW);
    let hi = (last + CONTEXT_WINDOW).min(spans.len());
    spans[lo..first]
        .iter()
        .chain(&spans[last..hi])
        .flat_map(|&(s, e)| terms(&text[s..e]))
        .collect()
}

/// Scores each marker of `request.paper_id` by the idf mass of query terms in
/// its context window and returns the best `n_refs`, ties by (passage, offset).
pub fn extract_refs_rule(request: &ExtractionRequest, idf: &IdfTable) -> ExtractionResult {
    let query = content_terms(&request.query);
    let mut scored: Vec<(f64, usize, usize, RefMarker)> = Vec::new();
    for (pi, text) in request.passages.iter().enumerate() {
        let spans = whitespace_spans(text);
        for m in find_markers(text) {
            if m.marker.parent_id != request.paper_id {
                continue;
            }
            let ctx = context_terms(text, &spans, m.start, m.end);
            let mut weights: Vec<f64> = query.intersection(&ctx).map(|t| idf.idf(t)).collect();
            weights.sort_by(f64::total_cmp);
            scored.push((weights.into_iter().sum(), pi, m.start, m.marker));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut seen = HashSet::new();
    let extracted = scored
        .into_iter()
        .map(|(_, _, _, m)| m)
        .filter(|m| seen.insert(m.clone()))
        .take(request.n_refs)
        .collect();
    ExtractionResult {
        paper_id: request.paper_id.clone(),
        extracted,
        self_selected: false,
    }
}

pub fn extraction_prompt(request: &ExtractionRequest) -> String {
    let passages = request
        .passages
        .iter()
        .enumerate()
        .map(|(i, p)| format!("[Passage {}]\n{}", i + 1, p))
        .collect::<Vec<_>>()
        .join("\n\n");
    prompts::render(
        prompts::EXTRACT,
        &[
            ("query", &request.query),
            ("paper_id", &request.paper_id),
            ("passages", &passages),
            ("n_refs", &request.n_refs.to_string()),
        ],
    )
}

/// Reads markers out of a model reply. Markers must name the requested paper
/// and an ordinal in its reference list; duplicates collapse. A bare mention
/// of the paper id outside any marker means the paper answers the query itself.
pub fn parse_extraction_response(
    response: &str,
    request: &ExtractionRequest,
    corpus: &Corpus,
) -> ExtractionResult {
    let ref_count = corpus
        .get(&request.paper_id)
        .map_or(0, |d| d.references.len());
    let found = find_markers(response);
    let mut seen = HashSet::new();
    let extracted = found
        .iter()
        .map(|m| &m.marker)
        .filter(|m| {
            m.parent_id == request.paper_id && m.ordinal >= 1 && m.ordinal as usize <= ref_count
        })
        .filter(|m| seen.insert((*m).clone()))
        .take(request.n_refs)
        .cloned()
        .collect();

    let mut outside = String::with_capacity(response.len());
    let mut last = 0;
    for m in &found {
        outside.push_str(&response[last..m.start]);
        outside.push(' ');
        last = m.end;
    }
    outside.push_str(&response[last..]);
    let self_selected = mentions_id(&outside, &request.paper_id);

    ExtractionResult {
        paper_id: request.paper_id.clone(),
        extracted,
        self_selected,
    }
}

fn mentions_id(text: &str, id: &str) -> bool {
    let is_id = |c: char| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '/');
    text.match_indices(id).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + id.len()..].chars().next();
        !before.is_some_and(is_id) && !after.is_some_and(is_id)
    })
}

/// Extraction through the generation service.
pub struct LlmExtractor<'a> {
    pub client: &'a dyn GenerationClient,
    pub corpus: &'a Corpus,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl ReferenceExtractor for LlmExtractor<'_> {
    fn extract(&self, request: &ExtractionRequest) -> Result<ExtractionResult> {
        let reply = self
            .client
            .generate(&extraction_prompt(request), self.max_tokens, self.temperature)?;
        Ok(parse_extraction_response(&reply, request, self.corpus))
    }
}

/// Walks `ranked` and emits each paper followed by its references, skipping
/// ids already emitted.
pub fn merge_references(ranked: &RankedList, refs: &BTreeMap<String, Vec<String>>) -> RankedList {
    let mut seen: HashSet<&str> = HashSet::new();
    let mut out = Vec::new();
    for item in &ranked.items {
        if seen.insert(&item.id) {
            out.push(item.clone());
        }
        for r in refs.get(&item.id).into_iter().flatten() {
            if seen.insert(r) {
                out.push(RankedItem {
                    id: r.clone(),
                    score: None,
                });
            }
        }
    }
    RankedList::new(out)
}

/// Result of reference expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub ranked: RankedList,
    /// Inserted paper → the paper whose references it came from.
    pub via_reference_of: HashMap<String, String>,
    pub results: Vec<ExtractionResult>,
}

/// Runs extraction on the first `k_expand` papers, resolves the markers to
/// corpus documents, and merges them into the ranking. `candidates` is the
/// passage ranking the papers came from; each paper's request carries its
/// marker-bearing passages from that list. Extractor failures are logged and
/// treated as empty extractions.
pub fn expand_top_k(
    store: &Store,
    query: &str,
    ranked_papers: &RankedList,
    candidates: &RankedList,
    k_expand: usize,
    n_refs: usize,
    extractor: &dyn ReferenceExtractor,
) -> Expansion {
    let mut passages_by_paper: HashMap<&str, Vec<String>> = HashMap::new();
    for id in candidates.ids() {
        if let Some(p) = store.passage(id) {
            if !p.markers.is_empty() {
                passages_by_paper
                    .entry(p.doc_id.as_str())
                    .or_default()
                    .push(p.text.clone());
            }
        }
    }

    let mut refs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut results = Vec::new();
    for paper in ranked_papers.ids().take(k_expand) {
        let Some(passages) = passages_by_paper.get(paper) else {
            continue;
        };
        let request = ExtractionRequest {
            query: query.to_string(),
            paper_id: paper.to_string(),
            passages: passages.clone(),
            n_refs,
        };
        let result = extractor.extract(&request).unwrap_or_else(|e| {
            warn!("reference extraction failed for {paper}: {e}");
            ExtractionResult::empty(paper)
        });
        if !result.self_selected {
            let targets: Vec<String> = result
                .extracted
                .iter()
                .filter_map(|m| {
                    store
                        .corpus()
                        .resolve_reference(m.ordinal, &m.parent_id)
                        .ok()
                        .flatten()
                        .map(str::to_string)
                })
                .collect();
            if !targets.is_empty() {
                refs.insert(paper.to_string(), targets);
            }
        }
        results.push(result);
    }

    let merged = merge_references(ranked_papers, &refs);
    let originals: HashSet<&str> = ranked_papers.ids().collect();
    let mut via = HashMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for item in &ranked_papers.items {
        seen.insert(&item.id);
        for r in refs.get(&item.id).into_iter().flatten() {
            if !originals.contains(r.as_str()) && seen.insert(r) {
                via.insert(r.clone(), item.id.clone());
            }
        }
    }
    Expansion {
        ranked: merged,
        via_reference_of: via,
        results,
    }
}

//! Shared text handling: term extraction, whitespace tokens, idf statistics.

use std::collections::{BTreeMap, HashSet};

/// Lowercased alphanumeric terms. Everything that is not alphanumeric is a
/// separator, so `"Cat, cat!"` and `"cat cat"` produce the same terms.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Distinct terms of `text`, in first-occurrence order.
pub fn term_set(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    terms(text)
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Byte spans `(start, end)` of the Unicode-whitespace separated tokens of `text`.
pub fn whitespace_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Splits on terminal punctuation (`.`, `?`, `!`) followed by whitespace or
/// the end of the text. Returned sentences are trimmed and nonempty.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            let boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "been", "by", "can", "for", "from", "has",
    "have", "in", "into", "is", "it", "its", "of", "on", "or", "our", "ref", "that", "the",
    "their", "these", "this", "to", "was", "we", "were", "which", "while", "with", "work",
    "discusses",
];

/// Terms that carry no topical content: a small English stopword list and
/// pure digit strings.
pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.contains(&term) || term.chars().all(|c| c.is_ascii_digit())
}

/// Seeded 64-bit FNV-1a. The seed's little-endian bytes are hashed before the
/// input, so the function is stable across platforms and releases.
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Document frequencies over a passage collection, with the BM25-style
/// smoothed idf `ln(1 + (N - df + 0.5) / (df + 0.5))`.
#[derive(Debug, Clone, Default)]
pub struct IdfTable {
    df: BTreeMap<String, u32>,
    n: u32,
}

impl IdfTable {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: BTreeMap<String, u32> = BTreeMap::new();
        let mut n = 0;
        for text in texts {
            n += 1;
            for t in term_set(text) {
                *df.entry(t).or_default() += 1;
            }
        }
        Self { df, n }
    }

    pub fn doc_count(&self) -> u32 {
        self.n
    }

    pub fn df(&self, term: &str) -> u32 {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = f64::from(self.n);
        let df = f64::from(self.df(term));
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

//! Documents, passages, and the `Ref.X of <id>` reference markers that tie a
//! passage's citations back to its parent document's reference list.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::whitespace_spans;

/// One entry of a document's reference list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub ordinal: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_id: Option<String>,
    #[serde(default)]
    pub raw_citation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub body: Vec<String>,
    #[serde(default)]
    pub references: Vec<Reference>,
}

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | ':' | '/')
}

/// Document ids must be usable inside a reference marker: nonempty, made of
/// `[A-Za-z0-9._:/-]`, and not ending in `.` or `:` (those would be read as
/// sentence punctuation when scanning running text).
pub fn is_valid_doc_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(is_id_char) && !id.ends_with(['.', ':'])
}

impl Document {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidDocument {
            id: self.id.clone(),
            reason,
        };
        if !is_valid_doc_id(&self.id) {
            return Err(invalid("id must be nonempty [A-Za-z0-9._:/-]".into()));
        }
        for (i, r) in self.references.iter().enumerate() {
            if r.ordinal as usize != i + 1 {
                return Err(invalid(format!(
                    "reference ordinals must be 1..={} in order, found {} at position {}",
                    self.references.len(),
                    r.ordinal,
                    i
                )));
            }
        }
        Ok(())
    }

    pub fn reference(&self, ordinal: u32) -> Option<&Reference> {
        let idx = (ordinal as usize).checked_sub(1)?;
        self.references.get(idx)
    }

    /// Body paragraphs joined by a blank line; passage spans index into this.
    pub fn joined_body(&self) -> String {
        self.body.join("\n\n")
    }
}

/// A parsed `Ref.X of <parent id>` identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RefMarker {
    pub ordinal: u32,
    pub parent_id: String,
}

impl RefMarker {
    pub fn new(ordinal: u32, parent_id: impl Into<String>) -> Self {
        Self {
            ordinal,
            parent_id: parent_id.into(),
        }
    }
}

impl fmt::Display for RefMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ref.{} of {}", self.ordinal, self.parent_id)
    }
}

const MARKER_PREFIX: &str = "Ref.";
const MARKER_INFIX: &str = " of ";

/// Parses exactly one marker spanning the whole input.
pub fn parse_ref_identifier(marker: &str) -> Result<RefMarker> {
    let err = |position: usize, reason: &'static str| Error::MarkerParse {
        marker: marker.to_string(),
        position,
        reason,
    };
    let rest = marker
        .strip_prefix(MARKER_PREFIX)
        .ok_or_else(|| err(0, "expected \"Ref.\""))?;
    let digits_len = rest.bytes().take_while(u8::is_ascii_digit).count();
    if digits_len == 0 {
        return Err(err(MARKER_PREFIX.len(), "expected ordinal digits"));
    }
    let ordinal: u32 = rest[..digits_len]
        .parse()
        .map_err(|_| err(MARKER_PREFIX.len(), "ordinal out of range"))?;
    let infix_pos = MARKER_PREFIX.len() + digits_len;
    let id = rest[digits_len..]
        .strip_prefix(MARKER_INFIX)
        .ok_or_else(|| err(infix_pos, "expected \" of \""))?;
    let id_pos = infix_pos + MARKER_INFIX.len();
    if id.is_empty() {
        return Err(err(id_pos, "expected parent id"));
    }
    if let Some(bad) = id.char_indices().find(|&(_, c)| !is_id_char(c)) {
        return Err(err(id_pos + bad.0, "invalid parent id character"));
    }
    Ok(RefMarker::new(ordinal, id))
}

/// A marker found in running text, with its byte range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerMatch {
    pub marker: RefMarker,
    pub start: usize,
    pub end: usize,
}

/// Scans `text` for every well-formed marker. Trailing `.`/`:` after the id
/// are treated as punctuation, not part of the id.
pub fn find_markers(text: &str) -> Vec<MarkerMatch> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find(MARKER_PREFIX) {
        let start = from + rel;
        from = start + MARKER_PREFIX.len();
        let after = &text[from..];
        let digits_len = after.bytes().take_while(u8::is_ascii_digit).count();
        if digits_len == 0 {
            continue;
        }
        let Ok(ordinal) = after[..digits_len].parse::<u32>() else {
            continue;
        };
        let Some(id_part) = after[digits_len..].strip_prefix(MARKER_INFIX) else {
            continue;
        };
        let id_len: usize = id_part
            .chars()
            .take_while(|&c| is_id_char(c))
            .map(char::len_utf8)
            .sum();
        let id = id_part[..id_len].trim_end_matches(['.', ':']);
        if id.is_empty() {
            continue;
        }
        let end = from + digits_len + MARKER_INFIX.len() + id.len();
        out.push(MarkerMatch {
            marker: RefMarker::new(ordinal, id),
            start,
            end,
        });
        from = end;
    }
    out
}

/// Replaces every `[[<ordinal>]]` anchor in `paragraph` with
/// `Ref.<ordinal> of <doc.id>`. Other text is copied unchanged.
pub fn insert_ref_identifiers(paragraph: &str, doc: &Document) -> Result<String> {
    let mut out = String::with_capacity(paragraph.len());
    let mut rest_start = 0;
    let mut search = 0;
    while let Some(rel) = paragraph[search..].find("[[") {
        let open = search + rel;
        let inner = &paragraph[open + 2..];
        let digits_len = inner.bytes().take_while(u8::is_ascii_digit).count();
        if digits_len == 0 || !inner[digits_len..].starts_with("]]") {
            search = open + 1;
            continue;
        }
        let close = open + 2 + digits_len + 2;
        let anchor = &paragraph[open..close];
        let ordinal = inner[..digits_len].parse::<u32>().ok();
        let Some(ordinal) = ordinal.filter(|&o| doc.reference(o).is_some()) else {
            return Err(Error::UnknownAnchor {
                anchor: anchor.to_string(),
                offset: open,
                doc_id: doc.id.clone(),
                ordinal: ordinal.unwrap_or(u32::MAX),
            });
        };
        out.push_str(&paragraph[rest_start..open]);
        out.push_str(&RefMarker::new(ordinal, doc.id.as_str()).to_string());
        rest_start = close;
        search = close;
    }
    out.push_str(&paragraph[rest_start..]);
    Ok(out)
}

/// The document with every body paragraph passed through
/// [`insert_ref_identifiers`].
pub fn with_ref_identifiers(doc: &Document) -> Result<Document> {
    let body = doc
        .body
        .iter()
        .map(|p| insert_ref_identifiers(p, doc))
        .collect::<Result<Vec<_>>>()?;
    Ok(Document {
        body,
        ..doc.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub max_tokens_per_passage: usize,
    pub overlap_tokens: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            max_tokens_per_passage: 256,
            overlap_tokens: 32,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens_per_passage == 0 {
            return Err(Error::Config("max_tokens_per_passage must be positive".into()));
        }
        if self.overlap_tokens >= self.max_tokens_per_passage {
            return Err(Error::Config(
                "overlap_tokens must be smaller than max_tokens_per_passage".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub text: String,
    /// Byte range in [`Document::joined_body`].
    pub char_span: (usize, usize),
    /// `(ordinal, byte offset in text)` for every marker of the parent document.
    pub markers: Vec<(u32, usize)>,
    /// Token range `[start, end)` in the whitespace tokenization of the body.
    pub token_range: (usize, usize),
}

/// Token windows `[start, end)` of a sliding segmentation over `n` tokens.
pub fn segment_windows(n: usize, cfg: &SegmentConfig) -> Vec<(usize, usize)> {
    let mut windows = Vec::new();
    if n == 0 {
        return windows;
    }
    let mut start = 0;
    loop {
        let end = (start + cfg.max_tokens_per_passage).min(n);
        windows.push((start, end));
        if end == n {
            break;
        }
        start = end - cfg.overlap_tokens;
    }
    windows
}

pub fn passage_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}#{index:04}")
}

/// Splits the document body into overlapping whitespace-token windows. The
/// body is used as-is; run [`with_ref_identifiers`] first to get markers.
pub fn segment_document(doc: &Document, cfg: &SegmentConfig) -> Result<Vec<Passage>> {
    cfg.validate()?;
    let body = doc.joined_body();
    let spans = whitespace_spans(&body);
    let passages = segment_windows(spans.len(), cfg)
        .into_iter()
        .enumerate()
        .map(|(i, (ts, te))| {
            let (start, end) = (spans[ts].0, spans[te - 1].1);
            let text = body[start..end].to_string();
            let markers = find_markers(&text)
                .into_iter()
                .filter(|m| m.marker.parent_id == doc.id)
                .map(|m| (m.marker.ordinal, m.start))
                .collect();
            Passage {
                passage_id: passage_id(&doc.id, i),
                doc_id: doc.id.clone(),
                text,
                char_span: (start, end),
                markers,
                token_range: (ts, te),
            }
        })
        .collect();
    Ok(passages)
}

/// A validated document collection with id lookup.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            doc.validate()?;
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self { documents, by_id })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Target document of reference `ordinal` in `parent_id`, if it is in the corpus.
    pub fn resolve_reference(&self, ordinal: u32, parent_id: &str) -> Result<Option<&str>> {
        let parent = self
            .get(parent_id)
            .ok_or_else(|| Error::UnknownDocument(parent_id.to_string()))?;
        let r = parent
            .reference(ordinal)
            .ok_or_else(|| Error::OrdinalOutOfRange {
                doc_id: parent_id.to_string(),
                ordinal,
                count: parent.references.len(),
            })?;
        Ok(r.target_id.as_deref().filter(|t| self.contains(t)))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        Self::new(read_jsonl(path)?)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.documents)
    }
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| Error::Jsonl {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(item);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Checks that no two items share an id.
pub(crate) fn ensure_unique<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

//! Ingested corpus: the raw documents plus their marker-bearing passages.
//!
//! On disk a store is a directory:
//!
//! ```text
//! manifest.json     {"version":1,"segment":{...},"documents":N,"passages":M}
//! documents.jsonl   documents exactly as ingested (citation anchors intact)
//! passages.jsonl    segmented passages with "Ref.X of <id>" markers
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    ensure_unique, read_jsonl, segment_document, with_ref_identifiers, write_jsonl, Corpus,
    Passage, SegmentConfig,
};
use crate::error::{Error, Result};
use crate::text::IdfTable;

const STORE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    segment: SegmentConfig,
    documents: usize,
    passages: usize,
}

#[derive(Debug)]
pub struct Store {
    corpus: Corpus,
    passages: Vec<Passage>,
    by_id: HashMap<String, usize>,
    segment: SegmentConfig,
    idf: OnceLock<IdfTable>,
}

impl Store {
    /// Inserts reference identifiers into every document and segments it.
    pub fn build(corpus: Corpus, segment: SegmentConfig) -> Result<Self> {
        segment.validate()?;
        let mut passages = Vec::new();
        for doc in corpus.documents() {
            let marked = with_ref_identifiers(doc)?;
            passages.extend(segment_document(&marked, &segment)?);
        }
        Self::assemble(corpus, passages, segment)
    }

    fn assemble(corpus: Corpus, passages: Vec<Passage>, segment: SegmentConfig) -> Result<Self> {
        ensure_unique(passages.iter().map(|p| p.passage_id.as_str()))?;
        let by_id = passages
            .iter()
            .enumerate()
            .map(|(i, p)| (p.passage_id.clone(), i))
            .collect();
        Ok(Self {
            corpus,
            passages,
            by_id,
            segment,
            idf: OnceLock::new(),
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn segment_config(&self) -> SegmentConfig {
        self.segment
    }

    pub fn passage(&self, id: &str) -> Option<&Passage> {
        self.by_id.get(id).map(|&i| &self.passages[i])
    }

    pub fn require_passage(&self, id: &str) -> Result<&Passage> {
        self.passage(id)
            .ok_or_else(|| Error::UnknownPassage(id.to_string()))
    }

    pub fn passage_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn doc_of(&self, passage_id: &str) -> Option<&str> {
        self.passage(passage_id).map(|p| p.doc_id.as_str())
    }

    /// Idf statistics over all passages, computed once.
    pub fn idf(&self) -> &IdfTable {
        self.idf
            .get_or_init(|| IdfTable::build(self.passages.iter().map(|p| p.text.as_str())))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            version: STORE_VERSION,
            segment: self.segment,
            documents: self.corpus.len(),
            passages: self.passages.len(),
        };
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        self.corpus.write_jsonl(&dir.join("documents.jsonl"))?;
        write_jsonl(&dir.join("passages.jsonl"), &self.passages)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&raw)?;
        let format_err = |reason: String| Error::Format {
            path: dir.to_path_buf(),
            reason,
        };
        if manifest.version != STORE_VERSION {
            return Err(format_err(format!("unsupported store version {}", manifest.version)));
        }
        let corpus = Corpus::read_jsonl(&dir.join("documents.jsonl"))?;
        let passages: Vec<Passage> = read_jsonl(&dir.join("passages.jsonl"))?;
        if corpus.len() != manifest.documents || passages.len() != manifest.passages {
            return Err(format_err("manifest counts do not match contents".into()));
        }
        if let Some(p) = passages.iter().find(|p| !corpus.contains(&p.doc_id)) {
            return Err(format_err(format!(
                "passage {} has unknown parent {}",
                p.passage_id, p.doc_id
            )));
        }
        Self::assemble(corpus, passages, manifest.segment)
    }
}

//! Python bindings: corpus stores, the dense encoder and index, training,
//! and the full search pipeline.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use citeseek::corpus::{Corpus, SegmentConfig};
use citeseek::dense::{cosine, EmbeddingModel, VectorIndex};
use citeseek::eval::BenchmarkTrack;
use citeseek::pipeline::{ArtifactPaths, ExtractorMode, PipelineConfig, System};
use citeseek::querygen::{generate_dataset, GenConfig, QuerySource};
use citeseek::ranking::RankedList;
use citeseek::sparse::{Bm25Index, Bm25Params};
use citeseek::store::Store;
use citeseek::train::{attach_passage_text, read_pairs, train_retriever, write_pairs, TrainConfig};
use citeseek::Error;

fn py_err(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        Error::Io { .. } => PyIOError::new_err(msg),
        Error::Service(_) => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn scored(list: RankedList) -> Vec<(String, f64)> {
    list.items
        .into_iter()
        .map(|i| (i.id, i.score.unwrap_or(f64::NAN)))
        .collect()
}

/// A segmented corpus with its idf table.
#[pyclass(name = "Store")]
pub struct PyStore {
    inner: Store,
}

#[pymethods]
impl PyStore {
    /// Reads corpus JSONL and segments it into passages.
    #[staticmethod]
    #[pyo3(signature = (corpus_path, max_tokens = 256, overlap = 32))]
    fn build(corpus_path: PathBuf, max_tokens: usize, overlap: usize) -> PyResult<Self> {
        let corpus = Corpus::read_jsonl(&corpus_path).map_err(py_err)?;
        let segment = SegmentConfig {
            max_tokens_per_passage: max_tokens,
            overlap_tokens: overlap,
        };
        let inner = Store::build(corpus, segment).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Store::load(&dir).map_err(py_err)?,
        })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(&dir).map_err(py_err)
    }

    fn write_corpus(&self, path: PathBuf) -> PyResult<()> {
        self.inner.corpus().write_jsonl(&path).map_err(py_err)
    }

    #[getter]
    fn num_documents(&self) -> usize {
        self.inner.corpus().len()
    }

    #[getter]
    fn num_passages(&self) -> usize {
        self.inner.passages().len()
    }

    fn passage_ids(&self) -> Vec<String> {
        self.inner.passages().iter().map(|p| p.passage_id.clone()).collect()
    }

    fn passage_text(&self, passage_id: &str) -> PyResult<String> {
        Ok(self.inner.require_passage(passage_id).map_err(py_err)?.text.clone())
    }

    fn doc_of(&self, passage_id: &str) -> Option<String> {
        self.inner.doc_of(passage_id).map(str::to_string)
    }

    /// BM25 over the store's passages.
    #[pyo3(signature = (query, k = 10))]
    fn bm25_search(&self, query: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        let index = Bm25Index::build(
            self.inner.passages().iter().map(|p| (p.passage_id.as_str(), p.text.as_str())),
            Bm25Params::default(),
        )
        .map_err(py_err)?;
        Ok(scored(index.search(query, k)))
    }

    /// Writes fallback query/passage pairs and returns how many were written.
    #[pyo3(signature = (out_path, seed = 0, per_passage = 8))]
    fn generate_pairs(&self, out_path: PathBuf, seed: u64, per_passage: usize) -> PyResult<usize> {
        let cfg = GenConfig {
            queries_per_passage: per_passage,
            seed,
            ..GenConfig::default()
        };
        let pairs = generate_dataset(&self.inner, &cfg, &QuerySource::Fallback).map_err(py_err)?;
        write_pairs(&out_path, &pairs).map_err(py_err)?;
        Ok(pairs.len())
    }

    fn __repr__(&self) -> String {
        format!(
            "Store(documents={}, passages={})",
            self.inner.corpus().len(),
            self.inner.passages().len()
        )
    }
}

/// The hashed-feature dense encoder.
#[pyclass(name = "Model", skip_from_py_object)]
#[derive(Clone)]
pub struct PyModel {
    inner: EmbeddingModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (features = 32768, dim = 64, hash_seed = 0, seed = 0))]
    fn random(features: usize, dim: usize, hash_seed: u64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: EmbeddingModel::random(features, dim, hash_seed, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: EmbeddingModel::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        self.inner.embed(text).values
    }

    fn similarity(&self, a: &str, b: &str) -> PyResult<f64> {
        cosine(&self.inner.embed(a), &self.inner.embed(b)).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.embed_dim()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint().to_string()
    }

    /// Trains a copy of this model on a pairs file; returns the new model and
    /// the mean loss of each epoch.
    #[pyo3(signature = (store, pairs_path, tau = 0.05, batch = 32, micro = 8, lr = 0.1, epochs = 5, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &self,
        store: &PyStore,
        pairs_path: PathBuf,
        tau: f64,
        batch: usize,
        micro: usize,
        lr: f64,
        epochs: usize,
        seed: u64,
    ) -> PyResult<(PyModel, Vec<f64>)> {
        let mut pairs = read_pairs(&pairs_path).map_err(py_err)?;
        attach_passage_text(&mut pairs, &store.inner).map_err(py_err)?;
        let cfg = TrainConfig {
            temperature: tau,
            batch_size: batch,
            micro_batch_size: micro,
            learning_rate: lr,
            epochs,
            seed,
            ..TrainConfig::default()
        };
        let (model, log) = train_retriever(&self.inner, &pairs, &cfg).map_err(py_err)?;
        let losses = log.epochs.iter().map(|e| e.mean_loss).collect();
        Ok((PyModel { inner: model }, losses))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(features={}, dim={}, fingerprint={})",
            self.inner.feature_dim(),
            self.inner.embed_dim(),
            self.inner.fingerprint()
        )
    }
}

/// Exact cosine index over passage embeddings.
#[pyclass(name = "Index")]
pub struct PyIndex {
    inner: VectorIndex,
}

#[pymethods]
impl PyIndex {
    #[staticmethod]
    fn build(model: &PyModel, store: &PyStore) -> PyResult<Self> {
        let inner = VectorIndex::build(
            &model.inner,
            store.inner.passages().iter().map(|p| (p.passage_id.as_str(), p.text.as_str())),
        )
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: VectorIndex::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    /// Top `k` passages as `(passage_id, cosine)` pairs.
    #[pyo3(signature = (model, query, k = 10))]
    fn search(&self, model: &PyModel, query: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        Ok(scored(self.inner.search_text(&model.inner, query, k).map_err(py_err)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// One paper in a pipeline result.
#[pyclass(name = "Hit", get_all)]
pub struct PyHit {
    rank: usize,
    paper_id: String,
    score: Option<f64>,
    retrieved_rank: Option<usize>,
    reranked_rank: Option<usize>,
    via_reference_of: Option<String>,
}

#[pymethods]
impl PyHit {
    fn __repr__(&self) -> String {
        match &self.via_reference_of {
            Some(p) => format!("Hit({}, {}, via={p})", self.rank, self.paper_id),
            None => format!("Hit({}, {})", self.rank, self.paper_id),
        }
    }
}

/// Retrieve, rerank and expand over artifacts on disk.
#[pyclass(name = "Pipeline")]
pub struct PyPipeline {
    system: System,
    cfg: PipelineConfig,
}

#[pymethods]
impl PyPipeline {
    #[staticmethod]
    #[pyo3(signature = (
        store, model, index, scorer = None, retrieve_k = 200, rerank = true,
        expand_k = 10, n_refs = 3, extractor = "fallback",
    ))]
    #[allow(clippy::too_many_arguments)]
    fn load(
        store: PathBuf,
        model: PathBuf,
        index: PathBuf,
        scorer: Option<PathBuf>,
        retrieve_k: usize,
        rerank: bool,
        expand_k: usize,
        n_refs: usize,
        extractor: &str,
    ) -> PyResult<Self> {
        let extractor: ExtractorMode = extractor.parse().map_err(py_err)?;
        let cfg = PipelineConfig {
            retrieve_k,
            rerank,
            expand_k,
            n_refs,
            extractor,
            paths: ArtifactPaths {
                store,
                model,
                index,
                scorer,
            },
        };
        let system = System::load(&cfg).map_err(py_err)?;
        Ok(Self { system, cfg })
    }

    #[getter]
    fn config_digest(&self) -> String {
        self.cfg.digest()
    }

    fn search(&self, query: &str) -> PyResult<Vec<PyHit>> {
        let result = self.system.run_query(query, &self.cfg).map_err(py_err)?;
        Ok(result
            .papers
            .items
            .into_iter()
            .zip(result.trace)
            .enumerate()
            .map(|(i, (item, t))| PyHit {
                rank: i + 1,
                paper_id: item.id,
                score: item.score,
                retrieved_rank: t.retrieved_rank,
                reranked_rank: t.reranked_rank,
                via_reference_of: t.via_reference_of,
            })
            .collect())
    }

    /// Top-k accuracy per enabled stage; optionally saves the JSON report.
    #[pyo3(signature = (track_path, ks = vec![1, 5, 10, 20], report_path = None))]
    fn evaluate(
        &self,
        track_path: PathBuf,
        ks: Vec<usize>,
        report_path: Option<PathBuf>,
    ) -> PyResult<HashMap<String, Vec<f64>>> {
        let track = BenchmarkTrack::read_jsonl(&track_path).map_err(py_err)?;
        let report = self.system.evaluate_stages(&track, &self.cfg, &ks).map_err(py_err)?;
        if let Some(path) = report_path {
            report.save(&path).map_err(py_err)?;
        }
        Ok(report.rows.into_iter().map(|r| (r.method, r.accuracy)).collect())
    }
}

#[pymodule]
pub mod citeseek_py {
    #[pymodule_export]
    use super::{PyHit, PyIndex, PyModel, PyPipeline, PyStore};
}

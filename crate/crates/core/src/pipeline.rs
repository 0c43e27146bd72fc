//! Retrieve → rerank → reference expansion over loaded artifacts.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense::{EmbeddingModel, VectorIndex};
use crate::error::{Error, Result};
use crate::eval::{evaluate_methods, passages_to_papers, BenchmarkTrack, EvalReport, Method};
use crate::extract::{
    expand_top_k, LlmExtractor, ReferenceExtractor, RuleExtractor, DEFAULT_EXPAND_K,
    DEFAULT_N_REFS,
};
use crate::ranking::RankedList;
use crate::reranker::{rerank, CrossScorer, LocalScorer, PassageScorer, DEFAULT_CANDIDATES};
use crate::service::{GenerationClient, HttpService, ServiceConfig};
use crate::store::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorMode {
    Service,
    Fallback,
    Off,
}

impl std::str::FromStr for ExtractorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "service" => Ok(Self::Service),
            "fallback" => Ok(Self::Fallback),
            "off" => Ok(Self::Off),
            other => Err(Error::InvalidArgument(format!("unknown extractor mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub store: PathBuf,
    pub model: PathBuf,
    pub index: PathBuf,
    pub scorer: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub retrieve_k: usize,
    pub rerank: bool,
    pub expand_k: usize,
    pub n_refs: usize,
    pub extractor: ExtractorMode,
    pub paths: ArtifactPaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            retrieve_k: DEFAULT_CANDIDATES,
            rerank: true,
            expand_k: DEFAULT_EXPAND_K,
            n_refs: DEFAULT_N_REFS,
            extractor: ExtractorMode::Fallback,
            paths: ArtifactPaths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("retrieve_k", self.retrieve_k),
            ("expand_k", self.expand_k),
            ("n_refs", self.n_refs),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.expand_k > self.retrieve_k {
            return Err(Error::Config(format!(
                "expand_k ({}) exceeds retrieve_k ({})",
                self.expand_k, self.retrieve_k
            )));
        }
        Ok(())
    }

    /// SHA-256 hex of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// How one final paper got where it is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub paper_id: String,
    /// 1-based paper rank after retrieval.
    pub retrieved_rank: Option<usize>,
    /// 1-based paper rank after reranking; absent when reranking is off.
    pub reranked_rank: Option<usize>,
    pub via_reference_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    pub papers: RankedList,
    /// One entry per final paper, in final order.
    pub trace: Vec<StageTrace>,
}

pub enum RerankBackend {
    Local(CrossScorer),
    Remote(crate::reranker::RemoteScorer),
}

/// Loaded artifacts shared by every query.
pub struct System {
    pub store: Store,
    pub model: EmbeddingModel,
    pub index: VectorIndex,
    pub reranker: Option<RerankBackend>,
    pub client: Option<Arc<dyn GenerationClient>>,
}

impl System {
    /// Assembles a system after checking the index was built by `model`.
    pub fn new(store: Store, model: EmbeddingModel, index: VectorIndex) -> Result<Self> {
        index.check_model(&model)?;
        Ok(Self {
            store,
            model,
            index,
            reranker: None,
            client: None,
        })
    }

    pub fn with_scorer(mut self, scorer: CrossScorer) -> Result<Self> {
        scorer.validate()?;
        self.reranker = Some(RerankBackend::Local(scorer));
        Ok(self)
    }

    pub fn with_reranker(mut self, backend: RerankBackend) -> Self {
        self.reranker = Some(backend);
        self
    }

    pub fn with_client(mut self, client: Arc<dyn GenerationClient>) -> Self {
        self.client = Some(client);
        self
    }

    /// Loads everything `cfg` needs. Service mode reads the endpoint from the
    /// environment.
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let store = Store::load(&cfg.paths.store)?;
        let model = EmbeddingModel::load(&cfg.paths.model)?;
        let index = VectorIndex::load(&cfg.paths.index)?;
        let mut system = Self::new(store, model, index)?;
        if cfg.rerank {
            let path = cfg
                .paths
                .scorer
                .as_ref()
                .ok_or_else(|| Error::Config("reranking is on but no scorer file was given".into()))?;
            system = system.with_scorer(CrossScorer::load(path)?)?;
        }
        if cfg.extractor == ExtractorMode::Service {
            let service = HttpService::new(ServiceConfig::from_env()?);
            system = system.with_client(Arc::new(service));
        }
        Ok(system)
    }

    /// Top passages for `query` from the dense index.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<RankedList> {
        self.index.search(&self.model.embed(query), k)
    }

    /// Retrieval followed by reranking when `cfg.rerank` is set.
    pub fn stage2(&self, query: &str, cfg: &PipelineConfig) -> Result<(RankedList, RankedList)> {
        let retrieved = self.retrieve(query, cfg.retrieve_k)?;
        if !cfg.rerank {
            return Ok((retrieved.clone(), retrieved));
        }
        let reranked = match self.reranker.as_ref() {
            Some(RerankBackend::Local(scorer)) => {
                let local = LocalScorer {
                    scorer,
                    model: &self.model,
                    idf: self.store.idf(),
                };
                rerank(&local, query, &retrieved, &self.store)?
            }
            Some(RerankBackend::Remote(remote)) => {
                rerank(remote as &dyn PassageScorer, query, &retrieved, &self.store)?
            }
            None => return Err(Error::Config("reranking is on but no scorer is loaded".into())),
        };
        Ok((retrieved, reranked))
    }

    pub fn run_query(&self, query: &str, cfg: &PipelineConfig) -> Result<QueryResult> {
        cfg.validate()?;
        let (retrieved, reranked) = self.stage2(query, cfg)?;
        let retrieved_papers = passages_to_papers(&retrieved, &self.store)?;
        let reranked_papers = passages_to_papers(&reranked, &self.store)?;

        let rule;
        let llm;
        let extractor: Option<&dyn ReferenceExtractor> = match cfg.extractor {
            ExtractorMode::Off => None,
            ExtractorMode::Fallback => {
                rule = RuleExtractor {
                    idf: self.store.idf(),
                };
                Some(&rule)
            }
            ExtractorMode::Service => {
                let client = self
                    .client
                    .as_deref()
                    .ok_or_else(|| Error::Config("service extractor needs a client".into()))?;
                llm = LlmExtractor {
                    client,
                    corpus: self.store.corpus(),
                    max_tokens: 256,
                    temperature: 0.0,
                };
                Some(&llm)
            }
        };
        let (papers, via) = match extractor {
            None => (reranked_papers.clone(), HashMap::new()),
            Some(ex) => {
                let expansion = expand_top_k(
                    &self.store,
                    query,
                    &reranked_papers,
                    &reranked,
                    cfg.expand_k,
                    cfg.n_refs,
                    ex,
                );
                (expansion.ranked, expansion.via_reference_of)
            }
        };

        let rank_in = |list: &RankedList, id: &str| list.position(id).map(|p| p + 1);
        let trace = papers
            .ids()
            .map(|id| StageTrace {
                paper_id: id.to_string(),
                retrieved_rank: rank_in(&retrieved_papers, id),
                reranked_rank: if cfg.rerank {
                    rank_in(&reranked_papers, id)
                } else {
                    None
                },
                via_reference_of: via.get(id).cloned(),
            })
            .collect();
        Ok(QueryResult {
            query: query.to_string(),
            papers,
            trace,
        })
    }

    /// One report row per enabled stage: retrieval alone, then with
    /// reranking, then the full configuration with reference expansion.
    pub fn evaluate_stages(
        &self,
        track: &BenchmarkTrack,
        cfg: &PipelineConfig,
        ks: &[usize],
    ) -> Result<EvalReport> {
        track.validate_against(self.store.corpus())?;
        let retrieval_only = PipelineConfig {
            rerank: false,
            extractor: ExtractorMode::Off,
            ..cfg.clone()
        };
        let reranked = PipelineConfig {
            extractor: ExtractorMode::Off,
            ..cfg.clone()
        };
        let run = |c: &PipelineConfig, q: &str| Ok(self.run_query(q, c)?.papers);
        let retriever = |q: &str| run(&retrieval_only, q);
        let rerank = |q: &str| run(&reranked, q);
        let full = |q: &str| run(cfg, q);
        let mut methods: Vec<Method<'_>> = vec![(ROW_RETRIEVER, &retriever)];
        if cfg.rerank {
            methods.push((ROW_RERANKER, &rerank));
        }
        if cfg.extractor != ExtractorMode::Off {
            methods.push((ROW_FULL, &full));
        }
        evaluate_methods(track, &methods, ks, &cfg.digest())
    }
}

pub const ROW_RETRIEVER: &str = "retriever";
pub const ROW_RERANKER: &str = "retriever+reranker";
pub const ROW_FULL: &str = "full pipeline";

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use citeseek::corpus::{Corpus, SegmentConfig};
use citeseek::dense::{EmbeddingModel, VectorIndex};
use citeseek::eval::{BenchmarkTrack, DEFAULT_KS};
use citeseek::pipeline::{ArtifactPaths, ExtractorMode, PipelineConfig, System};
use citeseek::querygen::{generate_dataset, GenConfig, GenMode, GenerationCache, QuerySource};
use citeseek::reranker::CrossScorer;
use citeseek::service::{HttpService, ServiceConfig};
use citeseek::store::Store;
use citeseek::synthetic::{planted_fixture, topic_corpus, PlantedConfig, TopicCorpusConfig};
use citeseek::train::{
    attach_passage_text, mine_hard_negatives, read_groups, read_pairs, train_reranker,
    train_retriever, write_groups, write_pairs, TrainConfig,
};
use citeseek::{Error, Result};

#[derive(Parser)]
#[command(name = "citeseek", version, about = "Academic search: dense retrieval, reranking and reference expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus JSONL file and build a passage store.
    Ingest(IngestArgs),
    /// Write a store's documents back out as corpus JSONL.
    Export(ExportArgs),
    /// Generate a synthetic corpus (and, for planted corpora, a track).
    Synth(SynthArgs),
    /// Generate query/passage training pairs.
    Genqueries(GenArgs),
    /// Train the dense retriever on query/passage pairs.
    TrainRetriever(TrainRetrieverArgs),
    /// Embed every passage of a store into a vector index.
    Index(IndexArgs),
    /// Mine hard negatives for reranker training.
    Mine(MineArgs),
    /// Train the reranker on mined groups.
    TrainReranker(TrainRerankerArgs),
    /// Run one query through the pipeline.
    Search(SearchArgs),
    /// Evaluate top-k accuracy on a benchmark track.
    Eval(EvalArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    max_tokens: usize,
    #[arg(long, default_value_t = 32)]
    overlap: usize,
}

#[derive(Args)]
struct ExportArgs {
    /// Store directory.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Topics,
    Planted,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Planted)]
    kind: SynthKind,
    #[arg(long)]
    out: PathBuf,
    /// Benchmark track output (planted corpora only).
    #[arg(long)]
    track: Option<PathBuf>,
    #[arg(long)]
    documents: Option<usize>,
    /// Track size for planted corpora; defaults to half the documents, at most 60.
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Fallback,
    Service,
}

#[derive(Args)]
struct GenArgs {
    /// Store directory.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    per_passage: usize,
    /// Directory for cached service generations.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRetrieverArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Store directory holding the passages the pairs refer to.
    #[arg(long)]
    corpus: PathBuf,
    /// Start from this model instead of a random one.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 32768)]
    features: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    hash_seed: u64,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 8)]
    micro: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-epoch loss log (JSONL).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    per_group: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainRerankerArgs {
    #[arg(long)]
    groups: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Start from this scorer instead of the cosine-only one.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Store directory.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    scorer: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    retrieve_k: usize,
    #[arg(long)]
    no_rerank: bool,
    #[arg(long, default_value_t = 10)]
    expand_k: usize,
    #[arg(long, default_value_t = 3)]
    n_refs: usize,
    #[arg(long, default_value = "fallback")]
    extractor: ExtractorMode,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            retrieve_k: self.retrieve_k,
            rerank: !self.no_rerank,
            expand_k: self.expand_k,
            n_refs: self.n_refs,
            extractor: self.extractor,
            paths: ArtifactPaths {
                store: self.corpus.clone(),
                model: self.model.clone(),
                index: self.index.clone(),
                scorer: self.scorer.clone(),
            },
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    query: String,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    track: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn ingest(a: IngestArgs) -> Result<()> {
    let corpus = Corpus::read_jsonl(&a.corpus)?;
    let segment = SegmentConfig {
        max_tokens_per_passage: a.max_tokens,
        overlap_tokens: a.overlap,
    };
    let store = Store::build(corpus, segment)?;
    store.save(&a.out)?;
    print_json(&json!({
        "documents": store.corpus().len(),
        "passages": store.passages().len(),
        "store": a.out,
    }));
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let store = Store::load(&a.corpus)?;
    store.corpus().write_jsonl(&a.out)?;
    print_json(&json!({ "documents": store.corpus().len(), "out": a.out }));
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    match a.kind {
        SynthKind::Topics => {
            let mut cfg = TopicCorpusConfig {
                seed: a.seed,
                ..TopicCorpusConfig::default()
            };
            cfg.documents = a.documents.unwrap_or(cfg.documents);
            if a.track.is_some() || a.queries.is_some() {
                return Err(Error::InvalidArgument("--track is only produced for planted corpora".into()));
            }
            let (corpus, _) = topic_corpus(&cfg)?;
            corpus.write_jsonl(&a.out)?;
            print_json(&json!({ "documents": corpus.len(), "out": a.out }));
        }
        SynthKind::Planted => {
            let mut cfg = PlantedConfig::default();
            cfg.base.seed = a.seed;
            cfg.base.documents = a.documents.unwrap_or(cfg.base.documents);
            cfg.queries = a.queries.unwrap_or((cfg.base.documents / 2).min(cfg.queries));
            let fx = planted_fixture(&cfg)?;
            fx.corpus.write_jsonl(&a.out)?;
            if let Some(track) = &a.track {
                fx.track.write_jsonl(track)?;
            }
            print_json(&json!({
                "documents": fx.corpus.len(),
                "queries": fx.track.len(),
                "planted": fx.planted.len(),
                "out": a.out,
            }));
        }
    }
    Ok(())
}

fn genqueries(a: GenArgs) -> Result<()> {
    let store = Store::load(&a.corpus)?;
    let cfg = GenConfig {
        queries_per_passage: a.per_passage,
        seed: a.seed,
        mode: match a.mode {
            Mode::Fallback => GenMode::Fallback,
            Mode::Service => GenMode::Service,
        },
        ..GenConfig::default()
    };
    let pairs = match cfg.mode {
        GenMode::Fallback => generate_dataset(&store, &cfg, &QuerySource::Fallback)?,
        GenMode::Service => {
            let service = HttpService::new(ServiceConfig::from_env()?);
            let cache = match &a.cache {
                Some(dir) => GenerationCache::on_disk(dir)?,
                None => GenerationCache::in_memory(),
            };
            let source = QuerySource::Service {
                client: &service,
                cache: &cache,
            };
            generate_dataset(&store, &cfg, &source)?
        }
    };
    write_pairs(&a.out, &pairs)?;
    print_json(&json!({ "pairs": pairs.len(), "out": a.out }));
    Ok(())
}

fn train_retriever_cmd(a: TrainRetrieverArgs) -> Result<()> {
    let store = Store::load(&a.corpus)?;
    let mut pairs = read_pairs(&a.pairs)?;
    attach_passage_text(&mut pairs, &store)?;
    let init = match &a.init {
        Some(path) => EmbeddingModel::load(path)?,
        None => EmbeddingModel::random(a.features, a.dim, a.hash_seed, a.seed)?,
    };
    let cfg = TrainConfig {
        temperature: a.tau,
        batch_size: a.batch,
        micro_batch_size: a.micro,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let (model, log) = train_retriever(&init, &pairs, &cfg)?;
    model.save(&a.out)?;
    if let Some(path) = &a.log {
        log.write_jsonl(path)?;
    }
    print_json(&json!({
        "pairs": pairs.len(),
        "final_loss": log.epochs.last().map(|e| e.mean_loss),
        "fingerprint": model.fingerprint().to_string(),
        "out": a.out,
    }));
    Ok(())
}

fn index_cmd(a: IndexArgs) -> Result<()> {
    let store = Store::load(&a.corpus)?;
    let model = EmbeddingModel::load(&a.model)?;
    let index = VectorIndex::build(
        &model,
        store.passages().iter().map(|p| (p.passage_id.as_str(), p.text.as_str())),
    )?;
    index.save(&a.out)?;
    print_json(&json!({ "passages": index.len(), "out": a.out }));
    Ok(())
}

fn mine(a: MineArgs) -> Result<()> {
    let store = Store::load(&a.corpus)?;
    let model = EmbeddingModel::load(&a.model)?;
    let index = VectorIndex::load(&a.index)?;
    let pairs = read_pairs(&a.pairs)?;
    let groups = mine_hard_negatives(&store, &model, &index, &pairs, a.depth, a.per_group, a.seed)?;
    write_groups(&a.out, &groups)?;
    print_json(&json!({ "groups": groups.len(), "out": a.out }));
    Ok(())
}

fn train_reranker_cmd(a: TrainRerankerArgs) -> Result<()> {
    let store = Store::load(&a.corpus)?;
    let model = EmbeddingModel::load(&a.model)?;
    let groups = read_groups(&a.groups)?;
    let init = match &a.init {
        Some(path) => CrossScorer::load(path)?,
        None => CrossScorer::default(),
    };
    let cfg = TrainConfig {
        temperature: a.tau,
        batch_size: a.batch,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        ..TrainConfig::reranker()
    };
    let (scorer, log) = train_reranker(&init, &groups, &store, &model, &cfg)?;
    scorer.save(&a.out)?;
    if let Some(path) = &a.log {
        log.write_jsonl(path)?;
    }
    print_json(&json!({
        "groups": groups.len(),
        "final_loss": log.epochs.last().map(|e| e.mean_loss),
        "out": a.out,
    }));
    Ok(())
}

fn search(a: SearchArgs) -> Result<()> {
    let cfg = a.pipeline.config();
    let system = System::load(&cfg)?;
    let result = system.run_query(&a.query, &cfg)?;
    if a.json {
        let papers: Vec<_> = result
            .papers
            .items
            .iter()
            .zip(&result.trace)
            .enumerate()
            .map(|(i, (item, t))| {
                json!({
                    "rank": i + 1,
                    "paper_id": item.id,
                    "score": item.score,
                    "retrieved_rank": t.retrieved_rank,
                    "reranked_rank": t.reranked_rank,
                    "via_reference_of": t.via_reference_of,
                })
            })
            .collect();
        print_json(&json!({
            "query": result.query,
            "config": cfg,
            "config_digest": cfg.digest(),
            "papers": papers,
        }));
    } else {
        for (i, (item, t)) in result.papers.items.iter().zip(&result.trace).enumerate().take(20) {
            let title = system.store.corpus().get(&item.id).map_or("", |d| d.title.as_str());
            let via = t
                .via_reference_of
                .as_ref()
                .map(|p| format!("  (cited by {p})"))
                .unwrap_or_default();
            println!("{:>3}. {:<20} {title}{via}", i + 1, item.id);
        }
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = a.pipeline.config();
    let system = System::load(&cfg)?;
    let track = BenchmarkTrack::read_jsonl(&a.track)?;
    let report = system.evaluate_stages(&track, &cfg, &DEFAULT_KS)?;
    report.save(&a.report)?;
    print!("{}", report.to_table());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Export(a) => export(a),
        Command::Synth(a) => synth(a),
        Command::Genqueries(a) => genqueries(a),
        Command::TrainRetriever(a) => train_retriever_cmd(a),
        Command::Index(a) => index_cmd(a),
        Command::Mine(a) => mine(a),
        Command::TrainReranker(a) => train_reranker_cmd(a),
        Command::Search(a) => search(a),
        Command::Eval(a) => eval(a),
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail("usage", first, 2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use steertm_core::evaluation::summarize;
use steertm_core::harness::{run_suggest_bench, HarnessConfig};
use steertm_core::{
    init_model, load_corpus, CoherenceIndex, ConceptPrior, EdgeRecord, EvaluationReport, ModelTree, NodeId,
    RelevanceState, Snapshot, TermStats, TopicId, TopicSummary,
};

use crate::api::{router, AppState, ServerConfig};
use crate::options::{parse_mapping, read_priors, CorpusArgs, ModelArgs, SuggestArgs};

pub type CliResult<T = ()> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Parser, Debug)]
#[command(name = "steertm", version, about = "Seeded topic models with interactive refinements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read a corpus and print its statistics.
    Ingest(IngestArgs),
    /// Build a model from a corpus, train it and save the model tree.
    Train(TrainArgs),
    /// Coherence and Precision@K for one node of a saved tree.
    Eval(EvalArgs),
    /// Baseline against adding every suggested word while training.
    SuggestBench(BenchArgs),
    /// Start the HTTP API.
    Serve(ServeArgs),
    /// Write a report covering every node of a saved tree.
    ExportReport(ReportArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub suggest: SuggestArgs,
    /// JSON object mapping topic ids to concept words.
    #[arg(long, env = "STEERTM_PRIORS")]
    pub priors: Option<PathBuf>,
    #[arg(long, default_value_t = 2000, env = "STEERTM_ITERS")]
    pub iters: usize,
    #[arg(long, default_value = "steertm.strtree", env = "STEERTM_OUT")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10, env = "STEERTM_TOP_N")]
    pub top_n: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, env = "STEERTM_TREE")]
    pub tree: PathBuf,
    /// Defaults to the newest node.
    #[arg(long, env = "STEERTM_NODE")]
    pub node: Option<NodeId>,
    #[arg(long, default_value_t = 10, env = "STEERTM_TOP_N")]
    pub top_n: usize,
    /// K for Precision@K.
    #[arg(long, default_value_t = 10, env = "STEERTM_K")]
    pub k: usize,
    /// Topic to category pairs for Precision@K, e.g. `1=sport,2=politics`.
    #[arg(long, env = "STEERTM_MAPPING")]
    pub mapping: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub suggest: SuggestArgs,
    /// Concept words; their topics receive suggested words and are scored.
    #[arg(long, env = "STEERTM_PRIORS")]
    pub priors: PathBuf,
    #[arg(long, default_value_t = 2000, env = "STEERTM_ITERS")]
    pub iters: usize,
    #[arg(long, default_value_t = 50, env = "STEERTM_BURN_IN")]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10, env = "STEERTM_REFRESH_EVERY")]
    pub refresh_every: usize,
    #[arg(long, default_value_t = 10, env = "STEERTM_TOP_N")]
    pub top_n: usize,
    #[arg(long, default_value_t = 10, env = "STEERTM_K")]
    pub k: usize,
    #[arg(long, env = "STEERTM_MAPPING")]
    pub mapping: Option<String>,
    /// Repeats with seeds `seed`, `seed + 1`, ...
    #[arg(long, default_value_t = 1, env = "STEERTM_RUNS")]
    pub runs: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1", env = "STEERTM_HOST")]
    pub host: String,
    /// 0 picks a free port; the bound address is printed either way.
    #[arg(long, default_value_t = 8080, env = "STEERTM_PORT")]
    pub port: u16,
    #[arg(long, default_value = "steertm-work", env = "STEERTM_WORKDIR")]
    pub workdir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub suggest: SuggestArgs,
    /// Sweeps for a train request that does not say.
    #[arg(long, default_value_t = 2000, env = "STEERTM_ITERS")]
    pub iters: usize,
    #[arg(long, default_value_t = 10, env = "STEERTM_APPLY_ITERS")]
    pub apply_iters: usize,
    #[arg(long, default_value_t = 2, env = "STEERTM_MIN_DOC_FREQ")]
    pub min_doc_freq: u32,
    #[arg(long, env = "STEERTM_NO_STOPWORDS")]
    pub no_stopwords: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Json,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long, env = "STEERTM_TREE")]
    pub tree: PathBuf,
    /// Written to stdout when absent.
    #[arg(long, env = "STEERTM_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
    pub format: ReportFormat,
    #[arg(long, default_value_t = 10, env = "STEERTM_TOP_N")]
    pub top_n: usize,
    #[arg(long, default_value_t = 10, env = "STEERTM_K")]
    pub k: usize,
    #[arg(long, env = "STEERTM_MAPPING")]
    pub mapping: Option<String>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Ingest(a) => ingest(a, out),
        Command::Train(a) => train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::SuggestBench(a) => suggest_bench(a, out),
        Command::Serve(a) => serve(a, out),
        Command::ExportReport(a) => export_report(a, out),
    }
}

#[derive(Serialize)]
struct CorpusStats {
    documents: usize,
    vocabulary: usize,
    tokens: usize,
    categories: BTreeMap<String, usize>,
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> CliResult {
    let c = load_corpus(&a.corpus.corpus, a.corpus.format.into(), &a.corpus.build_options()?)?;
    let mut categories = BTreeMap::new();
    for d in c.documents() {
        if let Some(cat) = &d.category {
            *categories.entry(cat.clone()).or_insert(0) += 1;
        }
    }
    let stats = CorpusStats { documents: c.len(), vocabulary: c.vocab_size(), tokens: c.num_tokens(), categories };
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&stats)?)?;
    } else {
        writeln!(out, "documents   {}", stats.documents)?;
        writeln!(out, "vocabulary  {}", stats.vocabulary)?;
        writeln!(out, "tokens      {}", stats.tokens)?;
        for (cat, n) in &stats.categories {
            writeln!(out, "category    {cat}: {n}")?;
        }
    }
    Ok(())
}

fn topic_table(topics: &[TopicSummary]) -> String {
    let mut s = String::new();
    for t in topics {
        let words: Vec<&str> = t.top_words.iter().map(|w| w.word.as_str()).collect();
        let _ = writeln!(s, "{:>4}  {:.3}  {}", t.topic, t.weight, words.join(" "));
    }
    s
}

fn train(a: TrainArgs, out: &mut dyn Write) -> CliResult {
    let corpus = std::sync::Arc::new(load_corpus(&a.corpus.corpus, a.corpus.format.into(), &a.corpus.build_options()?)?);
    let priors = match &a.priors {
        Some(p) => read_priors(p)?,
        None => ConceptPrior::new(),
    };
    let emb = a.suggest.load()?.map(|e| e.restrict_to(corpus.vocabulary()));
    let report = init_model(corpus.clone(), priors, a.model.hyperparams())?;
    for w in &report.dropped_seeds {
        writeln!(out, "warning: seed word {w:?} is not in the vocabulary; dropped")?;
    }
    let stats = TermStats::new(&corpus);
    let root_rel = RelevanceState::new(&report.state, a.suggest.params());
    let mut state = report.state.clone();
    let mut tree = ModelTree::new(Snapshot { model: report.state, relevance: root_rel.clone() });
    tree.set_embedding_path(a.suggest.embeddings.as_ref().map(|p| p.display().to_string()));
    let step = (a.iters / 10).max(1);
    state.train_with_progress(a.iters, |done, total| {
        if done % step == 0 || done == total {
            log::info!("sweep {done}/{total}");
        }
    });
    let mut rel = root_rel;
    rel.refresh(&state, emb.as_ref(), &stats);
    let node = tree.commit(tree.root(), Snapshot { model: state, relevance: rel }, vec![EdgeRecord::Train { iters: a.iters }])?;
    tree.save(&a.out)?;
    let snap = &tree.node(node)?.snapshot;
    write!(out, "{}", topic_table(&summarize(&snap.model, a.top_n)))?;
    writeln!(out, "saved {} (node {node}, {} sweeps)", a.out.display(), a.iters)?;
    Ok(())
}

fn newest(tree: &ModelTree) -> NodeId {
    tree.nodes().map(|n| n.id).max().unwrap_or(tree.root())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CliResult {
    let tree = ModelTree::load(&a.tree)?;
    let node = a.node.unwrap_or_else(|| newest(&tree));
    let state = &tree.node(node)?.snapshot.model;
    let mapping = a.mapping.as_deref().map(parse_mapping).transpose()?;
    let index = CoherenceIndex::new(state.corpus());
    let report = EvaluationReport::new(node, state, &index, a.top_n, mapping.as_ref().map(|m| (m, a.k)))?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        write!(out, "{}", report.to_table(state))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    run: u64,
    seed: u64,
    baseline_coherence: f64,
    auto_add_coherence: f64,
    baseline_precision: Option<f64>,
    auto_add_precision: Option<f64>,
    added: BTreeMap<TopicId, Vec<String>>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".to_owned(), |x| format!("{x:.4}"))
}

fn suggest_bench(a: BenchArgs, out: &mut dyn Write) -> CliResult {
    let corpus = std::sync::Arc::new(load_corpus(&a.corpus.corpus, a.corpus.format.into(), &a.corpus.build_options()?)?);
    let priors = read_priors(&a.priors)?;
    let emb = a.suggest.load()?.ok_or("suggest-bench needs --embeddings")?;
    let mapping = a.mapping.as_deref().map(parse_mapping).transpose()?;
    let cfg = HarnessConfig {
        iters: a.iters,
        burn_in: a.burn_in,
        refresh_every: a.refresh_every,
        top_n: a.top_n,
        precision_k: a.k,
        params: a.suggest.params(),
    };
    let mut rows = Vec::new();
    for run in 0..a.runs {
        let mut hyper = a.model.hyperparams();
        hyper.rng_seed = a.model.seed + run;
        let init = init_model(corpus.clone(), priors.clone(), hyper.clone())?;
        let targets: Vec<TopicId> = init.state.priors().seeds().keys().copied().collect();
        if targets.is_empty() {
            return Err("no seeded topic left after dropping out-of-vocabulary seed words".into());
        }
        let r = run_suggest_bench(&init.state, &emb, &targets, mapping.as_ref(), &cfg)?;
        rows.push(BenchRow {
            run,
            seed: hyper.rng_seed,
            baseline_coherence: r.baseline.mean_coherence,
            auto_add_coherence: r.auto_add.mean_coherence,
            baseline_precision: r.baseline.mean_precision,
            auto_add_precision: r.auto_add.mean_precision,
            added: r.auto_add.added,
        });
    }
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
        return Ok(());
    }
    writeln!(out, "{:>4} {:>6}  {:>13}  {:>13}  {:>11}  {:>11}  added", "run", "seed", "baseline_npmi", "auto_add_npmi", "baseline_p", "auto_add_p")?;
    for r in &rows {
        let added: usize = r.added.values().map(Vec::len).sum();
        writeln!(
            out,
            "{:>4} {:>6}  {:>13.4}  {:>13.4}  {:>11}  {:>11}  {added}",
            r.run,
            r.seed,
            r.baseline_coherence,
            r.auto_add_coherence,
            fmt_opt(r.baseline_precision),
            fmt_opt(r.auto_add_precision),
        )?;
    }
    let wins = rows.iter().filter(|r| r.auto_add_coherence >= r.baseline_coherence).count();
    writeln!(out, "auto-add coherence >= baseline in {wins}/{} runs", rows.len())?;
    Ok(())
}

fn serve(a: ServeArgs, out: &mut dyn Write) -> CliResult {
    let emb = a.suggest.load()?;
    let config = ServerConfig {
        workdir: Some(a.workdir.clone()),
        defaults: a.model.hyperparams(),
        suggestion: a.suggest.params(),
        train_iters: a.iters,
        apply_iters: a.apply_iters,
        min_doc_freq: a.min_doc_freq,
        stopwords: !a.no_stopwords,
    };
    let state = AppState::new(config, emb)?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        writeln!(out, "listening on http://{}", listener.local_addr()?)?;
        out.flush()?;
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}

#[derive(Serialize)]
struct NodeReport<'a> {
    id: NodeId,
    parent: Option<NodeId>,
    edge_log: &'a [EdgeRecord],
    iteration: u64,
    topics: Vec<TopicSummary>,
    evaluation: EvaluationReport,
}

fn export_report(a: ReportArgs, out: &mut dyn Write) -> CliResult {
    let tree = ModelTree::load(&a.tree)?;
    let mapping = a.mapping.as_deref().map(parse_mapping).transpose()?;
    let index = CoherenceIndex::new(tree.corpus());
    let mut nodes = Vec::new();
    for n in tree.nodes() {
        let state = &n.snapshot.model;
        nodes.push(NodeReport {
            id: n.id,
            parent: n.parent,
            edge_log: &n.edge_log,
            iteration: state.iteration(),
            topics: summarize(state, a.top_n),
            evaluation: EvaluationReport::new(n.id, state, &index, a.top_n, mapping.as_ref().map(|m| (m, a.k)))?,
        });
    }
    let text = match a.format {
        ReportFormat::Json => serde_json::to_string_pretty(&nodes)? + "\n",
        ReportFormat::Markdown => markdown(&tree, &nodes),
    };
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn markdown(tree: &ModelTree, nodes: &[NodeReport<'_>]) -> String {
    let mut s = String::new();
    let c = tree.corpus();
    let _ = writeln!(s, "# Model tree report\n");
    let _ = writeln!(s, "{} documents, {} terms, {} nodes.\n", c.len(), c.vocab_size(), nodes.len());
    for n in nodes {
        let _ = writeln!(s, "## Node {}\n", n.id);
        match n.parent {
            Some(p) => {
                let _ = writeln!(s, "Parent {p}, sweep {}. Edge:\n", n.iteration);
                for e in n.edge_log {
                    let _ = writeln!(s, "- `{}`", serde_json::to_string(e).unwrap_or_default());
                }
                s.push('\n');
            }
            None => {
                let _ = writeln!(s, "Root, sweep {}.\n", n.iteration);
            }
        }
        let _ = writeln!(s, "| topic | weight | npmi | top words |");
        let _ = writeln!(s, "|---:|---:|---:|---|");
        for t in &n.topics {
            let npmi = n.evaluation.coherence.get(&t.topic).map_or("-".to_owned(), |x| format!("{x:.4}"));
            let words: Vec<&str> = t.top_words.iter().map(|w| w.word.as_str()).collect();
            let _ = writeln!(s, "| {} | {:.3} | {npmi} | {} |", t.topic, t.weight, words.join(" "));
        }
        let _ = writeln!(s, "\nMean NPMI {:.4}.", n.evaluation.mean_coherence);
        if let Some(p) = &n.evaluation.precision {
            let _ = writeln!(s, "Mean Precision@{} {:.4}.", p.k, p.mean);
        }
        s.push('\n');
    }
    s
}

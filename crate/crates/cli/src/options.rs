//! Command line argument groups and the small text formats they accept.
//! Every flag can also come from an environment variable named after it,
//! e.g. `--k-init` from `STEERTM_K_INIT`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use steertm_core::corpus::{default_stopwords, load_stopwords};
use steertm_core::{BuildOptions, ConceptPrior, CorpusFormat, EmbeddingTable, Hyperparams, SuggestionParams, TopicId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[default]
    Auto,
    Jsonl,
    Csv,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Auto => CorpusFormat::Auto,
            FormatArg::Jsonl => CorpusFormat::JsonLines,
            FormatArg::Csv => CorpusFormat::Csv,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct CorpusArgs {
    /// Corpus file: JSON lines (`id`, `text`, optional `category`) or CSV.
    #[arg(long, env = "STEERTM_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto, env = "STEERTM_FORMAT")]
    pub format: FormatArg,
    /// Drop terms found in fewer documents than this.
    #[arg(long, default_value_t = 2, env = "STEERTM_MIN_DOC_FREQ")]
    pub min_doc_freq: u32,
    /// Stopword file, one term per line. Defaults to a built-in English list.
    #[arg(long, env = "STEERTM_STOPWORDS")]
    pub stopwords: Option<PathBuf>,
    /// Keep every term.
    #[arg(long, env = "STEERTM_NO_STOPWORDS")]
    pub no_stopwords: bool,
}

impl CorpusArgs {
    pub fn build_options(&self) -> steertm_core::Result<BuildOptions> {
        let stopwords = match (&self.stopwords, self.no_stopwords) {
            (_, true) => HashSet::new(),
            (Some(p), false) => load_stopwords(p)?,
            (None, false) => default_stopwords(),
        };
        Ok(BuildOptions::new(stopwords, self.min_doc_freq))
    }
}

#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 10, env = "STEERTM_K_INIT")]
    pub k_init: usize,
    #[arg(long, default_value_t = 1.0, env = "STEERTM_ALPHA")]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, env = "STEERTM_GAMMA0")]
    pub gamma0: f64,
    #[arg(long, default_value_t = 0.5, env = "STEERTM_BETA")]
    pub beta: f64,
    #[arg(long, default_value_t = 0, env = "STEERTM_SEED")]
    pub seed: u64,
}

impl ModelArgs {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams { alpha: self.alpha, gamma0: self.gamma0, beta: self.beta, k_init: self.k_init, rng_seed: self.seed }
    }
}

#[derive(Args, Clone, Debug)]
pub struct SuggestArgs {
    /// Word vectors in text format: `word v1 v2 ...` per line.
    #[arg(long, env = "STEERTM_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, env = "STEERTM_GAMMA_R")]
    pub gamma_r: f64,
    #[arg(long, default_value_t = 1.0, env = "STEERTM_GAMMA_IR")]
    pub gamma_ir: f64,
}

impl SuggestArgs {
    pub fn params(&self) -> SuggestionParams {
        SuggestionParams { gamma_r: self.gamma_r, gamma_ir: self.gamma_ir, ..SuggestionParams::default() }
    }

    pub fn load(&self) -> steertm_core::Result<Option<EmbeddingTable>> {
        self.embeddings.as_deref().map(EmbeddingTable::load).transpose()
    }
}

/// JSON object mapping topic ids to concept words, e.g. `{"1": ["food"]}`.
pub fn read_priors(path: &Path) -> Result<ConceptPrior, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let map: BTreeMap<TopicId, Vec<String>> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    ConceptPrior::from_map(map).map_err(|e| e.to_string())
}

/// Parses `1=sport,2=politics` into a topic to category map.
pub fn parse_mapping(s: &str) -> Result<BTreeMap<TopicId, String>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, c) = part.split_once('=').ok_or_else(|| format!("expected topic=category, got {part:?}"))?;
        let k: TopicId = k.trim().parse().map_err(|_| format!("bad topic id {k:?}"))?;
        if out.insert(k, c.trim().to_owned()).is_some() {
            return Err(format!("topic {k} mapped twice"));
        }
    }
    if out.is_empty() {
        return Err("empty mapping".into());
    }
    Ok(out)
}

/// Parses `1,4,7`.
pub fn parse_id_list(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| format!("bad node id {p:?}")))
        .collect()
}

//! Suggestion benchmark: the same starting state trained once plainly and
//! once while every suggested word is added to its topic as training runs.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::engine::{ModelState, TopicId};
use crate::error::Result;
use crate::evaluation::{mean, precision_at_k, CoherenceIndex};
use crate::refinement::{compile, Refinement};
use crate::suggestion::{EmbeddingTable, RelevanceState, SuggestionParams, TermStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub iters: usize,
    /// Sweeps before the first suggestion round.
    pub burn_in: usize,
    /// Sweeps between suggestion rounds.
    pub refresh_every: usize,
    pub top_n: usize,
    pub precision_k: usize,
    pub params: SuggestionParams,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { iters: 200, burn_in: 50, refresh_every: 10, top_n: 10, precision_k: 10, params: SuggestionParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub coherence: BTreeMap<TopicId, f64>,
    pub mean_coherence: f64,
    pub precision: Option<BTreeMap<TopicId, f64>>,
    pub mean_precision: Option<f64>,
    /// Words added to each topic, in the order they were added.
    pub added: BTreeMap<TopicId, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub baseline: ArmResult,
    pub auto_add: ArmResult,
}

/// Adds the current suggestions of each target topic as add-word
/// constraints, without unseating any token. Words that are seeds or were
/// already added are skipped. Returns the words added this round.
pub fn auto_add_round(
    state: &mut ModelState,
    rel: &RelevanceState,
    targets: &[TopicId],
    added: &mut HashMap<WordId, TopicId>,
) -> Result<Vec<(TopicId, String)>> {
    let mut out = Vec::new();
    for &k in targets {
        if !state.is_active(k) {
            continue;
        }
        for s in rel.suggestions(k) {
            if state.seed_topic(s.word).is_some() || added.contains_key(&s.word) {
                continue;
            }
            let c = compile(&Refinement::AddWord { word: s.term.clone(), topic: k }, state)?;
            c.install_into(state);
            added.insert(s.word, k);
            out.push((k, s.term.clone()));
        }
    }
    Ok(out)
}

fn score(
    state: &ModelState,
    index: &CoherenceIndex,
    targets: &[TopicId],
    mapping: Option<&BTreeMap<TopicId, String>>,
    cfg: &HarnessConfig,
    added: BTreeMap<TopicId, Vec<String>>,
) -> Result<ArmResult> {
    let mut coherence = BTreeMap::new();
    for &k in targets {
        if !state.is_active(k) {
            continue;
        }
        let words: Vec<WordId> = state.top_words(k, cfg.top_n)?.into_iter().map(|(w, _)| w).collect();
        if let Ok(c) = index.coherence(&words, cfg.top_n) {
            coherence.insert(k, c);
        }
    }
    let mean_coherence = mean(coherence.values());
    let precision = mapping.map(|m| precision_at_k(state, m, cfg.precision_k)).transpose()?;
    Ok(ArmResult {
        coherence,
        mean_coherence,
        mean_precision: precision.as_ref().map(|p| p.mean),
        precision: precision.map(|p| p.per_topic),
        added,
    })
}

/// Runs both arms from `init`. `targets` are the topics that receive added
/// words and are scored; `mapping` assigns categories for Precision@K.
pub fn run_suggest_bench(
    init: &ModelState,
    emb: &EmbeddingTable,
    targets: &[TopicId],
    mapping: Option<&BTreeMap<TopicId, String>>,
    cfg: &HarnessConfig,
) -> Result<BenchResult> {
    let index = CoherenceIndex::new(init.corpus());
    let emb = emb.restrict_to(init.corpus().vocabulary());

    let mut base = init.clone();
    base.train(cfg.iters);
    let baseline = score(&base, &index, targets, mapping, cfg, BTreeMap::new())?;

    let stats = TermStats::new(init.corpus());
    let mut state = init.clone();
    let mut rel = RelevanceState::new(&state, cfg.params.clone());
    let mut added = HashMap::new();
    let mut log: BTreeMap<TopicId, Vec<String>> = BTreeMap::new();
    for it in 0..cfg.iters {
        state.gibbs_sweep();
        let round = it + 1 >= cfg.burn_in && (it + 1 - cfg.burn_in).is_multiple_of(cfg.refresh_every.max(1));
        if round && it + 1 < cfg.iters {
            rel.refresh(&state, Some(&emb), &stats);
            for (k, w) in auto_add_round(&mut state, &rel, targets, &mut added)? {
                log.entry(k).or_default().push(w);
            }
        }
    }
    let auto_add = score(&state, &index, targets, mapping, cfg, log)?;
    Ok(BenchResult { baseline, auto_add })
}

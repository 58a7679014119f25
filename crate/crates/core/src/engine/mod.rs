//! Seeded Chinese-restaurant-franchise Gibbs sampler.
//!
//! Documents are restaurants, tokens sit at tables and every table serves one
//! topic from a shared, growing menu. Two things steer the sampler away from a
//! plain HDP:
//!
//! * a [`ConceptPrior`] pins seed words to their topic through a 0/1
//!   indicator, and
//! * a [`PotentialFunction`] multiplies every `(topic, word, document)` choice
//!   by a user-controlled weight.
//!
//! A [`ModelState`] owns all assignments, count statistics and the RNG, so
//! cloning it gives an independent branch that samples bit-identically.

pub mod codec;
mod sampler;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, WordId};
use crate::error::{Error, Result};
use crate::refinement::potential::PotentialFunction;

pub use sampler::{TableWeights, TopicWeights};

pub type TopicId = u32;

pub(crate) const UNASSIGNED: u32 = u32::MAX;
const NO_SLOT: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Concentration of the per-document table process.
    pub alpha: f64,
    /// Concentration of the shared topic menu; mass for opening a new topic.
    pub gamma0: f64,
    /// Symmetric topic-word smoothing.
    pub beta: f64,
    pub k_init: usize,
    pub rng_seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { alpha: 1.0, gamma0: 1.0, beta: 0.5, k_init: 10, rng_seed: 0 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidHyperparams(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("gamma0", self.gamma0)?;
        positive("beta", self.beta)?;
        if self.k_init == 0 {
            return Err(Error::InvalidHyperparams("k_init must be at least 1".into()));
        }
        Ok(())
    }
}

/// User-curated seed words per topic. A word seeds at most one topic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptPrior {
    seeds: BTreeMap<TopicId, BTreeSet<String>>,
}

impl ConceptPrior {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map<I, W>(map: I) -> Result<Self>
    where
        I: IntoIterator<Item = (TopicId, W)>,
        W: IntoIterator,
        W::Item: Into<String>,
    {
        let mut prior = Self::new();
        for (topic, words) in map {
            for w in words {
                prior.add(topic, w)?;
            }
        }
        Ok(prior)
    }

    pub fn add(&mut self, topic: TopicId, word: impl Into<String>) -> Result<()> {
        let word = word.into();
        match self.topic_of(&word) {
            Some(z) if z != topic => Err(Error::InvalidPrior(format!(
                "{word:?} already seeds topic {z}, cannot also seed topic {topic}"
            ))),
            _ => {
                self.seeds.entry(topic).or_default().insert(word);
                Ok(())
            }
        }
    }

    pub fn topic_of(&self, word: &str) -> Option<TopicId> {
        self.seeds.iter().find(|(_, ws)| ws.contains(word)).map(|(k, _)| *k)
    }

    pub fn seeds(&self) -> &BTreeMap<TopicId, BTreeSet<String>> {
        &self.seeds
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.values().all(BTreeSet::is_empty)
    }

    pub fn is_seeded_topic(&self, topic: TopicId) -> bool {
        self.seeds.get(&topic).is_some_and(|s| !s.is_empty())
    }

    /// Moves `word` to seed `topic`, detaching it from any other topic.
    pub(crate) fn reassign(&mut self, word: &str, topic: TopicId) {
        for ws in self.seeds.values_mut() {
            ws.remove(word);
        }
        self.seeds.entry(topic).or_default().insert(word.to_owned());
        self.seeds.retain(|_, ws| !ws.is_empty());
    }

    /// Moves every seed of `from` onto `to`.
    pub(crate) fn transfer(&mut self, from: TopicId, to: TopicId) {
        if let Some(ws) = self.seeds.remove(&from) {
            self.seeds.entry(to).or_default().extend(ws);
        }
    }

    fn retain_vocabulary(&mut self, corpus: &Corpus) -> Vec<String> {
        let mut dropped = Vec::new();
        for ws in self.seeds.values_mut() {
            ws.retain(|w| {
                let keep = corpus.vocabulary().id(w).is_some();
                if !keep {
                    dropped.push(w.clone());
                }
                keep
            });
        }
        self.seeds.retain(|_, ws| !ws.is_empty());
        dropped
    }
}

/// 0 when `word` seeds some topic other than `topic`, else 1.
pub fn indicator(word: &str, topic: TopicId, priors: &ConceptPrior) -> u8 {
    match priors.topic_of(word) {
        Some(z) if z != topic => 0,
        _ => 1,
    }
}

/// Collapsed Dirichlet-multinomial predictive probability of a word under a
/// topic with `n_kw` occurrences of the word and `n_k` tokens in total.
pub fn predictive_prob(n_kw: u32, n_k: u32, vocab_size: usize, beta: f64) -> f64 {
    (n_kw as f64 + beta) / (n_k as f64 + vocab_size as f64 * beta)
}

/// Predictive probability of any word under a topic with no tokens.
pub fn new_topic_prob(vocab_size: usize) -> f64 {
    1.0 / vocab_size as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub topic: TopicId,
    pub count: u32,
}

/// Per-topic count statistics in dense slots, ordered by topic id.
#[derive(Clone, Debug, Default)]
struct Topics {
    ids: Vec<TopicId>,
    slot_of: Vec<u32>,
    word_counts: Vec<Vec<u32>>,
    totals: Vec<u32>,
    tables: Vec<u32>,
}

impl Topics {
    fn slot(&self, k: TopicId) -> Option<usize> {
        match self.slot_of.get(k as usize) {
            Some(&s) if s != NO_SLOT => Some(s as usize),
            _ => None,
        }
    }

    fn reindex(&mut self) {
        let len = self.ids.iter().max().map_or(0, |&m| m as usize + 1);
        self.slot_of = vec![NO_SLOT; len];
        for (s, &k) in self.ids.iter().enumerate() {
            self.slot_of[k as usize] = s as u32;
        }
    }

    fn activate(&mut self, k: TopicId, vocab_size: usize) -> usize {
        let pos = self.ids.partition_point(|&x| x < k);
        debug_assert!(self.ids.get(pos) != Some(&k));
        self.ids.insert(pos, k);
        self.word_counts.insert(pos, vec![0; vocab_size]);
        self.totals.insert(pos, 0);
        self.tables.insert(pos, 0);
        self.reindex();
        pos
    }

    fn deactivate(&mut self, k: TopicId) {
        if let Some(s) = self.slot(k) {
            self.ids.remove(s);
            self.word_counts.remove(s);
            self.totals.remove(s);
            self.tables.remove(s);
            self.reindex();
        }
    }
}

/// Full sampler state.
#[derive(Clone, Debug)]
pub struct ModelState {
    corpus: Arc<Corpus>,
    hyper: Hyperparams,
    priors: ConceptPrior,
    seed_of: Vec<Option<TopicId>>,
    potential: PotentialFunction,
    assign: Vec<Vec<u32>>,
    tables: Vec<Vec<Table>>,
    topics: Topics,
    /// Topic ids with no tables that stay available for reuse because a seed
    /// or a potential layer names them.
    dormant: BTreeSet<TopicId>,
    next_topic: TopicId,
    iteration: u64,
    rng: ChaCha8Rng,
}

/// Result of [`init_model`]: the state plus seed words that were dropped
/// because they are not in the vocabulary.
#[derive(Debug)]
pub struct InitReport {
    pub state: ModelState,
    pub dropped_seeds: Vec<String>,
}

/// Random initial seating: every token draws a topic uniformly from
/// `1..=k_init` (seed words take their seed topic) and tokens of one document
/// with the same topic share a table.
pub fn init_model(corpus: Arc<Corpus>, priors: ConceptPrior, hyper: Hyperparams) -> Result<InitReport> {
    hyper.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut priors = priors;
    for &k in priors.seeds().keys() {
        if k == 0 || k as usize > hyper.k_init {
            return Err(Error::InvalidPrior(format!(
                "seed topic {k} is outside 1..={}",
                hyper.k_init
            )));
        }
    }
    let dropped_seeds = priors.retain_vocabulary(&corpus);
    for w in &dropped_seeds {
        log::warn!("seed word {w:?} is not in the vocabulary; dropped");
    }

    let seed_of = seed_lookup(&priors, &corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
    let k_init = hyper.k_init as TopicId;
    let mut assign = Vec::with_capacity(corpus.len());
    let mut tables = Vec::with_capacity(corpus.len());
    for doc in corpus.documents() {
        let mut doc_tables: Vec<Table> = Vec::new();
        let mut doc_assign = Vec::with_capacity(doc.len());
        for &w in &doc.tokens {
            let k = seed_of[w as usize].unwrap_or_else(|| rng.random_range(1..=k_init));
            let t = match doc_tables.iter().position(|t| t.topic == k) {
                Some(t) => t,
                None => {
                    doc_tables.push(Table { topic: k, count: 0 });
                    doc_tables.len() - 1
                }
            };
            doc_tables[t].count += 1;
            doc_assign.push(t as u32);
        }
        assign.push(doc_assign);
        tables.push(doc_tables);
    }

    let mut state = ModelState {
        corpus,
        hyper,
        priors,
        seed_of,
        potential: PotentialFunction::new(),
        assign,
        tables,
        topics: Topics::default(),
        dormant: BTreeSet::new(),
        next_topic: k_init + 1,
        iteration: 0,
        rng,
    };
    state.rebuild_counts();
    for k in 1..=k_init {
        if state.topics.slot(k).is_none() && state.priors.is_seeded_topic(k) {
            state.dormant.insert(k);
        }
    }
    Ok(InitReport { state, dropped_seeds })
}

fn seed_lookup(priors: &ConceptPrior, corpus: &Corpus) -> Vec<Option<TopicId>> {
    let mut seed_of = vec![None; corpus.vocab_size()];
    for (&k, words) in priors.seeds() {
        for w in words {
            if let Some(id) = corpus.vocabulary().id(w) {
                seed_of[id as usize] = Some(k);
            }
        }
    }
    seed_of
}

impl ModelState {
    /// Builds a state from explicit seatings: `table_topics[j][t]` is the
    /// topic of table `t` in document `j` and `assignments[j][i]` the table of
    /// token `i`. Mostly useful for fixtures.
    pub fn from_parts(
        corpus: Arc<Corpus>,
        priors: ConceptPrior,
        hyper: Hyperparams,
        table_topics: Vec<Vec<TopicId>>,
        assignments: Vec<Vec<u32>>,
    ) -> Result<Self> {
        hyper.validate()?;
        if table_topics.len() != corpus.len() || assignments.len() != corpus.len() {
            return Err(Error::InvalidRefinement("seating does not cover the corpus".into()));
        }
        let mut tables = Vec::with_capacity(corpus.len());
        for (j, (topics, assign)) in table_topics.iter().zip(&assignments).enumerate() {
            if assign.len() != corpus.document(j).len() {
                return Err(Error::InvalidRefinement(format!("document {j} has the wrong token count")));
            }
            let mut doc_tables: Vec<Table> = topics.iter().map(|&k| Table { topic: k, count: 0 }).collect();
            for &t in assign {
                let table = doc_tables
                    .get_mut(t as usize)
                    .ok_or_else(|| Error::InvalidRefinement(format!("document {j} has no table {t}")))?;
                table.count += 1;
            }
            if doc_tables.iter().any(|t| t.count == 0 || t.topic == 0) {
                return Err(Error::InvalidRefinement(format!("document {j} has an empty or topic-0 table")));
            }
            tables.push(doc_tables);
        }
        let max_topic = tables.iter().flatten().map(|t| t.topic).max().unwrap_or(0);
        let seed_of = seed_lookup(&priors, &corpus);
        let mut state = ModelState {
            next_topic: max_topic.max(hyper.k_init as TopicId) + 1,
            rng: ChaCha8Rng::seed_from_u64(hyper.rng_seed),
            corpus,
            hyper,
            priors,
            seed_of,
            potential: PotentialFunction::new(),
            assign: assignments,
            tables,
            topics: Topics::default(),
            dormant: BTreeSet::new(),
            iteration: 0,
        };
        state.rebuild_counts();
        Ok(state)
    }

    /// Recomputes all topic statistics from the seating.
    fn rebuild_counts(&mut self) {
        let v = self.corpus.vocab_size();
        let mut ids: BTreeSet<TopicId> = BTreeSet::new();
        for t in self.tables.iter().flatten() {
            ids.insert(t.topic);
        }
        let mut topics = Topics {
            ids: ids.into_iter().collect(),
            ..Topics::default()
        };
        let k = topics.ids.len();
        topics.word_counts = vec![vec![0; v]; k];
        topics.totals = vec![0; k];
        topics.tables = vec![0; k];
        topics.reindex();
        for (j, doc) in self.corpus.documents().iter().enumerate() {
            for t in &self.tables[j] {
                let s = topics.slot(t.topic).unwrap();
                topics.tables[s] += 1;
            }
            for (i, &w) in doc.tokens.iter().enumerate() {
                let a = self.assign[j][i];
                if a == UNASSIGNED {
                    continue;
                }
                let s = topics.slot(self.tables[j][a as usize].topic).unwrap();
                topics.word_counts[s][w as usize] += 1;
                topics.totals[s] += 1;
            }
        }
        self.topics = topics;
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn priors(&self) -> &ConceptPrior {
        &self.priors
    }

    pub fn potential(&self) -> &PotentialFunction {
        &self.potential
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn vocab_size(&self) -> usize {
        self.corpus.vocab_size()
    }

    /// Active topic ids in ascending order. Every active topic serves at
    /// least one table.
    pub fn active_topics(&self) -> &[TopicId] {
        &self.topics.ids
    }

    pub fn is_active(&self, k: TopicId) -> bool {
        self.topics.slot(k).is_some()
    }

    pub fn dormant_topics(&self) -> &BTreeSet<TopicId> {
        &self.dormant
    }

    /// The id the next brand-new topic will receive. Ids are never reused.
    pub fn next_topic_id(&self) -> TopicId {
        self.next_topic
    }

    pub fn n_kw(&self, k: TopicId, w: WordId) -> u32 {
        self.topics.slot(k).map_or(0, |s| self.topics.word_counts[s][w as usize])
    }

    pub fn n_k(&self, k: TopicId) -> u32 {
        self.topics.slot(k).map_or(0, |s| self.topics.totals[s])
    }

    pub fn m_k(&self, k: TopicId) -> u32 {
        self.topics.slot(k).map_or(0, |s| self.topics.tables[s])
    }

    /// Count of `w` over every topic except `k`.
    pub fn n_w_excluding(&self, w: WordId, k: TopicId) -> u32 {
        self.topics
            .ids
            .iter()
            .zip(&self.topics.word_counts)
            .filter(|(&id, _)| id != k)
            .map(|(_, c)| c[w as usize])
            .sum()
    }

    /// Assigned tokens of `w` across all topics.
    pub fn word_total(&self, w: WordId) -> u32 {
        self.topics.word_counts.iter().map(|c| c[w as usize]).sum()
    }

    pub fn tables(&self, j: usize) -> &[Table] {
        &self.tables[j]
    }

    pub fn num_tables(&self) -> usize {
        self.tables.iter().map(Vec::len).sum()
    }

    /// Topic of token `i` in document `j`, if it is seated.
    pub fn token_topic(&self, j: usize, i: usize) -> Option<TopicId> {
        match self.assign[j][i] {
            UNASSIGNED => None,
            t => Some(self.tables[j][t as usize].topic),
        }
    }

    pub fn total_assigned(&self) -> u64 {
        self.topics.totals.iter().map(|&n| n as u64).sum()
    }

    pub fn seed_topic(&self, w: WordId) -> Option<TopicId> {
        self.seed_of[w as usize]
    }

    fn admits(&self, w: WordId, k: TopicId) -> bool {
        self.seed_of[w as usize].is_none_or(|z| z == k)
    }

    /// Smoothed topic-word distribution over the whole vocabulary.
    pub fn topic_word_dist(&self, k: TopicId) -> Result<Vec<f64>> {
        let s = self.topics.slot(k).ok_or(Error::InactiveTopic(k))?;
        let v = self.vocab_size();
        let n_k = self.topics.totals[s];
        Ok(self.topics.word_counts[s]
            .iter()
            .map(|&n| predictive_prob(n, n_k, v, self.hyper.beta))
            .collect())
    }

    /// Share of document `j`'s tokens served by each active topic.
    pub fn doc_topic_dist(&self, j: usize) -> Vec<(TopicId, f64)> {
        let len = self.corpus.document(j).len() as f64;
        let mut counts: BTreeMap<TopicId, u32> =
            self.topics.ids.iter().map(|&k| (k, 0)).collect();
        for t in &self.tables[j] {
            *counts.entry(t.topic).or_default() += t.count;
        }
        counts.into_iter().map(|(k, n)| (k, n as f64 / len)).collect()
    }

    /// Share of document `j`'s tokens assigned to topic `k`.
    pub fn doc_topic_weight(&self, j: usize, k: TopicId) -> f64 {
        let n: u32 = self.tables[j].iter().filter(|t| t.topic == k).map(|t| t.count).sum();
        n as f64 / self.corpus.document(j).len() as f64
    }

    /// The `n` heaviest words of topic `k` with their probabilities; ties go
    /// to the lower word id.
    pub fn top_words(&self, k: TopicId, n: usize) -> Result<Vec<(WordId, f64)>> {
        let dist = self.topic_word_dist(k)?;
        let mut order: Vec<WordId> = (0..dist.len() as WordId).collect();
        order.sort_by(|&a, &b| dist[b as usize].total_cmp(&dist[a as usize]).then(a.cmp(&b)));
        Ok(order.into_iter().take(n).map(|w| (w, dist[w as usize])).collect())
    }

    /// Fraction of all corpus tokens assigned to topic `k`.
    pub fn topic_weight(&self, k: TopicId) -> f64 {
        self.n_k(k) as f64 / self.corpus.num_tokens() as f64
    }

    /// Verifies every bookkeeping invariant by recounting from the seating.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let v = self.vocab_size();
        let k = self.topics.ids.len();
        let mut word_counts = vec![vec![0u32; v]; k];
        let mut tables_per_topic = vec![0u32; k];
        for (j, doc) in self.corpus.documents().iter().enumerate() {
            let tables = &self.tables[j];
            let mut occupancy = vec![0u32; tables.len()];
            for (i, &w) in doc.tokens.iter().enumerate() {
                let t = self.assign[j][i];
                if t == UNASSIGNED || t as usize >= tables.len() {
                    return Err(format!("token ({j},{i}) is not seated at a table of its document"));
                }
                occupancy[t as usize] += 1;
                let s = self
                    .topics
                    .slot(tables[t as usize].topic)
                    .ok_or_else(|| format!("table ({j},{t}) serves inactive topic"))?;
                word_counts[s][w as usize] += 1;
            }
            for (t, table) in tables.iter().enumerate() {
                if table.count == 0 {
                    return Err(format!("table ({j},{t}) is empty"));
                }
                if table.count != occupancy[t] {
                    return Err(format!("table ({j},{t}) count {} != occupancy {}", table.count, occupancy[t]));
                }
                tables_per_topic[self.topics.slot(table.topic).unwrap()] += 1;
            }
            let seated: u32 = tables.iter().map(|t| t.count).sum();
            if seated as usize != doc.len() {
                return Err(format!("document {j} seats {seated} of {} tokens", doc.len()));
            }
        }
        for s in 0..k {
            let id = self.topics.ids[s];
            if word_counts[s] != self.topics.word_counts[s] {
                return Err(format!("topic {id} word counts disagree with the seating"));
            }
            let sum: u32 = self.topics.word_counts[s].iter().sum();
            if sum != self.topics.totals[s] {
                return Err(format!("topic {id}: sum n_kv {sum} != n_k {}", self.topics.totals[s]));
            }
            if tables_per_topic[s] != self.topics.tables[s] {
                return Err(format!("topic {id}: m_k {} != {} tables", self.topics.tables[s], tables_per_topic[s]));
            }
            if self.topics.tables[s] == 0 {
                return Err(format!("active topic {id} serves no table"));
            }
            if id >= self.next_topic || self.dormant.contains(&id) {
                return Err(format!("topic id {id} is inconsistent with the id allocator"));
            }
        }
        let total = self.total_assigned();
        if total as usize != self.corpus.num_tokens() {
            return Err(format!("{total} tokens assigned, corpus has {}", self.corpus.num_tokens()));
        }
        Ok(())
    }

    pub(crate) fn potential_mut(&mut self) -> &mut PotentialFunction {
        &mut self.potential
    }

    pub(crate) fn reassign_seed(&mut self, word: WordId, topic: TopicId) {
        let term = self.corpus.vocabulary().term(word).to_owned();
        self.priors.reassign(&term, topic);
        self.seed_of = seed_lookup(&self.priors, &self.corpus);
    }

    pub(crate) fn transfer_seeds(&mut self, from: TopicId, to: TopicId) {
        self.priors.transfer(from, to);
        self.seed_of = seed_lookup(&self.priors, &self.corpus);
        if self.dormant.contains(&from) && !self.keeps_reserved(from) {
            self.dormant.remove(&from);
        }
    }

    /// Reserves a brand-new topic id with no tables yet.
    pub(crate) fn reserve_topic(&mut self) -> TopicId {
        let k = self.next_topic;
        self.next_topic += 1;
        self.dormant.insert(k);
        k
    }

    /// Drops reserved topics nothing refers to anymore.
    pub(crate) fn release_unreferenced(&mut self) {
        let keep: Vec<TopicId> = self.dormant.iter().copied().filter(|&k| self.keeps_reserved(k)).collect();
        self.dormant = keep.into_iter().collect();
    }

    fn keeps_reserved(&self, k: TopicId) -> bool {
        self.priors.is_seeded_topic(k) || self.potential.pinned_topics().contains(&k)
    }
}

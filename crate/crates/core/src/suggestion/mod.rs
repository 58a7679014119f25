//! Per-topic word suggestions.
//!
//! Every refresh has two stages per topic. First each document gets a binary
//! relevance status, sampled from a collapsed two-class model that compares
//! the document's terms under the topic against the remaining topics. A
//! document that already was relevant and contains a current suggestion
//! stays relevant without sampling. Second, terms over-represented in the
//! relevant documents are scored, and the best candidates whose vector lies
//! close to the topic's embedding become the topic's suggestions.

pub mod embedding;

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::{Corpus, WordId};
use crate::engine::{ModelState, TopicId};
use crate::error::{Error, Result};
pub use embedding::{cosine, expand_query, topic_embedding, EmbeddingTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestionParams {
    pub gamma_r: f64,
    pub gamma_ir: f64,
    /// Candidate pool taken by score before the similarity filter.
    pub top_candidates: usize,
    /// Number of top words forming the topic embedding.
    pub top_m: usize,
    /// Suggestions need a cosine strictly above this.
    pub min_cosine: f64,
}

impl Default for SuggestionParams {
    fn default() -> Self {
        Self { gamma_r: 1.0, gamma_ir: 1.0, top_candidates: 50, top_m: 10, min_cosine: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub word: WordId,
    pub term: String,
    pub score: f64,
    pub cosine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TopicRelevanceRepr", into = "TopicRelevanceRepr")]
pub struct TopicRelevance {
    status: Vec<bool>,
    relevant: usize,
    suggestions: Vec<Suggestion>,
}

#[derive(Serialize, Deserialize)]
struct TopicRelevanceRepr {
    num_docs: usize,
    relevant_docs: Vec<u32>,
    suggestions: Vec<Suggestion>,
}

impl From<TopicRelevanceRepr> for TopicRelevance {
    fn from(r: TopicRelevanceRepr) -> Self {
        let mut status = vec![false; r.num_docs];
        for &m in &r.relevant_docs {
            if let Some(s) = status.get_mut(m as usize) {
                *s = true;
            }
        }
        let relevant = status.iter().filter(|&&s| s).count();
        Self { status, relevant, suggestions: r.suggestions }
    }
}

impl From<TopicRelevance> for TopicRelevanceRepr {
    fn from(t: TopicRelevance) -> Self {
        Self {
            num_docs: t.status.len(),
            relevant_docs: t.relevant_docs().map(|m| m as u32).collect(),
            suggestions: t.suggestions,
        }
    }
}

impl TopicRelevance {
    fn new(num_docs: usize) -> Self {
        Self { status: vec![false; num_docs], relevant: 0, suggestions: Vec::new() }
    }

    pub fn status(&self, m: usize) -> bool {
        self.status[m]
    }

    /// Documents under status 1 and status 0.
    pub fn counts(&self) -> (usize, usize) {
        (self.relevant, self.status.len() - self.relevant)
    }

    pub fn relevant_docs(&self) -> impl Iterator<Item = usize> + '_ {
        self.status.iter().enumerate().filter(|(_, &s)| s).map(|(m, _)| m)
    }

    pub fn suggestions(&self) -> &[Suggestion] {
        &self.suggestions
    }

    fn set(&mut self, m: usize, relevant: bool) {
        if self.status[m] != relevant {
            self.status[m] = relevant;
            if relevant {
                self.relevant += 1;
            } else {
                self.relevant -= 1;
            }
        }
    }
}

/// Relevance statuses and current suggestions for every topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceState {
    params: SuggestionParams,
    topics: BTreeMap<TopicId, TopicRelevance>,
    rng: ChaCha8Rng,
}

/// Per-term inputs of the relevance posterior for one document; all counts
/// exclude the document itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelevanceTerm {
    pub freq: u32,
    pub topic_count: u32,
    pub background_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelevanceInputs<'a> {
    pub relevant_docs: usize,
    pub irrelevant_docs: usize,
    pub gamma_r: f64,
    pub gamma_ir: f64,
    pub beta: f64,
    pub vocab_size: usize,
    pub topic_total: u64,
    pub background_total: u64,
    pub terms: &'a [RelevanceTerm],
}

/// Log of the collapsed Dirichlet-multinomial likelihood ratio of a document
/// given class counts: `ln Γ(N + Vβ) − ln Γ(N + L + Vβ) + Σ_v [ln Γ(n_v + f_v + β) − ln Γ(n_v + β)]`.
fn log_predictive(total: u64, doc_len: u64, vbeta: f64, beta: f64, terms: impl Iterator<Item = (u32, u32)>) -> f64 {
    let mut lp = ln_gamma(total as f64 + vbeta) - ln_gamma((total + doc_len) as f64 + vbeta);
    for (count, freq) in terms {
        lp += ln_gamma(count as f64 + freq as f64 + beta) - ln_gamma(count as f64 + beta);
    }
    lp
}

/// Probability that the document is relevant (status 1).
pub fn relevance_probability(inp: &RelevanceInputs<'_>) -> f64 {
    let vbeta = inp.vocab_size as f64 * inp.beta;
    let doc_len: u64 = inp.terms.iter().map(|t| t.freq as u64).sum();
    let l1 = (inp.relevant_docs as f64 + inp.gamma_r).ln()
        + log_predictive(inp.topic_total, doc_len, vbeta, inp.beta, inp.terms.iter().map(|t| (t.topic_count, t.freq)));
    let l0 = (inp.irrelevant_docs as f64 + inp.gamma_ir).ln()
        + log_predictive(
            inp.background_total,
            doc_len,
            vbeta,
            inp.beta,
            inp.terms.iter().map(|t| (t.background_count, t.freq)),
        );
    1.0 / (1.0 + (l0 - l1).exp())
}

/// `p_r · ln(p_r / p_c)`, taken as 0 when `p_r` is 0.
pub fn term_score(p_r: f64, p_c: f64) -> f64 {
    if p_r <= 0.0 {
        0.0
    } else {
        p_r * (p_r / p_c).ln()
    }
}

/// Term counts over a set of documents and over the whole corpus.
#[derive(Clone, Debug)]
pub struct TermStats {
    pub corpus_counts: Vec<u64>,
    pub corpus_total: u64,
}

impl TermStats {
    pub fn new(corpus: &Corpus) -> Self {
        let corpus_counts = corpus.term_counts();
        let corpus_total = corpus_counts.iter().sum();
        Self { corpus_counts, corpus_total }
    }

    /// Scores every term that occurs in `docs`. Empty input scores nothing.
    pub fn scores(&self, corpus: &Corpus, docs: impl IntoIterator<Item = usize>) -> Vec<(WordId, f64)> {
        let mut counts = vec![0u64; corpus.vocab_size()];
        let mut total = 0u64;
        for m in docs {
            for &w in &corpus.document(m).tokens {
                counts[w as usize] += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Vec::new();
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| {
                let p_r = c as f64 / total as f64;
                let p_c = self.corpus_counts[v] as f64 / self.corpus_total as f64;
                (v as WordId, term_score(p_r, p_c))
            })
            .collect()
    }
}

/// Score of term `v` in `relevant` documents against the whole corpus.
pub fn term_score_in(v: WordId, relevant: &[usize], corpus: &Corpus) -> f64 {
    let stats = TermStats::new(corpus);
    stats
        .scores(corpus, relevant.iter().copied())
        .into_iter()
        .find(|&(w, _)| w == v)
        .map_or(0.0, |(_, s)| s)
}

/// Suggestions for topic `k` from an explicit set of relevant documents.
pub fn suggest_from_docs(
    state: &ModelState,
    k: TopicId,
    relevant: &[usize],
    emb: &EmbeddingTable,
    params: &SuggestionParams,
    stats: &TermStats,
) -> Result<Vec<Suggestion>> {
    let corpus = state.corpus();
    let mut scored = stats.scores(corpus, relevant.iter().copied());
    if scored.is_empty() {
        return Ok(Vec::new());
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(params.top_candidates);

    let topic_vec = topic_embedding(state, k, emb, params.top_m)?;
    let top: HashSet<WordId> = state.top_words(k, params.top_m)?.into_iter().map(|(w, _)| w).collect();
    let vocab = corpus.vocabulary();
    let mut out = Vec::new();
    for (w, score) in scored {
        if top.contains(&w) {
            continue;
        }
        let term = vocab.term(w);
        let Some(v) = emb.get(term) else { continue };
        let Ok(c) = cosine(v, &topic_vec) else { continue };
        if c > params.min_cosine {
            out.push(Suggestion { word: w, term: term.to_owned(), score, cosine: c });
        }
    }
    Ok(out)
}

/// Per-document view used by relevance sampling.
struct DocTerms {
    /// `(word, frequency in doc, occurrences assigned to the topic)`.
    terms: Vec<(WordId, u32, u32)>,
    in_topic: u64,
}

fn doc_terms(state: &ModelState, k: TopicId, m: usize, buf: &mut Vec<(WordId, bool)>) -> DocTerms {
    buf.clear();
    let doc = state.corpus().document(m);
    for (i, &w) in doc.tokens.iter().enumerate() {
        buf.push((w, state.token_topic(m, i) == Some(k)));
    }
    buf.sort_unstable_by_key(|&(w, _)| w);
    let mut terms: Vec<(WordId, u32, u32)> = Vec::new();
    let mut in_topic = 0;
    for &(w, hit) in buf.iter() {
        match terms.last_mut() {
            Some(t) if t.0 == w => {
                t.1 += 1;
                t.2 += hit as u32;
            }
            _ => terms.push((w, 1, hit as u32)),
        }
        in_topic += hit as u64;
    }
    DocTerms { terms, in_topic }
}

impl RelevanceState {
    /// All documents start irrelevant for every active topic.
    pub fn new(state: &ModelState, params: SuggestionParams) -> Self {
        let seed = state.hyper().rng_seed ^ 0x5eed_5eed_5eed_5eed;
        let mut rs = Self { params, topics: BTreeMap::new(), rng: ChaCha8Rng::seed_from_u64(seed) };
        rs.sync(state);
        rs
    }

    pub fn params(&self) -> &SuggestionParams {
        &self.params
    }

    pub fn topic(&self, k: TopicId) -> Option<&TopicRelevance> {
        self.topics.get(&k)
    }

    pub fn topics(&self) -> &BTreeMap<TopicId, TopicRelevance> {
        &self.topics
    }

    pub fn suggestions(&self, k: TopicId) -> &[Suggestion] {
        self.topics.get(&k).map_or(&[], |t| &t.suggestions)
    }

    /// Tracks the model's active topics: new ones start all-irrelevant,
    /// retired ones are dropped.
    pub fn sync(&mut self, state: &ModelState) {
        let active: HashSet<TopicId> = state.active_topics().iter().copied().collect();
        self.topics.retain(|k, _| active.contains(k));
        let d = state.corpus().len();
        for &k in state.active_topics() {
            self.topics.entry(k).or_insert_with(|| TopicRelevance::new(d));
        }
    }

    /// Posterior probability that document `m` is relevant to topic `k`,
    /// with the document's own counts held out.
    pub fn relevance_probability(&self, state: &ModelState, k: TopicId, m: usize) -> f64 {
        let mut buf = Vec::new();
        self.probability_with(state, k, m, &mut buf)
    }

    fn probability_with(&self, state: &ModelState, k: TopicId, m: usize, buf: &mut Vec<(WordId, bool)>) -> f64 {
        let rel = &self.topics[&k];
        let dt = doc_terms(state, k, m, buf);
        let doc_len = state.corpus().document(m).len() as u64;
        let total_assigned = state.total_assigned();
        let topic_total = state.n_k(k) as u64 - dt.in_topic;
        let background_total = (total_assigned - doc_len) - topic_total;
        let corpus = state.corpus();
        let terms: Vec<RelevanceTerm> = dt
            .terms
            .iter()
            .map(|&(w, freq, hit)| {
                let topic_count = state.n_kw(k, w) - hit;
                let all = state.word_total(w) - freq;
                RelevanceTerm { freq, topic_count, background_count: all - topic_count }
            })
            .collect();
        debug_assert!(corpus.document(m).len() as u32 == terms.iter().map(|t| t.freq).sum::<u32>());
        let (c1, c0) = rel.counts();
        let held_out = rel.status[m];
        relevance_probability(&RelevanceInputs {
            relevant_docs: c1 - held_out as usize,
            irrelevant_docs: c0 - (!held_out) as usize,
            gamma_r: self.params.gamma_r,
            gamma_ir: self.params.gamma_ir,
            beta: state.hyper().beta,
            vocab_size: state.vocab_size(),
            topic_total,
            background_total,
            terms: &terms,
        })
    }

    /// Draws and records the status of document `m` for topic `k`.
    pub fn sample_doc_relevance(&mut self, state: &ModelState, k: TopicId, m: usize) -> bool {
        let mut buf = Vec::new();
        self.sample_with(state, k, m, &mut buf)
    }

    fn sample_with(&mut self, state: &ModelState, k: TopicId, m: usize, buf: &mut Vec<(WordId, bool)>) -> bool {
        let rel = &self.topics[&k];
        let sticky = rel.status[m] && {
            let doc = &state.corpus().document(m).tokens;
            rel.suggestions.iter().any(|s| doc.contains(&s.word))
        };
        let relevant = sticky || {
            let p = self.probability_with(state, k, m, buf);
            self.rng.random::<f64>() < p
        };
        self.topics.get_mut(&k).unwrap().set(m, relevant);
        relevant
    }

    /// Suggestions for topic `k` from its current relevant documents.
    pub fn suggest_words(
        &self,
        state: &ModelState,
        k: TopicId,
        emb: &EmbeddingTable,
        stats: &TermStats,
    ) -> Result<Vec<Suggestion>> {
        let rel = self.topics.get(&k).ok_or(Error::InactiveTopic(k))?;
        let docs: Vec<usize> = rel.relevant_docs().collect();
        suggest_from_docs(state, k, &docs, emb, &self.params, stats)
    }

    /// One relevance sweep and suggestion update for every active topic.
    /// Topics whose top words have no vectors get no suggestions.
    pub fn refresh(&mut self, state: &ModelState, emb: Option<&EmbeddingTable>, stats: &TermStats) {
        self.sync(state);
        let topics: Vec<TopicId> = self.topics.keys().copied().collect();
        let mut buf = Vec::new();
        for k in topics {
            for m in 0..state.corpus().len() {
                self.sample_with(state, k, m, &mut buf);
            }
            let suggestions = match emb {
                Some(emb) => self.suggest_words(state, k, emb, stats).unwrap_or_else(|e| {
                    log::debug!("no suggestions for topic {k}: {e}");
                    Vec::new()
                }),
                None => Vec::new(),
            };
            self.topics.get_mut(&k).unwrap().suggestions = suggestions;
        }
    }
}

//! Topic summaries, corpus-internal coherence, Precision@K and the
//! inter-topic distance map.

mod geometry;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, WordId};
use crate::engine::{ModelState, TopicId};
use crate::error::{Error, Result};
pub use geometry::{classical_mds, distance_map, jsd, MapPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordWeight {
    pub word: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic: TopicId,
    pub label: String,
    /// Share of all assigned tokens.
    pub weight: f64,
    pub top_words: Vec<WordWeight>,
}

pub fn topic_summary(state: &ModelState, k: TopicId, top_n: usize) -> Result<TopicSummary> {
    let vocab = state.corpus().vocabulary();
    let top_words: Vec<WordWeight> = state
        .top_words(k, top_n)?
        .into_iter()
        .map(|(w, p)| WordWeight { word: vocab.term(w).to_owned(), weight: p })
        .collect();
    let label = top_words.iter().take(3).map(|w| w.word.as_str()).collect::<Vec<_>>().join("/");
    Ok(TopicSummary { topic: k, label, weight: state.topic_weight(k), top_words })
}

/// Summaries of every active topic in id order.
pub fn summarize(state: &ModelState, top_n: usize) -> Vec<TopicSummary> {
    state
        .active_topics()
        .iter()
        .map(|&k| topic_summary(state, k, top_n).expect("active topic"))
        .collect()
}

/// Documents ranked by their share of topic `k`, best first; ties keep
/// corpus order. Documents without any token of `k` are left out.
pub fn top_documents(state: &ModelState, k: TopicId, n: usize) -> Vec<(usize, f64)> {
    let mut docs: Vec<(usize, f64)> = (0..state.corpus().len())
        .map(|j| (j, state.doc_topic_weight(j, k)))
        .filter(|&(_, p)| p > 0.0)
        .collect();
    docs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    docs.truncate(n);
    docs
}

/// Document-level occurrence lists for NPMI.
#[derive(Clone, Debug)]
pub struct CoherenceIndex {
    postings: Vec<Vec<u32>>,
    num_docs: usize,
}

pub const NPMI_EPSILON: f64 = 1e-12;

impl CoherenceIndex {
    pub fn new(corpus: &Corpus) -> Self {
        let mut postings = vec![Vec::new(); corpus.vocab_size()];
        for (j, d) in corpus.documents().iter().enumerate() {
            let uniq: HashSet<WordId> = d.tokens.iter().copied().collect();
            for w in uniq {
                postings[w as usize].push(j as u32);
            }
        }
        Self { postings, num_docs: corpus.len() }
    }

    fn doc_count(&self, w: WordId) -> usize {
        self.postings.get(w as usize).map_or(0, Vec::len)
    }

    fn co_count(&self, a: WordId, b: WordId) -> usize {
        let (x, y) = (&self.postings[a as usize], &self.postings[b as usize]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// NPMI of a word pair; `None` when either word never occurs.
    pub fn npmi(&self, a: WordId, b: WordId) -> Option<f64> {
        let (da, db) = (self.doc_count(a), self.doc_count(b));
        if da == 0 || db == 0 {
            return None;
        }
        let n = self.num_docs as f64;
        let (pa, pb) = (da as f64 / n, db as f64 / n);
        let pab = self.co_count(a, b) as f64 / n;
        if pab >= 1.0 {
            return Some(1.0);
        }
        let pmi = ((pab + NPMI_EPSILON) / (pa * pb)).ln();
        Some((pmi / -(pab + NPMI_EPSILON).ln()).clamp(-1.0, 1.0))
    }

    /// Mean NPMI over all pairs among the first `top_n` words.
    pub fn coherence(&self, words: &[WordId], top_n: usize) -> Result<f64> {
        if top_n < 2 {
            return Err(Error::UndefinedCoherence);
        }
        let words = &words[..words.len().min(top_n)];
        let (mut sum, mut n) = (0.0, 0usize);
        for (i, &a) in words.iter().enumerate() {
            for &b in &words[i + 1..] {
                if let Some(v) = self.npmi(a, b) {
                    sum += v;
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::UndefinedCoherence);
        }
        Ok(sum / n as f64)
    }
}

/// Coherence of a list of terms; terms outside the vocabulary are skipped.
pub fn npmi_coherence(top_words: &[&str], corpus: &Corpus, top_n: usize) -> Result<f64> {
    let index = CoherenceIndex::new(corpus);
    let vocab = corpus.vocabulary();
    let ids: Vec<WordId> = top_words[..top_words.len().min(top_n)]
        .iter()
        .map(|t| vocab.id(t).unwrap_or(WordId::MAX))
        .collect();
    index.coherence(&ids, top_n)
}

/// Per-topic coherence of the model's top words.
pub fn topic_coherence(state: &ModelState, index: &CoherenceIndex, top_n: usize) -> BTreeMap<TopicId, f64> {
    let mut out = BTreeMap::new();
    for &k in state.active_topics() {
        let words: Vec<WordId> = state.top_words(k, top_n).expect("active").into_iter().map(|(w, _)| w).collect();
        match index.coherence(&words, top_n) {
            Ok(c) => {
                out.insert(k, c);
            }
            Err(_) => log::debug!("coherence undefined for topic {k}"),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub k: usize,
    pub per_topic: BTreeMap<TopicId, f64>,
    pub mean: f64,
    /// Set when fewer than `k` documents carried the topic.
    pub truncated: bool,
}

/// Fraction of each mapped topic's top-`k` documents whose gold category
/// matches the topic's category.
pub fn precision_at_k(state: &ModelState, mapping: &BTreeMap<TopicId, String>, k: usize) -> Result<PrecisionReport> {
    if mapping.is_empty() || k == 0 {
        return Err(Error::InvalidHyperparams("precision needs a topic mapping and k >= 1".into()));
    }
    let corpus = state.corpus();
    if corpus.documents().iter().all(|d| d.category.is_none()) {
        return Err(Error::MissingLabels);
    }
    let mut per_topic = BTreeMap::new();
    let mut truncated = false;
    for (&topic, category) in mapping {
        if !state.is_active(topic) {
            return Err(Error::InactiveTopic(topic));
        }
        let mut ranked: Vec<(usize, f64)> =
            (0..corpus.len()).map(|j| (j, state.doc_topic_weight(j, topic))).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top = &ranked[..ranked.len().min(k)];
        truncated |= top.len() < k;
        let hits = top
            .iter()
            .filter(|&&(j, _)| corpus.document(j).category.as_deref() == Some(category.as_str()))
            .count();
        per_topic.insert(topic, hits as f64 / top.len() as f64);
    }
    let mean = per_topic.values().sum::<f64>() / per_topic.len() as f64;
    Ok(PrecisionReport { k, per_topic, mean, truncated })
}

/// Majority-vote purity: each document goes to its dominant topic and each
/// topic counts the documents of its most common category.
pub fn purity(state: &ModelState) -> Result<f64> {
    let corpus = state.corpus();
    if corpus.documents().iter().all(|d| d.category.is_none()) {
        return Err(Error::MissingLabels);
    }
    let mut votes: BTreeMap<TopicId, BTreeMap<&str, usize>> = BTreeMap::new();
    for (j, d) in corpus.documents().iter().enumerate() {
        let dist = state.doc_topic_dist(j);
        let Some(&(k, _)) = dist.iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0))) else { continue };
        let cat = d.category.as_deref().unwrap_or("");
        *votes.entry(k).or_default().entry(cat).or_default() += 1;
    }
    let hits: usize = votes.values().map(|v| v.values().copied().max().unwrap_or(0)).sum();
    Ok(hits as f64 / corpus.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub node: u64,
    pub coherence: BTreeMap<TopicId, f64>,
    pub mean_coherence: f64,
    pub precision: Option<PrecisionReport>,
    /// Present when the corpus carries category labels.
    #[serde(default)]
    pub purity: Option<f64>,
}

impl EvaluationReport {
    pub fn new(
        node: u64,
        state: &ModelState,
        index: &CoherenceIndex,
        top_n: usize,
        mapping: Option<(&BTreeMap<TopicId, String>, usize)>,
    ) -> Result<Self> {
        let coherence = topic_coherence(state, index, top_n);
        let mean_coherence = mean(coherence.values());
        let precision = mapping.map(|(m, k)| precision_at_k(state, m, k)).transpose()?;
        let purity = match purity(state) {
            Ok(p) => Some(p),
            Err(Error::MissingLabels) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { node, coherence, mean_coherence, precision, purity })
    }

    pub fn to_table(&self, state: &ModelState) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "node {}", self.node);
        let _ = writeln!(out, "{:>6}  {:>9}  {:>9}  label", "topic", "npmi", "prec");
        for &k in state.active_topics() {
            let c = self.coherence.get(&k).map_or("-".to_owned(), |c| format!("{c:.4}"));
            let p = self
                .precision
                .as_ref()
                .and_then(|p| p.per_topic.get(&k))
                .map_or("-".to_owned(), |p| format!("{p:.4}"));
            let label = topic_summary(state, k, 3).map(|s| s.label).unwrap_or_default();
            let _ = writeln!(out, "{k:>6}  {c:>9}  {p:>9}  {label}");
        }
        let p = self.precision.as_ref().map_or("-".to_owned(), |p| format!("{:.4}", p.mean));
        let _ = writeln!(out, "{:>6}  {:>9.4}  {p:>9}", "mean", self.mean_coherence);
        if let Some(purity) = self.purity {
            let _ = writeln!(out, "purity  {purity:.4}");
        }
        out
    }
}

pub(crate) fn mean<'a>(xs: impl Iterator<Item = &'a f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

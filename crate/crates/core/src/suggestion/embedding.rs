//! Pretrained word vectors, cosine similarity, topic embeddings and query
//! expansion.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::{tokenize, Vocabulary};
use crate::engine::{ModelState, TopicId};
use crate::error::{Error, Result};

/// Word vectors of one fixed dimension. Words without a vector are simply
/// absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Adds a vector. The first vector for a word wins.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if self.words.is_empty() && self.dim == 0 {
            self.dim = vector.len();
        }
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        let word = word.into();
        if self.index.contains_key(&word) {
            return Ok(());
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.vectors.extend(vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Parses the whitespace text format: `word f1 f2 ... fD` per line, with
    /// an optional `count dim` header line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = EmbeddingTable::default();
        for (n, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if n == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                table.dim = rest[0].parse().unwrap();
                continue;
            }
            let vector = rest
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedRecord { line: n + 1, reason: e.to_string() })?;
            if vector.is_empty() {
                return Err(Error::MalformedRecord { line: n + 1, reason: "no vector components".into() });
            }
            table.insert(word, vector).map_err(|e| Error::MalformedRecord { line: n + 1, reason: e.to_string() })?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Keeps only words of the given vocabulary, in table order.
    pub fn restrict_to(&self, vocab: &Vocabulary) -> Self {
        let mut out = EmbeddingTable::new(self.dim);
        for (i, w) in self.words.iter().enumerate() {
            if vocab.id(w).is_some() {
                out.insert(w.clone(), self.row(i).to_vec()).expect("same dimension");
            }
        }
        out
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Probability-weighted mean of the vectors of topic `k`'s top `m` words,
/// weights renormalized over the words that have a vector.
pub fn topic_embedding(state: &ModelState, k: TopicId, emb: &EmbeddingTable, m: usize) -> Result<Vec<f64>> {
    let vocab = state.corpus().vocabulary();
    let top = state.top_words(k, m)?;
    let weighted: Vec<(f64, &[f64])> = top
        .iter()
        .filter_map(|&(w, p)| emb.get(vocab.term(w)).map(|v| (p, v)))
        .collect();
    weighted_mean(&weighted).ok_or(Error::NoEmbeddableWords(k))
}

/// `Σ p_i v_i / Σ p_i`; `None` for an empty input.
pub fn weighted_mean(items: &[(f64, &[f64])]) -> Option<Vec<f64>> {
    let (_, first) = items.first()?;
    let mass: f64 = items.iter().map(|(p, _)| p).sum();
    let mut out = vec![0.0; first.len()];
    for (p, v) in items {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += p / mass * x;
        }
    }
    Some(out)
}

/// The `n` words of `emb` closest by cosine to the mean vector of the
/// phrase's tokens, excluding those tokens.
pub fn expand_query(phrase: &str, emb: &EmbeddingTable, n: usize) -> Result<Vec<(String, f64)>> {
    let tokens = tokenize(phrase, &HashSet::new());
    let vectors: Vec<&[f64]> = tokens.iter().filter_map(|t| emb.get(t)).collect();
    if vectors.is_empty() {
        return Err(Error::OutOfVocabularyPhrase(phrase.to_owned()));
    }
    let items: Vec<(f64, &[f64])> = vectors.iter().map(|v| (1.0, *v)).collect();
    let query = weighted_mean(&items).expect("nonempty");
    let exclude: HashSet<&str> = tokens.iter().map(String::as_str).collect();
    let mut scored: Vec<(String, f64)> = Vec::new();
    for (i, w) in emb.words.iter().enumerate() {
        if exclude.contains(w.as_str()) {
            continue;
        }
        if let Ok(c) = cosine(&query, emb.row(i)) {
            scored.push((w.clone(), c));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(scored)
}

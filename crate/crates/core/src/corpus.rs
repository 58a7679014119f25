//! Document ingestion: tokenization, vocabulary construction and corpus files.
//!
//! A [`Corpus`] is immutable once built. Documents keep their input order and
//! every token is an index into the shared [`Vocabulary`].

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type WordId = u32;

/// One input record before tokenization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl CorpusRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { id: id.into(), text: text.into(), category: None }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<WordId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    index: HashMap<String, WordId>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(repr: VocabularyRepr) -> Self {
        Vocabulary::from_terms(repr.terms, repr.doc_freq)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(vocab: Vocabulary) -> Self {
        VocabularyRepr { terms: vocab.terms, doc_freq: vocab.doc_freq }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.doc_freq == other.doc_freq
    }
}

impl Vocabulary {
    fn from_terms(terms: Vec<String>, doc_freq: Vec<u32>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as WordId))
            .collect();
        Self { terms, doc_freq, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<WordId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: WordId) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Number of documents containing the term.
    pub fn doc_freq(&self, id: WordId) -> u32 {
        self.doc_freq[id as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
    stopwords: Vec<String>,
    min_doc_freq: u32,
}

/// Settings used when turning raw records into a [`Corpus`].
#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub stopwords: HashSet<String>,
    pub min_doc_freq: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { stopwords: default_stopwords(), min_doc_freq: 2 }
    }
}

impl BuildOptions {
    pub fn new(stopwords: HashSet<String>, min_doc_freq: u32) -> Self {
        Self { stopwords, min_doc_freq }
    }
}

/// Lowercases, strips punctuation, splits on whitespace and drops stopwords
/// and single-character terms.
///
/// Apostrophes are removed so contractions stay one term; any other
/// non-alphanumeric character separates terms.
pub fn tokenize(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch == '\'' || ch == '\u{2019}' {
            continue;
        }
        if ch.is_alphanumeric() {
            cleaned.extend(ch.to_lowercase());
        } else {
            cleaned.push(' ');
        }
    }
    cleaned
        .split_whitespace()
        .filter(|t| t.chars().count() >= 2 && !stopwords.contains(*t))
        .map(str::to_owned)
        .collect()
}

/// Builds a corpus keeping only terms that occur in at least `min_doc_freq`
/// documents. Documents left without tokens are dropped.
pub fn build_corpus(records: &[CorpusRecord], opts: &BuildOptions) -> Result<Corpus> {
    if opts.min_doc_freq == 0 {
        return Err(Error::InvalidHyperparams("min_doc_freq must be at least 1".into()));
    }
    let tokenized: Vec<Vec<String>> =
        records.iter().map(|r| tokenize(&r.text, &opts.stopwords)).collect();

    // first-appearance order keeps the vocabulary deterministic
    let mut order: Vec<&str> = Vec::new();
    let mut df: HashMap<&str, u32> = HashMap::new();
    for terms in &tokenized {
        let mut seen: HashSet<&str> = HashSet::new();
        for t in terms {
            if seen.insert(t) {
                let e = df.entry(t).or_insert_with(|| {
                    order.push(t);
                    0
                });
                *e += 1;
            }
        }
    }
    let kept: Vec<String> = order
        .into_iter()
        .filter(|t| df[t] >= opts.min_doc_freq)
        .map(str::to_owned)
        .collect();
    let freqs = kept.iter().map(|t| df[t.as_str()]).collect();
    let vocabulary = Vocabulary::from_terms(kept, freqs);

    let mut documents = Vec::with_capacity(records.len());
    for (rec, terms) in records.iter().zip(&tokenized) {
        let tokens: Vec<WordId> = terms.iter().filter_map(|t| vocabulary.id(t)).collect();
        if tokens.is_empty() {
            log::warn!("dropping document {:?}: no tokens after preprocessing", rec.id);
            continue;
        }
        documents.push(Document {
            id: rec.id.clone(),
            raw_text: rec.text.clone(),
            tokens,
            category: rec.category.clone(),
        });
    }
    if documents.is_empty() || vocabulary.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut stopwords: Vec<String> = opts.stopwords.iter().cloned().collect();
    stopwords.sort();
    Ok(Corpus { documents, vocabulary, stopwords, min_doc_freq: opts.min_doc_freq })
}

impl Corpus {
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, j: usize) -> &Document {
        &self.documents[j]
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn stopwords(&self) -> &[String] {
        &self.stopwords
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    pub fn doc_index(&self, id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.id == id)
    }

    /// Maps a document's token indices back to terms.
    pub fn decode(&self, j: usize) -> Vec<&str> {
        self.documents[j].tokens.iter().map(|&w| self.vocabulary.term(w)).collect()
    }

    /// Corpus-wide frequency of every term.
    pub fn term_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab_size()];
        for d in &self.documents {
            for &w in &d.tokens {
                counts[w as usize] += 1;
            }
        }
        counts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line with `id`, `text` and optional `category`.
    JsonLines,
    /// `id,text[,category]` rows, optional header.
    Csv,
    /// Picks by file extension; `.csv` is CSV, anything else JSON lines.
    Auto,
}

pub fn read_records(path: &Path, format: CorpusFormat) -> Result<Vec<CorpusRecord>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let format = match format {
        CorpusFormat::Auto => {
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                CorpusFormat::Csv
            } else {
                CorpusFormat::JsonLines
            }
        }
        f => f,
    };
    let bytes = fs::read(path)?;
    match format {
        CorpusFormat::Csv => parse_csv(&bytes),
        _ => parse_json_lines(&bytes),
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat, opts: &BuildOptions) -> Result<Corpus> {
    build_corpus(&read_records(path, format)?, opts)
}

pub fn parse_json_lines(bytes: &[u8]) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line.map_err(|e| Error::MalformedRecord { line: n + 1, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedRecord { line: n + 1, reason: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_csv(bytes: &[u8]) -> Result<Vec<CorpusRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut out = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::MalformedRecord {
            line: e.position().map_or(n + 1, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(n + 1, |p| p.line() as usize);
        if n == 0 && row.get(0) == Some("id") && row.get(1) == Some("text") {
            continue;
        }
        match row.len() {
            2 | 3 => {
                let mut rec = CorpusRecord::new(&row[0], &row[1]);
                if row.len() == 3 && !row[2].is_empty() {
                    rec.category = Some(row[2].to_owned());
                }
                out.push(rec);
            }
            k => {
                return Err(Error::MalformedRecord {
                    line,
                    reason: format!("expected 2 or 3 columns, found {k}"),
                })
            }
        }
    }
    Ok(out)
}

/// Reads a stopword file: one term per line, blank lines ignored.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

const ENGLISH_STOPWORDS: &str = "a about above after again against all am an and any are aren as at be \
because been before being below between both but by can cannot could couldn did didn do does doesn \
doing don down during each few for from further had hadn has hasn have haven having he her here hers \
herself him himself his how i if in into is isn it its itself just let ll me more most mustn my myself \
no nor not now of off on once only or other ought our ours ourselves out over own re same shan she \
should shouldn so some such than that the their theirs them themselves then there these they this \
those through to too under until up us ve very was wasn we were weren what when where which while \
who whom why will with won would wouldn you your yours yourself yourselves";

/// A standard English stopword list.
pub fn default_stopwords() -> HashSet<String> {
    ENGLISH_STOPWORDS.split_whitespace().map(str::to_owned).collect()
}

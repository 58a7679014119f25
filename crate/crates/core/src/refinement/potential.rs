//! Layered sparse reweighting of `(topic, word, document)` cells.
//!
//! Each layer matches a cell pattern where every coordinate is either a
//! concrete value or a wildcard. A lookup returns the value of the most
//! recently installed matching layer, or 1 when nothing matches.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::engine::TopicId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `None` matches every topic, including ones not created yet.
    pub topic: Option<TopicId>,
    pub word: Option<WordId>,
    pub doc: Option<u32>,
    pub value: f64,
}

impl Layer {
    pub fn new(topic: Option<TopicId>, word: Option<WordId>, doc: Option<u32>, value: f64) -> Self {
        assert!(value >= 0.0 && value.is_finite(), "potential values must be finite and nonnegative");
        Self { topic, word, doc, value }
    }

    pub fn matches(&self, k: TopicId, w: WordId, j: u32) -> bool {
        self.topic.is_none_or(|t| t == k)
            && self.word.is_none_or(|x| x == w)
            && self.doc.is_none_or(|d| d == j)
    }
}

#[derive(Clone, Debug, Default)]
struct LayerIndex {
    exact: HashMap<(WordId, u32), Vec<u32>>,
    by_word: HashMap<WordId, Vec<u32>>,
    by_doc: HashMap<u32, Vec<u32>>,
    global: Vec<u32>,
    pinned: BTreeSet<TopicId>,
}

impl LayerIndex {
    fn insert(&mut self, seq: u32, layer: &Layer) {
        match (layer.word, layer.doc) {
            (Some(w), Some(j)) => self.exact.entry((w, j)).or_default().push(seq),
            (Some(w), None) => self.by_word.entry(w).or_default().push(seq),
            (None, Some(j)) => self.by_doc.entry(j).or_default().push(seq),
            (None, None) => self.global.push(seq),
        }
        if let Some(k) = layer.topic {
            if layer.value > 0.0 {
                self.pinned.insert(k);
            }
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Layer>", into = "Vec<Layer>")]
pub struct PotentialFunction {
    layers: Vec<Layer>,
    index: LayerIndex,
}

impl From<Vec<Layer>> for PotentialFunction {
    fn from(layers: Vec<Layer>) -> Self {
        let mut p = PotentialFunction::default();
        p.extend(layers);
        p
    }
}

impl From<PotentialFunction> for Vec<Layer> {
    fn from(p: PotentialFunction) -> Self {
        p.layers
    }
}

impl PartialEq for PotentialFunction {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl PotentialFunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Installs a layer on top of all existing ones.
    pub fn install(&mut self, layer: Layer) {
        let seq = self.layers.len() as u32;
        self.index.insert(seq, &layer);
        self.layers.push(layer);
    }

    pub fn extend(&mut self, layers: impl IntoIterator<Item = Layer>) {
        for l in layers {
            self.install(l);
        }
    }

    pub fn lookup(&self, k: TopicId, w: WordId, j: u32) -> f64 {
        self.resolve(w, j).value(k)
    }

    /// Topics that some layer gives positive weight by name. Such topics are
    /// kept reserved when they lose their last table.
    pub fn pinned_topics(&self) -> &BTreeSet<TopicId> {
        &self.index.pinned
    }

    /// Gathers the layers relevant to one `(word, doc)` pair, newest first.
    pub fn resolve(&self, w: WordId, j: u32) -> Resolved<'_> {
        let mut hits: Vec<u32> = Vec::new();
        if !self.layers.is_empty() {
            let ix = &self.index;
            if let Some(v) = ix.exact.get(&(w, j)) {
                hits.extend_from_slice(v);
            }
            if let Some(v) = ix.by_word.get(&w) {
                hits.extend_from_slice(v);
            }
            if let Some(v) = ix.by_doc.get(&j) {
                hits.extend_from_slice(v);
            }
            hits.extend_from_slice(&ix.global);
            hits.sort_unstable_by(|a, b| b.cmp(a));
        }
        Resolved { layers: &self.layers, hits }
    }
}

/// The layers matching one `(word, doc)` pair, newest first.
pub struct Resolved<'a> {
    layers: &'a [Layer],
    hits: Vec<u32>,
}

impl Resolved<'_> {
    pub fn is_trivial(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn value(&self, k: TopicId) -> f64 {
        for &seq in &self.hits {
            let l = &self.layers[seq as usize];
            if l.topic.is_none_or(|t| t == k) {
                return l.value;
            }
        }
        1.0
    }

    /// Value for a topic that no layer names explicitly.
    pub fn wildcard_value(&self) -> f64 {
        for &seq in &self.hits {
            let l = &self.layers[seq as usize];
            if l.topic.is_none() {
                return l.value;
            }
        }
        1.0
    }
}

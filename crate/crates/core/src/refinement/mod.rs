//! User refinements compiled into potential layers plus forget sets.
//!
//! Applying a batch works on a copy of the source state: each refinement is
//! compiled and installed in queue order, the union of forget sets is unseated
//! and resampled under the new potential, and a fixed number of sweeps
//! follows. The source state is never touched.

pub mod potential;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::engine::{ModelState, TopicId};
use crate::error::{Error, Result};
use potential::Layer;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Refinement {
    AddWord { word: String, topic: TopicId },
    RemoveWord { word: String, topic: TopicId },
    /// Move `word2` above `word1` in `topic`.
    SwapOrder { word1: String, word2: String, topic: TopicId },
    RemoveDoc { doc: String, topic: TopicId },
    /// Merge `topic2` into `topic1`.
    MergeTopics { topic1: TopicId, topic2: TopicId },
    /// Move `seeds` out of `topic` into a new topic.
    SplitTopic { topic: TopicId, seeds: Vec<String> },
}

/// What a tree edge records: training runs and applied refinements together
/// with values computed while compiling them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EdgeRecord {
    Train { iters: usize },
    AddWord { word: String, topic: TopicId },
    RemoveWord { word: String, topic: TopicId },
    SwapOrder { word1: String, word2: String, topic: TopicId, computed_delta: f64 },
    RemoveDoc { doc: String, topic: TopicId },
    MergeTopics { topic1: TopicId, topic2: TopicId },
    SplitTopic { topic: TopicId, seeds: Vec<String>, new_topic: TopicId },
}

impl EdgeRecord {
    /// The refinement this record was produced from, if any.
    pub fn refinement(&self) -> Option<Refinement> {
        Some(match self.clone() {
            EdgeRecord::Train { .. } => return None,
            EdgeRecord::AddWord { word, topic } => Refinement::AddWord { word, topic },
            EdgeRecord::RemoveWord { word, topic } => Refinement::RemoveWord { word, topic },
            EdgeRecord::SwapOrder { word1, word2, topic, .. } => Refinement::SwapOrder { word1, word2, topic },
            EdgeRecord::RemoveDoc { doc, topic } => Refinement::RemoveDoc { doc, topic },
            EdgeRecord::MergeTopics { topic1, topic2 } => Refinement::MergeTopics { topic1, topic2 },
            EdgeRecord::SplitTopic { topic, seeds, .. } => Refinement::SplitTopic { topic, seeds },
        })
    }
}

/// Penalty for the other topics of `w2` when moving it above `w1` in `z`.
///
/// `r = (n_w1z - n_w2z) / n_w2_other`; the penalty is 0 when `r > 1` and
/// `1 - r` clamped to `[0, 1]` otherwise. With no occurrences of `w2`
/// elsewhere `r` is infinite for a positive gap and the penalty is 1 when
/// there is no gap.
pub fn swap_penalty(n_w1z: u32, n_w2z: u32, n_w2_other: u32) -> f64 {
    let gap = n_w1z as f64 - n_w2z as f64;
    if n_w2_other == 0 {
        return if gap > 0.0 { 0.0 } else { 1.0 };
    }
    let r = gap / n_w2_other as f64;
    if r > 1.0 {
        0.0
    } else {
        (1.0 - r).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Action {
    ReserveTopic(TopicId),
    ReassignSeed { word: WordId, topic: TopicId },
    TransferSeeds { from: TopicId, to: TopicId },
}

/// A refinement resolved against one state.
#[derive(Clone, Debug, PartialEq)]
pub struct Compiled {
    pub layers: Vec<Layer>,
    /// `(document, position)` pairs to unseat, sorted.
    pub forget: Vec<(u32, u32)>,
    pub record: EdgeRecord,
    actions: Vec<Action>,
}

impl Compiled {
    /// Executes structural actions and installs the layers. Does not forget
    /// anything.
    pub fn install_into(&self, state: &mut ModelState) {
        for a in &self.actions {
            match *a {
                Action::ReserveTopic(k) => {
                    let got = state.reserve_topic();
                    assert_eq!(got, k, "state changed between compile and install");
                }
                Action::ReassignSeed { word, topic } => state.reassign_seed(word, topic),
                Action::TransferSeeds { from, to } => state.transfer_seeds(from, to),
            }
        }
        state.potential_mut().extend(self.layers.iter().copied());
    }
}

fn word_id(state: &ModelState, word: &str) -> Result<WordId> {
    state.corpus().vocabulary().id(word).ok_or_else(|| Error::UnknownWord(word.to_owned()))
}

fn active(state: &ModelState, k: TopicId) -> Result<()> {
    if state.is_active(k) {
        Ok(())
    } else {
        Err(Error::InactiveTopic(k))
    }
}

fn tokens_where(state: &ModelState, mut pred: impl FnMut(usize, WordId, Option<TopicId>) -> bool) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (j, doc) in state.corpus().documents().iter().enumerate() {
        for (i, &w) in doc.tokens.iter().enumerate() {
            if pred(j, w, state.token_topic(j, i)) {
                out.push((j as u32, i as u32));
            }
        }
    }
    out
}

/// Checks a refinement against a state without compiling it.
pub fn validate(r: &Refinement, state: &ModelState) -> Result<()> {
    compile(r, state).map(|_| ())
}

/// "Add `w` to `z`" layers: every topic gets 0 for `w`, then `z` gets 1.
fn add_word_layers(w: WordId, z: TopicId) -> [Layer; 2] {
    [Layer::new(None, Some(w), None, 0.0), Layer::new(Some(z), Some(w), None, 1.0)]
}

pub fn compile(r: &Refinement, state: &ModelState) -> Result<Compiled> {
    match r {
        Refinement::AddWord { word, topic } => {
            let w = word_id(state, word)?;
            active(state, *topic)?;
            let mut actions = Vec::new();
            if state.seed_topic(w).is_some_and(|z| z != *topic) {
                actions.push(Action::ReassignSeed { word: w, topic: *topic });
            }
            Ok(Compiled {
                layers: add_word_layers(w, *topic).to_vec(),
                forget: tokens_where(state, |_, x, _| x == w),
                record: EdgeRecord::AddWord { word: word.clone(), topic: *topic },
                actions,
            })
        }
        Refinement::RemoveWord { word, topic } => {
            let w = word_id(state, word)?;
            active(state, *topic)?;
            Ok(Compiled {
                layers: vec![Layer::new(Some(*topic), Some(w), None, 0.0)],
                forget: tokens_where(state, |_, x, k| x == w && k == Some(*topic)),
                record: EdgeRecord::RemoveWord { word: word.clone(), topic: *topic },
                actions: Vec::new(),
            })
        }
        Refinement::SwapOrder { word1, word2, topic } => {
            let w1 = word_id(state, word1)?;
            let w2 = word_id(state, word2)?;
            active(state, *topic)?;
            if w1 == w2 {
                return Err(Error::InvalidRefinement("swap needs two different words".into()));
            }
            let delta = swap_penalty(state.n_kw(*topic, w1), state.n_kw(*topic, w2), state.n_w_excluding(w2, *topic));
            Ok(Compiled {
                layers: vec![
                    Layer::new(None, Some(w2), None, delta),
                    Layer::new(Some(*topic), Some(w2), None, 1.0),
                ],
                forget: tokens_where(state, |_, x, _| x == w1 || x == w2),
                record: EdgeRecord::SwapOrder {
                    word1: word1.clone(),
                    word2: word2.clone(),
                    topic: *topic,
                    computed_delta: delta,
                },
                actions: Vec::new(),
            })
        }
        Refinement::RemoveDoc { doc, topic } => {
            let d = state
                .corpus()
                .doc_index(doc)
                .ok_or_else(|| Error::UnknownDocument(doc.clone()))?;
            active(state, *topic)?;
            Ok(Compiled {
                layers: vec![Layer::new(Some(*topic), None, Some(d as u32), 0.0)],
                forget: tokens_where(state, |j, _, k| j == d && k == Some(*topic)),
                record: EdgeRecord::RemoveDoc { doc: doc.clone(), topic: *topic },
                actions: Vec::new(),
            })
        }
        Refinement::MergeTopics { topic1, topic2 } => {
            active(state, *topic1)?;
            active(state, *topic2)?;
            if topic1 == topic2 {
                return Err(Error::InvalidRefinement("cannot merge a topic into itself".into()));
            }
            let forget = tokens_where(state, |_, _, k| k == Some(*topic2));
            let mut cells: BTreeSet<(WordId, u32)> = BTreeSet::new();
            let corpus = state.corpus();
            for &(j, i) in &forget {
                cells.insert((corpus.document(j as usize).tokens[i as usize], j));
            }
            let mut layers = Vec::with_capacity(cells.len() * 2);
            for (w, j) in cells {
                layers.push(Layer::new(None, Some(w), Some(j), 0.0));
                layers.push(Layer::new(Some(*topic1), Some(w), Some(j), 1.0));
            }
            let mut actions = Vec::new();
            if state.priors().is_seeded_topic(*topic2) {
                actions.push(Action::TransferSeeds { from: *topic2, to: *topic1 });
            }
            Ok(Compiled {
                layers,
                forget,
                record: EdgeRecord::MergeTopics { topic1: *topic1, topic2: *topic2 },
                actions,
            })
        }
        Refinement::SplitTopic { topic, seeds } => {
            active(state, *topic)?;
            if seeds.is_empty() {
                return Err(Error::InvalidRefinement("split needs at least one seed word".into()));
            }
            let mut ids = BTreeSet::new();
            for s in seeds {
                let w = word_id(state, s)?;
                if state.n_kw(*topic, w) == 0 {
                    return Err(Error::InvalidRefinement(format!("{s:?} is not a word of topic {topic}")));
                }
                if !ids.insert(w) {
                    return Err(Error::InvalidRefinement(format!("{s:?} listed twice")));
                }
            }
            let new_topic = state.next_topic_id();
            let mut actions = vec![Action::ReserveTopic(new_topic)];
            let mut layers = Vec::new();
            for &w in &ids {
                if state.seed_topic(w).is_some() {
                    actions.push(Action::ReassignSeed { word: w, topic: new_topic });
                }
                layers.extend(add_word_layers(w, new_topic));
            }
            Ok(Compiled {
                layers,
                forget: tokens_where(state, |_, x, _| ids.contains(&x)),
                record: EdgeRecord::SplitTopic { topic: *topic, seeds: seeds.clone(), new_topic },
                actions,
            })
        }
    }
}

/// Refinements waiting to be applied to one model node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingSet {
    items: Vec<Refinement>,
}

impl PendingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn queue(&mut self, r: Refinement) {
        self.items.push(r);
    }

    /// Drops the most recently queued refinement. Undo on an empty queue is
    /// a no-op.
    pub fn undo(&mut self) -> Option<Refinement> {
        let r = self.items.pop();
        if r.is_none() {
            log::warn!("undo on an empty pending set");
        }
        r
    }

    pub fn items(&self) -> &[Refinement] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApplyOptions {
    /// Sweeps run after resampling the forgotten tokens.
    pub sweeps: usize,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        Self { sweeps: 10 }
    }
}

#[derive(Debug)]
pub struct Applied {
    pub state: ModelState,
    pub records: Vec<EdgeRecord>,
}

/// Compiles a batch in queue order against a copy of `source` without
/// resampling anything. Fails exactly when [`apply_refinements`] would.
pub fn preflight(source: &ModelState, pending: &[Refinement]) -> Result<Vec<EdgeRecord>> {
    if pending.is_empty() {
        return Err(Error::EmptyPending);
    }
    let mut work = source.clone();
    let mut records = Vec::with_capacity(pending.len());
    for r in pending {
        let c = compile(r, &work)?;
        c.install_into(&mut work);
        records.push(c.record);
    }
    Ok(records)
}

/// Applies a batch of refinements to a copy of `source`.
pub fn apply_refinements(source: &ModelState, pending: &[Refinement], opts: ApplyOptions) -> Result<Applied> {
    apply_refinements_with_progress(source, pending, opts, |_, _| {})
}

pub fn apply_refinements_with_progress(
    source: &ModelState,
    pending: &[Refinement],
    opts: ApplyOptions,
    progress: impl FnMut(usize, usize),
) -> Result<Applied> {
    if pending.is_empty() {
        return Err(Error::EmptyPending);
    }
    let mut work = source.clone();
    let mut forget: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut records = Vec::with_capacity(pending.len());
    for r in pending {
        let c = compile(r, &work)?;
        c.install_into(&mut work);
        forget.extend(c.forget.iter().copied());
        records.push(c.record);
    }
    work.release_unreferenced();
    let forget: Vec<(u32, u32)> = forget.into_iter().collect();
    work.forget(&forget);
    work.reseat_unassigned();
    work.train_with_progress(opts.sweeps, progress);
    debug_assert_eq!(work.check_invariants(), Ok(()));
    Ok(Applied { state: work, records })
}

#[cfg(test)]
mod tests;

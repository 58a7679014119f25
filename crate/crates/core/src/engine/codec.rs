//! Versioned JSON encoding of a [`ModelState`].
//!
//! Only the seating is stored; count statistics are rebuilt on load. The
//! corpus is not embedded, a digest of it is, and decoding checks it.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{seed_lookup, ConceptPrior, Hyperparams, ModelState, Table, TopicId, Topics};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::refinement::potential::PotentialFunction;

pub const STATE_FORMAT: &str = "steertm-state";
pub const STATE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StateRepr {
    format: String,
    version: u32,
    corpus_digest: String,
    hyper: Hyperparams,
    priors: ConceptPrior,
    potential: PotentialFunction,
    assignments: Vec<Vec<u32>>,
    tables: Vec<Vec<Table>>,
    dormant: BTreeSet<TopicId>,
    next_topic: TopicId,
    iteration: u64,
    rng: ChaCha8Rng,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over the vocabulary and every token stream.
pub fn corpus_digest(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    for t in corpus.vocabulary().terms() {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    for d in corpus.documents() {
        h.update(d.id.as_bytes());
        h.update([0u8]);
        for &w in &d.tokens {
            h.update(w.to_le_bytes());
        }
        h.update(u32::MAX.to_le_bytes());
    }
    hex(&h.finalize())
}

impl ModelState {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.encode(&corpus_digest(&self.corpus))
    }

    /// Encodes with a precomputed corpus digest.
    pub fn encode(&self, digest: &str) -> Vec<u8> {
        let repr = StateRepr {
            format: STATE_FORMAT.into(),
            version: STATE_VERSION,
            corpus_digest: digest.to_owned(),
            hyper: self.hyper.clone(),
            priors: self.priors.clone(),
            potential: self.potential.clone(),
            assignments: self.assign.clone(),
            tables: self.tables.clone(),
            dormant: self.dormant.clone(),
            next_topic: self.next_topic,
            iteration: self.iteration,
            rng: self.rng.clone(),
        };
        serde_json::to_vec(&repr).expect("state serializes")
    }

    pub fn from_bytes(bytes: &[u8], corpus: Arc<Corpus>) -> Result<Self> {
        let digest = corpus_digest(&corpus);
        Self::decode(bytes, corpus, &digest)
    }

    pub fn decode(bytes: &[u8], corpus: Arc<Corpus>, digest: &str) -> Result<Self> {
        let repr: StateRepr = serde_json::from_slice(bytes)?;
        if repr.format != STATE_FORMAT {
            return Err(Error::Corrupt(format!("unexpected state format {:?}", repr.format)));
        }
        if repr.version != STATE_VERSION {
            return Err(Error::VersionMismatch { expected: STATE_VERSION, found: repr.version });
        }
        if repr.corpus_digest != digest {
            return Err(Error::CorpusMismatch);
        }
        if repr.assignments.len() != corpus.len()
            || repr.tables.len() != corpus.len()
            || repr.assignments.iter().zip(corpus.documents()).any(|(a, d)| a.len() != d.len())
        {
            return Err(Error::Corrupt("seating does not cover the corpus".into()));
        }
        if repr.assignments.iter().zip(&repr.tables).any(|(a, t)| a.iter().any(|&i| i as usize >= t.len())) {
            return Err(Error::Corrupt("token seated at a missing table".into()));
        }
        let mut state = ModelState {
            seed_of: seed_lookup(&repr.priors, &corpus),
            corpus,
            hyper: repr.hyper,
            priors: repr.priors,
            potential: repr.potential,
            assign: repr.assignments,
            tables: repr.tables,
            topics: Topics::default(),
            dormant: repr.dormant,
            next_topic: repr.next_topic,
            iteration: repr.iteration,
            rng: repr.rng,
        };
        state.rebuild_counts();
        state.check_invariants().map_err(Error::Corrupt)?;
        Ok(state)
    }
}

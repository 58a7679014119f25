//! Seeded nonparametric topic modelling with user refinements.
//!
//! The [`engine`] runs a Chinese-restaurant-franchise Gibbs sampler whose
//! conditionals are masked by seed words and reweighted by a
//! [`refinement::potential::PotentialFunction`]. Refinements compile into
//! potential layers plus a set of tokens to resample. [`suggestion`] proposes
//! words for each topic, [`tree`] keeps the branching history of models and
//! [`evaluation`] scores them.

pub mod corpus;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod refinement;
pub mod suggestion;
pub mod synthetic;
pub mod tree;

pub use corpus::{build_corpus, load_corpus, tokenize, BuildOptions, Corpus, CorpusFormat, CorpusRecord, Document, Vocabulary, WordId};
pub use engine::{init_model, ConceptPrior, Hyperparams, InitReport, ModelState, Table, TopicId};
pub use error::{Error, Result};
pub use evaluation::{distance_map, jsd, npmi_coherence, precision_at_k, purity, CoherenceIndex, EvaluationReport, MapPoint, TopicSummary};
pub use refinement::potential::PotentialFunction;
pub use refinement::{apply_refinements, preflight, swap_penalty, ApplyOptions, EdgeRecord, PendingSet, Refinement};
pub use suggestion::{expand_query, EmbeddingTable, RelevanceState, Suggestion, SuggestionParams, TermStats};
pub use tree::{ModelNode, ModelTree, NodeId, Snapshot};

#[cfg(test)]
pub(crate) mod testutil {
    use std::collections::HashSet;
    use std::sync::Arc;

    use crate::corpus::{build_corpus, BuildOptions, Corpus, CorpusRecord};

    /// Corpus without stopwords or frequency cut; document `j` gets id `d{j}`.
    pub fn corpus(texts: &[&str]) -> Arc<Corpus> {
        let recs: Vec<CorpusRecord> =
            texts.iter().enumerate().map(|(j, t)| CorpusRecord::new(format!("d{j}"), *t)).collect();
        Arc::new(build_corpus(&recs, &BuildOptions::new(HashSet::new(), 1)).unwrap())
    }

    pub fn labelled(docs: &[(&str, &str)]) -> Arc<Corpus> {
        let recs: Vec<CorpusRecord> = docs
            .iter()
            .enumerate()
            .map(|(j, (t, c))| CorpusRecord::new(format!("d{j}"), *t).with_category(*c))
            .collect();
        Arc::new(build_corpus(&recs, &BuildOptions::new(HashSet::new(), 1)).unwrap())
    }
}

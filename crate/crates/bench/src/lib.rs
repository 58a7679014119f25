//! Fixtures shared by the benchmarks.

use std::collections::HashSet;
use std::sync::Arc;

use steertm_core::synthetic::{planted_embeddings, planted_records, PlantedSpec};
use steertm_core::{build_corpus, init_model, BuildOptions, ConceptPrior, Corpus, EmbeddingTable, Hyperparams, ModelState};

/// Short documents at the size used for the interactive latency target.
pub fn short_docs(num_docs: usize) -> PlantedSpec {
    PlantedSpec {
        num_docs,
        categories: 13,
        words_per_category: 150,
        background_words: 500,
        doc_len: (10, 20),
        ..PlantedSpec::default()
    }
}

pub fn corpus(spec: &PlantedSpec) -> Arc<Corpus> {
    Arc::new(build_corpus(&planted_records(spec), &BuildOptions::new(HashSet::new(), 1)).expect("planted corpus"))
}

/// A model with `k_init` topics after `burn_in` sweeps.
pub fn model(spec: &PlantedSpec, k_init: usize, burn_in: usize) -> ModelState {
    let h = Hyperparams { k_init, rng_seed: 1, ..Hyperparams::default() };
    let mut s = init_model(corpus(spec), ConceptPrior::new(), h).expect("init").state;
    s.train(burn_in);
    s
}

pub fn embeddings(spec: &PlantedSpec) -> EmbeddingTable {
    planted_embeddings(spec, spec.categories + 4, 0.3, 1)
}

//! Generators for labelled synthetic corpora with planted topics and
//! matching word vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusRecord;
use crate::suggestion::EmbeddingTable;

/// Documents mix words of their own category, a few words of other
/// categories and shared background words.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSpec {
    pub num_docs: usize,
    pub categories: usize,
    pub words_per_category: usize,
    pub background_words: usize,
    /// Inclusive range of document lengths.
    pub doc_len: (usize, usize),
    pub background_share: f64,
    pub cross_share: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            num_docs: 1000,
            categories: 4,
            words_per_category: 40,
            background_words: 40,
            doc_len: (20, 40),
            background_share: 0.25,
            cross_share: 0.1,
            seed: 0,
        }
    }
}

pub fn category_word(c: usize, i: usize) -> String {
    format!("c{c}w{i:03}")
}

pub fn background_word(i: usize) -> String {
    format!("bg{i:03}")
}

pub fn category_label(c: usize) -> String {
    format!("cat{c}")
}

/// Zipf-like draw from `0..n`.
fn zipf(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
    let u = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn zipf_cdf(n: usize, s: f64) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|i| {
            acc += 1.0 / ((i + 1) as f64).powf(s);
            acc
        })
        .collect()
}

/// Document `j` belongs to category `j % categories`.
pub fn planted_records(spec: &PlantedSpec) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cat_cdf = zipf_cdf(spec.words_per_category, 0.8);
    let bg_cdf = zipf_cdf(spec.background_words.max(1), 0.8);
    (0..spec.num_docs)
        .map(|j| {
            let c = j % spec.categories;
            let len = rng.random_range(spec.doc_len.0..=spec.doc_len.1);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let u = rng.random::<f64>();
                    if u < spec.background_share && spec.background_words > 0 {
                        background_word(zipf(&mut rng, &bg_cdf))
                    } else if u < spec.background_share + spec.cross_share && spec.categories > 1 {
                        let other = (c + rng.random_range(1..spec.categories)) % spec.categories;
                        category_word(other, zipf(&mut rng, &cat_cdf))
                    } else {
                        category_word(c, zipf(&mut rng, &cat_cdf))
                    }
                })
                .collect();
            CorpusRecord::new(format!("d{j}"), words.join(" ")).with_category(category_label(c))
        })
        .collect()
}

/// Vectors where every category occupies its own axis (plus noise) and
/// background words live in the remaining axes.
pub fn planted_embeddings(spec: &PlantedSpec, dim: usize, noise: f64, seed: u64) -> EmbeddingTable {
    assert!(dim > spec.categories, "need spare axes for background words");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim);
    for c in 0..spec.categories {
        for i in 0..spec.words_per_category {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-noise..=noise)).collect();
            v[c] += 1.0;
            table.insert(category_word(c, i), v).expect("fixed dimension");
        }
    }
    for i in 0..spec.background_words {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-noise..=noise)).collect();
        for x in v.iter_mut().skip(spec.categories) {
            *x += rng.random_range(-1.0..=1.0);
        }
        table.insert(background_word(i), v).expect("fixed dimension");
    }
    table
}

/// Topics with disjoint vocabularies; every document draws from exactly one.
pub fn disjoint_records(topics: usize, words_per_topic: usize, num_docs: usize, doc_len: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_docs)
        .map(|j| {
            let c = j % topics;
            let words: Vec<String> =
                (0..doc_len).map(|_| category_word(c, rng.random_range(0..words_per_topic))).collect();
            CorpusRecord::new(format!("d{j}"), words.join(" ")).with_category(category_label(c))
        })
        .collect()
}

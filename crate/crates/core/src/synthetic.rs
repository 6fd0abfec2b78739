//! Planted-category corpora for tests, benchmarks and the bundled toy data.
//!
//! Each label owns a block of words drawn with Zipf-like frequencies; every
//! document mixes tokens from its label's block, a shared background block
//! and a little cross-label noise. Seed words are picked from fixed ranks of
//! each label block, so some documents contain no seed at all.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_docs: usize,
    /// Relative class sizes; its length is the number of labels.
    pub class_weights: Vec<f64>,
    pub words_per_label: usize,
    pub background_words: usize,
    pub min_doc_len: usize,
    pub max_doc_len: usize,
    /// Probability that a token comes from the document's own label block.
    pub label_share: f64,
    /// Probability that a token comes from another label's block.
    pub noise_share: f64,
    /// Zipf ranks (0-based) of the seed words inside each label block.
    pub seed_ranks: Vec<usize>,
    pub test_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_docs: 2000,
            class_weights: vec![1.0; 4],
            words_per_label: 60,
            background_words: 300,
            min_doc_len: 30,
            max_doc_len: 80,
            label_share: 0.45,
            noise_share: 0.1,
            seed_ranks: vec![2, 5],
            test_fraction: 0.3,
            rng_seed: 17,
        }
    }
}

/// Generated corpus and seed files plus the planted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus_tsv: String,
    pub seeds_tsv: String,
    pub labels: Vec<usize>,
}

impl SyntheticCorpus {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Write { path: dir.to_path_buf(), source })?;
        for (name, body) in [("corpus.tsv", &self.corpus_tsv), ("seeds.tsv", &self.seeds_tsv)] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| Error::Write { path, source })?;
        }
        Ok(())
    }
}

fn label_word(k: usize, j: usize) -> String {
    format!("c{k}w{j}")
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / (r as f64 + 1.0))).expect("non-empty block")
}

pub fn generate(config: &SyntheticConfig) -> SyntheticCorpus {
    let k_total = config.class_weights.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let classes = WeightedIndex::new(&config.class_weights).expect("positive class weights");
    let label_block = zipf(config.words_per_label);
    let background_block = zipf(config.background_words);

    let mut corpus_tsv = String::new();
    let mut labels = Vec::with_capacity(config.num_docs);
    for _ in 0..config.num_docs {
        let label = classes.sample(&mut rng);
        let len = rng.random_range(config.min_doc_len..=config.max_doc_len);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let u: f64 = rng.random();
            let word = if u < config.label_share {
                label_word(label, label_block.sample(&mut rng))
            } else if u < config.label_share + config.noise_share && k_total > 1 {
                let mut other = rng.random_range(0..k_total - 1);
                if other >= label {
                    other += 1;
                }
                label_word(other, label_block.sample(&mut rng))
            } else {
                format!("bg{}", background_block.sample(&mut rng))
            };
            words.push(word);
        }
        let split = if rng.random::<f64>() < config.test_fraction { "test" } else { "train" };
        writeln!(corpus_tsv, "{label}\t{split}\t{}", words.join(" ")).expect("write to string");
        labels.push(label);
    }

    let mut seeds_tsv = String::new();
    for k in 0..k_total {
        let seeds: Vec<String> = config.seed_ranks.iter().map(|&r| label_word(k, r)).collect();
        writeln!(seeds_tsv, "{k}\t{}", seeds.join(",")).expect("write to string");
    }
    SyntheticCorpus { corpus_tsv, seeds_tsv, labels }
}

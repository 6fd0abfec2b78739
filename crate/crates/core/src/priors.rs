//! Supervision derived from seed words: word/category relevance, category
//! prototype vectors, pseudo-nearest neighboring categories, membership
//! degrees, label frequencies, the supervised Dirichlet prior and the Log
//! term weights.
//!
//! Co-occurrence counts are document level: word `v` co-occurs with the
//! seeds of label `k` in every document containing `v`, weighted by the
//! number of seed tokens of `k` in that document.

use log::warn;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SeedCounts, SeedWordSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Concentration of the supervised prior.
    pub eta: f64,
    /// Additive smoothing of the supervised prior.
    pub alpha0: f64,
    /// Weight of the label-frequency component.
    pub rho: f64,
    /// Weight of the pseudo-neighbor component in the membership degree.
    pub tau: f64,
    /// Number of pseudo-nearest neighboring categories; 0 disables prototypes.
    pub num_neighbors: usize,
    /// Floor applied to word/category relevance.
    pub epsilon: f64,
    /// Base of the in-category importance factor of the prototypes.
    pub base: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            eta: 10.0,
            alpha0: 0.01,
            rho: 0.9,
            tau: 0.1,
            num_neighbors: 1,
            epsilon: 0.01,
            base: std::f64::consts::E - 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self, num_labels: usize) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.alpha0 > 0.0) {
            return Err(Error::Config(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if !unit(self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !unit(self.tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if !(self.epsilon > 0.0) || !(self.base > 0.0) {
            return Err(Error::Config("epsilon and base must be > 0".into()));
        }
        if self.num_neighbors > num_labels {
            return Err(Error::Config(format!("P = {} exceeds the number of labels {num_labels}", self.num_neighbors)));
        }
        if self.num_neighbors == 0 && self.tau > 0.0 {
            return Err(Error::Config("P = 0 disables prototypes and requires tau = 0".into()));
        }
        Ok(())
    }
}

/// Document-level co-occurrence between every word and the seeds of each
/// label, `V x K`.
pub fn seed_cooccurrence(corpus: &Corpus, counts: &SeedCounts) -> Array2<f64> {
    let mut sc = Array2::zeros((corpus.vocab_size(), counts.df.ncols()));
    for doc in corpus.documents() {
        let row = counts.df.row(doc.id);
        if row.iter().all(|&x| x == 0.0) {
            continue;
        }
        for &(v, _) in &doc.tf {
            sc.row_mut(v as usize).scaled_add(1.0, &row);
        }
    }
    sc
}

/// Word/category relevance `γ`, `V x K`, every entry in `[epsilon, 1]`.
pub fn compute_relevance(cooccurrence: &Array2<f64>, epsilon: f64) -> Array2<f64> {
    let (v_total, k_total) = cooccurrence.dim();
    let uniform = 1.0 / k_total as f64;
    let mut u = Array2::<f64>::zeros((v_total, k_total));
    for (v, sc) in cooccurrence.axis_iter(Axis(0)).enumerate() {
        let total: f64 = sc.sum();
        if total > 0.0 {
            for k in 0..k_total {
                u[[v, k]] = (sc[k] / total - uniform).max(0.0);
            }
        }
    }
    for mut col in u.axis_iter_mut(Axis(1)) {
        let total: f64 = col.sum();
        if total > 0.0 {
            col /= total;
        }
    }
    let mut gamma = Array2::from_elem((v_total, k_total), epsilon);
    for (v, row) in u.axis_iter(Axis(0)).enumerate() {
        let total: f64 = row.sum();
        if total > 0.0 {
            for k in 0..k_total {
                gamma[[v, k]] = (row[k] / total).max(epsilon);
            }
        }
    }
    gamma
}

/// Category prototype vectors, `K x V`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix {
    pub c: Array2<f64>,
}

pub fn compute_prototypes(
    cooccurrence: &Array2<f64>,
    label_totals: &Array1<f64>,
    base: f64,
) -> Result<PrototypeMatrix> {
    let (v_total, k_total) = cooccurrence.dim();
    if let Some(k) = label_totals.iter().position(|&s| s <= 0.0) {
        return Err(Error::EmptySeedLabel { label: k });
    }
    let mut c = Array2::zeros((k_total, v_total));
    for (v, sf) in cooccurrence.axis_iter(Axis(0)).enumerate() {
        let cf = sf.iter().filter(|&&x| x > 0.0).count();
        if cf == 0 {
            continue;
        }
        let discrimination = (k_total as f64 / cf as f64).ln();
        for k in 0..k_total {
            c[[k, v]] = base.powf(sf[k] / label_totals[k]) * discrimination;
        }
    }
    Ok(PrototypeMatrix { c })
}

/// Indices of the `p` largest values, ties going to the lower index.
pub(crate) fn top_indices(scores: &[f64], p: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(p);
    order
}

/// Top-`p` categories per document by cosine similarity between the
/// document's term-frequency vector and each prototype row.
pub fn find_pseudo_neighbors(corpus: &Corpus, prototypes: &PrototypeMatrix, p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![Vec::new(); corpus.num_docs()];
    }
    let c = &prototypes.c;
    let norms: Vec<f64> = c.axis_iter(Axis(0)).map(|row| row.dot(&row).sqrt()).collect();
    if norms.contains(&0.0) {
        warn!("some prototype vectors are all zero; their categories never rank as neighbors");
    }
    let mut uninformative = 0usize;
    let omega = corpus
        .documents()
        .iter()
        .map(|doc| {
            let doc_norm = doc.tf.iter().map(|&(_, n)| (n as f64).powi(2)).sum::<f64>().sqrt();
            let sims: Vec<f64> = (0..c.nrows())
                .map(|k| {
                    if norms[k] == 0.0 || doc_norm == 0.0 {
                        return 0.0;
                    }
                    let dot: f64 = doc.tf.iter().map(|&(v, n)| n as f64 * c[[k, v as usize]]).sum();
                    dot / (norms[k] * doc_norm)
                })
                .collect();
            if sims.iter().all(|&s| s == 0.0) {
                uninformative += 1;
            }
            top_indices(&sims, p)
        })
        .collect();
    if uninformative > 0 {
        warn!("{uninformative} documents share no words with any prototype; assigned the lowest label ids");
    }
    omega
}

/// Label membership degree, `D x K`. Documents without seed occurrences
/// take their mass entirely from the pseudo-neighbor indicator; with `P = 0`
/// such rows stay zero.
pub fn membership_degree(df: &Array2<f64>, omega: &[Vec<usize>], tau: f64, p: usize) -> Array2<f64> {
    let (d_total, k_total) = df.dim();
    let mut m = Array2::zeros((d_total, k_total));
    for d in 0..d_total {
        let seeds: f64 = df.row(d).sum();
        let (seed_weight, neighbor_weight) = if seeds > 0.0 { (1.0 - tau, tau) } else { (0.0, 1.0) };
        if seeds > 0.0 {
            for k in 0..k_total {
                m[[d, k]] = seed_weight * df[[d, k]] / seeds;
            }
        }
        if p > 0 {
            for &k in &omega[d] {
                m[[d, k]] += neighbor_weight / p as f64;
            }
        }
    }
    m
}

pub fn label_frequency(tf: &Array1<f64>, seeds: &SeedWordSet) -> Result<Array1<f64>> {
    let mass: Array1<f64> = seeds.sets().iter().map(|set| set.iter().map(|&v| tf[v as usize]).sum()).collect();
    let total = mass.sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("no seed word occurs anywhere in the corpus".into()));
    }
    Ok(mass / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedPrior {
    /// Document-specific Dirichlet parameters over category topics, `D x K`.
    pub alpha: Array2<f64>,
    pub membership: Array2<f64>,
    pub label_frequency: Array1<f64>,
    pub omega: Vec<Vec<usize>>,
}

pub fn compute_supervised_prior(
    membership: Array2<f64>,
    label_frequency: Array1<f64>,
    omega: Vec<Vec<usize>>,
    config: &PriorConfig,
) -> SupervisedPrior {
    let mut alpha = membership.clone();
    for mut row in alpha.axis_iter_mut(Axis(0)) {
        for (k, a) in row.iter_mut().enumerate() {
            *a = config.eta * ((1.0 - config.rho) * *a + config.rho * label_frequency[k]) + config.alpha0;
        }
    }
    SupervisedPrior { alpha, membership, label_frequency, omega }
}

/// Prior built from seed occurrences alone; seedless rows are flat at `alpha0`.
pub fn compute_baseline_prior(df: &Array2<f64>, eta: f64, alpha0: f64) -> Array2<f64> {
    let mut alpha = Array2::from_elem(df.dim(), alpha0);
    for (d, row) in df.axis_iter(Axis(0)).enumerate() {
        let total = row.sum();
        if total > 0.0 {
            for (k, &x) in row.iter().enumerate() {
                alpha[[d, k]] += eta * (x / total);
            }
        }
    }
    alpha
}

/// Log weight: information content `-ln p(v)` of each word.
pub fn compute_term_weights(tf: &Array1<f64>, total_tokens: f64) -> Array1<f64> {
    tf.mapv(|n| -(n / total_tokens).ln())
}

/// Every seed-derived quantity the model needs.
#[derive(Debug, Clone)]
pub struct PriorBundle {
    pub counts: SeedCounts,
    pub gamma: Array2<f64>,
    pub prototypes: PrototypeMatrix,
    pub prior: SupervisedPrior,
    pub term_weights: Array1<f64>,
}

pub fn build_priors(corpus: &Corpus, seeds: &SeedWordSet, config: &PriorConfig) -> Result<PriorBundle> {
    config.validate(seeds.num_labels())?;
    let counts = crate::corpus::count_seed_occurrences(corpus, seeds);
    let cooc = seed_cooccurrence(corpus, &counts);
    let gamma = compute_relevance(&cooc, config.epsilon);
    let prototypes = compute_prototypes(&cooc, &counts.label_totals(), config.base)?;
    let omega = find_pseudo_neighbors(corpus, &prototypes, config.num_neighbors);
    let membership = membership_degree(&counts.df, &omega, config.tau, config.num_neighbors);
    let freq = label_frequency(&counts.tf, seeds)?;
    let prior = compute_supervised_prior(membership, freq, omega, config);
    let term_weights = compute_term_weights(&counts.tf, corpus.total_tokens() as f64);
    Ok(PriorBundle { counts, gamma, prototypes, prior, term_weights })
}

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;

use super::{ModelState, WordMajor};
use crate::corpus::{Corpus, Document};

/// Posterior responsibilities of one token over the `K` category topics
/// and the `G` background topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPosterior {
    pub category: Vec<f64>,
    pub background: Vec<f64>,
}

impl TokenPosterior {
    pub fn total(&self) -> f64 {
        self.category.iter().sum::<f64>() + self.background.iter().sum::<f64>()
    }
}

/// Fills `category` and `background` with the posteriors of word `v` in
/// document `d`, given the topic-word columns for `v`.
fn posterior_into(
    theta: ArrayView1<f64>,
    theta_hat: ArrayView1<f64>,
    phi_col: ArrayView1<f64>,
    phi_hat_col: ArrayView1<f64>,
    gamma_row: ArrayView1<f64>,
    category: &mut [f64],
    background: &mut [f64],
) {
    let delta = theta.dot(&gamma_row);
    let mut cat_total = 0.0;
    for (k, out) in category.iter_mut().enumerate() {
        *out = theta[k] * phi_col[k];
        cat_total += *out;
    }
    let mut bg_total = 0.0;
    for (g, out) in background.iter_mut().enumerate() {
        *out = theta_hat[g] * phi_hat_col[g];
        bg_total += *out;
    }
    assert!(cat_total > 0.0 && bg_total > 0.0, "topic-word probabilities vanished");
    let cat_scale = delta / cat_total;
    let bg_scale = (1.0 - delta) / bg_total;
    category.iter_mut().for_each(|x| *x *= cat_scale);
    background.iter_mut().for_each(|x| *x *= bg_scale);
}

pub fn token_posterior(state: &ModelState, d: usize, v: usize) -> TokenPosterior {
    let mut category = vec![0.0; state.num_labels()];
    let mut background = vec![0.0; state.num_background()];
    posterior_into(
        state.theta.row(d),
        state.theta_hat.row(d),
        state.phi.column(v),
        state.phi_hat.column(v),
        state.gamma.row(v),
        &mut category,
        &mut background,
    );
    TokenPosterior { category, background }
}

/// Per-token posteriors for every document, in token order.
pub fn token_posteriors(state: &ModelState, corpus: &Corpus) -> Vec<Vec<TokenPosterior>> {
    corpus
        .documents()
        .iter()
        .map(|doc| doc.tokens.iter().map(|&v| token_posterior(state, doc.id, v as usize)).collect())
        .collect()
}

/// Term-weighted expected counts gathered from the token posteriors; every
/// token contributes with weight `π(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `Σ_n π(w_dn) N_dnk`, `D x K`.
    pub doc_category: Array2<f64>,
    /// `Σ_n π(w_dn) N̂_dng`, `D x G`.
    pub doc_background: Array2<f64>,
    /// `Σ_{d,n: w_dn = v} π(v) N_dnk`, `K x V`.
    pub category_word: Array2<f64>,
    /// `Σ_{d,n: w_dn = v} π(v) N̂_dng`, `G x V`.
    pub background_word: Array2<f64>,
    /// Largest `|Σ_k N_dnk + Σ_g N̂_dng − 1|` over all tokens.
    pub max_partition_error: f64,
}

struct DocPosteriors {
    category: Vec<f64>,
    background: Vec<f64>,
    /// `(word, weighted category row, weighted background row)` per distinct word.
    words: Vec<(u32, Vec<f64>, Vec<f64>)>,
    partition_error: f64,
}

fn doc_posteriors(state: &ModelState, wm: &WordMajor, doc: &Document) -> DocPosteriors {
    let k_total = state.num_labels();
    let g_total = state.num_background();
    let theta = state.theta.row(doc.id);
    let theta_hat = state.theta_hat.row(doc.id);
    let mut out = DocPosteriors {
        category: vec![0.0; k_total],
        background: vec![0.0; g_total],
        words: Vec::with_capacity(doc.tf.len()),
        partition_error: 0.0,
    };
    let mut cat = vec![0.0; k_total];
    let mut bg = vec![0.0; g_total];
    for &(v, count) in &doc.tf {
        let v = v as usize;
        posterior_into(theta, theta_hat, wm.phi.row(v), wm.phi_hat.row(v), state.gamma.row(v), &mut cat, &mut bg);
        let total: f64 = cat.iter().sum::<f64>() + bg.iter().sum::<f64>();
        out.partition_error = out.partition_error.max((total - 1.0).abs());
        let weight = count as f64 * state.pi[v];
        let cat_w: Vec<f64> = cat.iter().map(|x| x * weight).collect();
        let bg_w: Vec<f64> = bg.iter().map(|x| x * weight).collect();
        for (acc, x) in out.category.iter_mut().zip(&cat_w) {
            *acc += x;
        }
        for (acc, x) in out.background.iter_mut().zip(&bg_w) {
            *acc += x;
        }
        out.words.push((v as u32, cat_w, bg_w));
    }
    out
}

/// Documents per work unit. Partial sums are merged in document order, so
/// results do not depend on the number of threads.
const CHUNK_DOCS: usize = 64;
const CHUNKS_PER_BATCH: usize = 32;

/// Computes all token posteriors under the current parameters and reduces
/// them to term-weighted sufficient statistics.
pub fn e_step(state: &ModelState, corpus: &Corpus) -> SufficientStats {
    let (d_total, k_total, g_total, v_total) =
        (state.num_docs(), state.num_labels(), state.num_background(), state.vocab_size());
    let wm = WordMajor::new(state);
    let mut stats = SufficientStats {
        doc_category: Array2::zeros((d_total, k_total)),
        doc_background: Array2::zeros((d_total, g_total)),
        category_word: Array2::zeros((v_total, k_total)),
        background_word: Array2::zeros((v_total, g_total)),
        max_partition_error: 0.0,
    };
    let docs = corpus.documents();
    for batch in docs.chunks(CHUNK_DOCS * CHUNKS_PER_BATCH) {
        let results: Vec<Vec<DocPosteriors>> = batch
            .par_chunks(CHUNK_DOCS)
            .map(|chunk| chunk.iter().map(|doc| doc_posteriors(state, &wm, doc)).collect())
            .collect();
        for (doc, post) in batch.iter().zip(results.into_iter().flatten()) {
            stats.doc_category.row_mut(doc.id).assign(&ArrayView1::from(&post.category));
            stats.doc_background.row_mut(doc.id).assign(&ArrayView1::from(&post.background));
            stats.max_partition_error = stats.max_partition_error.max(post.partition_error);
            for (v, cat, bg) in post.words {
                let mut row = stats.category_word.row_mut(v as usize);
                for (acc, x) in row.iter_mut().zip(&cat) {
                    *acc += x;
                }
                let mut row = stats.background_word.row_mut(v as usize);
                for (acc, x) in row.iter_mut().zip(&bg) {
                    *acc += x;
                }
            }
        }
    }
    stats.category_word = stats.category_word.reversed_axes().as_standard_layout().into_owned();
    stats.background_word = stats.background_word.reversed_axes().as_standard_layout().into_owned();
    debug_assert_eq!(stats.category_word.len_of(Axis(0)), k_total);
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, Vocabulary};
    use ndarray::{array, Array1};

    fn tiny_state() -> ModelState {
        ModelState {
            theta: array![[0.5, 0.5]],
            theta_hat: array![[1.0]],
            phi: array![[0.2, 0.8], [0.1, 0.9]],
            phi_hat: array![[0.5, 0.5]],
            gamma: array![[0.3, 0.3], [0.6, 0.1]],
            pi: Array1::ones(2),
        }
    }

    #[test]
    fn hand_evaluated_posterior() {
        let p = token_posterior(&tiny_state(), 0, 0);
        assert!((p.category[0] - 0.2).abs() < 1e-15);
        assert!((p.category[1] - 0.1).abs() < 1e-15);
        assert!((p.background[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn single_topic_posterior_is_relevance() {
        let s = ModelState {
            theta: array![[1.0]],
            theta_hat: array![[1.0]],
            phi: array![[0.4, 0.6]],
            phi_hat: array![[0.7, 0.3]],
            gamma: array![[0.6], [0.2]],
            pi: Array1::ones(2),
        };
        let p = token_posterior(&s, 0, 0);
        assert!((p.category[0] - 0.6).abs() < 1e-15);
        assert!((p.background[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn e_step_aggregates_weighted_counts() {
        let vocab = Vocabulary::from_words(vec!["a".into(), "b".into()]).unwrap();
        let doc = crate::corpus::Document::new(0, vec![0, 1, 0], None, Split::Train);
        let corpus = Corpus::new(vocab, vec![doc], 2).unwrap();
        let mut state = tiny_state();
        state.pi = array![2.0, 0.5];
        let stats = e_step(&state, &corpus);
        let p0 = token_posterior(&state, 0, 0);
        let p1 = token_posterior(&state, 0, 1);
        for k in 0..2 {
            let want = 2.0 * 2.0 * p0.category[k] + 0.5 * p1.category[k];
            assert!((stats.doc_category[[0, k]] - want).abs() < 1e-14);
            assert!((stats.category_word[[k, 0]] - 4.0 * p0.category[k]).abs() < 1e-14);
        }
        assert_eq!(stats.category_word.dim(), (2, 2));
        assert_eq!(stats.background_word.dim(), (1, 2));
        assert!(stats.max_partition_error < 1e-15);
    }
}

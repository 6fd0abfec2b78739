use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use super::{ModelConfig, ModelState, WordMajor};
use crate::corpus::{Corpus, Document};
use crate::graph::{manifold_penalty, DocumentGraph};

/// Components of the regularized objective `L' = log_likelihood + log_prior − λ·penalty`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// Term-weighted token log-likelihood.
    pub log_likelihood: f64,
    /// Dirichlet log-prior terms of all four parameter blocks.
    pub log_prior: f64,
    /// Manifold penalty `R(θ)`, before scaling by λ.
    pub penalty: f64,
    pub lambda: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.log_likelihood + self.log_prior - self.lambda * self.penalty
    }
}

/// `ln p(w | d)` for one word, mixing category and background topics by the
/// relevance-gated switch probability.
pub(crate) fn word_log_prob(
    theta: ArrayView1<f64>,
    theta_hat: ArrayView1<f64>,
    phi_col: ArrayView1<f64>,
    phi_hat_col: ArrayView1<f64>,
    gamma_row: ArrayView1<f64>,
) -> f64 {
    let delta = theta.dot(&gamma_row);
    let category = theta.dot(&phi_col);
    let background = theta_hat.dot(&phi_hat_col);
    (delta * category + (1.0 - delta) * background).ln()
}

/// Log-likelihood of one document. With `weighted`, each token counts
/// `π(w)` times.
pub(crate) fn doc_log_likelihood(
    theta: ArrayView1<f64>,
    theta_hat: ArrayView1<f64>,
    state: &ModelState,
    wm: &WordMajor,
    doc: &Document,
    weighted: bool,
) -> f64 {
    doc.tf
        .iter()
        .map(|&(v, c)| {
            let v = v as usize;
            let w = if weighted { c as f64 * state.pi[v] } else { c as f64 };
            w * word_log_prob(theta, theta_hat, wm.phi.row(v), wm.phi_hat.row(v), state.gamma.row(v))
        })
        .sum()
}

fn likelihood_with_theta(theta: &Array2<f64>, state: &ModelState, wm: &WordMajor, corpus: &Corpus) -> f64 {
    let per_doc: Vec<f64> = corpus
        .documents()
        .par_iter()
        .map(|doc| doc_log_likelihood(theta.row(doc.id), state.theta_hat.row(doc.id), state, wm, doc, true))
        .collect();
    per_doc.iter().sum()
}

/// Term-weighted log-likelihood of the corpus under `state`.
pub fn log_likelihood(state: &ModelState, corpus: &Corpus) -> f64 {
    likelihood_with_theta(&state.theta, state, &WordMajor::new(state), corpus)
}

/// `Σ a_ij ln x_ij` with a per-entry or shared exponent.
fn dirichlet_kernel(x: &Array2<f64>, exponent: impl Fn(usize, usize) -> f64) -> f64 {
    x.indexed_iter().map(|((i, j), &v)| exponent(i, j) * v.ln()).sum()
}

/// The part of `L'` that depends on `θ`: token likelihood, the θ prior
/// term and the manifold penalty. Other parameters are read from `state`.
pub fn theta_objective(
    theta: &Array2<f64>,
    state: &ModelState,
    corpus: &Corpus,
    alpha: &Array2<f64>,
    graph: &DocumentGraph,
    config: &ModelConfig,
) -> f64 {
    theta_objective_with(theta, state, &WordMajor::new(state), corpus, alpha, graph, config)
}

pub(crate) fn theta_objective_with(
    theta: &Array2<f64>,
    state: &ModelState,
    wm: &WordMajor,
    corpus: &Corpus,
    alpha: &Array2<f64>,
    graph: &DocumentGraph,
    config: &ModelConfig,
) -> f64 {
    let ll = likelihood_with_theta(theta, state, wm, corpus);
    let prior = dirichlet_kernel(theta, |d, k| alpha[[d, k]]);
    let penalty = if config.lambda > 0.0 { manifold_penalty(theta, graph) } else { 0.0 };
    ll + prior - config.lambda * penalty
}

/// Evaluates the regularized objective.
///
/// Dirichlet terms are written as `Σ a·ln x` per block (`α'` for θ, `α̂`,
/// `β`, `β̂`), dropping normalizing constants. Under this form the
/// closed-form updates of θ̂, φ, φ̂ and the θ starting point are exact
/// maximizers of the expected complete-data objective.
pub fn objective(
    state: &ModelState,
    corpus: &Corpus,
    alpha: &Array2<f64>,
    graph: &DocumentGraph,
    config: &ModelConfig,
) -> ObjectiveTerms {
    let log_likelihood = log_likelihood(state, corpus);
    let log_prior = dirichlet_kernel(&state.theta, |d, k| alpha[[d, k]])
        + dirichlet_kernel(&state.theta_hat, |_, _| config.alpha_hat)
        + dirichlet_kernel(&state.phi, |_, _| config.beta)
        + dirichlet_kernel(&state.phi_hat, |_, _| config.beta_hat);
    ObjectiveTerms { log_likelihood, log_prior, penalty: manifold_penalty(&state.theta, graph), lambda: config.lambda }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, Vocabulary};
    use ndarray::{array, Array1};

    fn one_token_corpus() -> Corpus {
        let vocab = Vocabulary::from_words(vec!["a".into(), "b".into()]).unwrap();
        Corpus::new(vocab, vec![Document::new(0, vec![0], None, Split::Train)], 1).unwrap()
    }

    fn single_topic_state(pi: f64) -> ModelState {
        ModelState {
            theta: array![[1.0]],
            theta_hat: array![[1.0]],
            phi: array![[0.25, 0.75]],
            phi_hat: array![[0.6, 0.4]],
            gamma: array![[0.3], [0.3]],
            pi: Array1::from_elem(2, pi),
        }
    }

    #[test]
    fn single_token_closed_form() {
        // p(w) = 0.3 * 0.25 + 0.7 * 0.6 = 0.495
        let corpus = one_token_corpus();
        let graph = DocumentGraph::from_neighbor_lists(&[vec![]]);
        let cfg = ModelConfig { beta: 0.01, beta_hat: 0.02, alpha_hat: 0.1, lambda: 0.0, ..Default::default() };
        let state = single_topic_state(1.0);
        let t = objective(&state, &corpus, &array![[0.5]], &graph, &cfg);
        assert!((t.log_likelihood - 0.495f64.ln()).abs() < 1e-15);
        let prior = 0.01 * (0.25f64.ln() + 0.75f64.ln()) + 0.02 * (0.6f64.ln() + 0.4f64.ln());
        assert!((t.log_prior - prior).abs() < 1e-15);
        assert_eq!(t.penalty, 0.0);
    }

    #[test]
    fn doubling_weights_doubles_likelihood() {
        let corpus = one_token_corpus();
        let a = log_likelihood(&single_topic_state(1.0), &corpus);
        let b = log_likelihood(&single_topic_state(2.0), &corpus);
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn lambda_scales_penalty() {
        let t = ObjectiveTerms { log_likelihood: -3.0, log_prior: 1.0, penalty: 2.0, lambda: 0.0 };
        assert_eq!(t.total(), -2.0);
        let t = ObjectiveTerms { lambda: 0.5, ..t };
        assert_eq!(t.total(), -3.0);
    }
}

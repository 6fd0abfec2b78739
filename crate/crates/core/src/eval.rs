//! Classification metrics, fold-in perplexity and coverage statistics.

use log::info;
use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::inference::objective::doc_log_likelihood;
use crate::inference::{ModelState, WordMajor};

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = k;
        }
    }
    best
}

/// Predicted label of each listed document: `argmax_k θ_dk`.
pub fn classify(theta: &Array2<f64>, doc_ids: &[usize]) -> Vec<usize> {
    doc_ids.iter().map(|&d| argmax(theta.row(d))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_f1: f64,
    pub per_class: Vec<f64>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Single-label multi-class F1. A class with no gold and no predicted
/// instance scores 0 and still counts toward the macro average.
pub fn f1_scores(pred: &[usize], gold: &[usize], num_labels: usize) -> Result<F1Scores> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidInput(format!("{} predictions for {} gold labels", pred.len(), gold.len())));
    }
    if let Some(&bad) = pred.iter().chain(gold).find(|&&k| k >= num_labels) {
        return Err(Error::InvalidInput(format!("label {bad} out of range for {num_labels} labels")));
    }
    let mut confusion = vec![vec![0u64; num_labels]; num_labels];
    for (&p, &g) in pred.iter().zip(gold) {
        confusion[g][p] += 1;
    }
    let per_class: Vec<f64> = (0..num_labels)
        .map(|k| {
            let tp = confusion[k][k] as f64;
            let gold_k: u64 = confusion[k].iter().sum();
            let pred_k: u64 = confusion.iter().map(|row| row[k]).sum();
            let denom = (gold_k + pred_k) as f64;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .collect();
    let correct: u64 = (0..num_labels).map(|k| confusion[k][k]).sum();
    let micro = if gold.is_empty() { 0.0 } else { correct as f64 / gold.len() as f64 };
    let macro_f1 = if num_labels == 0 { 0.0 } else { per_class.iter().sum::<f64>() / num_labels as f64 };
    Ok(F1Scores { micro, macro_f1, per_class, confusion })
}

/// Estimates θ and θ̂ for one document with the topics frozen.
fn fold_in_document(
    state: &ModelState,
    wm: &WordMajor,
    prior: ArrayView1<f64>,
    alpha_hat: f64,
    doc: &Document,
    iterations: usize,
) -> (Array1<f64>, Array1<f64>) {
    let k_total = state.num_labels();
    let g_total = state.num_background();
    let mut theta = prior.to_owned() / prior.sum();
    let mut theta_hat = Array1::from_elem(g_total, 1.0 / g_total as f64);
    let mut s_cat = Array1::zeros(k_total);
    let mut s_bg = Array1::zeros(g_total);
    for _ in 0..iterations {
        s_cat.fill(0.0);
        s_bg.fill(0.0);
        for &(v, c) in &doc.tf {
            let v = v as usize;
            let weight = c as f64 * state.pi[v];
            let (phi, phi_hat) = (wm.phi.row(v), wm.phi_hat.row(v));
            let delta = theta.dot(&state.gamma.row(v));
            let cat = &theta * &phi;
            let bg = &theta_hat * &phi_hat;
            let (cat_total, bg_total) = (cat.sum(), bg.sum());
            if cat_total > 0.0 {
                s_cat.scaled_add(weight * delta / cat_total, &cat);
            }
            if bg_total > 0.0 {
                s_bg.scaled_add(weight * (1.0 - delta) / bg_total, &bg);
            }
        }
        theta = (&s_cat + &prior) / (s_cat.sum() + prior.sum());
        theta_hat = (&s_bg + alpha_hat) / (s_bg.sum() + g_total as f64 * alpha_hat);
    }
    (theta, theta_hat)
}

/// Held-out perplexity `exp(−Σ_d ln p(w_d) / Σ_d N_d)`.
///
/// Each document is folded in for `iterations` rounds of θ/θ̂ updates with
/// the topics frozen and no graph term, starting from its normalized prior
/// row and a uniform θ̂. `prior` has one row per entry of `docs`. Empty
/// documents are skipped.
pub fn perplexity(
    state: &ModelState,
    prior: &Array2<f64>,
    docs: &[Document],
    alpha_hat: f64,
    iterations: usize,
) -> Result<f64> {
    if prior.dim() != (docs.len(), state.num_labels()) {
        return Err(Error::InvalidInput("perplexity prior does not match the documents".into()));
    }
    let vocab = state.vocab_size();
    if docs.iter().any(|d| d.tf.iter().any(|&(v, _)| v as usize >= vocab)) {
        return Err(Error::InvalidInput("document word id outside the model vocabulary".into()));
    }
    let empty = docs.iter().filter(|d| d.is_empty()).count();
    if empty > 0 {
        info!("perplexity: skipping {empty} empty documents");
    }
    let wm = WordMajor::new(state);
    let per_doc: Vec<(f64, usize)> = docs
        .par_iter()
        .enumerate()
        .filter(|(_, doc)| !doc.is_empty())
        .map(|(i, doc)| {
            let (theta, theta_hat) = fold_in_document(state, &wm, prior.row(i), alpha_hat, doc, iterations);
            (doc_log_likelihood(theta.view(), theta_hat.view(), state, &wm, doc, false), doc.len())
        })
        .collect();
    let (log_prob, tokens) = per_doc.iter().fold((0.0, 0usize), |(l, n), &(x, m)| (l + x, n + m));
    if tokens == 0 {
        return Err(Error::InvalidInput("no tokens to evaluate perplexity on".into()));
    }
    Ok((-log_prob / tokens as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub num_docs: usize,
    /// Documents without any marked label.
    pub no_marked: usize,
    /// Labeled documents whose gold label is marked.
    pub true_marked: usize,
    pub labeled_docs: usize,
}

/// A label is marked in a document when it has a seed occurrence there or
/// is one of the document's pseudo-neighbor categories.
pub fn coverage_stats(df: &Array2<f64>, omega: &[Vec<usize>], gold: &[Option<usize>]) -> Result<CoverageStats> {
    let num_docs = df.nrows();
    if omega.len() != num_docs || gold.len() != num_docs {
        return Err(Error::InvalidInput("coverage inputs disagree on the number of documents".into()));
    }
    let marked = |d: usize, k: usize| df[[d, k]] > 0.0 || omega[d].contains(&k);
    let mut stats = CoverageStats { num_docs, no_marked: 0, true_marked: 0, labeled_docs: 0 };
    for (d, label) in gold.iter().enumerate() {
        if !(0..df.ncols()).any(|k| marked(d, k)) {
            stats.no_marked += 1;
        }
        if let Some(g) = *label {
            stats.labeled_docs += 1;
            if g < df.ncols() && marked(d, g) {
                stats.true_marked += 1;
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub perplexity: Option<f64>,
    pub confusion: Vec<Vec<u64>>,
    pub num_evaluated: usize,
    pub config: RunConfig,
}

impl EvalReport {
    pub fn new(scores: F1Scores, perplexity: Option<f64>, config: RunConfig) -> Self {
        let num_evaluated = scores.confusion.iter().flatten().sum::<u64>() as usize;
        Self {
            micro_f1: scores.micro,
            macro_f1: scores.macro_f1,
            per_class_f1: scores.per_class,
            perplexity,
            confusion: scores.confusion,
            num_evaluated,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

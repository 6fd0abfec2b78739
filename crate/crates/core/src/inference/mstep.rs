use ndarray::{Array2, Axis};

use super::{ModelConfig, SufficientStats};

/// Closed-form updates of the background proportions and both topic sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalUpdate {
    pub theta_hat: Array2<f64>,
    pub phi: Array2<f64>,
    pub phi_hat: Array2<f64>,
}

/// Normalizes `counts + smoothing` row-wise.
fn smoothed_rows(counts: &Array2<f64>, smoothing: f64) -> Array2<f64> {
    let mut out = counts + smoothing;
    for mut row in out.axis_iter_mut(Axis(0)) {
        let total = row.sum();
        row /= total;
    }
    out
}

pub fn m_step_globals(stats: &SufficientStats, config: &ModelConfig) -> GlobalUpdate {
    GlobalUpdate {
        theta_hat: smoothed_rows(&stats.doc_background, config.alpha_hat),
        phi: smoothed_rows(&stats.category_word, config.beta),
        phi_hat: smoothed_rows(&stats.background_word, config.beta_hat),
    }
}

/// Starting point of the smoothing loop: weighted category counts plus
/// the document's supervised prior, normalized.
pub fn init_theta(stats: &SufficientStats, alpha: &Array2<f64>) -> Array2<f64> {
    let mut theta = &stats.doc_category + alpha;
    for mut row in theta.axis_iter_mut(Axis(0)) {
        let total = row.sum();
        row /= total;
    }
    theta
}

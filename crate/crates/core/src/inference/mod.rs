//! Generalized EM for the category/background topic model with a
//! document-specific supervised prior and a manifold regularizer on the
//! category proportions.

mod estep;
mod fit;
mod mstep;
pub(crate) mod objective;

pub use estep::{e_step, token_posterior, token_posteriors, SufficientStats, TokenPosterior};
pub use fit::{fit, fit_observed, update_theta, FitResult, IterationReport, ThetaUpdate, TracePoint};
pub use mstep::{init_theta, m_step_globals, GlobalUpdate};
pub use objective::{log_likelihood, objective, theta_objective, ObjectiveTerms};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of background topics; `None` uses one per label.
    pub num_background: Option<usize>,
    pub beta: f64,
    pub beta_hat: f64,
    pub alpha_hat: f64,
    /// Weight of the manifold regularizer.
    pub lambda: f64,
    /// Step size of the neighbor smoothing update.
    pub kappa: f64,
    pub max_iter: usize,
    /// Cap on accepted smoothing steps per M-step.
    pub max_inner_iter: usize,
    pub rng_seed: u64,
    /// Relative objective change below which fitting stops.
    pub tol: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_background: None,
            beta: 0.01,
            beta_hat: 0.01,
            alpha_hat: 0.1,
            lambda: 100.0,
            kappa: 0.1,
            max_iter: 200,
            max_inner_iter: 100,
            rng_seed: 1,
            tol: 1e-5,
        }
    }
}

impl ModelConfig {
    pub fn background_topics(&self, num_labels: usize) -> usize {
        self.num_background.unwrap_or(num_labels)
    }

    pub fn validate(&self) -> Result<()> {
        let positive =
            [("beta", self.beta), ("beta_hat", self.beta_hat), ("alpha_hat", self.alpha_hat), ("tol", self.tol)];
        for (name, x) in positive {
            if !(x > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {x}")));
            }
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::Config(format!("kappa must lie in [0, 1], got {}", self.kappa)));
        }
        if self.num_background == Some(0) {
            return Err(Error::Config("at least one background topic is required".into()));
        }
        Ok(())
    }
}

/// Model parameters. Rows of `theta`, `theta_hat`, `phi` and `phi_hat` are
/// probability vectors; `gamma` and `pi` are fixed inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// Category proportions, `D x K`.
    pub theta: Array2<f64>,
    /// Background proportions, `D x G`.
    pub theta_hat: Array2<f64>,
    /// Category topics, `K x V`.
    pub phi: Array2<f64>,
    /// Background topics, `G x V`.
    pub phi_hat: Array2<f64>,
    /// Word/category relevance, `V x K`.
    pub gamma: Array2<f64>,
    /// Term weights, length `V`.
    pub pi: Array1<f64>,
}

impl ModelState {
    pub fn num_docs(&self) -> usize {
        self.theta.nrows()
    }

    pub fn num_labels(&self) -> usize {
        self.theta.ncols()
    }

    pub fn num_background(&self) -> usize {
        self.theta_hat.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.ncols()
    }

    /// Largest deviation of any probability row from summing to one.
    pub fn max_simplex_error(&self) -> f64 {
        [&self.theta, &self.theta_hat, &self.phi, &self.phi_hat]
            .into_iter()
            .flat_map(|m| m.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// Transposed topic-word matrices so each word's column is contiguous.
pub(crate) struct WordMajor {
    pub phi: Array2<f64>,
    pub phi_hat: Array2<f64>,
}

impl WordMajor {
    pub fn new(state: &ModelState) -> Self {
        Self {
            phi: state.phi.t().as_standard_layout().into_owned(),
            phi_hat: state.phi_hat.t().as_standard_layout().into_owned(),
        }
    }
}

fn dirichlet_rows(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for mut row in m.rows_mut() {
        for x in row.iter_mut() {
            let e: f64 = Exp1.sample(rng);
            *x = e;
        }
        let total = row.sum();
        row /= total;
    }
    m
}

/// Random start with every probability row drawn from a flat Dirichlet.
pub fn init_state(
    num_docs: usize,
    num_labels: usize,
    num_background: usize,
    gamma: Array2<f64>,
    pi: Array1<f64>,
    rng_seed: u64,
) -> ModelState {
    let vocab = gamma.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let theta = dirichlet_rows(num_docs, num_labels, &mut rng);
    let theta_hat = dirichlet_rows(num_docs, num_background, &mut rng);
    let phi = dirichlet_rows(num_labels, vocab, &mut rng);
    let phi_hat = dirichlet_rows(num_background, vocab, &mut rng);
    ModelState { theta, theta_hat, phi, phi_hat, gamma, pi }
}

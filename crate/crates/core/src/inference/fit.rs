use log::debug;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::objective::theta_objective_with;
use super::{e_step, init_state, init_theta, m_step_globals, objective, ModelConfig, ModelState, ObjectiveTerms};
use super::{SufficientStats, WordMajor};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::graph::{neighbor_smoothing_step, DocumentGraph};

/// Outcome of the smoothing loop on θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaUpdate {
    pub theta: Array2<f64>,
    /// Objective at the starting point.
    pub start_objective: f64,
    /// Objective at the returned point.
    pub objective: f64,
    /// Smoothing steps accepted.
    pub steps: usize,
}

/// Repeats the neighbor smoothing step while the objective does not
/// decrease and returns the last accepted iterate. Stops early when a step
/// leaves the objective unchanged or after `max_steps` accepted steps.
pub fn update_theta(
    start: Array2<f64>,
    graph: &DocumentGraph,
    kappa: f64,
    max_steps: usize,
    mut objective: impl FnMut(&Array2<f64>) -> f64,
) -> ThetaUpdate {
    let start_objective = objective(&start);
    let mut current = start;
    let mut current_objective = start_objective;
    let mut steps = 0;
    while steps < max_steps {
        let trial = neighbor_smoothing_step(&current, graph, kappa);
        let trial_objective = objective(&trial);
        if !(trial_objective >= current_objective) {
            break;
        }
        let stalled = trial_objective == current_objective || trial == current;
        current = trial;
        current_objective = trial_objective;
        steps += 1;
        if stalled {
            break;
        }
    }
    ThetaUpdate { theta: current, start_objective, objective: current_objective, steps }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: ModelState,
    /// Objective before the first iteration, then after each iteration.
    pub trace: Vec<TracePoint>,
    pub converged: bool,
}

/// Per-iteration view handed to [`fit_observed`] callers.
pub struct IterationReport<'a> {
    pub iteration: usize,
    pub state: &'a ModelState,
    pub stats: &'a SufficientStats,
    pub objective: ObjectiveTerms,
    pub theta_update: &'a ThetaUpdate,
}

pub fn fit(
    corpus: &Corpus,
    alpha: &Array2<f64>,
    gamma: Array2<f64>,
    pi: Array1<f64>,
    graph: &DocumentGraph,
    config: &ModelConfig,
) -> Result<FitResult> {
    fit_observed(corpus, alpha, gamma, pi, graph, config, |_| {})
}

fn check_finite(state: &ModelState, terms: &ObjectiveTerms, iteration: usize) -> Result<()> {
    let blocks =
        [("theta", &state.theta), ("theta_hat", &state.theta_hat), ("phi", &state.phi), ("phi_hat", &state.phi_hat)];
    let scalars =
        [("log-likelihood", terms.log_likelihood), ("log-prior", terms.log_prior), ("manifold penalty", terms.penalty)];
    let bad = blocks
        .iter()
        .find(|(_, m)| m.iter().any(|x| !x.is_finite()))
        .map(|(name, _)| *name)
        .or_else(|| scalars.iter().find(|(_, x)| !x.is_finite()).map(|(name, _)| *name));
    match bad {
        Some(quantity) => Err(Error::NonFinite { quantity: quantity.into(), iteration }),
        None => Ok(()),
    }
}

/// Runs generalized EM from a seeded random start, calling `observer`
/// after every iteration.
pub fn fit_observed(
    corpus: &Corpus,
    alpha: &Array2<f64>,
    gamma: Array2<f64>,
    pi: Array1<f64>,
    graph: &DocumentGraph,
    config: &ModelConfig,
    mut observer: impl FnMut(&IterationReport),
) -> Result<FitResult> {
    config.validate()?;
    let (d_total, k_total) = alpha.dim();
    if d_total != corpus.num_docs() || graph.num_nodes() != d_total {
        return Err(Error::InvalidInput("prior, graph and corpus disagree on the number of documents".into()));
    }
    if gamma.dim() != (corpus.vocab_size(), k_total) || pi.len() != corpus.vocab_size() {
        return Err(Error::InvalidInput("relevance or term weights do not match the vocabulary".into()));
    }
    let g_total = config.background_topics(k_total);
    let mut state = init_state(d_total, k_total, g_total, gamma, pi, config.rng_seed);

    let initial = objective(&state, corpus, alpha, graph, config);
    check_finite(&state, &initial, 0)?;
    let mut trace = vec![TracePoint { iteration: 0, objective: initial.total(), penalty: initial.penalty }];
    let mut previous = initial.total();
    let mut converged = false;

    for iteration in 1..=config.max_iter {
        let stats = e_step(&state, corpus);
        let globals = m_step_globals(&stats, config);
        state.theta_hat = globals.theta_hat;
        state.phi = globals.phi;
        state.phi_hat = globals.phi_hat;

        let wm = WordMajor::new(&state);
        let start = init_theta(&stats, alpha);
        let update = update_theta(start, graph, config.kappa, config.max_inner_iter, |theta| {
            theta_objective_with(theta, &state, &wm, corpus, alpha, graph, config)
        });
        state.theta = update.theta.clone();

        let terms = objective(&state, corpus, alpha, graph, config);
        check_finite(&state, &terms, iteration)?;
        observer(&IterationReport { iteration, state: &state, stats: &stats, objective: terms, theta_update: &update });

        let current = terms.total();
        debug!("iteration {iteration}: objective {current:.6} ({} smoothing steps)", update.steps);
        trace.push(TracePoint { iteration, objective: current, penalty: terms.penalty });
        if (current - previous).abs() < config.tol * current.abs() {
            converged = true;
            break;
        }
        previous = current;
    }
    Ok(FitResult { state, trace, converged })
}

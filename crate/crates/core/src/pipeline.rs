//! End-to-end runs: corpus and seeds in, priors and graph built, model
//! fitted, evaluated, or swept over a parameter grid.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::checkpoint::{Checkpoint, FORMAT_VERSION};
use crate::config::{Mode, RunConfig};
use crate::corpus::{
    count_seed_occurrences, load_corpus, load_heldout, load_seed_words, load_stopwords, Corpus, Document, SeedWordSet,
    Split,
};
use crate::error::{Error, Result};
use crate::eval::{classify, f1_scores, perplexity, EvalReport};
use crate::graph::{build_document_graph, DocumentGraph};
use crate::inference::{fit, FitResult, ModelState};
use crate::priors::{
    build_priors, compute_baseline_prior, compute_supervised_prior, find_pseudo_neighbors, membership_degree,
    PriorBundle,
};

/// Data shared by every run on the same corpus: documents, seeds and graph.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub seeds: SeedWordSet,
    pub graph: DocumentGraph,
}

impl Inputs {
    pub fn new(corpus: Corpus, seeds: SeedWordSet, config: &RunConfig) -> Result<Self> {
        if seeds.num_labels() != corpus.num_labels() {
            return Err(Error::InvalidInput(format!(
                "{} seed sets for {} labels",
                seeds.num_labels(),
                corpus.num_labels()
            )));
        }
        let graph = build_document_graph(&corpus, config.k_neighbors, config.similarity)?;
        Ok(Self { corpus, seeds, graph })
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Config(format!("no {what} file given")))
}

/// Number of labels named in a seed file: one past the largest label id.
pub fn seed_label_count(path: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    let mut count = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let label = line.split('\t').next().unwrap_or("").trim();
        let k: usize = label.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("bad label {label:?}"),
        })?;
        count = count.max(k + 1);
    }
    if count == 0 {
        return Err(Error::InvalidInput(format!("{}: no seed words", path.display())));
    }
    Ok(count)
}

pub fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    config.validate()?;
    let corpus_path = required(&config.corpus, "corpus")?;
    let seeds_path = required(&config.seeds, "seeds")?;
    let num_labels = seed_label_count(seeds_path)?;
    config.prior_config().validate(num_labels)?;
    let corpus = load_corpus(corpus_path, &config.corpus_options(Some(num_labels)))?;
    let seeds = load_seed_words(seeds_path, &corpus, config.purify, config.rng_seed)?;
    info!(
        "{} documents, {} words, {} labels, {:.1} seed words per label",
        corpus.num_docs(),
        corpus.vocab_size(),
        num_labels,
        seeds.mean_set_size()
    );
    Inputs::new(corpus, seeds, config)
}

/// Prior, relevance and term weights for one configuration.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub priors: PriorBundle,
    /// Prior actually used for θ: `α'`, or the seed-occurrence prior in
    /// baseline mode.
    pub alpha: Array2<f64>,
    pub pi: Array1<f64>,
}

pub fn model_inputs(inputs: &Inputs, config: &RunConfig) -> Result<ModelInputs> {
    let prior_config = config.prior_config();
    let priors = build_priors(&inputs.corpus, &inputs.seeds, &prior_config)?;
    let (alpha, pi) = match config.mode {
        Mode::Wsptm => (priors.prior.alpha.clone(), priors.term_weights.clone()),
        Mode::LapswtmBaseline => (
            compute_baseline_prior(&priors.counts.df, prior_config.eta, prior_config.alpha0),
            Array1::ones(inputs.corpus.vocab_size()),
        ),
    };
    Ok(ModelInputs { priors, alpha, pi })
}

pub struct Trained {
    pub model: ModelInputs,
    pub fit: FitResult,
}

pub fn train(inputs: &Inputs, config: &RunConfig) -> Result<Trained> {
    config.validate()?;
    let model = model_inputs(inputs, config)?;
    let fit = fit(
        &inputs.corpus,
        &model.alpha,
        model.priors.gamma.clone(),
        model.pi.clone(),
        &inputs.graph,
        &config.model_config(),
    )?;
    info!(
        "fit finished after {} iterations (converged: {}), objective {:.6}",
        fit.trace.len() - 1,
        fit.converged,
        fit.trace.last().map_or(f64::NAN, |t| t.objective)
    );
    Ok(Trained { model, fit })
}

pub fn make_checkpoint(inputs: &Inputs, config: &RunConfig, fit: &FitResult) -> Checkpoint {
    Checkpoint {
        format_version: FORMAT_VERSION,
        config: config.effective(),
        vocabulary_hash: inputs.corpus.vocabulary().fingerprint(),
        converged: fit.converged,
        trace: fit.trace.clone(),
        state: fit.state.clone(),
    }
}

/// Documents scored for classification: labeled test-split documents, or
/// every labeled document when the corpus has no labeled test split.
pub fn evaluation_ids(corpus: &Corpus) -> Vec<usize> {
    let labeled = |split: Option<Split>| -> Vec<usize> {
        corpus
            .documents()
            .iter()
            .filter(|d| d.gold_label.is_some() && split.is_none_or(|s| d.split == s))
            .map(|d| d.id)
            .collect()
    };
    let test = labeled(Some(Split::Test));
    if test.is_empty() {
        labeled(None)
    } else {
        test
    }
}

/// Prior rows for documents outside the training corpus, from the same
/// seeds, prototypes and label frequencies.
fn heldout_prior(inputs: &Inputs, model: &ModelInputs, docs: Vec<Document>, config: &RunConfig) -> Result<Array2<f64>> {
    let held = Corpus::new(inputs.corpus.vocabulary().clone(), docs, inputs.corpus.num_labels())?;
    let counts = count_seed_occurrences(&held, &inputs.seeds);
    let pc = config.prior_config();
    Ok(match config.mode {
        Mode::Wsptm => {
            let omega = find_pseudo_neighbors(&held, &model.priors.prototypes, pc.num_neighbors);
            let m = membership_degree(&counts.df, &omega, pc.tau, pc.num_neighbors);
            compute_supervised_prior(m, model.priors.prior.label_frequency.clone(), omega, &pc).alpha
        }
        Mode::LapswtmBaseline => compute_baseline_prior(&counts.df, pc.eta, pc.alpha0),
    })
}

fn evaluation_perplexity(inputs: &Inputs, model: &ModelInputs, state: &ModelState, config: &RunConfig) -> Result<f64> {
    let (docs, prior) = match &config.heldout {
        Some(path) => {
            let stopwords = match &config.stopwords {
                Some(p) => load_stopwords(p)?,
                None => HashSet::new(),
            };
            let docs: Vec<Document> = load_heldout(path, inputs.corpus.vocabulary(), &stopwords)?
                .into_iter()
                .map(|d| Document { gold_label: d.gold_label.filter(|&g| g < inputs.corpus.num_labels()), ..d })
                .collect();
            let prior = heldout_prior(inputs, model, docs.clone(), config)?;
            (docs, prior)
        }
        None => {
            let mut ids = inputs.corpus.ids_in_split(Split::Test);
            if ids.is_empty() {
                ids = (0..inputs.corpus.num_docs()).collect();
            }
            let docs = ids.iter().map(|&d| inputs.corpus.documents()[d].clone()).collect();
            (docs, model.alpha.select(Axis(0), &ids))
        }
    };
    perplexity(state, &prior, &docs, config.alpha_hat, config.fold_in_iters)
}

pub fn evaluate(inputs: &Inputs, model: &ModelInputs, state: &ModelState, config: &RunConfig) -> Result<EvalReport> {
    if state.num_docs() != inputs.corpus.num_docs() || state.num_labels() != inputs.corpus.num_labels() {
        return Err(Error::Checkpoint("model state does not match the corpus".into()));
    }
    let ids = evaluation_ids(&inputs.corpus);
    if ids.is_empty() {
        return Err(Error::InvalidInput("no labeled documents to evaluate".into()));
    }
    let pred = classify(&state.theta, &ids);
    let gold: Vec<usize> = ids.iter().map(|&d| inputs.corpus.documents()[d].gold_label.expect("labeled")).collect();
    let scores = f1_scores(&pred, &gold, inputs.corpus.num_labels())?;
    let ppl = if config.perplexity { Some(evaluation_perplexity(inputs, model, state, config)?) } else { None };
    Ok(EvalReport::new(scores, ppl, config.effective()))
}

/// Trains and evaluates one configuration.
pub fn run(inputs: &Inputs, config: &RunConfig) -> Result<(Trained, EvalReport)> {
    let trained = train(inputs, config)?;
    let report = evaluate(inputs, &trained.model, &trained.fit.state, config)?;
    Ok((trained, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Rho,
    Tau,
    P,
    /// Full model, without pseudo-neighbor categories, without label frequencies.
    Components,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(SweepAxis::Rho),
            "tau" => Ok(SweepAxis::Tau),
            "P" | "p" => Ok(SweepAxis::P),
            "components" => Ok(SweepAxis::Components),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}, expected rho, tau, P or components"))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Rho => "rho",
            SweepAxis::Tau => "tau",
            SweepAxis::P => "P",
            SweepAxis::Components => "components",
        })
    }
}

pub const COMPONENTS: [&str; 3] = ["full", "-PNNC", "-LF"];

pub fn default_grid(axis: SweepAxis, num_labels: usize) -> Vec<String> {
    match axis {
        SweepAxis::Rho | SweepAxis::Tau => (0..17).map(|i| format!("{:.2}", 0.1 + 0.05 * i as f64)).collect(),
        SweepAxis::P => (0..=num_labels.min(5)).map(|p| p.to_string()).collect(),
        SweepAxis::Components => COMPONENTS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Parses `a..b` (inclusive integer range) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<String>> {
    let spec = spec.trim();
    let grid: Vec<String> = if let Some((a, b)) = spec.split_once("..") {
        let bad = || Error::Config(format!("bad grid range {spec:?}"));
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).map(|x| x.to_string()).collect()
    } else {
        spec.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
    };
    if grid.is_empty() {
        return Err(Error::Config(format!("empty grid {spec:?}")));
    }
    Ok(grid)
}

/// Seed of the `index`-th grid point.
pub fn point_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Configuration of one grid point. At `P = 0` the pseudo-neighbor weight
/// is dropped as well, since it has no categories to spread over.
pub fn point_config(base: &RunConfig, axis: SweepAxis, value: &str, index: usize) -> Result<RunConfig> {
    let mut c = base.clone();
    c.rng_seed = point_seed(base.rng_seed, index);
    match axis {
        SweepAxis::Rho => c.set("rho", value)?,
        SweepAxis::Tau => c.set("tau", value)?,
        SweepAxis::P => {
            c.set("p", value)?;
            if c.p == 0 {
                c.tau = 0.0;
            }
        }
        SweepAxis::Components => match value {
            "full" => {}
            "-PNNC" => c.tau = 0.0,
            "-LF" => c.rho = 0.0,
            other => return Err(Error::Config(format!("unknown component variant {other:?}"))),
        },
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub report: EvalReport,
}

/// Trains and evaluates every grid point in parallel.
pub fn ablate(inputs: &Inputs, base: &RunConfig, axis: SweepAxis, grid: &[String]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let configs = grid.iter().enumerate().map(|(i, v)| point_config(base, axis, v, i)).collect::<Result<Vec<_>>>()?;
    for c in &configs {
        c.prior_config().validate(inputs.corpus.num_labels())?;
    }
    configs
        .par_iter()
        .zip(grid)
        .map(|(config, value)| {
            let (_, report) = run(inputs, config)?;
            info!("{axis} = {value}: micro-F1 {:.4}, macro-F1 {:.4}", report.micro_f1, report.macro_f1);
            Ok(SweepRow { param: axis.to_string(), value: value.clone(), report })
        })
        .collect()
}

/// `# key = value` lines describing the run, for CSV outputs.
pub fn config_comment(config: &RunConfig) -> String {
    config.to_text().lines().map(|l| format!("# {l}\n")).collect()
}

pub fn sweep_csv(rows: &[SweepRow], base: &RunConfig) -> String {
    let mut out = config_comment(&base.effective());
    out.push_str("param,value,micro_f1,macro_f1,perplexity\n");
    for row in rows {
        let ppl = row.report.perplexity.map_or(String::new(), |p| p.to_string());
        writeln!(out, "{},{},{},{},{ppl}", row.param, row.value, row.report.micro_f1, row.report.macro_f1)
            .expect("write to string");
    }
    out
}

pub fn trace_csv(fit: &FitResult, config: &RunConfig) -> String {
    let mut out = config_comment(&config.effective());
    out.push_str("iter,objective,penalty\n");
    for t in &fit.trace {
        writeln!(out, "{},{},{}", t.iteration, t.objective, t.penalty).expect("write to string");
    }
    out
}

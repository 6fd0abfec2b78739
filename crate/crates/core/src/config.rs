//! Run configuration: every knob of a training or evaluation run in one
//! flat record, read from `key = value` files and command-line overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusOptions;
use crate::error::{Error, Result};
use crate::graph::Similarity;
use crate::inference::ModelConfig;
use crate::priors::PriorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    /// Prototype-enriched prior with label frequencies and Log term weights.
    #[default]
    #[serde(rename = "wsptm")]
    Wsptm,
    /// Seed-occurrence prior only, unit term weights.
    #[serde(rename = "lapswtm-baseline")]
    LapswtmBaseline,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wsptm" => Ok(Mode::Wsptm),
            "lapswtm-baseline" => Ok(Mode::LapswtmBaseline),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Wsptm => "wsptm",
            Mode::LapswtmBaseline => "lapswtm-baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Optional separate documents for perplexity; defaults to the test split.
    pub heldout: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub mode: Mode,

    pub min_doc_freq: usize,
    pub min_word_len: usize,
    pub purify: bool,

    pub eta: f64,
    pub alpha0: f64,
    pub rho: f64,
    pub tau: f64,
    pub p: usize,
    pub epsilon: f64,
    pub b: f64,

    /// Background topics; `None` means one per label.
    pub num_background: Option<usize>,
    pub beta: f64,
    pub beta_hat: f64,
    pub alpha_hat: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub max_iter: usize,
    pub max_inner_iter: usize,
    pub tol: f64,
    pub rng_seed: u64,

    pub k_neighbors: usize,
    pub similarity: Similarity,

    pub perplexity: bool,
    pub fold_in_iters: usize,
    pub dump_graph: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let prior = PriorConfig::default();
        let model = ModelConfig::default();
        Self {
            corpus: None,
            seeds: None,
            stopwords: None,
            heldout: None,
            output_dir: PathBuf::from("out"),
            mode: Mode::Wsptm,
            min_doc_freq: 5,
            min_word_len: 2,
            purify: true,
            eta: prior.eta,
            alpha0: prior.alpha0,
            rho: prior.rho,
            tau: prior.tau,
            p: prior.num_neighbors,
            epsilon: prior.epsilon,
            b: prior.base,
            num_background: model.num_background,
            beta: model.beta,
            beta_hat: model.beta_hat,
            alpha_hat: model.alpha_hat,
            lambda: model.lambda,
            kappa: model.kappa,
            max_iter: model.max_iter,
            max_inner_iter: model.max_inner_iter,
            tol: model.tol,
            rng_seed: model.rng_seed,
            k_neighbors: 5,
            similarity: Similarity::Tf,
            perplexity: true,
            fold_in_iters: 20,
            dump_graph: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "corpus" => self.corpus = optional_path(value),
            "seeds" => self.seeds = optional_path(value),
            "stopwords" => self.stopwords = optional_path(value),
            "heldout" => self.heldout = optional_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "mode" => self.mode = value.parse()?,
            "min_doc_freq" => self.min_doc_freq = parse(key, value)?,
            "min_word_len" => self.min_word_len = parse(key, value)?,
            "purify" => self.purify = parse_bool(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "alpha0" => self.alpha0 = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "p" | "P" => self.p = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "num_background" | "G" => {
                self.num_background = if value == "auto" { None } else { Some(parse(key, value)?) }
            }
            "beta" => self.beta = parse(key, value)?,
            "beta_hat" => self.beta_hat = parse(key, value)?,
            "alpha_hat" => self.alpha_hat = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "max_inner_iter" => self.max_inner_iter = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "rng_seed" => self.rng_seed = parse(key, value)?,
            "k_neighbors" => self.k_neighbors = parse(key, value)?,
            "similarity" => self.similarity = value.parse()?,
            "perplexity" => self.perplexity = parse_bool(key, value)?,
            "fold_in_iters" => self.fold_in_iters = parse(key, value)?,
            "dump_graph" => self.dump_graph = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// The configuration as `key = value` lines, in a fixed order.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("write to string");
        put("corpus", path(&self.corpus));
        put("seeds", path(&self.seeds));
        put("stopwords", path(&self.stopwords));
        put("heldout", path(&self.heldout));
        put("output_dir", self.output_dir.display().to_string());
        put("mode", self.mode.to_string());
        put("min_doc_freq", self.min_doc_freq.to_string());
        put("min_word_len", self.min_word_len.to_string());
        put("purify", self.purify.to_string());
        put("eta", self.eta.to_string());
        put("alpha0", self.alpha0.to_string());
        put("rho", self.rho.to_string());
        put("tau", self.tau.to_string());
        put("p", self.p.to_string());
        put("epsilon", self.epsilon.to_string());
        put("b", self.b.to_string());
        put("num_background", self.num_background.map_or("auto".into(), |g| g.to_string()));
        put("beta", self.beta.to_string());
        put("beta_hat", self.beta_hat.to_string());
        put("alpha_hat", self.alpha_hat.to_string());
        put("lambda", self.lambda.to_string());
        put("kappa", self.kappa.to_string());
        put("max_iter", self.max_iter.to_string());
        put("max_inner_iter", self.max_inner_iter.to_string());
        put("tol", self.tol.to_string());
        put("rng_seed", self.rng_seed.to_string());
        put("k_neighbors", self.k_neighbors.to_string());
        put("similarity", self.similarity.to_string());
        put("perplexity", self.perplexity.to_string());
        put("fold_in_iters", self.fold_in_iters.to_string());
        put("dump_graph", self.dump_graph.to_string());
        out
    }

    /// The configuration actually run: the baseline mode pins `rho` and
    /// `tau` to zero.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        if c.mode == Mode::LapswtmBaseline {
            c.rho = 0.0;
            c.tau = 0.0;
        }
        c
    }

    pub fn prior_config(&self) -> PriorConfig {
        let c = self.effective();
        PriorConfig {
            eta: c.eta,
            alpha0: c.alpha0,
            rho: c.rho,
            tau: c.tau,
            num_neighbors: c.p,
            epsilon: c.epsilon,
            base: c.b,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            num_background: self.num_background,
            beta: self.beta,
            beta_hat: self.beta_hat,
            alpha_hat: self.alpha_hat,
            lambda: self.lambda,
            kappa: self.kappa,
            max_iter: self.max_iter,
            max_inner_iter: self.max_inner_iter,
            rng_seed: self.rng_seed,
            tol: self.tol,
        }
    }

    pub fn corpus_options(&self, num_labels: Option<usize>) -> CorpusOptions {
        CorpusOptions {
            min_doc_freq: self.min_doc_freq,
            min_word_len: self.min_word_len,
            stopwords: self.stopwords.clone(),
            num_labels,
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        let prior = self.prior_config();
        // P <= K is checked once the label count is known
        prior.validate(usize::MAX)?;
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be >= 1".into()));
        }
        if self.min_doc_freq == 0 {
            return Err(Error::Config("min_doc_freq must be >= 1".into()));
        }
        Ok(())
    }
}

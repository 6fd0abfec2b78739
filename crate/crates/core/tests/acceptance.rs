//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any gated criterion fails. Criteria that need unavailable data are
//! reported as NOT RUN and do not gate.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsptm::config::{Mode, RunConfig};
use wsptm::corpus::{parse_corpus, parse_seed_words, Corpus, CorpusOptions, Document, SeedWordSet, Split, Vocabulary};
use wsptm::eval::coverage_stats;
use wsptm::inference::{e_step, fit_observed, ModelState};
use wsptm::pipeline::{self, Inputs, SweepAxis, COMPONENTS};
use wsptm::priors::{build_priors, compute_baseline_prior, compute_supervised_prior, membership_degree, PriorConfig};
use wsptm::synthetic::{generate, SyntheticConfig};

const GOLDEN_TOL: f64 = 1e-9;
const REDUCTION_CORPORA: usize = 100;
const ESTEP_TRIALS: usize = 1000;
const ESTEP_TOL: f64 = 1e-10;
const SIMPLEX_TOL: f64 = 1e-9;
const PARTITION_TOL: f64 = 1e-12;
const MONOTONE_SHARE: f64 = 0.95;
const ACCEPT_RULE_REL_TOL: f64 = 1e-9;
const RECOVERY_MICRO_F1: f64 = 0.90;
const RECOVERY_BUDGET: Duration = Duration::from_secs(60);
const ABLATION_SEEDS: [u64; 3] = [1, 2, 3];

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    NotRun,
}

struct Outcome {
    id: u32,
    name: &'static str,
    status: Status,
    detail: String,
}

fn outcome(id: u32, name: &'static str, ok: bool, detail: String) -> Outcome {
    Outcome { id, name, status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn synthetic_inputs(cfg: &SyntheticConfig, run: &RunConfig) -> Inputs {
    let s = generate(cfg);
    let opts = CorpusOptions { num_labels: Some(cfg.class_weights.len()), ..Default::default() };
    let corpus = parse_corpus(&s.corpus_tsv, Path::new("synthetic"), &opts, &Default::default()).unwrap();
    let seeds = parse_seed_words(&s.seeds_tsv, Path::new("synthetic"), &corpus, run.purify, run.rng_seed).unwrap();
    Inputs::new(corpus, seeds, run).unwrap()
}

fn golden_prior() -> Outcome {
    let k_total = 10;
    let mut df = Array2::zeros((1, k_total));
    df[[0, 7]] = 1.0;
    let omega = vec![vec![1]];
    let cfg = PriorConfig { eta: 10.0, alpha0: 0.01, rho: 0.0, tau: 0.1, num_neighbors: 1, ..Default::default() };
    let m = membership_degree(&df, &omega, cfg.tau, cfg.num_neighbors);
    let freq = Array1::from_elem(k_total, 1.0 / k_total as f64);
    let alpha = compute_supervised_prior(m, freq, omega, &cfg).alpha;
    let expected: Vec<f64> = (0..k_total)
        .map(|k| match k {
            1 => 1.01,
            7 => 9.01,
            _ => 0.01,
        })
        .collect();
    let err = alpha.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        1,
        "golden prior reproduction",
        err <= GOLDEN_TOL,
        format!("alpha' = {:?}, max error {err:.1e}", alpha.row(0).to_vec()),
    )
}

fn coverage_statistics() -> Outcome {
    // Desk proxy on the synthetic fixture: with P >= 1 no document lacks a marked label.
    let run = RunConfig::default();
    let inputs = synthetic_inputs(&SyntheticConfig::default(), &run);
    let model = pipeline::model_inputs(&inputs, &run).unwrap();
    let s = coverage_stats(&model.priors.counts.df, &model.priors.prior.omega, &inputs.corpus.gold_labels()).unwrap();
    Outcome {
        id: 2,
        name: "coverage statistics on Reuters",
        status: Status::NotRun,
        detail: format!(
            "Reuters-21578 is not available offline; synthetic proxy at P=1: NonSW {}/{}, TrueMark {}/{}",
            s.no_marked, s.num_docs, s.true_marked, s.labeled_docs
        ),
    }
}

fn random_small_corpus(rng: &mut ChaCha8Rng) -> Option<(Corpus, SeedWordSet)> {
    let v_total = rng.random_range(8..=12);
    let k_total = rng.random_range(2..=4);
    let d_total = rng.random_range(2..=8);
    let vocab = Vocabulary::from_words((0..v_total).map(|i| format!("w{i}")).collect()).unwrap();
    let docs = (0..d_total)
        .map(|d| {
            let n = rng.random_range(1..=10);
            Document::new(d, (0..n).map(|_| rng.random_range(0..v_total as u32)).collect(), None, Split::Train)
        })
        .collect();
    let corpus = Corpus::new(vocab, docs, k_total).unwrap();
    let mut words: Vec<u32> = (0..v_total as u32).collect();
    for i in (1..words.len()).rev() {
        words.swap(i, rng.random_range(0..=i));
    }
    let mut sets = Vec::new();
    let mut next = 0;
    for _ in 0..k_total {
        let size = rng.random_range(1..=2);
        sets.push(words[next..next + size].to_vec());
        next += size;
    }
    Some((corpus, SeedWordSet::new(sets).ok()?))
}

fn reduction_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = PriorConfig { rho: 0.0, tau: 0.0, ..Default::default() };
    let (mut corpora, mut docs_checked, mut mismatches, mut attempts) = (0, 0, 0, 0);
    while corpora < REDUCTION_CORPORA {
        attempts += 1;
        let Some((corpus, seeds)) = random_small_corpus(&mut rng) else { continue };
        // corpora where some label never occurs have no prototypes and are redrawn
        let Ok(bundle) = build_priors(&corpus, &seeds, &cfg) else { continue };
        corpora += 1;
        let baseline = compute_baseline_prior(&bundle.counts.df, cfg.eta, cfg.alpha0);
        for d in 0..corpus.num_docs() {
            if bundle.counts.df.row(d).sum() > 0.0 {
                docs_checked += 1;
                if bundle.prior.alpha.row(d) != baseline.row(d) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(
        3,
        "reduction equivalence",
        mismatches == 0 && docs_checked > 0,
        format!("{corpora} corpora ({attempts} drawn), {docs_checked} seeded documents, {mismatches} inexact rows"),
    )
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = x.iter().sum();
    x.into_iter().map(|v| v / total).collect()
}

fn rows(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_vec((r, c), (0..r).flat_map(|_| random_simplex(rng, c)).collect()).unwrap()
}

/// Enumerates every joint assignment of the document's tokens to the four
/// (switch, topic) outcomes, weighting each by the product of per-token
/// factors `p(c)·p(z | c, w)`, and marginalizes back per token.
fn brute_force_stats(state: &ModelState, corpus: &Corpus) -> [Array2<f64>; 4] {
    let (k_total, g_total, v_total) = (state.num_labels(), state.num_background(), state.vocab_size());
    let outcomes = k_total + g_total;
    let mut out = [
        Array2::zeros((corpus.num_docs(), k_total)),
        Array2::zeros((corpus.num_docs(), g_total)),
        Array2::zeros((k_total, v_total)),
        Array2::zeros((g_total, v_total)),
    ];
    for doc in corpus.documents() {
        let d = doc.id;
        let factors: Vec<Vec<f64>> = doc
            .tokens
            .iter()
            .map(|&v| {
                let v = v as usize;
                let delta: f64 = (0..k_total).map(|k| state.theta[[d, k]] * state.gamma[[v, k]]).sum();
                let cat: f64 = (0..k_total).map(|k| state.theta[[d, k]] * state.phi[[k, v]]).sum();
                let bg: f64 = (0..g_total).map(|g| state.theta_hat[[d, g]] * state.phi_hat[[g, v]]).sum();
                (0..outcomes)
                    .map(|s| {
                        if s < k_total {
                            delta * state.theta[[d, s]] * state.phi[[s, v]] / cat
                        } else {
                            let g = s - k_total;
                            (1.0 - delta) * state.theta_hat[[d, g]] * state.phi_hat[[g, v]] / bg
                        }
                    })
                    .collect()
            })
            .collect();
        let n = doc.tokens.len();
        let mut marginals = vec![vec![0.0; outcomes]; n];
        let mut assignment = vec![0usize; n];
        loop {
            let weight: f64 = assignment.iter().enumerate().map(|(i, &s)| factors[i][s]).product();
            for (i, &s) in assignment.iter().enumerate() {
                marginals[i][s] += weight;
            }
            let mut i = 0;
            while i < n {
                assignment[i] += 1;
                if assignment[i] < outcomes {
                    break;
                }
                assignment[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        for (i, &v) in doc.tokens.iter().enumerate() {
            let v = v as usize;
            let w = state.pi[v];
            for s in 0..outcomes {
                let x = w * marginals[i][s];
                if s < k_total {
                    out[0][[d, s]] += x;
                    out[2][[s, v]] += x;
                } else {
                    out[1][[d, s - k_total]] += x;
                    out[3][[s - k_total, v]] += x;
                }
            }
        }
    }
    out
}

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    if a.dim() != b.dim() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn estep_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (k_total, g_total) = (2, 2);
    let (mut worst, mut worst_joint_gap) = (0.0f64, 0.0f64);
    for _ in 0..ESTEP_TRIALS {
        let d_total = rng.random_range(1..=3);
        let v_total = rng.random_range(1..=5);
        let vocab = Vocabulary::from_words((0..v_total).map(|i| format!("w{i}")).collect()).unwrap();
        let docs = (0..d_total)
            .map(|d| {
                let n = rng.random_range(1..=4);
                Document::new(d, (0..n).map(|_| rng.random_range(0..v_total as u32)).collect(), None, Split::Train)
            })
            .collect();
        let corpus = Corpus::new(vocab, docs, k_total).unwrap();
        let state = ModelState {
            theta: rows(&mut rng, d_total, k_total),
            theta_hat: rows(&mut rng, d_total, g_total),
            phi: rows(&mut rng, k_total, v_total),
            phi_hat: rows(&mut rng, g_total, v_total),
            gamma: Array2::from_shape_fn((v_total, k_total), |_| rng.random_range(0.01..=1.0)),
            pi: Array1::from_shape_fn(v_total, |_| rng.random_range(0.5..4.0)),
        };
        let stats = e_step(&state, &corpus);
        let oracle = brute_force_stats(&state, &corpus);
        worst = worst
            .max(max_diff(&stats.doc_category, &oracle[0]))
            .max(max_diff(&stats.doc_background, &oracle[1]))
            .max(max_diff(&stats.category_word, &oracle[2]))
            .max(max_diff(&stats.background_word, &oracle[3]));
        // distance to the posterior that conditions the switch on the word
        for doc in corpus.documents() {
            for &v in &doc.tokens {
                let p = wsptm::inference::token_posterior(&state, doc.id, v as usize);
                let (d, v) = (doc.id, v as usize);
                let delta: f64 = (0..k_total).map(|k| state.theta[[d, k]] * state.gamma[[v, k]]).sum();
                let joint: Vec<f64> = (0..k_total)
                    .map(|k| delta * state.theta[[d, k]] * state.phi[[k, v]])
                    .chain((0..g_total).map(|g| (1.0 - delta) * state.theta_hat[[d, g]] * state.phi_hat[[g, v]]))
                    .collect();
                let z: f64 = joint.iter().sum();
                let gap = p.category.iter().chain(&p.background).zip(&joint).map(|(a, b)| (a - b / z).abs());
                worst_joint_gap = gap.fold(worst_joint_gap, f64::max);
            }
        }
    }
    outcome(
        4,
        "E-step oracle",
        worst <= ESTEP_TOL,
        format!(
            "{ESTEP_TRIALS} trials, max deviation {worst:.1e}; word-conditioned switch posterior differs by up to {worst_joint_gap:.2} (informational)"
        ),
    )
}

struct FixtureRun {
    simplex_error: f64,
    partition_error: f64,
    rule_violations: usize,
    monotone_share: f64,
    initial: f64,
    last: f64,
    iterations: usize,
    micro_f1: f64,
    perplexity: Option<f64>,
    elapsed: Duration,
}

fn fixture_run(mode: Mode) -> FixtureRun {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let run = RunConfig { mode, ..Default::default() };
        let inputs = synthetic_inputs(&SyntheticConfig::default(), &run);
        let model = pipeline::model_inputs(&inputs, &run).unwrap();
        let (mut simplex_error, mut partition_error, mut rule_violations) = (0.0f64, 0.0f64, 0);
        let fit = fit_observed(
            &inputs.corpus,
            &model.alpha,
            model.priors.gamma.clone(),
            model.pi.clone(),
            &inputs.graph,
            &run.model_config(),
            |rep| {
                simplex_error = simplex_error.max(rep.state.max_simplex_error());
                partition_error = partition_error.max(rep.stats.max_partition_error);
                let u = rep.theta_update;
                if u.objective < u.start_objective - ACCEPT_RULE_REL_TOL * u.start_objective.abs() {
                    rule_violations += 1;
                }
            },
        )
        .unwrap();
        let report = pipeline::evaluate(&inputs, &model, &fit.state, &run).unwrap();
        let elapsed = start.elapsed();
        let steps = fit.trace.windows(2).count();
        let rising = fit.trace.windows(2).filter(|w| w[1].objective >= w[0].objective).count();
        FixtureRun {
            simplex_error,
            partition_error,
            rule_violations,
            monotone_share: rising as f64 / steps.max(1) as f64,
            initial: fit.trace[0].objective,
            last: fit.trace.last().unwrap().objective,
            iterations: steps,
            micro_f1: report.micro_f1,
            perplexity: report.perplexity,
            elapsed,
        }
    })
}

fn ablation_direction() -> Outcome {
    let fixture = SyntheticConfig { class_weights: vec![8.0, 4.0, 2.0, 1.0], label_share: 0.3, ..Default::default() };
    let base = RunConfig { perplexity: false, ..Default::default() };
    let inputs = synthetic_inputs(&fixture, &base);
    let grid: Vec<String> = COMPONENTS.iter().map(|s| s.to_string()).collect();
    let mut mean = [0.0; 3];
    let mut runs = Vec::new();
    for seed in ABLATION_SEEDS {
        let config = RunConfig { rng_seed: seed, ..base.clone() };
        let rows = pipeline::ablate(&inputs, &config, SweepAxis::Components, &grid).unwrap();
        for (i, row) in rows.iter().enumerate() {
            mean[i] += row.report.macro_f1 / ABLATION_SEEDS.len() as f64;
        }
        runs.push(rows.iter().map(|r| format!("{:.3}", r.report.macro_f1)).collect::<Vec<_>>().join("/"));
    }
    let [full, no_pnnc, no_lf] = mean;
    outcome(
        9,
        "ablation direction",
        full >= no_lf && full >= no_pnnc,
        format!(
            "mean Macro-F1 over seeds {ABLATION_SEEDS:?}: full {full:.4}, -PNNC {no_pnnc:.4}, -LF {no_lf:.4} (per seed full/-PNNC/-LF: {})",
            runs.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let mut results = vec![golden_prior(), coverage_statistics(), reduction_equivalence(), estep_oracle()];

    let wsptm = fixture_run(Mode::Wsptm);
    results.push(outcome(
        5,
        "simplex and partition invariants",
        wsptm.simplex_error <= SIMPLEX_TOL && wsptm.partition_error <= PARTITION_TOL,
        format!(
            "{} iterations, max row-sum error {:.1e}, max token partition error {:.1e}",
            wsptm.iterations, wsptm.simplex_error, wsptm.partition_error
        ),
    ));
    results.push(outcome(
        6,
        "GEM monotonicity",
        wsptm.monotone_share >= MONOTONE_SHARE && wsptm.last >= wsptm.initial && wsptm.rule_violations == 0,
        format!(
            "non-decreasing at {:.1}% of iterations, initial {:.3} -> final {:.3}, accept-rule violations {}",
            100.0 * wsptm.monotone_share,
            wsptm.initial,
            wsptm.last,
            wsptm.rule_violations
        ),
    ));
    results.push(outcome(
        7,
        "synthetic recovery",
        wsptm.micro_f1 >= RECOVERY_MICRO_F1 && wsptm.elapsed < RECOVERY_BUDGET,
        format!("Micro-F1 {:.4}, {:.1} s on one thread", wsptm.micro_f1, wsptm.elapsed.as_secs_f64()),
    ));

    let baseline = fixture_run(Mode::LapswtmBaseline);
    results.push(Outcome {
        id: 8,
        name: "full-scale reproduction (optional)",
        status: Status::NotRun,
        detail: format!(
            "Reuters and 20 Newsgroups are not available offline; synthetic perplexity wsptm {:.2} vs lapswtm-baseline {:.2}, Micro-F1 {:.4} vs {:.4} (reported only)",
            wsptm.perplexity.unwrap_or(f64::NAN),
            baseline.perplexity.unwrap_or(f64::NAN),
            wsptm.micro_f1,
            baseline.micro_f1
        ),
    });
    results.push(ablation_direction());

    results.sort_by_key(|r| r.id);
    for r in &results {
        let tag = match r.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotRun => "NOT RUN",
        };
        println!("criterion {} [{tag}] {}: {}", r.id, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    println!("acceptance: {failed} failed, {} not run", results.iter().filter(|r| r.status == Status::NotRun).count());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

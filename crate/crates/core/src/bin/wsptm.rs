use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use wsptm::checkpoint::Checkpoint;
use wsptm::config::{Mode, RunConfig};
use wsptm::eval::coverage_stats;
use wsptm::pipeline::{self, SweepAxis};
use wsptm::{Error, Result};

/// Dataless text classification from seed words.
#[derive(Parser, Debug)]
#[command(name = "wsptm", version, args_override_self = true)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    seeds: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and write checkpoint, objective trace and config snapshot.
    Train,
    /// Score a checkpoint on the corpus it was trained on.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate over a parameter grid.
    Ablate {
        /// rho, tau, P or components.
        #[arg(long)]
        axis: SweepAxis,
        /// `a..b` or a comma-separated list; defaults to the standard sweep.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Seed coverage statistics.
    Stats,
    /// Write the prior of every document as JSON lines.
    DumpPriors,
}

impl Cli {
    fn resolve(&self, base: RunConfig) -> Result<RunConfig> {
        let mut config = base;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.clone(), source })?;
            config.apply_text(&text)?;
        }
        for pair in &self.overrides {
            let (key, value) =
                pair.split_once('=').ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got {pair:?}")))?;
            config.set(key, value)?;
        }
        if let Some(p) = &self.corpus {
            config.corpus = Some(p.clone());
        }
        if let Some(p) = &self.seeds {
            config.seeds = Some(p.clone());
        }
        if let Some(p) = &self.output {
            config.output_dir = p.clone();
        }
        if let Some(m) = self.mode {
            config.mode = m;
        }
        if let Some(s) = self.seed {
            config.rng_seed = s;
        }
        config.validate()?;
        Ok(config)
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Write { path: path.to_path_buf(), source })
}

fn output_dir(config: &RunConfig) -> Result<&Path> {
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|source| Error::Write { path: dir.to_path_buf(), source })?;
    Ok(dir)
}

fn train(config: &RunConfig) -> Result<()> {
    let inputs = pipeline::load_inputs(config)?;
    let trained = pipeline::train(&inputs, config)?;
    let dir = output_dir(config)?;
    pipeline::make_checkpoint(&inputs, config, &trained.fit).save(&dir.join("checkpoint.json"))?;
    write(&dir.join("trace.csv"), &pipeline::trace_csv(&trained.fit, config))?;
    write(&dir.join("config.txt"), &config.effective().to_text())?;
    if config.dump_graph {
        inputs.graph.write_edge_list(&dir.join("graph.tsv"))?;
    }
    let last = trained.fit.trace.last().expect("trace has the initial point");
    println!(
        "iterations: {}\nconverged: {}\nobjective: {}\noutput: {}",
        last.iteration,
        trained.fit.converged,
        last.objective,
        dir.display()
    );
    Ok(())
}

fn eval(cli: &Cli, checkpoint_path: &Path) -> Result<()> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let config = cli.resolve(checkpoint.config.clone())?;
    let inputs = pipeline::load_inputs(&config)?;
    checkpoint.check_vocabulary(&inputs.corpus.vocabulary().fingerprint())?;
    let model = pipeline::model_inputs(&inputs, &config)?;
    let report = pipeline::evaluate(&inputs, &model, &checkpoint.state, &config)?;
    let text = report.to_json();
    write(&output_dir(&config)?.join("report.json"), &text)?;
    println!("{text}");
    Ok(())
}

fn ablate(config: &RunConfig, axis: SweepAxis, grid: Option<&str>) -> Result<()> {
    let inputs = pipeline::load_inputs(config)?;
    let grid = match grid {
        Some(spec) => pipeline::parse_grid(spec)?,
        None => pipeline::default_grid(axis, inputs.corpus.num_labels()),
    };
    let rows = pipeline::ablate(&inputs, config, axis, &grid)?;
    let csv = pipeline::sweep_csv(&rows, config);
    write(&output_dir(config)?.join(format!("sweep_{axis}.csv")), &csv)?;
    print!("{csv}");
    Ok(())
}

fn stats(config: &RunConfig) -> Result<()> {
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::model_inputs(&inputs, config)?;
    let s = coverage_stats(&model.priors.counts.df, &model.priors.prior.omega, &inputs.corpus.gold_labels())?;
    let share = |n: usize, of: usize| if of == 0 { 0.0 } else { n as f64 / of as f64 };
    let value = json!({
        "num_docs": s.num_docs,
        "labeled_docs": s.labeled_docs,
        "no_marked": s.no_marked,
        "no_marked_share": share(s.no_marked, s.num_docs),
        "true_marked": s.true_marked,
        "true_marked_share": share(s.true_marked, s.labeled_docs),
        "vocabulary_size": inputs.corpus.vocab_size(),
        "seed_words_per_label": inputs.seeds.mean_set_size(),
        "config": config.effective(),
    });
    let text = serde_json::to_string_pretty(&value).expect("stats serialize");
    write(&output_dir(config)?.join("stats.json"), &text)?;
    println!("{text}");
    Ok(())
}

fn dump_priors(config: &RunConfig) -> Result<()> {
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::model_inputs(&inputs, config)?;
    let prior = &model.priors.prior;
    let mut out = serde_json::to_string(&json!({ "config": config.effective() })).expect("config serializes");
    out.push('\n');
    for d in 0..inputs.corpus.num_docs() {
        let line = json!({
            "doc": d,
            "alpha": model.alpha.row(d).to_vec(),
            "membership": prior.membership.row(d).to_vec(),
            "label_frequency": prior.label_frequency.to_vec(),
            "omega": prior.omega[d],
            "seed_counts": model.priors.counts.df.row(d).to_vec(),
        });
        out.push_str(&serde_json::to_string(&line).expect("prior row serializes"));
        out.push('\n');
    }
    let path = output_dir(config)?.join("priors.jsonl");
    write(&path, &out)?;
    println!("wrote {} documents to {}", inputs.corpus.num_docs(), path.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("WSPTM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("WSPTM_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Train => train(&cli.resolve(RunConfig::default())?),
        Command::Eval { checkpoint } => eval(cli, checkpoint),
        Command::Ablate { axis, grid } => ablate(&cli.resolve(RunConfig::default())?, *axis, grid.as_deref()),
        Command::Stats => stats(&cli.resolve(RunConfig::default())?),
        Command::DumpPriors => dump_priors(&cli.resolve(RunConfig::default())?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

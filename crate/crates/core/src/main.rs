use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tsmh::lm::NGramModel;
use tsmh::report::{self, InputLine};
use tsmh::sampler::{exact_distribution, total_variation, Chain, Method};
use tsmh::task::{validate_config, Task, TaskSpec};
use tsmh::vocab::Vocabulary;
use tsmh::{Error, ErrorClass, Result};

/// Constrained sentence sampling with tree-search Metropolis-Hastings.
///
/// Exit codes: 0 success, 1 other failure, 2 configuration or input error,
/// 3 language-model backend error.
#[derive(Parser)]
#[command(name = "tsmh", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one chain per keyword set and write traces and a report.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "tsmh")]
        method: Method,
        /// Tab-separated keywords, one set per line. Defaults to the
        /// config's keywords.
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// `ngram:<path>` or `bridge:<url>`, overriding the config.
        #[arg(long)]
        lm: Option<String>,
    },
    /// Compare two run directories input by input.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Extra n-gram model to score both runs' best sentences with.
        #[arg(long, requires = "config")]
        heldout_lm: Option<PathBuf>,
        /// Config supplying the vocabulary for --heldout-lm.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the comparison as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an n-gram model file from a corpus.
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact target distribution of a tiny task, optionally against a chain.
    Exact {
        #[arg(long)]
        config: PathBuf,
        /// Space-separated keywords; defaults to the config's.
        #[arg(long)]
        keywords: Option<String>,
        #[arg(long, default_value = "tsmh")]
        method: Method,
        /// Chain steps after burn-in; 0 prints the distribution only.
        #[arg(long, default_value_t = 0)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        top: usize,
        #[arg(long)]
        lm: Option<String>,
    },
    /// Recompute a run report from its traces.
    VerifyReport { dir: PathBuf },
    /// Validate a config and print the resolved spec as JSON.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_spec(config: &Path, lm: Option<&str>) -> Result<TaskSpec> {
    let mut spec = validate_config(config)?;
    if let Some(lm) = lm {
        spec.lm.apply_override(lm)?;
        spec.validate()?;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Generate {
            config,
            method,
            inputs,
            seed,
            out,
            lm,
        } => {
            let spec = load_spec(&config, lm.as_deref())?;
            let seed = seed.unwrap_or(spec.chain.seed);
            let inputs = match inputs {
                Some(p) => report::read_inputs(&p)?,
                None if spec.task.keywords.is_empty() => {
                    return Err(Error::Config("no --inputs given and task.keywords is empty".to_string()))
                }
                None => vec![InputLine {
                    line: 1,
                    keywords: spec.task.keywords.clone(),
                }],
            };
            let task = Task::build(spec)?;
            let r = report::generate(&task, method, seed, &inputs, &out)?;
            print!("{}", r.summary());
        }
        Cmd::Compare {
            a,
            b,
            heldout_lm,
            config,
            out,
        } => {
            let ra = report::RunReport::load(&a)?;
            let rb = report::RunReport::load(&b)?;
            let mut c = report::compare(&ra, &rb)?;
            if let (Some(model), Some(config)) = (heldout_lm, config) {
                let spec = validate_config(&config)?;
                let vocab = Vocabulary::load(&spec.task.vocab)?;
                let lm = NGramModel::load(&model, &vocab)?;
                c.heldout = Some(report::heldout_scores(&ra, &rb, &lm, &vocab, spec.task.max_len)?);
            }
            print!("{}", c.table());
            if let Some(out) = out {
                let json = serde_json::to_string_pretty(&c).expect("comparison serializes");
                fs::write(&out, json + "\n").map_err(|e| Error::io(&out, e))?;
            }
        }
        Cmd::TrainLm {
            corpus,
            vocab,
            order,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let m = NGramModel::train(&corpus, order, &vocab)?;
            m.save(&out)?;
            println!("wrote order-{order} model to {}", out.display());
        }
        Cmd::Exact {
            config,
            keywords,
            method,
            steps,
            burn_in,
            seed,
            top,
            lm,
        } => {
            let spec = load_spec(&config, lm.as_deref())?;
            let seed = seed.unwrap_or(spec.chain.seed);
            let kws: Vec<String> = match keywords {
                Some(k) => k.split_whitespace().map(str::to_string).collect(),
                None => spec.task.keywords.clone(),
            };
            let task = Task::build(spec)?;
            let p = task.prepare(&kws)?;
            let exact = exact_distribution(&p.target)?;
            let mut ranked: Vec<_> = exact.probs.iter().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
            println!("{} sentences, log Z = {:.6}", exact.len(), exact.log_z);
            for (x, prob) in ranked.into_iter().take(top) {
                println!("{prob:.6}  {}", task.vocab.join(x));
            }
            if steps > 0 {
                let mut cfg = task.method_config(method);
                cfg.seed = seed;
                let mut chain = Chain::new(&p.target, &p.init, &cfg)?;
                let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
                for i in 0..burn_in + steps {
                    chain.step()?;
                    if i >= burn_in {
                        *counts.entry(chain.current().to_vec()).or_default() += 1;
                    }
                }
                println!("{method}: TV distance after {steps} steps = {:.5}", total_variation(&exact, &counts));
            }
        }
        Cmd::VerifyReport { dir } => {
            let problems = report::verify_report(&dir)?;
            if !problems.is_empty() {
                for p in &problems {
                    eprintln!("{p}");
                }
                return Err(Error::Invalid(format!("{} mismatches", problems.len())));
            }
            println!("report verified");
        }
        Cmd::Validate { config } => {
            let spec = validate_config(&config)?;
            println!("{}", serde_json::to_string_pretty(&spec).expect("spec serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Backend => 3,
                ErrorClass::Other => 1,
            })
        }
    }
}


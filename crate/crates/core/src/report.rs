//! Experiment orchestration over many keyword inputs, run reports, and
//! paired comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::lm::LanguageModel;
use crate::sampler::{best_index, run_chain, ChainResult, Method, StepRecord};
use crate::task::Task;
use crate::vocab::Vocabulary;

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "report.txt";
pub const BEST_FILE: &str = "best.txt";
pub const CSV_FILE: &str = "results.csv";
pub const TRACE_DIR: &str = "traces";

/// One keyword set from an inputs file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputLine {
    /// 1-based line number in the inputs file.
    pub line: usize,
    pub keywords: Vec<String>,
}

/// Tab-separated keywords, one set per line. Blank lines are skipped.
pub fn parse_inputs(text: &str) -> Vec<InputLine> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| InputLine {
            line: i + 1,
            keywords: l.split('\t').map(|k| k.trim().to_string()).filter(|k| !k.is_empty()).collect(),
        })
        .collect()
}

pub fn read_inputs(path: &Path) -> Result<Vec<InputLine>> {
    Ok(parse_inputs(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputResult {
    pub line: usize,
    pub keywords: Vec<String>,
    /// Trace path relative to the output directory.
    pub trace: String,
    pub steps: usize,
    pub best_sentence: String,
    pub best_step: usize,
    pub best_log_pi: f64,
    pub best_constraint_error: u32,
    /// The best sentence satisfies every hard constraint.
    pub valid: bool,
    /// Fraction of chain states with no violation.
    pub valid_fraction: f64,
    pub mean_log_pi: f64,
    pub acceptance_rate: f64,
}

impl InputResult {
    fn from_chain(line: usize, keywords: Vec<String>, trace: String, r: &ChainResult) -> Self {
        let best = r.best_record();
        InputResult {
            line,
            keywords,
            trace,
            steps: r.history.len(),
            best_sentence: best.sentence.clone(),
            best_step: best.step,
            best_log_pi: best.log_pi,
            best_constraint_error: best.constraint_error,
            valid: best.constraint_error == 0,
            valid_fraction: r.valid_fraction(),
            mean_log_pi: r.mean_log_pi(),
            acceptance_rate: r.acceptance_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedInput {
    pub line: usize,
    pub keywords: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub inputs: usize,
    /// Percentage of inputs whose best sentence is valid.
    pub valid_pct: f64,
    pub mean_best_log_pi: f64,
    pub mean_log_pi: f64,
    pub mean_acceptance_rate: f64,
    pub mean_valid_fraction: f64,
}

impl Aggregate {
    pub fn of(results: &[InputResult]) -> Self {
        let n = results.len();
        let mean = |f: &dyn Fn(&InputResult) -> f64| {
            if n == 0 {
                0.0
            } else {
                results.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Aggregate {
            inputs: n,
            valid_pct: 100.0 * mean(&|r| if r.valid { 1.0 } else { 0.0 }),
            mean_best_log_pi: mean(&|r| r.best_log_pi),
            mean_log_pi: mean(&|r| r.mean_log_pi),
            mean_acceptance_rate: mean(&|r| r.acceptance_rate),
            mean_valid_fraction: mean(&|r| r.valid_fraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub seed: u64,
    pub config_hash: String,
    pub k: usize,
    pub steps: usize,
    pub beta: f64,
    pub lm: String,
    pub results: Vec<InputResult>,
    pub skipped: Vec<SkippedInput>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = report_path(dir);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn summary(&self) -> String {
        let a = &self.aggregate;
        let mut s = String::new();
        let _ = writeln!(s, "method        {}", self.method);
        let _ = writeln!(s, "seed          {}", self.seed);
        let _ = writeln!(s, "config hash   {}", self.config_hash);
        let _ = writeln!(s, "lm            {}", self.lm);
        let _ = writeln!(s, "steps         {} (k = {}, beta = {:e})", self.steps, self.k, self.beta);
        let _ = writeln!(s, "inputs        {} run, {} skipped", a.inputs, self.skipped.len());
        let _ = writeln!(s, "valid %       {:.2}", a.valid_pct);
        let _ = writeln!(s, "best log pi   {:.4}", a.mean_best_log_pi);
        let _ = writeln!(s, "mean log pi   {:.4}", a.mean_log_pi);
        let _ = writeln!(s, "accept %      {:.2}", 100.0 * a.mean_acceptance_rate);
        s.push('\n');
        for r in &self.results {
            let mark = if r.valid { "ok " } else { "bad" };
            let _ = writeln!(s, "{:>4} {mark} {:>10.3}  {}", r.line, r.best_log_pi, r.best_sentence);
        }
        for k in &self.skipped {
            let _ = writeln!(s, "{:>4} skipped ({}): {}", k.line, k.reason, k.keywords.join(" "));
        }
        s
    }
}

pub fn report_path(dir: &Path) -> PathBuf {
    dir.join(REPORT_FILE)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn lm_label(task: &Task) -> String {
    let lm = &task.spec.lm;
    match lm.backend {
        crate::task::LmBackend::Bridge => format!("bridge:{}", lm.url.as_deref().unwrap_or("")),
        crate::task::LmBackend::Ngram => match (&lm.model, &lm.corpus) {
            (Some(m), _) => format!("ngram:{}", m.display()),
            (None, Some(c)) => format!("ngram(order {}) trained on {}", lm.order, c.display()),
            _ => "ngram".to_string(),
        },
    }
}

enum Outcome {
    Ran(InputResult, String),
    Skipped(SkippedInput),
}

/// Runs one chain per input, in parallel, and writes traces, best
/// sentences, the CSV export, and the report into `out`.
///
/// Input `i` (0-based, in file order) uses generator stream `i`, so results
/// do not depend on scheduling. Inputs with out-of-vocabulary keywords are
/// skipped and listed in the report.
pub fn generate(task: &Task, method: Method, seed: u64, inputs: &[InputLine], out: &Path) -> Result<RunReport> {
    let mut cfg = task.method_config(method);
    cfg.seed = seed;
    cfg.validate()?;
    let traces = out.join(TRACE_DIR);
    fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;

    let outcomes = inputs
        .par_iter()
        .enumerate()
        .map(|(i, input)| -> Result<Outcome> {
            let skip = |reason: String| {
                Ok(Outcome::Skipped(SkippedInput {
                    line: input.line,
                    keywords: input.keywords.clone(),
                    reason,
                }))
            };
            if input.keywords.is_empty() {
                return skip("no keywords".to_string());
            }
            let prepared = match task.prepare(&input.keywords) {
                Ok(p) => p,
                Err(e @ (Error::OutOfVocabulary(_) | Error::SentenceLength { .. })) => return skip(e.to_string()),
                Err(e) => return Err(e),
            };
            let mut c = cfg;
            c.stream = i as u64;
            let r = run_chain(&prepared.target, &prepared.init, &c)?;
            let trace = format!("{TRACE_DIR}/{:04}.jsonl", input.line);
            let result = InputResult::from_chain(input.line, prepared.keywords, trace, &r);
            Ok(Outcome::Ran(result, r.to_jsonl()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    let mut best = String::new();
    for o in outcomes {
        match o {
            Outcome::Ran(r, jsonl) => {
                write(&out.join(&r.trace), &jsonl)?;
                best.push_str(&r.best_sentence);
                best.push('\n');
                results.push(r);
            }
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    let report = RunReport {
        method,
        seed,
        config_hash: task.spec.hash(),
        k: cfg.k,
        steps: cfg.steps,
        beta: task.spec.chain.beta,
        lm: lm_label(task),
        aggregate: Aggregate::of(&results),
        results,
        skipped,
    };
    write(&out.join(BEST_FILE), &best)?;
    write(&out.join(CSV_FILE), &to_csv(&report)?)?;
    write(&out.join(SUMMARY_FILE), &report.summary())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&report_path(out), &(json + "\n"))?;
    Ok(report)
}

pub fn to_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record([
        "line",
        "keywords",
        "best_sentence",
        "best_log_pi",
        "valid",
        "valid_fraction",
        "mean_log_pi",
        "acceptance_rate",
    ])
    .map_err(io)?;
    for r in &report.results {
        w.write_record([
            r.line.to_string(),
            r.keywords.join(" "),
            r.best_sentence.clone(),
            r.best_log_pi.to_string(),
            r.valid.to_string(),
            r.valid_fraction.to_string(),
            r.mean_log_pi.to_string(),
            r.acceptance_rate.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Invalid(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Recomputes every number in the report from the traces and lists the
/// fields that differ. An empty list means the report checks out.
pub fn verify_report(dir: &Path) -> Result<Vec<String>> {
    let report = RunReport::load(dir)?;
    let mut problems = Vec::new();
    let mut recomputed = Vec::with_capacity(report.results.len());
    for r in &report.results {
        let history = read_trace(&dir.join(&r.trace))?;
        if history.is_empty() {
            problems.push(format!("line {}: empty trace", r.line));
            continue;
        }
        if history.iter().enumerate().any(|(i, s)| s.step != i + 1) {
            problems.push(format!("line {}: trace steps are not 1..n", r.line));
        }
        let best = best_index(&history);
        let chain = ChainResult { history, best };
        let again = InputResult::from_chain(r.line, r.keywords.clone(), r.trace.clone(), &chain);
        diff_result(r, &again, &mut problems);
        recomputed.push(again);
    }
    if report.results.iter().any(|r| r.steps != report.steps) {
        problems.push("a trace length differs from the configured steps".to_string());
    }
    let agg = Aggregate::of(&recomputed);
    if agg != report.aggregate {
        problems.push(format!("aggregate: reported {:?}, recomputed {:?}", report.aggregate, agg));
    }
    let best_path = dir.join(BEST_FILE);
    let best = fs::read_to_string(&best_path).map_err(|e| Error::io(&best_path, e))?;
    let expected: Vec<&str> = report.results.iter().map(|r| r.best_sentence.as_str()).collect();
    if best.lines().collect::<Vec<_>>() != expected {
        problems.push(format!("{BEST_FILE}: does not match the report"));
    }
    Ok(problems)
}

fn diff_result(a: &InputResult, b: &InputResult, problems: &mut Vec<String>) {
    macro_rules! check {
        ($($f:ident),*) => {$(
            if a.$f != b.$f {
                problems.push(format!(
                    "line {}: {} reported {:?}, recomputed {:?}",
                    a.line, stringify!($f), a.$f, b.$f
                ));
            }
        )*};
    }
    check!(
        steps,
        best_sentence,
        best_step,
        best_log_pi,
        best_constraint_error,
        valid,
        valid_fraction,
        mean_log_pi,
        acceptance_rate
    );
}

/// Two-sided sign test: probability of a split at least as lopsided as
/// `wins` against `losses` under a fair coin. Ties are dropped beforehand.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).expect("valid binomial");
    (2.0 * b.cdf(wins.min(losses) as u64)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedTest {
    /// Inputs where A is better.
    pub wins: usize,
    /// Inputs where B is better.
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

impl PairedTest {
    fn of(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut wins, mut losses, mut ties) = (0, 0, 0);
        for (a, b) in pairs {
            if a > b {
                wins += 1;
            } else if a < b {
                losses += 1;
            } else {
                ties += 1;
            }
        }
        PairedTest {
            wins,
            losses,
            ties,
            p_value: sign_test(wins, losses),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub a_aggregate: Aggregate,
    pub b_aggregate: Aggregate,
    pub valid: PairedTest,
    pub acceptance: PairedTest,
    /// Mean score of the best sentences under a second language model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout: Option<(f64, f64)>,
}

/// Pairs two reports input by input. Both must cover the same inputs.
pub fn compare(a: &RunReport, b: &RunReport) -> Result<Comparison> {
    let key = |r: &RunReport| -> Vec<(usize, Vec<String>)> {
        r.results.iter().map(|x| (x.line, x.keywords.clone())).collect()
    };
    if key(a) != key(b) {
        return Err(Error::Invalid("reports cover different inputs".to_string()));
    }
    let pairs = || a.results.iter().zip(&b.results);
    let ind = |v: bool| if v { 1.0 } else { 0.0 };
    Ok(Comparison {
        a: a.method.to_string(),
        b: b.method.to_string(),
        a_aggregate: a.aggregate.clone(),
        b_aggregate: b.aggregate.clone(),
        valid: PairedTest::of(pairs().map(|(x, y)| (ind(x.valid), ind(y.valid)))),
        acceptance: PairedTest::of(pairs().map(|(x, y)| (x.acceptance_rate, y.acceptance_rate))),
        heldout: None,
    })
}

/// Mean held-out score of each report's best sentences.
pub fn heldout_scores(
    a: &RunReport,
    b: &RunReport,
    lm: &dyn LanguageModel,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(f64, f64)> {
    let mean = |r: &RunReport| -> Result<f64> {
        let mut total = 0.0;
        for x in &r.results {
            let s = vocab.tokenize(&x.best_sentence, max_len)?;
            total += lm.sentence_logscore(s.tokens())?;
        }
        Ok(if r.results.is_empty() { 0.0 } else { total / r.results.len() as f64 })
    };
    Ok((mean(a)?, mean(b)?))
}

impl Comparison {
    pub fn table(&self) -> String {
        let (a, b) = (&self.a_aggregate, &self.b_aggregate);
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>12}{:>12}{:>12}", "metric", self.a, self.b, "delta");
        let mut row = |name: &str, x: f64, y: f64| {
            let _ = writeln!(s, "{name:<16}{x:>12.4}{y:>12.4}{:>12.4}", x - y);
        };
        row("valid %", a.valid_pct, b.valid_pct);
        row("best log pi", a.mean_best_log_pi, b.mean_best_log_pi);
        row("mean log pi", a.mean_log_pi, b.mean_log_pi);
        row("accept %", 100.0 * a.mean_acceptance_rate, 100.0 * b.mean_acceptance_rate);
        if let Some((x, y)) = self.heldout {
            row("heldout lm", x, y);
        }
        for (name, t) in [("valid", &self.valid), ("acceptance", &self.acceptance)] {
            let _ = writeln!(
                s,
                "sign test ({name}): {} better {}, {} worse, {} tied, p = {:.3e}",
                self.a, t.wins, t.losses, t.ties, t.p_value
            );
        }
        s
    }
}

//! Metropolis-Hastings chains over sentences.

pub mod exact;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proposal::{log_acceptance, CgmhOps, CgmhProposer, ProposalRecord, Proposer, TsmhProposer};
use crate::target::{FitCache, Target};
use crate::vocab::{Sentence, TokenId};

pub use exact::{exact_distribution, total_variation, ExactDistribution};

pub const DEFAULT_TSMH_STEPS: usize = 100;
pub const DEFAULT_CGMH_STEPS: usize = 300;

// The fit cache is dropped once it holds this many sentences.
const CACHE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tsmh,
    Cgmh,
}

impl Method {
    pub fn default_steps(self) -> usize {
        match self {
            Method::Tsmh => DEFAULT_TSMH_STEPS,
            Method::Cgmh => DEFAULT_CGMH_STEPS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tsmh => "tsmh",
            Method::Cgmh => "cgmh",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsmh" => Ok(Method::Tsmh),
            "cgmh" => Ok(Method::Cgmh),
            other => Err(Error::Config(format!("unknown method `{other}` (tsmh or cgmh)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub method: Method,
    pub k: usize,
    pub steps: usize,
    pub seed: u64,
    /// Stream of the seeded generator; distinct inputs use distinct streams.
    pub stream: u64,
    pub cgmh_ops: CgmhOps,
}

impl ChainConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        ChainConfig {
            method,
            k: crate::proposal::tsmh::DEFAULT_K,
            steps: method.default_steps(),
            seed,
            stream: 0,
            cgmh_ops: CgmhOps::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".to_string()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".to_string()));
        }
        self.cgmh_ops.validate()
    }

    pub fn proposer(&self) -> Box<dyn Proposer> {
        match self.method {
            Method::Tsmh => Box::new(TsmhProposer::new(self.k)),
            Method::Cgmh => Box::new(CgmhProposer::new(self.cgmh_ops)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One line of the per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub sentence: String,
    pub log_pi: f64,
    pub accepted: bool,
    /// `null` when the acceptance probability is zero.
    #[serde(rename = "log_A")]
    pub log_a: Option<f64>,
    pub constraint_error: u32,
}

/// A running chain.
pub struct Chain<'a> {
    target: &'a Target,
    proposer: Box<dyn Proposer>,
    current: Vec<TokenId>,
    log_pi: f64,
    error: u32,
    rng: ChaCha8Rng,
    cache: FitCache,
    step: usize,
}

/// Outcome of one step, with the proposal for inspection.
pub struct StepOutcome {
    pub record: StepRecord,
    pub proposal: ProposalRecord,
    pub log_pi_star: f64,
    pub log_a: f64,
}

impl<'a> Chain<'a> {
    pub fn new(target: &'a Target, init: &Sentence, config: &ChainConfig) -> Result<Self> {
        config.validate()?;
        if init.len() > target.max_len {
            return Err(Error::SentenceLength {
                len: init.len(),
                max_len: target.max_len,
            });
        }
        let current = init.tokens().to_vec();
        let log_pi = target.log_pi(&current)?;
        let error = target.constraint_error(&current);
        Ok(Chain {
            target,
            proposer: config.proposer(),
            current,
            log_pi,
            error,
            rng: config.rng(),
            cache: FitCache::new(),
            step: 0,
        })
    }

    pub fn current(&self) -> &[TokenId] {
        &self.current
    }

    pub fn log_pi(&self) -> f64 {
        self.log_pi
    }

    /// Proposes, computes `A` in log space, and accepts when `ln U < ln A`.
    /// `U` is always drawn so the generator advances identically whether
    /// or not the move can be accepted.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.cache.len() > CACHE_LIMIT {
            self.cache.clear();
        }
        let prop = self
            .proposer
            .propose(self.target, &self.current, &mut self.cache, &mut self.rng)?;
        let log_pi_star = self.target.log_pi(&prop.x_star)?;
        let log_a = log_acceptance(self.log_pi, log_pi_star, prop.log_q_forward, prop.log_q_reverse);
        let u: f64 = self.rng.random();
        let accepted = u.ln() < log_a;
        if accepted {
            self.current = prop.x_star.clone();
            self.log_pi = log_pi_star;
            self.error = self.target.constraint_error(&self.current);
        }
        self.step += 1;
        let record = StepRecord {
            step: self.step,
            sentence: self.target.vocab.join(&self.current),
            log_pi: self.log_pi,
            accepted,
            log_a: (log_a > f64::NEG_INFINITY).then_some(log_a),
            constraint_error: self.error,
        };
        Ok(StepOutcome {
            record,
            proposal: prop,
            log_pi_star,
            log_a,
        })
    }
}

/// A finished chain: its trace and summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainResult {
    pub history: Vec<StepRecord>,
    /// Index into `history` of the highest `log_pi` (first on ties).
    pub best: usize,
}

impl ChainResult {
    pub fn best_record(&self) -> &StepRecord {
        &self.history[self.best]
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.history.iter().filter(|r| r.accepted).count() as f64 / self.history.len() as f64
    }

    /// Fraction of recorded states with no violated constraint.
    pub fn valid_fraction(&self) -> f64 {
        self.history.iter().filter(|r| r.constraint_error == 0).count() as f64 / self.history.len() as f64
    }

    pub fn mean_log_pi(&self) -> f64 {
        self.history.iter().map(|r| r.log_pi).sum::<f64>() / self.history.len() as f64
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.history {
            out.push_str(&serde_json::to_string(r).expect("step records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Index of the first maximum `log_pi`.
pub fn best_index(history: &[StepRecord]) -> usize {
    let mut best = 0;
    for (i, r) in history.iter().enumerate() {
        if r.log_pi > history[best].log_pi {
            best = i;
        }
    }
    best
}

pub fn run_chain(target: &Target, init: &Sentence, config: &ChainConfig) -> Result<ChainResult> {
    let mut chain = Chain::new(target, init, config)?;
    let mut history = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        history.push(chain.step()?.record);
    }
    let best = best_index(&history);
    Ok(ChainResult { history, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::UniformLm;
    use crate::logic::interrogative_constraints;
    use crate::partition::{CategoryPartition, CategorySpec};
    use crate::vocab::Vocabulary;
    use std::sync::Arc;

    fn target() -> Target {
        let v = Vocabulary::from_words(["what", "is", "was", "paris", "big"]).unwrap();
        let spec = CategorySpec::from_json(
            r#"{"categories":[{"name":"QWH","members":["what"]},
                {"name":"AUX","members":["is","was"]},{"name":"OTH","residual":true}]}"#,
        )
        .unwrap();
        let p = CategoryPartition::build(&spec, &v).unwrap();
        let c = interrogative_constraints(&p, false, 6, 0.01).unwrap();
        Target::new(Arc::new(v), Arc::new(p), Arc::new(c), Arc::new(UniformLm::new(5)), 6)
    }

    #[test]
    fn log_pi_adds_beta_per_violation() {
        let t = target();
        let ok = t.vocab.ids_of(&["what", "is", "paris"]).unwrap();
        let one = t.vocab.ids_of(&["what", "paris", "big"]).unwrap();
        let lm = -3.0 * 5f64.ln();
        assert!((t.log_pi(&ok).unwrap() - lm).abs() < 1e-12);
        assert!((t.log_pi(&one).unwrap() - (lm + 0.01f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn one_step_history() {
        let t = target();
        let init = t.vocab.tokenize("what is paris", 6).unwrap();
        let mut cfg = ChainConfig::new(Method::Tsmh, 4);
        cfg.steps = 1;
        let r = run_chain(&t, &init, &cfg).unwrap();
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.history[0].step, 1);
    }

    #[test]
    fn same_seed_same_trace() {
        let t = target();
        let init = t.vocab.tokenize("paris big", 6).unwrap();
        for m in [Method::Tsmh, Method::Cgmh] {
            let mut cfg = ChainConfig::new(m, 11);
            cfg.steps = 40;
            let a = run_chain(&t, &init, &cfg).unwrap().to_jsonl();
            let b = run_chain(&t, &init, &cfg).unwrap().to_jsonl();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let t = target();
        let init = t.vocab.tokenize("paris", 6).unwrap();
        let mut cfg = ChainConfig::new(Method::Cgmh, 0);
        cfg.steps = 0;
        assert!(matches!(run_chain(&t, &init, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn jsonl_field_names() {
        let r = StepRecord {
            step: 1,
            sentence: "a".into(),
            log_pi: -1.5,
            accepted: false,
            log_a: None,
            constraint_error: 2,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"step":1,"sentence":"a","log_pi":-1.5,"accepted":false,"log_A":null,"constraint_error":2}"#
        );
    }

    #[test]
    fn best_is_first_maximum() {
        let mk = |lp| StepRecord {
            step: 0,
            sentence: String::new(),
            log_pi: lp,
            accepted: true,
            log_a: Some(0.0),
            constraint_error: 0,
        };
        assert_eq!(best_index(&[mk(-3.0), mk(-1.0), mk(-1.0), mk(-2.0)]), 1);
    }
}

//! Language model backends.
//!
//! A backend provides an unnormalized sentence score (a pseudo-log-likelihood:
//! the sum over positions of `log P(x_t | x_{-t})`) and conditional fill
//! distributions at one masked position, normalized over a candidate set.

pub mod bridge;
pub mod ngram;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

pub use bridge::BridgeClient;
pub use ngram::NGramModel;

pub trait LanguageModel: Send + Sync {
    /// Pseudo-log-likelihood of a complete sentence.
    fn sentence_logscore(&self, tokens: &[TokenId]) -> Result<f64>;

    /// Log-probabilities of each candidate at `target`, normalized over
    /// `candidates`. Other positions holding the mask id are unknown
    /// (placeholders not yet filled) and must not be conditioned on.
    fn fill_logprobs(&self, tokens: &[TokenId], target: usize, candidates: &[TokenId])
        -> Result<Vec<f64>>;

    fn describe(&self) -> String;
}

/// Every word equally likely: `P(x_t | x_{-t}) = 1 / n_words`.
#[derive(Debug, Clone, Copy)]
pub struct UniformLm {
    n_words: usize,
}

impl UniformLm {
    pub fn new(n_words: usize) -> Self {
        assert!(n_words > 0);
        UniformLm { n_words }
    }
}

impl LanguageModel for UniformLm {
    fn sentence_logscore(&self, tokens: &[TokenId]) -> Result<f64> {
        Ok(-(tokens.len() as f64) * (self.n_words as f64).ln())
    }

    fn fill_logprobs(&self, _tokens: &[TokenId], _target: usize, candidates: &[TokenId]) -> Result<Vec<f64>> {
        if candidates.is_empty() {
            return Err(Error::Backend("empty candidate set".to_string()));
        }
        let lp = -(candidates.len() as f64).ln();
        Ok(vec![lp; candidates.len()])
    }

    fn describe(&self) -> String {
        format!("uniform({})", self.n_words)
    }
}

/// `log Σ exp(x_i)`, stable; `-inf` for an empty or all `-inf` slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights in place so they sum to one in probability space.
pub fn log_normalize(xs: &mut [f64]) {
    let z = logsumexp(xs);
    for x in xs.iter_mut() {
        *x -= z;
    }
}

//! Exhaustive normalization of `π` over a tiny sentence space.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lm::logsumexp;
use crate::target::Target;
use crate::vocab::TokenId;

pub const MAX_EXACT_WORDS: usize = 8;
pub const MAX_EXACT_LEN: usize = 4;

/// `π` normalized over every sentence of length `1..=max_len`.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub probs: BTreeMap<Vec<TokenId>, f64>,
    pub log_z: f64,
}

impl ExactDistribution {
    pub fn prob(&self, x: &[TokenId]) -> f64 {
        self.probs.get(x).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Every sentence over the target's words up to its `max_len`.
pub fn all_sentences(target: &Target) -> Result<Vec<Vec<TokenId>>> {
    let words = target.vocab.word_ids();
    if words.len() > MAX_EXACT_WORDS || target.max_len > MAX_EXACT_LEN {
        return Err(Error::Invalid(format!(
            "exact enumeration is limited to {MAX_EXACT_WORDS} words and length {MAX_EXACT_LEN}, got {} and {}",
            words.len(),
            target.max_len
        )));
    }
    let mut out = Vec::new();
    let mut layer: Vec<Vec<TokenId>> = vec![Vec::new()];
    for _ in 0..target.max_len {
        let mut next = Vec::with_capacity(layer.len() * words.len());
        for s in &layer {
            for &w in &words {
                let mut t = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    Ok(out)
}

pub fn exact_distribution(target: &Target) -> Result<ExactDistribution> {
    let space = all_sentences(target)?;
    let logs = space
        .iter()
        .map(|x| target.log_pi(x))
        .collect::<Result<Vec<f64>>>()?;
    let log_z = logsumexp(&logs);
    let probs = space
        .into_iter()
        .zip(logs)
        .map(|(x, l)| (x, (l - log_z).exp()))
        .collect();
    Ok(ExactDistribution { probs, log_z })
}

/// `½ Σ |p − q|` between an exact distribution and empirical counts.
pub fn total_variation(exact: &ExactDistribution, counts: &BTreeMap<Vec<TokenId>, u64>) -> f64 {
    let n: u64 = counts.values().sum();
    let mut tv = 0.0;
    for (x, &p) in &exact.probs {
        let q = counts.get(x).copied().unwrap_or(0) as f64 / n as f64;
        tv += (p - q).abs();
    }
    for (x, &c) in counts {
        if !exact.probs.contains_key(x) {
            tv += c as f64 / n as f64;
        }
    }
    tv / 2.0
}

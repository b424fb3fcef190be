//! Client for an external masked-LM service speaking `tsmh-bridge/1`.
//!
//! Requests are JSON bodies POSTed to `{base}/query`; the `op` field selects
//! the operation. `GET {base}/healthz` reports the model id and protocol
//! version. Whole words cross the wire; subword handling is the server's.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::LanguageModel;
use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

pub const PROTOCOL: &str = "tsmh-bridge/1";
pub const TOKEN_ENV: &str = "TSMH_BRIDGE_TOKEN";

/// Tolerance on `Σ exp(log_probs)` for a fill response.
pub const FILL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum BridgeRequest {
    Score {
        tokens: Vec<String>,
    },
    Fill {
        tokens: Vec<String>,
        mask_index: usize,
        candidates: Vec<String>,
    },
    Sentiment {
        tokens: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub log_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillResponse {
    pub log_probs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentResponse {
    pub positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub model: String,
    pub protocol: String,
}

pub struct BridgeClient {
    base: String,
    agent: Agent,
    token: Option<String>,
    vocab: Arc<Vocabulary>,
    model: String,
}

impl BridgeClient {
    /// Connects and checks `/healthz`. The bearer token, if any, comes from
    /// `TSMH_BRIDGE_TOKEN`.
    pub fn connect(base_url: &str, vocab: Arc<Vocabulary>) -> Result<Self> {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Self::connect_with_token(base_url, vocab, token)
    }

    pub fn connect_with_token(base_url: &str, vocab: Arc<Vocabulary>, token: Option<String>) -> Result<Self> {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        let mut client = BridgeClient {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            token,
            vocab,
            model: String::new(),
        };
        let health = client.health()?;
        if health.protocol != PROTOCOL {
            return Err(Error::Backend(format!(
                "bridge speaks {}, expected {PROTOCOL}",
                health.protocol
            )));
        }
        client.model = health.model;
        Ok(client)
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn health(&self) -> Result<Health> {
        let url = format!("{}/healthz", self.base);
        let mut req = self.agent.get(&url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let resp = req.call().map_err(|e| unreachable_err(&url, e))?;
        read_json(resp, &url)
    }

    fn query<T: for<'de> Deserialize<'de>>(&self, body: &BridgeRequest) -> Result<T> {
        let url = format!("{}/query", self.base);
        let mut req = self.agent.post(&url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let resp = req.send_json(body).map_err(|e| unreachable_err(&url, e))?;
        read_json(resp, &url)
    }

    fn words(&self, tokens: &[TokenId]) -> Vec<String> {
        tokens.iter().map(|&t| self.vocab.word(t).to_string()).collect()
    }

    pub fn score_words(&self, tokens: Vec<String>) -> Result<f64> {
        let r: ScoreResponse = self.query(&BridgeRequest::Score { tokens })?;
        if !r.log_score.is_finite() {
            return Err(Error::Backend(format!("non-finite log_score {}", r.log_score)));
        }
        Ok(r.log_score)
    }

    /// Fill distribution keyed by candidate, checked for exact coverage and
    /// normalization, then renormalized to absorb rounding.
    pub fn fill_words(&self, tokens: Vec<String>, mask_index: usize, candidates: &[String]) -> Result<Vec<f64>> {
        let req = BridgeRequest::Fill {
            tokens,
            mask_index,
            candidates: candidates.to_vec(),
        };
        let r: FillResponse = self.query(&req)?;
        let wanted: HashSet<&str> = candidates.iter().map(|s| s.as_str()).collect();
        let got: HashSet<&str> = r.log_probs.keys().map(|s| s.as_str()).collect();
        if wanted != got {
            return Err(Error::Backend(
                "fill response does not cover exactly the requested candidates".to_string(),
            ));
        }
        let mut lp: Vec<f64> = candidates.iter().map(|c| r.log_probs[c]).collect();
        if lp.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::Backend("fill response holds invalid log-probabilities".to_string()));
        }
        let mass: f64 = lp.iter().map(|x| x.exp()).sum();
        if (mass - 1.0).abs() > FILL_TOLERANCE {
            return Err(Error::Backend(format!("fill response sums to {mass}, not 1")));
        }
        super::log_normalize(&mut lp);
        Ok(lp)
    }

    pub fn sentiment<S: AsRef<str>>(&self, words: &[S]) -> Result<f64> {
        let tokens = words.iter().map(|w| w.as_ref().to_string()).collect();
        let r: SentimentResponse = self.query(&BridgeRequest::Sentiment { tokens })?;
        if !(0.0..=1.0).contains(&r.positive) {
            return Err(Error::Backend(format!("sentiment {} outside [0, 1]", r.positive)));
        }
        Ok(r.positive)
    }
}

impl LanguageModel for BridgeClient {
    fn sentence_logscore(&self, tokens: &[TokenId]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::Backend("cannot score an empty sentence".to_string()));
        }
        self.score_words(self.words(tokens))
    }

    fn fill_logprobs(&self, tokens: &[TokenId], target: usize, candidates: &[TokenId]) -> Result<Vec<f64>> {
        if candidates.is_empty() {
            return Err(Error::Backend("empty candidate set".to_string()));
        }
        if target >= tokens.len() {
            return Err(Error::Backend(format!(
                "mask index {target} outside sentence of length {}",
                tokens.len()
            )));
        }
        if candidates.len() == 1 {
            return Ok(vec![0.0]);
        }
        let mut words = self.words(tokens);
        words[target] = crate::vocab::MASK_TOKEN.to_string();
        self.fill_words(words, target, &self.words(candidates))
    }

    fn describe(&self) -> String {
        format!("bridge({}, model={})", self.base, self.model)
    }
}

fn unreachable_err(url: &str, e: ureq::Error) -> Error {
    Error::Backend(format!("bridge unreachable at {url}: {e}"))
}

fn read_json<T: for<'de> Deserialize<'de>>(mut resp: ureq::http::Response<ureq::Body>, url: &str) -> Result<T> {
    let status = resp.status();
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Error::Backend(format!("reading response from {url}: {e}")))?;
    if !status.is_success() {
        return Err(Error::Backend(format!("bridge returned {status}: {}", body.trim())));
    }
    serde_json::from_str(&body).map_err(|e| Error::Backend(format!("malformed response from {url}: {e}")))
}

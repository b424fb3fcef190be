//! Soft constraint scorers, each mapping a sentence into `[0, 1]`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lm::bridge::BridgeClient;
use crate::vocab::{TokenId, Vocabulary};

pub trait SoftConstraint: Send + Sync {
    /// Score in `[0, 1]`; 1 means fully satisfied.
    fn score(&self, tokens: &[TokenId]) -> Result<f64>;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl SoftConstraint for Constant {
    fn score(&self, _tokens: &[TokenId]) -> Result<f64> {
        Ok(self.0.clamp(0.0, 1.0))
    }

    fn describe(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Product of member scores. Empty product is the constant 1.
pub struct Product(Vec<Arc<dyn SoftConstraint>>);

impl SoftConstraint for Product {
    fn score(&self, tokens: &[TokenId]) -> Result<f64> {
        let mut s = 1.0;
        for m in &self.0 {
            s *= m.score(tokens)?;
        }
        Ok(s.clamp(0.0, 1.0))
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|m| m.describe()).collect();
        format!("product({})", parts.join(", "))
    }
}

pub fn compose(scorers: Vec<Arc<dyn SoftConstraint>>) -> Arc<dyn SoftConstraint> {
    match scorers.len() {
        0 => Arc::new(Constant(1.0)),
        1 => scorers.into_iter().next().unwrap(),
        _ => Arc::new(Product(scorers)),
    }
}

/// Word vectors keyed by surface form.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        for (w, v) in &vectors {
            if v.len() != dim {
                return Err(Error::Invalid(format!(
                    "embedding for `{w}` has {} dims, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("embedding for `{w}` is not finite")));
            }
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    /// word2vec text format: `word v1 .. vd` per line; an optional
    /// `count dim` header line is skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let v = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            let d = *dim.get_or_insert(v.len());
            if v.len() != d || d == 0 {
                return Err(Error::Invalid(format!(
                    "{}:{}: expected {d} dims, got {}",
                    path.display(),
                    i + 1,
                    v.len()
                )));
            }
            vectors.insert(fields[0].to_string(), v);
        }
        Self::new(dim.unwrap_or(0), vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(|v| v.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMode {
    Min,
    #[default]
    Avg,
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

/// For each embedded word of `x`, the best cosine against the embedded
/// words of `y`, mapped from `[-1, 1]` to `[0, 1]` and aggregated by
/// `mode`. Returns 0 when either side has no usable vectors.
pub fn similarity_score<S: AsRef<str>, T: AsRef<str>>(
    x: &[S],
    y: &[T],
    emb: &EmbeddingTable,
    mode: SimilarityMode,
) -> f64 {
    let ys: Vec<Vec<f64>> = y
        .iter()
        .filter_map(|w| emb.get(w.as_ref()).and_then(unit))
        .collect();
    if ys.is_empty() {
        return 0.0;
    }
    let best: Vec<f64> = x
        .iter()
        .filter_map(|w| emb.get(w.as_ref()).and_then(unit))
        .map(|xv| {
            let cos = ys
                .iter()
                .map(|yv| xv.iter().zip(yv).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            ((cos.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0)
        })
        .collect();
    if best.is_empty() {
        return 0.0;
    }
    match mode {
        SimilarityMode::Min => best.iter().copied().fold(f64::INFINITY, f64::min),
        SimilarityMode::Avg => best.iter().sum::<f64>() / best.len() as f64,
    }
}

pub struct Similarity {
    reference: Vec<String>,
    table: Arc<EmbeddingTable>,
    mode: SimilarityMode,
    vocab: Arc<Vocabulary>,
}

impl Similarity {
    pub fn new(
        reference: Vec<String>,
        table: Arc<EmbeddingTable>,
        mode: SimilarityMode,
        vocab: Arc<Vocabulary>,
    ) -> Self {
        Similarity {
            reference,
            table,
            mode,
            vocab,
        }
    }
}

impl SoftConstraint for Similarity {
    fn score(&self, tokens: &[TokenId]) -> Result<f64> {
        let words: Vec<&str> = tokens.iter().map(|&t| self.vocab.word(t)).collect();
        Ok(similarity_score(&words, &self.reference, &self.table, self.mode))
    }

    fn describe(&self) -> String {
        format!("similarity({:?}, ref=`{}`)", self.mode, self.reference.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentTarget {
    #[default]
    Positive,
    Negative,
}

/// `word<TAB>polarity` lexicon.
#[derive(Debug, Clone, Default)]
pub struct SentimentLexicon {
    polarity: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new(polarity: HashMap<String, f64>) -> Self {
        SentimentLexicon { polarity }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut polarity = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (w, p) = line.split_once('\t').ok_or_else(|| {
                Error::Invalid(format!("{}:{}: expected word<TAB>polarity", path.display(), i + 1))
            })?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|e| Error::Invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if !p.is_finite() {
                return Err(Error::Invalid(format!("{}:{}: polarity not finite", path.display(), i + 1)));
            }
            polarity.insert(w.trim().to_string(), p);
        }
        Ok(SentimentLexicon { polarity })
    }

    /// `logistic(Σ polarity / √m)`.
    pub fn positive_score<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        if words.is_empty() {
            return 0.5;
        }
        let sum: f64 = words
            .iter()
            .map(|w| self.polarity.get(w.as_ref()).copied().unwrap_or(0.0))
            .sum();
        logistic(sum / (words.len() as f64).sqrt())
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub enum SentimentBackend {
    Lexicon(SentimentLexicon),
    Bridge(Arc<BridgeClient>),
}

pub struct Sentiment {
    backend: SentimentBackend,
    target: SentimentTarget,
    vocab: Arc<Vocabulary>,
}

impl Sentiment {
    pub fn new(backend: SentimentBackend, target: SentimentTarget, vocab: Arc<Vocabulary>) -> Self {
        Sentiment {
            backend,
            target,
            vocab,
        }
    }
}

/// Sentiment score of a sentence under a backend (1 = strongly positive).
pub fn sentiment_score(words: &[&str], backend: &SentimentBackend) -> Result<f64> {
    let s = match backend {
        SentimentBackend::Lexicon(lex) => lex.positive_score(words),
        SentimentBackend::Bridge(client) => client.sentiment(words)?,
    };
    Ok(s.clamp(0.0, 1.0))
}

impl SoftConstraint for Sentiment {
    fn score(&self, tokens: &[TokenId]) -> Result<f64> {
        let words: Vec<&str> = tokens.iter().map(|&t| self.vocab.word(t)).collect();
        let s = sentiment_score(&words, &self.backend)?;
        Ok(match self.target {
            SentimentTarget::Positive => s,
            SentimentTarget::Negative => 1.0 - s,
        })
    }

    fn describe(&self) -> String {
        let backend = match self.backend {
            SentimentBackend::Lexicon(_) => "lexicon",
            SentimentBackend::Bridge(_) => "bridge",
        };
        format!("sentiment({backend}, {:?})", self.target)
    }
}

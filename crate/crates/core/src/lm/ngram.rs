//! Add-k smoothed n-gram model with backoff, scored as a pseudo-likelihood.
//!
//! `P(w | h) = (c(h,w) + k) / (c(h) + k·|U|)` at the longest history seen in
//! training, backing off to shorter histories when `c(h) = 0` and finally
//! to the unigram. `|U|` is the outcome alphabet: every word plus the
//! end-of-sentence marker, which equals the vocabulary size since the mask
//! placeholder is never an outcome.
//!
//! The conditional of one position given the rest of the sentence is the
//! product of every n-gram window covering it, normalized over the words
//! (for scoring) or over a candidate set (for filling). Windows that touch
//! another unfilled mask are dropped.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use dashmap::DashMap;
use rustc_hash::{FxBuildHasher, FxHashMap};

use super::{logsumexp, LanguageModel};
use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

const MAGIC: &[u8; 11] = b"TSMH-NGRAM\0";
const FORMAT_VERSION: u32 = 1;

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ADD_K: f64 = 0.01;
pub const MAX_ORDER: usize = 4;

const BOS: u32 = u32::MAX;
const EOS: u32 = u32::MAX - 1;
const PAST_END: u32 = u32::MAX - 2;

// Normalizer cache is cleared when it grows past this many entries.
const CACHE_LIMIT: usize = 1 << 21;

type CacheKey = [u32; 2 * (MAX_ORDER - 1)];

pub struct NGramModel {
    order: usize,
    add_k: f64,
    outcomes: f64,
    words: Vec<TokenId>,
    mask: TokenId,
    digest: [u8; 32],
    /// `grams[h]`: counts of (h+1)-grams.
    grams: Vec<FxHashMap<u128, u32>>,
    /// `histories[h]`: counts of h-token histories (h ≥ 1).
    histories: Vec<FxHashMap<u128, u32>>,
    total: u64,
    norm_cache: DashMap<CacheKey, f64, FxBuildHasher>,
}

#[inline]
fn pack(tokens: &[u32]) -> u128 {
    tokens.iter().fold(0u128, |acc, &t| (acc << 32) | t as u128)
}

impl NGramModel {
    /// A model with no counts: every conditional is uniform.
    pub fn untrained(order: usize, vocab: &Vocabulary) -> Result<Self> {
        Self::with_params(order, DEFAULT_ADD_K, vocab)
    }

    fn with_params(order: usize, add_k: f64, vocab: &Vocabulary) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::Invalid(format!("n-gram order must be in 1..={MAX_ORDER}")));
        }
        if !(add_k > 0.0 && add_k.is_finite()) {
            return Err(Error::Invalid(format!("add-k must be positive, got {add_k}")));
        }
        Ok(NGramModel {
            order,
            add_k,
            outcomes: vocab.len() as f64,
            words: vocab.word_ids(),
            mask: vocab.mask(),
            digest: vocab.digest(),
            grams: vec![FxHashMap::default(); order],
            histories: vec![FxHashMap::default(); order],
            total: 0,
            norm_cache: DashMap::with_hasher(FxBuildHasher),
        })
    }

    /// Trains on sentences given as token ids.
    pub fn from_sentences<'a, I>(sentences: I, order: usize, vocab: &Vocabulary) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [TokenId]>,
    {
        let mut m = Self::with_params(order, DEFAULT_ADD_K, vocab)?;
        let mut any = false;
        let mut y = Vec::new();
        for x in sentences {
            if x.is_empty() {
                continue;
            }
            any = true;
            y.clear();
            y.extend(std::iter::repeat_n(BOS, order - 1));
            y.extend_from_slice(x);
            y.push(EOS);
            for j in order - 1..y.len() {
                for h in 0..order {
                    *m.grams[h].entry(pack(&y[j - h..=j])).or_default() += 1;
                    if h > 0 {
                        *m.histories[h].entry(pack(&y[j - h..j])).or_default() += 1;
                    }
                }
                m.total += 1;
            }
        }
        if !any {
            return Err(Error::EmptyCorpus);
        }
        Ok(m)
    }

    /// Trains on a corpus file, one sentence per line. Every token must be
    /// in the vocabulary.
    pub fn train(corpus: impl AsRef<Path>, order: usize, vocab: &Vocabulary) -> Result<Self> {
        let path = corpus.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut sentences = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let s = vocab.tokenize(line, usize::MAX).map_err(|e| match e {
                Error::OutOfVocabulary(w) => Error::Invalid(format!(
                    "{}:{}: out-of-vocabulary tokens: {}",
                    path.display(),
                    i + 1,
                    w.join(", ")
                )),
                other => other,
            })?;
            sentences.push(s.into_tokens());
        }
        Self::from_sentences(sentences.iter().map(|s| s.as_slice()), order, vocab)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    /// `P(w | hist)`, `hist` holding up to `order - 1` most recent tokens.
    pub fn cond_prob(&self, w: u32, hist: &[u32]) -> f64 {
        let k = self.add_k;
        let denom_k = k * self.outcomes;
        let mut key = [0u32; MAX_ORDER];
        for h in (1..=hist.len().min(self.order - 1)).rev() {
            let ctx = &hist[hist.len() - h..];
            if let Some(&ch) = self.histories[h].get(&pack(ctx)) {
                key[..h].copy_from_slice(ctx);
                key[h] = w;
                let c = self.grams[h].get(&pack(&key[..=h])).copied().unwrap_or(0);
                return (c as f64 + k) / (ch as f64 + denom_k);
            }
        }
        let c = self.grams[0].get(&(w as u128)).copied().unwrap_or(0);
        (c as f64 + k) / (self.total as f64 + denom_k)
    }

    fn padded(&self, tokens: &[TokenId]) -> Vec<u32> {
        let mut y = Vec::with_capacity(tokens.len() + self.order);
        y.extend(std::iter::repeat_n(BOS, self.order - 1));
        y.extend_from_slice(tokens);
        y.push(EOS);
        y
    }

    /// Sum of log window probabilities covering `y[ti]` with `w` placed there.
    fn log_factor(&self, y: &[u32], ti: usize, w: u32) -> f64 {
        let n = self.order;
        let last = (ti + n - 1).min(y.len() - 1);
        let mut window = [0u32; MAX_ORDER];
        let mut sum = 0.0;
        'windows: for j in ti..=last {
            let start = j + 1 - n;
            for (slot, idx) in (start..=j).enumerate() {
                let v = if idx == ti { w } else { y[idx] };
                if idx != ti && v == self.mask {
                    continue 'windows;
                }
                window[slot] = v;
            }
            sum += self.cond_prob(window[n - 1], &window[..n - 1]).ln();
        }
        sum
    }

    fn log_normalizer(&self, y: &[u32], ti: usize) -> f64 {
        let n = self.order;
        let mut key: CacheKey = [0; 2 * (MAX_ORDER - 1)];
        for (slot, d) in (1..n).enumerate() {
            key[slot] = y[ti - d];
            key[n - 1 + slot] = y.get(ti + d).copied().unwrap_or(PAST_END);
        }
        if let Some(v) = self.norm_cache.get(&key) {
            return *v;
        }
        let logs: Vec<f64> = self.words.iter().map(|&w| self.log_factor(y, ti, w)).collect();
        let z = logsumexp(&logs);
        if self.norm_cache.len() > CACHE_LIMIT {
            self.norm_cache.clear();
        }
        self.norm_cache.insert(key, z);
        z
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.order as u32).to_le_bytes())?;
        w.write_all(&self.add_k.to_le_bytes())?;
        w.write_all(&self.digest)?;
        w.write_all(&self.total.to_le_bytes())?;
        for (h, table) in self.grams.iter().enumerate() {
            let mut entries: Vec<(u128, u32)> = table.iter().map(|(&k, &v)| (k, v)).collect();
            entries.sort_unstable();
            w.write_all(&(entries.len() as u64).to_le_bytes())?;
            for (key, count) in entries {
                for i in (0..=h).rev() {
                    w.write_all(&((key >> (32 * i)) as u32).to_le_bytes())?;
                }
                w.write_all(&count.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Loads a model file, refusing it when it was trained against a
    /// different vocabulary.
    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader { buf: &bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::ModelFormat("bad magic bytes".to_string()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let order = r.u32()? as usize;
        let add_k = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        if digest != vocab.digest() {
            return Err(Error::ModelFormat(
                "vocabulary hash mismatch: model was trained on a different vocabulary".to_string(),
            ));
        }
        let mut m = Self::with_params(order, add_k, vocab)?;
        m.total = r.u64()?;
        let mut toks = [0u32; MAX_ORDER];
        for h in 0..order {
            let n = r.u64()? as usize;
            let table = &mut m.grams[h];
            table.reserve(n);
            for _ in 0..n {
                for t in toks.iter_mut().take(h + 1) {
                    *t = r.u32()?;
                }
                let count = r.u32()?;
                table.insert(pack(&toks[..=h]), count);
                if h > 0 {
                    *m.histories[h].entry(pack(&toks[..h])).or_default() += count;
                }
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::ModelFormat("trailing bytes".to_string()));
        }
        Ok(m)
    }
}

impl LanguageModel for NGramModel {
    fn sentence_logscore(&self, tokens: &[TokenId]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::Backend("cannot score an empty sentence".to_string()));
        }
        let y = self.padded(tokens);
        let off = self.order - 1;
        let mut total = 0.0;
        for (t, &w) in tokens.iter().enumerate() {
            let ti = t + off;
            total += self.log_factor(&y, ti, w) - self.log_normalizer(&y, ti);
        }
        Ok(total)
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
        let y = self.padded(tokens);
        let ti = target + self.order - 1;
        let mut lp: Vec<f64> = candidates.iter().map(|&c| self.log_factor(&y, ti, c)).collect();
        super::log_normalize(&mut lp);
        Ok(lp)
    }

    fn describe(&self) -> String {
        format!("ngram(order={}, add_k={})", self.order, self.add_k)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::ModelFormat("truncated model file".to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

//! Vocabulary, tokenization, and the sentence state type.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Reserved placeholder token. Appended to every vocabulary and never
/// allowed inside a [`Sentence`].
pub const MASK_TOKEN: &str = "[MASK]";

/// Default upper bound on sentence length.
pub const DEFAULT_MAX_LEN: usize = 16;

const SPLIT_PUNCT: &[char] = &['.', '?', '!', ',', ';', ':'];

#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, TokenId>,
    mask: TokenId,
}

impl Vocabulary {
    /// Builds a vocabulary from words in order. The mask placeholder is
    /// appended when absent.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut index = HashMap::new();
        for (i, w) in words.into_iter().enumerate() {
            let w = w.as_ref().to_string();
            if index.contains_key(&w) {
                return Err(Error::DuplicateToken {
                    line: i + 1,
                    token: w,
                });
            }
            index.insert(w.clone(), out.len() as TokenId);
            out.push(w);
        }
        if out.is_empty() || (out.len() == 1 && out[0] == MASK_TOKEN) {
            return Err(Error::EmptyVocabulary);
        }
        let mask = match index.get(MASK_TOKEN) {
            Some(&id) => id,
            None => {
                let id = out.len() as TokenId;
                index.insert(MASK_TOKEN.to_string(), id);
                out.push(MASK_TOKEN.to_string());
                id
            }
        };
        Ok(Vocabulary {
            words: out,
            index,
            mask,
        })
    }

    /// Loads a UTF-8 file with one token per line. Blank lines are skipped
    /// but still count toward line numbers in error messages.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        let mut seen = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let w = line.trim();
            if w.is_empty() {
                continue;
            }
            if seen.insert(w.to_string(), lineno + 1).is_some() {
                return Err(Error::DuplicateToken {
                    line: lineno + 1,
                    token: w.to_string(),
                });
            }
            words.push(w.to_string());
        }
        Self::from_words(words)
    }

    /// Serializes the non-mask tokens one per line, in id order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, w) in self.words.iter().enumerate() {
            if id as TokenId == self.mask {
                continue;
            }
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    /// Number of entries including the mask placeholder.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of real (non-mask) words.
    pub fn word_count(&self) -> usize {
        self.words.len() - 1
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> &str {
        &self.words[id as usize]
    }

    pub fn mask(&self) -> TokenId {
        self.mask
    }

    pub fn is_mask(&self, id: TokenId) -> bool {
        id == self.mask
    }

    /// All non-mask token ids in ascending order.
    pub fn word_ids(&self) -> Vec<TokenId> {
        (0..self.words.len() as TokenId)
            .filter(|&id| id != self.mask)
            .collect()
    }

    /// Stable digest of the word list, used to bind model files to a vocabulary.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update([0u8]);
        }
        h.finalize().into()
    }

    /// Splits on whitespace, lowercases, and peels a trailing punctuation
    /// mark into its own token when the fused form is unknown but both
    /// halves are in the vocabulary.
    pub fn tokenize(&self, text: &str, max_len: usize) -> Result<Sentence> {
        let mut ids = Vec::new();
        let mut oov = Vec::new();
        for piece in text.split_whitespace() {
            let piece = piece.to_lowercase();
            if let Some(id) = self.id(&piece) {
                ids.push(id);
                continue;
            }
            let split = piece
                .char_indices()
                .last()
                .filter(|&(i, c)| i > 0 && SPLIT_PUNCT.contains(&c))
                .and_then(|(i, _)| Some((self.id(&piece[..i])?, self.id(&piece[i..])?)));
            match split {
                Some((a, b)) => {
                    ids.push(a);
                    ids.push(b);
                }
                None => oov.push(piece),
            }
        }
        if !oov.is_empty() {
            return Err(Error::OutOfVocabulary(oov));
        }
        Sentence::new(ids, self, max_len)
    }

    pub fn detokenize(&self, sentence: &Sentence) -> String {
        self.join(sentence.tokens())
    }

    /// Space-joined surface form of raw token ids (the mask renders as `[MASK]`).
    pub fn join(&self, ids: &[TokenId]) -> String {
        let mut s = String::new();
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(self.word(id));
        }
        s
    }

    /// Maps words to ids, collecting every unknown word into one error.
    pub fn ids_of<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<TokenId>> {
        let mut ids = Vec::with_capacity(words.len());
        let mut oov = Vec::new();
        for w in words {
            match self.id(w.as_ref()) {
                Some(id) if id != self.mask => ids.push(id),
                _ => oov.push(w.as_ref().to_string()),
            }
        }
        if oov.is_empty() {
            Ok(ids)
        } else {
            Err(Error::OutOfVocabulary(oov))
        }
    }
}

/// A sentence state: 1 to `max_len` non-mask tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence(Vec<TokenId>);

impl Sentence {
    pub fn new(tokens: Vec<TokenId>, vocab: &Vocabulary, max_len: usize) -> Result<Self> {
        if tokens.is_empty() || tokens.len() > max_len {
            return Err(Error::SentenceLength {
                len: tokens.len(),
                max_len,
            });
        }
        if tokens.iter().any(|&t| t == vocab.mask() || t as usize >= vocab.len()) {
            return Err(Error::MaskToken);
        }
        Ok(Sentence(tokens))
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_tokens(self) -> Vec<TokenId> {
        self.0
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        write!(f, "<{}>", parts.join(" "))
    }
}

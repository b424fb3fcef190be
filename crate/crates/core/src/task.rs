//! Task configuration: TOML schema, defaults, and construction of the
//! partition, constraints, scorers and language model for each input.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lm::{BridgeClient, LanguageModel, NGramModel};
use crate::logic::{
    imperative_formula, interrogative_formulas, keyword_constraint, keyword_exactly_once, parse_formula_in,
    ConstraintSet, Formula, DEFAULT_BETA,
};
use crate::partition::{keyword_category_name, CategoryEntry, CategoryPartition, CategorySpec, DEFAULT_RESIDUAL};
use crate::proposal::CgmhOps;
use crate::sampler::{ChainConfig, Method, DEFAULT_CGMH_STEPS, DEFAULT_TSMH_STEPS};
use crate::soft::{
    compose, EmbeddingTable, Sentiment, SentimentBackend, SentimentLexicon, SentimentTarget, Similarity,
    SimilarityMode, SoftConstraint,
};
use crate::target::Target;
use crate::vocab::{Sentence, TokenId, Vocabulary, DEFAULT_MAX_LEN};

const QUESTION_WORDS: &str = include_str!("../data/question_words.txt");
const AUXILIARIES: &str = include_str!("../data/auxiliaries.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Interrogative,
    Imperative,
    Sentiment,
    Custom,
}

/// A fully resolved task configuration. Relative paths in the file are
/// taken against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task: TaskSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub lm: LmSection,
    #[serde(default)]
    pub soft: SoftSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKind,
    pub vocab: PathBuf,
    /// Default keywords; an inputs file overrides them per line.
    #[serde(default)]
    pub keywords: Vec<String>,
    /// Exactly-once keyword, wh-word and auxiliary refinements.
    #[serde(default)]
    pub strict: bool,
    /// Category spec replacing the kind's default partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_words: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliaries: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_lexicon: Option<PathBuf>,
    /// Extra formulas in the constraint language; the only ones for `custom`.
    #[serde(default)]
    pub formulas: Vec<String>,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// Pads single-keyword initial sentences to two words.
    #[serde(default = "default_pad")]
    pub pad_token: String,
}

fn default_max_len() -> usize {
    DEFAULT_MAX_LEN
}

fn default_pad() -> String {
    "the".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tsmh_steps")]
    pub tsmh_steps: usize,
    #[serde(default = "default_cgmh_steps")]
    pub cgmh_steps: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cgmh_ops: CgmhOps,
}

fn default_k() -> usize {
    crate::proposal::tsmh::DEFAULT_K
}
fn default_tsmh_steps() -> usize {
    DEFAULT_TSMH_STEPS
}
fn default_cgmh_steps() -> usize {
    DEFAULT_CGMH_STEPS
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            k: default_k(),
            tsmh_steps: default_tsmh_steps(),
            cgmh_steps: default_cgmh_steps(),
            beta: default_beta(),
            seed: 0,
            cgmh_ops: CgmhOps::default(),
        }
    }
}

impl ChainSection {
    pub fn config(&self, method: Method) -> ChainConfig {
        ChainConfig {
            method,
            k: self.k,
            steps: match method {
                Method::Tsmh => self.tsmh_steps,
                Method::Cgmh => self.cgmh_steps,
            },
            seed: self.seed,
            stream: 0,
            cgmh_ops: self.cgmh_ops,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LmBackend {
    Ngram,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmSection {
    #[serde(default = "default_backend")]
    pub backend: LmBackend,
    /// Trained n-gram model file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Corpus to train an n-gram model from at startup when no model is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

fn default_backend() -> LmBackend {
    LmBackend::Ngram
}
fn default_order() -> usize {
    crate::lm::ngram::DEFAULT_ORDER
}

impl Default for LmSection {
    fn default() -> Self {
        LmSection {
            backend: LmBackend::Ngram,
            model: None,
            corpus: None,
            order: default_order(),
            url: None,
        }
    }
}

impl LmSection {
    /// Applies a `ngram:<path>` or `bridge:<url>` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        if let Some(path) = spec.strip_prefix("ngram:") {
            self.backend = LmBackend::Ngram;
            self.model = Some(PathBuf::from(path));
            self.corpus = None;
        } else if let Some(url) = spec.strip_prefix("bridge:") {
            self.backend = LmBackend::Bridge;
            self.url = Some(url.to_string());
        } else {
            return Err(Error::Config(format!(
                "--lm expects ngram:<path> or bridge:<url>, got `{spec}`"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilarityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<SentimentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityConfig {
    pub reference: String,
    pub embeddings: PathBuf,
    #[serde(default)]
    pub mode: SimilarityMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentBackendKind {
    Lexicon,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentConfig {
    #[serde(default = "default_sentiment_backend")]
    pub backend: SentimentBackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub target: SentimentTarget,
}

fn default_sentiment_backend() -> SentimentBackendKind {
    SentimentBackendKind::Lexicon
}

impl TaskSpec {
    /// Parses a config document; `base` resolves relative paths.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let mut spec: TaskSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            if path == "." || path.is_empty() {
                Error::Config(msg)
            } else {
                Error::Config(format!("{path}: {msg}"))
            }
        })?;
        spec.resolve_paths(base);
        Ok(spec)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.task.vocab);
        for p in [
            &mut self.task.categories,
            &mut self.task.question_words,
            &mut self.task.auxiliaries,
            &mut self.task.pos_lexicon,
            &mut self.lm.model,
            &mut self.lm.corpus,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(s) = &mut self.soft.similarity {
            fix(&mut s.embeddings);
        }
        if let Some(s) = self.soft.sentiment.as_mut().and_then(|s| s.lexicon.as_mut()) {
            fix(s);
        }
    }

    /// Checks value ranges, kind requirements, and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let t = &self.task;
        let c = &self.chain;
        if c.k == 0 {
            return Err(Error::Config("chain.k: must be at least 1".to_string()));
        }
        if c.tsmh_steps == 0 || c.cgmh_steps == 0 {
            return Err(Error::Config("chain: step counts must be at least 1".to_string()));
        }
        if !(c.beta > 0.0 && c.beta < 1.0) {
            return Err(Error::Config(format!("chain.beta: must lie in (0, 1), got {}", c.beta)));
        }
        c.cgmh_ops.validate()?;
        if t.max_len < 2 {
            return Err(Error::Config("task.max_len: must be at least 2".to_string()));
        }
        if !(1..=crate::lm::ngram::MAX_ORDER).contains(&self.lm.order) {
            return Err(Error::Config(format!(
                "lm.order: must be in 1..={}",
                crate::lm::ngram::MAX_ORDER
            )));
        }
        match t.kind {
            TaskKind::Imperative if t.pos_lexicon.is_none() && t.categories.is_none() => {
                return Err(Error::Config(
                    "task.pos_lexicon: required for imperative tasks".to_string(),
                ))
            }
            TaskKind::Custom if t.formulas.is_empty() => {
                return Err(Error::Config("task.formulas: required for custom tasks".to_string()))
            }
            TaskKind::Sentiment if self.soft.sentiment.is_none() => {
                return Err(Error::Config("soft.sentiment: required for sentiment tasks".to_string()))
            }
            _ => {}
        }
        match self.lm.backend {
            LmBackend::Ngram if self.lm.model.is_none() && self.lm.corpus.is_none() => {
                return Err(Error::Config("lm: an n-gram backend needs `model` or `corpus`".to_string()))
            }
            LmBackend::Bridge if self.lm.url.is_none() => {
                return Err(Error::Config("lm.url: required for the bridge backend".to_string()))
            }
            _ => {}
        }
        if let Some(s) = &self.soft.sentiment {
            if s.backend == SentimentBackendKind::Lexicon && s.lexicon.is_none() {
                return Err(Error::Config("soft.sentiment.lexicon: required for the lexicon backend".to_string()));
            }
            if s.backend == SentimentBackendKind::Bridge && self.lm.url.is_none() {
                return Err(Error::Config("soft.sentiment: bridge backend needs lm.url".to_string()));
            }
        }
        let mut files: Vec<(&str, &Path)> = vec![("task.vocab", &t.vocab)];
        let opt = [
            ("task.categories", &t.categories),
            ("task.question_words", &t.question_words),
            ("task.auxiliaries", &t.auxiliaries),
            ("task.pos_lexicon", &t.pos_lexicon),
        ];
        files.extend(opt.iter().filter_map(|(n, p)| p.as_deref().map(|p| (*n, p))));
        if self.lm.backend == LmBackend::Ngram {
            match (&self.lm.model, &self.lm.corpus) {
                (Some(m), _) => files.push(("lm.model", m)),
                (None, Some(c)) => files.push(("lm.corpus", c)),
                _ => {}
            }
        }
        if let Some(s) = &self.soft.similarity {
            files.push(("soft.similarity.embeddings", &s.embeddings));
        }
        if let Some(p) = self.soft.sentiment.as_ref().and_then(|s| s.lexicon.as_deref()) {
            files.push(("soft.sentiment.lexicon", p));
        }
        for (name, p) in files {
            if !p.is_file() {
                return Err(Error::Config(format!("{name}: file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved spec's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Reads, parses and validates a config file, filling defaults.
pub fn validate_config(path: impl AsRef<Path>) -> Result<TaskSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let spec = TaskSpec::from_toml(&text, base)?;
    spec.validate()?;
    Ok(spec)
}

fn word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn read_word_list(path: Option<&Path>, default: &str) -> Result<Vec<String>> {
    match path {
        Some(p) => Ok(word_list(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)),
        None => Ok(word_list(default)),
    }
}

/// Members of a named category restricted to the vocabulary.
fn entry(name: &str, words: &[String], vocab: &Vocabulary) -> CategoryEntry {
    CategoryEntry {
        name: name.to_string(),
        members: words.iter().filter(|w| vocab.id(w).is_some()).cloned().collect(),
        residual: false,
    }
}

fn residual_entry() -> CategoryEntry {
    CategoryEntry {
        name: DEFAULT_RESIDUAL.to_string(),
        members: Vec::new(),
        residual: true,
    }
}

/// POS lexicon lines `word<TAB>TAG[,TAG...]`. A word tagged both VERB and
/// ADV is a verb.
pub fn load_pos_lexicon(path: &Path, vocab: &Vocabulary) -> Result<(Vec<String>, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut verbs = BTreeSet::new();
    let mut advs = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, tags) = line.split_once('\t').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected word<TAB>tags", path.display(), i + 1))
        })?;
        let word = word.trim().to_lowercase();
        if vocab.id(&word).is_none() {
            continue;
        }
        let tags: Vec<String> = tags.split(',').map(|t| t.trim().to_uppercase()).collect();
        if tags.iter().any(|t| t == "VERB") {
            verbs.insert(word);
        } else if tags.iter().any(|t| t == "ADV") {
            advs.insert(word);
        }
    }
    Ok((verbs.into_iter().collect(), advs.into_iter().collect()))
}

/// A task with its shared resources loaded.
pub struct Task {
    pub spec: TaskSpec,
    pub vocab: Arc<Vocabulary>,
    pub partition: CategoryPartition,
    pub lm: Arc<dyn LanguageModel>,
    pub soft: Arc<dyn SoftConstraint>,
}

/// Per-input chain setup.
pub struct Prepared {
    pub target: Target,
    pub init: Sentence,
    pub keywords: Vec<String>,
}

impl Task {
    /// Loads vocabulary, partition, language model and soft scorers.
    pub fn build(spec: TaskSpec) -> Result<Self> {
        let vocab = Arc::new(Vocabulary::load(&spec.task.vocab)?);
        let lm = load_lm(&spec.lm, &vocab)?;
        Self::build_with_lm(spec, vocab, lm)
    }

    pub fn build_with_lm(spec: TaskSpec, vocab: Arc<Vocabulary>, lm: Arc<dyn LanguageModel>) -> Result<Self> {
        let partition = base_partition(&spec, &vocab)?;
        let soft = build_soft(&spec, &vocab)?;
        Ok(Task {
            spec,
            vocab,
            partition,
            lm,
            soft,
        })
    }

    pub fn method_config(&self, method: Method) -> ChainConfig {
        self.spec.chain.config(method)
    }

    /// Partition, constraints and initial sentence for one keyword set.
    pub fn prepare(&self, keywords: &[String]) -> Result<Prepared> {
        let t = &self.spec.task;
        let keywords: Vec<String> = keywords.iter().map(|k| k.trim().to_lowercase()).collect();
        let ids = self.vocab.ids_of(&keywords)?;
        let mut partition = self.partition.clone();
        let mut formulas: Vec<Formula> = match t.kind {
            TaskKind::Interrogative => interrogative_formulas(t.strict, t.max_len),
            TaskKind::Imperative => vec![imperative_formula()],
            TaskKind::Sentiment | TaskKind::Custom => Vec::new(),
        };
        let mut seen = BTreeSet::new();
        for (&id, word) in ids.iter().zip(&keywords) {
            if !seen.insert(id) {
                continue;
            }
            partition = partition.add_keyword_category(id, &self.vocab)?;
            let name = keyword_category_name(word);
            formulas.push(if t.strict {
                keyword_exactly_once(&name, t.max_len)
            } else {
                keyword_constraint(&name, t.max_len)
            });
        }
        for text in &t.formulas {
            formulas.push(parse_formula_in(text, &partition)?);
        }
        let constraints = ConstraintSet::new(formulas, self.spec.chain.beta, &partition)?;
        let init = initial_sentence(&ids, &self.vocab, &t.pad_token, t.max_len)?;
        let target = Target::new(
            self.vocab.clone(),
            Arc::new(partition),
            Arc::new(constraints),
            self.lm.clone(),
            t.max_len,
        )
        .with_soft(self.soft.clone());
        Ok(Prepared {
            target,
            init,
            keywords,
        })
    }
}

/// Keywords in input order, padded to at least two words.
pub fn initial_sentence(keywords: &[TokenId], vocab: &Vocabulary, pad: &str, max_len: usize) -> Result<Sentence> {
    let mut tokens = keywords.to_vec();
    if tokens.len() < 2 {
        let p = vocab
            .id(pad)
            .ok_or_else(|| Error::Config(format!("task.pad_token: `{pad}` is not in the vocabulary")))?;
        while tokens.len() < 2 {
            tokens.push(p);
        }
    }
    Sentence::new(tokens, vocab, max_len)
}

fn base_partition(spec: &TaskSpec, vocab: &Vocabulary) -> Result<CategoryPartition> {
    let t = &spec.task;
    if let Some(path) = &t.categories {
        return CategoryPartition::build(&CategorySpec::load(path)?, vocab);
    }
    let categories = match t.kind {
        TaskKind::Interrogative => {
            let qwh = read_word_list(t.question_words.as_deref(), QUESTION_WORDS)?;
            let aux = read_word_list(t.auxiliaries.as_deref(), AUXILIARIES)?;
            vec![entry("QWH", &qwh, vocab), entry("AUX", &aux, vocab), residual_entry()]
        }
        TaskKind::Imperative => {
            let path = t.pos_lexicon.as_deref().expect("validated");
            let (verbs, advs) = load_pos_lexicon(path, vocab)?;
            vec![entry("VERB", &verbs, vocab), entry("ADV", &advs, vocab), residual_entry()]
        }
        TaskKind::Sentiment | TaskKind::Custom => vec![residual_entry()],
    };
    CategoryPartition::build(&CategorySpec { categories }, vocab)
}

fn build_soft(spec: &TaskSpec, vocab: &Arc<Vocabulary>) -> Result<Arc<dyn SoftConstraint>> {
    let mut scorers: Vec<Arc<dyn SoftConstraint>> = Vec::new();
    if let Some(s) = &spec.soft.similarity {
        let table = Arc::new(EmbeddingTable::load(&s.embeddings)?);
        let reference: Vec<String> = s.reference.split_whitespace().map(|w| w.to_lowercase()).collect();
        scorers.push(Arc::new(Similarity::new(reference, table, s.mode, vocab.clone())));
    }
    if let Some(s) = &spec.soft.sentiment {
        let backend = match s.backend {
            SentimentBackendKind::Lexicon => {
                SentimentBackend::Lexicon(SentimentLexicon::load(s.lexicon.as_ref().expect("validated"))?)
            }
            SentimentBackendKind::Bridge => {
                let url = spec.lm.url.as_deref().expect("validated");
                SentimentBackend::Bridge(Arc::new(BridgeClient::connect(url, vocab.clone())?))
            }
        };
        scorers.push(Arc::new(Sentiment::new(backend, s.target, vocab.clone())));
    }
    Ok(compose(scorers))
}

/// Loads the configured language model.
pub fn load_lm(lm: &LmSection, vocab: &Arc<Vocabulary>) -> Result<Arc<dyn LanguageModel>> {
    Ok(match lm.backend {
        LmBackend::Ngram => match (&lm.model, &lm.corpus) {
            (Some(m), _) => Arc::new(NGramModel::load(m, vocab)?),
            (None, Some(c)) => Arc::new(NGramModel::train(c, lm.order, vocab)?),
            (None, None) => return Err(Error::Config("lm: no model or corpus".to_string())),
        },
        LmBackend::Bridge => {
            let url = lm.url.as_deref().ok_or_else(|| Error::Config("lm.url: missing".to_string()))?;
            Arc::new(BridgeClient::connect(url, vocab.clone())?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn dir_with_vocab() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        let mut f = fs::File::create(d.path().join("vocab.txt")).unwrap();
        for w in ["what", "is", "does", "learning", "the", "fun", "run", "quickly", "home", "good"] {
            writeln!(f, "{w}").unwrap();
        }
        fs::write(d.path().join("corpus.txt"), "what is learning\nlearning is fun\n").unwrap();
        d
    }

    fn spec(d: &Path, body: &str) -> Result<TaskSpec> {
        let s = TaskSpec::from_toml(body, d)?;
        s.validate()?;
        Ok(s)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let d = dir_with_vocab();
        let s = spec(
            d.path(),
            "[task]\nkind = \"interrogative\"\nvocab = \"vocab.txt\"\n[lm]\ncorpus = \"corpus.txt\"\n",
        )
        .unwrap();
        assert_eq!(s.chain.k, 3);
        assert_eq!(s.chain.tsmh_steps, 100);
        assert_eq!(s.chain.cgmh_steps, 300);
        assert_eq!(s.chain.beta, 1e-10);
        assert_eq!(s.task.max_len, 16);
        assert!(s.task.vocab.is_absolute() || s.task.vocab.starts_with(d.path()));
    }

    #[test]
    fn misspelled_key_is_named() {
        let d = dir_with_vocab();
        let e = spec(
            d.path(),
            "[task]\nkind = \"interrogative\"\nvocab = \"vocab.txt\"\n[chain]\nstepz = 3\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("stepz"), "{e}");
        assert!(e.to_string().contains("chain"), "{e}");
    }

    #[test]
    fn type_error_has_path() {
        let d = dir_with_vocab();
        let e = spec(
            d.path(),
            "[task]\nkind = \"interrogative\"\nvocab = \"vocab.txt\"\n[chain]\nk = \"three\"\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("chain.k"), "{e}");
    }

    #[test]
    fn interrogative_keyword_partition() {
        let d = dir_with_vocab();
        let s = spec(
            d.path(),
            "[task]\nkind = \"interrogative\"\nvocab = \"vocab.txt\"\n[lm]\ncorpus = \"corpus.txt\"\norder = 2\n",
        )
        .unwrap();
        let task = Task::build(s).unwrap();
        let p = task.prepare(&["learning".to_string()]).unwrap();
        assert_eq!(p.target.partition.display_names(), ["[QWH]", "[AUX]", "[K:learning]", "[OTH]"]);
        assert_eq!(p.target.constraints.len(), 3);
        assert_eq!(task.vocab.join(p.init.tokens()), "learning the");
    }

    #[test]
    fn imperative_requires_lexicon() {
        let d = dir_with_vocab();
        let e = spec(
            d.path(),
            "[task]\nkind = \"imperative\"\nvocab = \"vocab.txt\"\n[lm]\ncorpus = \"corpus.txt\"\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("pos_lexicon"));
    }

    #[test]
    fn imperative_from_lexicon() {
        let d = dir_with_vocab();
        fs::write(d.path().join("pos.tsv"), "run\tVERB\nquickly\tADV\nhome\tNOUN,ADV\nzzz\tVERB\n").unwrap();
        let s = spec(
            d.path(),
            "[task]\nkind = \"imperative\"\nvocab = \"vocab.txt\"\npos_lexicon = \"pos.tsv\"\n[lm]\ncorpus = \"corpus.txt\"\n",
        )
        .unwrap();
        let task = Task::build(s).unwrap();
        let p = task.prepare(&["home".to_string()]).unwrap();
        let x = task.vocab.tokenize("quickly run home", 16).unwrap();
        assert_eq!(p.target.constraint_error(x.tokens()), 0);
    }

    #[test]
    fn custom_formulas_pass_through() {
        let d = dir_with_vocab();
        let s = spec(
            d.path(),
            "[task]\nkind = \"custom\"\nvocab = \"vocab.txt\"\nformulas = [\"w1[K:learning]\"]\n[lm]\ncorpus = \"corpus.txt\"\n",
        );
        // The keyword category only exists once the keyword is supplied.
        let task = Task::build(s.unwrap()).unwrap();
        let p = task.prepare(&["learning".to_string()]).unwrap();
        assert_eq!(p.target.constraints.len(), 2);
        assert_eq!(p.target.constraints.formulas()[1].to_string(), "w1[K:learning]");
    }

    #[test]
    fn lm_override_parsing() {
        let mut lm = LmSection::default();
        lm.apply_override("bridge:http://localhost:1").unwrap();
        assert_eq!(lm.backend, LmBackend::Bridge);
        lm.apply_override("ngram:m.bin").unwrap();
        assert_eq!(lm.model, Some(PathBuf::from("m.bin")));
        assert!(lm.apply_override("gpt:x").is_err());
    }
}

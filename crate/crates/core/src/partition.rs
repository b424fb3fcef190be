//! Word-category partition of the vocabulary.
//!
//! Every non-mask token belongs to exactly one category. One category is
//! the residual (conventionally `[OTH]`) and absorbs words no other
//! category claims. Keyword categories are singletons carved out of
//! whichever category held the word before.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

pub type CategoryId = usize;

/// Name given to the residual category when a spec does not declare one.
pub const DEFAULT_RESIDUAL: &str = "OTH";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    name: String,
    members: Vec<TokenId>,
}

impl Category {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Sorted member ids.
    pub fn members(&self) -> &[TokenId] {
        &self.members
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryPartition {
    categories: Vec<Category>,
    residual: CategoryId,
    owner: Vec<Option<CategoryId>>,
}

/// JSON category spec: `{"categories":[{"name":..,"members":[..]} | {"name":..,"residual":true}]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    pub categories: Vec<CategoryEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryEntry {
    pub name: String,
    #[serde(default)]
    pub members: Vec<String>,
    #[serde(default)]
    pub residual: bool,
}

impl CategorySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::CategorySpec(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Strips one pair of surrounding brackets: `[QWH]` and `QWH` name the same category.
pub fn normalize_name(name: &str) -> &str {
    name.strip_prefix('[')
        .and_then(|n| n.strip_suffix(']'))
        .unwrap_or(name)
}

/// Category name used for the singleton holding `word`.
pub fn keyword_category_name(word: &str) -> String {
    format!("K:{word}")
}

impl CategoryPartition {
    pub fn build(spec: &CategorySpec, vocab: &Vocabulary) -> Result<Self> {
        let mut categories: Vec<Category> = Vec::new();
        let mut owner: Vec<Option<CategoryId>> = vec![None; vocab.len()];
        let mut residual = None;
        for entry in &spec.categories {
            let name = normalize_name(entry.name.trim()).to_string();
            validate_name(&name)?;
            if categories.iter().any(|c| c.name == name) {
                return Err(Error::CategorySpec(format!("category [{name}] declared twice")));
            }
            let id = categories.len();
            if entry.residual {
                if residual.is_some() {
                    return Err(Error::CategorySpec(
                        "more than one residual category".to_string(),
                    ));
                }
                if !entry.members.is_empty() {
                    return Err(Error::CategorySpec(format!(
                        "residual category [{name}] must not list members"
                    )));
                }
                residual = Some(id);
            }
            let mut members = BTreeSet::new();
            for w in &entry.members {
                let tok = match vocab.id(w) {
                    Some(t) if !vocab.is_mask(t) => t,
                    _ => {
                        return Err(Error::CategorySpec(format!(
                            "member `{w}` of [{name}] is not in the vocabulary"
                        )))
                    }
                };
                if let Some(prev) = owner[tok as usize] {
                    if prev != id {
                        return Err(Error::CategoryConflict {
                            word: w.clone(),
                            first: categories[prev].name.clone(),
                            second: name,
                        });
                    }
                }
                owner[tok as usize] = Some(id);
                members.insert(tok);
            }
            categories.push(Category {
                name,
                members: members.into_iter().collect(),
            });
        }
        let residual = match residual {
            Some(r) => r,
            None => {
                if categories.iter().any(|c| c.name == DEFAULT_RESIDUAL) {
                    return Err(Error::CategorySpec(format!(
                        "[{DEFAULT_RESIDUAL}] is declared but not marked residual"
                    )));
                }
                categories.push(Category {
                    name: DEFAULT_RESIDUAL.to_string(),
                    members: Vec::new(),
                });
                categories.len() - 1
            }
        };
        for tok in vocab.word_ids() {
            if owner[tok as usize].is_none() {
                owner[tok as usize] = Some(residual);
                categories[residual].members.push(tok);
            }
        }
        categories[residual].members.sort_unstable();
        let p = CategoryPartition {
            categories,
            residual,
            owner,
        };
        p.check_axioms(vocab)?;
        Ok(p)
    }

    /// The degenerate partition: one residual category equal to the vocabulary.
    pub fn residual_only(vocab: &Vocabulary) -> Self {
        let spec = CategorySpec {
            categories: vec![CategoryEntry {
                name: DEFAULT_RESIDUAL.to_string(),
                members: Vec::new(),
                residual: true,
            }],
        };
        Self::build(&spec, vocab).expect("residual-only partition is always valid")
    }

    /// Returns a partition with `keyword` moved into its own singleton
    /// category, inserted just before the residual. Idempotent.
    pub fn add_keyword_category(&self, keyword: TokenId, vocab: &Vocabulary) -> Result<Self> {
        let from = self.category_of(keyword)?;
        let name = keyword_category_name(vocab.word(keyword));
        if self.categories[from].name == name {
            return Ok(self.clone());
        }
        if self.id_of(&name).is_some() {
            return Err(Error::CategorySpec(format!("category [{name}] already exists")));
        }
        let mut categories = self.categories.clone();
        categories[from].members.retain(|&t| t != keyword);
        let at = self.residual;
        categories.insert(
            at,
            Category {
                name,
                members: vec![keyword],
            },
        );
        let residual = self.residual + 1;
        let mut owner = vec![None; self.owner.len()];
        for (cid, c) in categories.iter().enumerate() {
            for &t in &c.members {
                owner[t as usize] = Some(cid);
            }
        }
        let p = CategoryPartition {
            categories,
            residual,
            owner,
        };
        p.check_axioms(vocab)?;
        Ok(p)
    }

    pub fn category_of(&self, token: TokenId) -> Result<CategoryId> {
        self.owner
            .get(token as usize)
            .copied()
            .flatten()
            .ok_or(Error::MaskToken)
    }

    /// Category of a token known to be a legal sentence token.
    #[inline]
    pub fn cat(&self, token: TokenId) -> CategoryId {
        self.owner[token as usize].expect("mask token has no category")
    }

    pub fn name(&self, id: CategoryId) -> &str {
        &self.categories[id].name
    }

    pub fn id_of(&self, name: &str) -> Option<CategoryId> {
        let name = normalize_name(name);
        self.categories.iter().position(|c| c.name == name)
    }

    pub fn members(&self, id: CategoryId) -> &[TokenId] {
        &self.categories[id].members
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn residual(&self) -> CategoryId {
        self.residual
    }

    /// Bracketed names in partition order, e.g. `["[QWH]", "[AUX]", "[OTH]"]`.
    pub fn display_names(&self) -> Vec<String> {
        self.categories
            .iter()
            .map(|c| format!("[{}]", c.name))
            .collect()
    }

    /// Checks subset, disjointness, and coverage exhaustively.
    pub fn check_axioms(&self, vocab: &Vocabulary) -> Result<()> {
        let mut seen: Vec<Option<CategoryId>> = vec![None; vocab.len()];
        for (cid, c) in self.categories.iter().enumerate() {
            for &t in &c.members {
                if t as usize >= vocab.len() || vocab.is_mask(t) {
                    return Err(Error::CategorySpec(format!(
                        "[{}] holds a token outside the vocabulary",
                        c.name
                    )));
                }
                if let Some(prev) = seen[t as usize] {
                    return Err(Error::CategoryConflict {
                        word: vocab.word(t).to_string(),
                        first: self.categories[prev].name.clone(),
                        second: c.name.clone(),
                    });
                }
                seen[t as usize] = Some(cid);
            }
        }
        for t in vocab.word_ids() {
            if seen[t as usize].is_none() {
                return Err(Error::CategorySpec(format!(
                    "`{}` is not covered by any category",
                    vocab.word(t)
                )));
            }
            if self.owner[t as usize] != seen[t as usize] {
                return Err(Error::CategorySpec(format!(
                    "owner index out of sync for `{}`",
                    vocab.word(t)
                )));
            }
        }
        if self.residual >= self.categories.len() {
            return Err(Error::CategorySpec("no residual category".to_string()));
        }
        Ok(())
    }
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty()
        || name
            .chars()
            .any(|c| c.is_whitespace() || c == '[' || c == ']')
    {
        return Err(Error::CategorySpec(format!("invalid category name `{name}`")));
    }
    Ok(())
}

//! The unnormalized target `π(x) ∝ P_LM(x) · β^C(x) · Φ_soft(x)`.

use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::error::Result;
use crate::lm::LanguageModel;
use crate::logic::ConstraintSet;
use crate::partition::CategoryPartition;
use crate::soft::{Constant, SoftConstraint};
use crate::template::Slot;
use crate::vocab::{TokenId, Vocabulary};

/// Everything that defines the distribution a chain samples from.
#[derive(Clone)]
pub struct Target {
    pub vocab: Arc<Vocabulary>,
    pub partition: Arc<CategoryPartition>,
    pub constraints: Arc<ConstraintSet>,
    pub lm: Arc<dyn LanguageModel>,
    pub soft: Arc<dyn SoftConstraint>,
    pub max_len: usize,
}

impl Target {
    pub fn new(
        vocab: Arc<Vocabulary>,
        partition: Arc<CategoryPartition>,
        constraints: Arc<ConstraintSet>,
        lm: Arc<dyn LanguageModel>,
        max_len: usize,
    ) -> Self {
        Target {
            vocab,
            partition,
            constraints,
            lm,
            soft: Arc::new(Constant(1.0)),
            max_len,
        }
    }

    pub fn with_soft(mut self, soft: Arc<dyn SoftConstraint>) -> Self {
        self.soft = soft;
        self
    }

    pub fn constraint_error(&self, tokens: &[TokenId]) -> u32 {
        let cats: Vec<_> = tokens.iter().map(|&t| self.partition.cat(t)).collect();
        self.constraints.error_of(&cats)
    }

    pub fn template_error(&self, slots: &[Slot]) -> u32 {
        self.constraints.template_error(slots, &self.partition)
    }

    /// `ln P_LM(x) + ln Φ_soft(x)`: the score templates in one group are
    /// ranked by. A zero soft score is floored at the smallest positive
    /// double so the state stays representable.
    pub fn log_fit(&self, tokens: &[TokenId]) -> Result<f64> {
        let lm = self.lm.sentence_logscore(tokens)?;
        let soft = self.soft.score(tokens)?;
        Ok(lm + soft.max(f64::MIN_POSITIVE).ln())
    }

    /// `ln π(x)` up to the normalizing constant.
    pub fn log_pi(&self, tokens: &[TokenId]) -> Result<f64> {
        Ok(self.log_fit(tokens)? + self.constraints.log_hard_score_of(self.constraint_error(tokens)))
    }
}

/// Memoizes [`Target::log_fit`] over the sentences seen in one step.
#[derive(Default)]
pub struct FitCache {
    map: FxHashMap<Vec<TokenId>, f64>,
}

impl FitCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, target: &Target, tokens: &[TokenId]) -> Result<f64> {
        if let Some(&v) = self.map.get(tokens) {
            return Ok(v);
        }
        let v = target.log_fit(tokens)?;
        self.map.insert(tokens.to_vec(), v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }
}

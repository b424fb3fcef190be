//! Single-word edit proposal: replace, insert or delete one word.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_index, MoveDetail, ProposalRecord, Proposer};
use crate::error::{Error, Result};
use crate::target::{FitCache, Target};
use crate::vocab::TokenId;

/// Relative operation weights, renormalized over the operations valid at
/// the current length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgmhOps {
    pub replace: f64,
    pub insert: f64,
    pub delete: f64,
}

impl Default for CgmhOps {
    fn default() -> Self {
        CgmhOps {
            replace: 1.0 / 3.0,
            insert: 1.0 / 3.0,
            delete: 1.0 / 3.0,
        }
    }
}

impl CgmhOps {
    pub fn validate(&self) -> Result<()> {
        let w = [self.replace, self.insert, self.delete];
        if w.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || self.replace <= 0.0 {
            return Err(Error::Config(
                "operation weights must be non-negative with replace > 0".to_string(),
            ));
        }
        Ok(())
    }

    /// Log-probabilities of (replace, insert, delete) at length `m`.
    fn log_probs(&self, m: usize, max_len: usize) -> [f64; 3] {
        let ins = if m < max_len { self.insert } else { 0.0 };
        let del = if m > 1 { self.delete } else { 0.0 };
        let z = self.replace + ins + del;
        [(self.replace / z).ln(), (ins / z).ln(), (del / z).ln()]
    }
}

/// One edit. `Insert` places a word into gap `gap` (0 = before the first
/// word, `m` = after the last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CgmhEdit {
    Replace { pos: usize, word: TokenId },
    Insert { gap: usize, word: TokenId },
    Delete { pos: usize },
}

impl CgmhEdit {
    pub fn apply(&self, x: &[TokenId]) -> Vec<TokenId> {
        let mut y = x.to_vec();
        match *self {
            CgmhEdit::Replace { pos, word } => y[pos] = word,
            CgmhEdit::Insert { gap, word } => y.insert(gap, word),
            CgmhEdit::Delete { pos } => {
                y.remove(pos);
            }
        }
        y
    }

    /// The edit taking `apply(x)` back to `x`.
    pub fn inverse(&self, x: &[TokenId]) -> CgmhEdit {
        match *self {
            CgmhEdit::Replace { pos, .. } => CgmhEdit::Replace { pos, word: x[pos] },
            CgmhEdit::Insert { gap, .. } => CgmhEdit::Delete { pos: gap },
            CgmhEdit::Delete { pos } => CgmhEdit::Insert { gap: pos, word: x[pos] },
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CgmhProposer {
    pub ops: CgmhOps,
}

impl CgmhProposer {
    pub fn new(ops: CgmhOps) -> Self {
        CgmhProposer { ops }
    }

    /// Masked context and fill distribution over the whole vocabulary for
    /// a replace at `pos` or an insert at `gap`.
    fn fill_dist(&self, target: &Target, x: &[TokenId], at: usize, insert: bool) -> Result<(Vec<TokenId>, Vec<f64>)> {
        let mut ctx = x.to_vec();
        if insert {
            ctx.insert(at, target.vocab.mask());
        } else {
            ctx[at] = target.vocab.mask();
        }
        let words = target.vocab.word_ids();
        let lp = target.lm.fill_logprobs(&ctx, at, &words)?;
        Ok((words, lp))
    }

    /// `(ln P(position), ln P(op), ln P(word))` of proposing `edit` at `x`;
    /// `-inf` in the op slot when the op is invalid at this length.
    pub fn edit_factors(&self, target: &Target, x: &[TokenId], edit: &CgmhEdit) -> Result<[f64; 3]> {
        let m = x.len();
        let ops = self.ops.log_probs(m, target.max_len);
        Ok(match *edit {
            CgmhEdit::Replace { pos, word } => {
                let (words, lp) = self.fill_dist(target, x, pos, false)?;
                [-(m as f64).ln(), ops[0], lp[words.binary_search(&word).expect("legal word")]]
            }
            CgmhEdit::Insert { gap, word } => {
                let (words, lp) = self.fill_dist(target, x, gap, true)?;
                [-((m + 1) as f64).ln(), ops[1], lp[words.binary_search(&word).expect("legal word")]]
            }
            CgmhEdit::Delete { .. } => [-(m as f64).ln(), ops[2], 0.0],
        })
    }

    pub fn edit_log_prob(&self, target: &Target, x: &[TokenId], edit: &CgmhEdit) -> Result<f64> {
        Ok(self.edit_factors(target, x, edit)?.iter().sum())
    }

    pub fn propose_edit<R: Rng + ?Sized>(&self, target: &Target, x: &[TokenId], rng: &mut R) -> Result<ProposalRecord> {
        let m = x.len();
        let ops = self.ops.log_probs(m, target.max_len);
        let op = sample_index(&ops, rng);
        let edit = match op {
            0 => {
                let pos = rng.random_range(0..m);
                let (words, lp) = self.fill_dist(target, x, pos, false)?;
                CgmhEdit::Replace {
                    pos,
                    word: words[sample_index(&lp, rng)],
                }
            }
            1 => {
                let gap = rng.random_range(0..=m);
                let (words, lp) = self.fill_dist(target, x, gap, true)?;
                CgmhEdit::Insert {
                    gap,
                    word: words[sample_index(&lp, rng)],
                }
            }
            _ => CgmhEdit::Delete {
                pos: rng.random_range(0..m),
            },
        };
        let f = self.edit_factors(target, x, &edit)?;
        let x_star = edit.apply(x);
        let log_q_reverse = self.edit_log_prob(target, &x_star, &edit.inverse(x))?;
        Ok(ProposalRecord {
            x_star,
            log_p_pos: f[0],
            log_p_group: f[1],
            log_p_fill: f[2],
            log_p_template: 0.0,
            log_q_forward: f.iter().sum(),
            log_q_reverse,
            detail: MoveDetail::Cgmh(edit),
        })
    }

    /// Every edit available at `x`, for exhaustive checks.
    pub fn all_edits(&self, target: &Target, x: &[TokenId]) -> Vec<CgmhEdit> {
        let m = x.len();
        let ops = self.ops.log_probs(m, target.max_len);
        let words = target.vocab.word_ids();
        let mut out = Vec::new();
        if ops[0] > f64::NEG_INFINITY {
            for pos in 0..m {
                out.extend(words.iter().map(|&word| CgmhEdit::Replace { pos, word }));
            }
        }
        if ops[1] > f64::NEG_INFINITY {
            for gap in 0..=m {
                out.extend(words.iter().map(|&word| CgmhEdit::Insert { gap, word }));
            }
        }
        if ops[2] > f64::NEG_INFINITY {
            out.extend((0..m).map(|pos| CgmhEdit::Delete { pos }));
        }
        out
    }
}

impl Proposer for CgmhProposer {
    fn propose(
        &self,
        target: &Target,
        x: &[TokenId],
        _cache: &mut FitCache,
        rng: &mut dyn rand::RngCore,
    ) -> Result<ProposalRecord> {
        self.propose_edit(target, x, rng)
    }

    fn name(&self) -> &'static str {
        "cgmh"
    }
}

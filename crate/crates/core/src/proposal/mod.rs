//! Proposal distributions: the tree-search proposal and the single-edit
//! baseline.

pub mod cgmh;
pub mod enumerate;
pub mod tsmh;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::template::Slot;
use crate::target::{FitCache, Target};
use crate::vocab::TokenId;

pub use cgmh::{CgmhEdit, CgmhOps, CgmhProposer};
pub use enumerate::{enumerate_templates, group_log_probs, Enumerated, Enumeration, Group};
pub use tsmh::{TsmhMove, TsmhProposer};

/// A drawn move with its forward and reverse proposal probabilities.
///
/// For the tree-search proposal the four factors are position, group, fill
/// and template selection. For the single-edit proposal they are position,
/// operation choice, fill, and a unit template factor.
#[derive(Debug, Clone)]
pub struct ProposalRecord {
    pub x_star: Vec<TokenId>,
    pub log_p_pos: f64,
    pub log_p_group: f64,
    pub log_p_fill: f64,
    pub log_p_template: f64,
    pub log_q_forward: f64,
    /// `-inf` when the inverse move cannot be proposed from `x_star`.
    pub log_q_reverse: f64,
    pub detail: MoveDetail,
}

#[derive(Debug, Clone)]
pub enum MoveDetail {
    Tsmh(TsmhMove),
    Cgmh(CgmhEdit),
}

/// The four forward factors of one move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Factors {
    pub log_p_pos: f64,
    pub log_p_group: f64,
    pub log_p_fill: f64,
    pub log_p_template: f64,
}

impl Factors {
    pub fn total(&self) -> f64 {
        self.log_p_pos + self.log_p_group + self.log_p_fill + self.log_p_template
    }
}

/// Anything that proposes a next state and knows both directions' odds.
pub trait Proposer: Send + Sync {
    fn propose(
        &self,
        target: &Target,
        x: &[TokenId],
        cache: &mut FitCache,
        rng: &mut dyn rand::RngCore,
    ) -> Result<ProposalRecord>;

    fn name(&self) -> &'static str;
}

/// Draws an index from normalized log-probabilities.
pub fn sample_index<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &lp) in log_probs.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        last = i;
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    last
}

/// Uniform `min(k, m)`-subset of `0..m`, ascending, with `ln(1 / C(m, k'))`.
pub fn select_positions<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> (Vec<usize>, f64) {
    let k = k.min(m);
    let mut pos = rand::seq::index::sample(rng, m, k).into_vec();
    pos.sort_unstable();
    (pos, -ln_choose(m, k))
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    statrs::function::factorial::ln_binomial(n as u64, k as u64)
}

/// Fills the placeholders of `slots` left to right, each drawn from the
/// LM's conditional restricted to the placeholder's category, with later
/// placeholders still masked. With `forced`, scores that fill instead of
/// sampling. Returns the sentence and the fill's log-probability.
pub fn fill_template<R: Rng + ?Sized>(
    target: &Target,
    slots: &[Slot],
    forced: Option<&[TokenId]>,
    rng: &mut R,
) -> Result<(Vec<TokenId>, f64)> {
    let mask = target.vocab.mask();
    let mut tokens: Vec<TokenId> = slots
        .iter()
        .map(|s| match *s {
            Slot::Word(t) => t,
            Slot::Placeholder(_) => mask,
        })
        .collect();
    let mut log_p = 0.0;
    let mut nth = 0;
    for (i, s) in slots.iter().enumerate() {
        let Slot::Placeholder(c) = *s else { continue };
        let members = target.partition.members(c);
        let word = match forced {
            Some(f) => {
                let w = f[nth];
                match members.binary_search(&w) {
                    Ok(j) if members.len() > 1 => {
                        log_p += target.lm.fill_logprobs(&tokens, i, members)?[j];
                    }
                    Ok(_) => {}
                    Err(_) => log_p = f64::NEG_INFINITY,
                }
                w
            }
            None if members.len() == 1 => members[0],
            None => {
                let lp = target.lm.fill_logprobs(&tokens, i, members)?;
                let j = sample_index(&lp, rng);
                log_p += lp[j];
                members[j]
            }
        };
        tokens[i] = word;
        nth += 1;
    }
    Ok((tokens, log_p))
}

/// `ln A = min(0, ln π(x*) + ln Q(x|x*) − ln π(x) − ln Q(x*|x))`.
pub fn log_acceptance(log_pi_x: f64, log_pi_star: f64, log_q_forward: f64, log_q_reverse: f64) -> f64 {
    if log_q_reverse == f64::NEG_INFINITY || log_pi_star == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (log_pi_star + log_q_reverse - log_pi_x - log_q_forward).min(0.0)
}

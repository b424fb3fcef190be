//! Tree-search proposal: positions, template enumeration, group selection,
//! fill, template selection.
//!
//! A move is the path `(positions, template, fill)` plus the fills drawn
//! for the other templates of the chosen group, which only enter through
//! the template-selection softmax. The reverse move inverts each edit at
//! its image position in `x*`; the other templates of the reverse group get
//! fresh fills, so the acceptance ratio is the multiple-try form over an
//! extended space. A reverse path that does not map back to the forward
//! path under the same construction is reported as unreachable; the
//! construction is then an involution on the moves it accepts.

use rand::Rng;

use super::enumerate::{enumerate_templates, group_log_probs};
use super::{fill_template, ln_choose, sample_index, select_positions, Factors, MoveDetail, ProposalRecord, Proposer};
use crate::error::Result;
use crate::lm::logsumexp;
use crate::target::{FitCache, Target};
use crate::template::{apply_ops, EditOp, Slot};
use crate::vocab::TokenId;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy)]
pub struct TsmhProposer {
    pub k: usize,
}

impl Default for TsmhProposer {
    fn default() -> Self {
        TsmhProposer { k: DEFAULT_K }
    }
}

/// A path through the proposal: where, which template, which words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub positions: Vec<usize>,
    pub ops: Vec<EditOp>,
    pub slots: Vec<Slot>,
    /// Words placed into the placeholders, left to right.
    pub fill: Vec<TokenId>,
}

#[derive(Debug, Clone)]
pub struct TsmhMove {
    pub forward: Path,
    pub group_error: u32,
    /// Fills of the group's other templates, in group order.
    pub aux: Vec<Vec<TokenId>>,
    /// The inverse path from `x*`, when one exists.
    pub reverse: Option<Path>,
    pub reverse_aux: Vec<Vec<TokenId>>,
}

/// Result of scoring a given path.
#[derive(Debug, Clone)]
pub struct PathEval {
    pub factors: Factors,
    /// Provenance kept for the path's template by the enumeration.
    pub canonical_ops: Vec<EditOp>,
    pub group_error: u32,
    pub aux: Vec<Vec<TokenId>>,
}

fn placeholder_words(slots: &[Slot], sentence: &[TokenId]) -> Vec<TokenId> {
    slots
        .iter()
        .zip(sentence)
        .filter(|(s, _)| matches!(s, Slot::Placeholder(_)))
        .map(|(_, &w)| w)
        .collect()
}

impl TsmhProposer {
    pub fn new(k: usize) -> Self {
        TsmhProposer { k: k.max(1) }
    }

    /// Draws a move from `x`, including the reverse probability.
    pub fn propose_move<R: Rng + ?Sized>(
        &self,
        target: &Target,
        x: &[TokenId],
        cache: &mut FitCache,
        rng: &mut R,
    ) -> Result<ProposalRecord> {
        let (positions, log_p_pos) = select_positions(x.len(), self.k, rng);
        let en = enumerate_templates(x, &positions, &target.partition, &target.constraints, target.max_len);
        let groups = en.groups();
        let glp = group_log_probs(&groups, target.constraints.ln_beta());
        let gi = sample_index(&glp, rng);
        let group = &groups[gi];

        let mut candidates = Vec::with_capacity(group.members.len());
        let mut fits = Vec::with_capacity(group.members.len());
        for &ti in &group.members {
            let (sentence, lp) = fill_template(target, &en.templates[ti].template.slots, None, rng)?;
            fits.push(cache.get(target, &sentence)?);
            candidates.push((sentence, lp));
        }
        let z = logsumexp(&fits);
        let tlp: Vec<f64> = fits.iter().map(|f| f - z).collect();
        let sel = sample_index(&tlp, rng);

        let chosen = &en.templates[group.members[sel]].template;
        let (x_star, log_p_fill) = candidates[sel].clone();
        let factors = Factors {
            log_p_pos,
            log_p_group: glp[gi],
            log_p_fill,
            log_p_template: tlp[sel],
        };
        let aux: Vec<Vec<TokenId>> = group
            .members
            .iter()
            .zip(&candidates)
            .enumerate()
            .filter(|&(j, _)| j != sel)
            .map(|(_, (&ti, (s, _)))| placeholder_words(&en.templates[ti].template.slots, s))
            .collect();
        let forward = Path {
            positions,
            ops: chosen.ops.clone(),
            slots: chosen.slots.clone(),
            fill: placeholder_words(&chosen.slots, &x_star),
        };

        let (log_q_reverse, reverse, reverse_aux) = self.reverse_of(target, x, &x_star, &forward, &factors, cache, rng)?;
        Ok(ProposalRecord {
            log_p_pos: factors.log_p_pos,
            log_p_group: factors.log_p_group,
            log_p_fill: factors.log_p_fill,
            log_p_template: factors.log_p_template,
            log_q_forward: factors.total(),
            log_q_reverse,
            x_star,
            detail: MoveDetail::Tsmh(TsmhMove {
                forward,
                group_error: group.error,
                aux,
                reverse,
                reverse_aux,
            }),
        })
    }

    /// Reverse probability of a forward path, drawing fresh fills for the
    /// reverse group's other templates.
    #[allow(clippy::too_many_arguments)]
    fn reverse_of<R: Rng + ?Sized>(
        &self,
        target: &Target,
        x: &[TokenId],
        x_star: &[TokenId],
        forward: &Path,
        forward_factors: &Factors,
        cache: &mut FitCache,
        rng: &mut R,
    ) -> Result<(f64, Option<Path>, Vec<Vec<TokenId>>)> {
        let Some(rev) = self.reverse_path(target, x, x_star, &forward.positions, &forward.ops) else {
            return Ok((f64::NEG_INFINITY, None, Vec::new()));
        };
        if x_star == x && rev.positions == forward.positions && rev.slots == forward.slots {
            // The move is its own inverse: the reverse draw is the forward one.
            return Ok((forward_factors.total(), Some(rev), Vec::new()));
        }
        let Some(eval) = self.path_log_prob(target, x_star, &rev, None, cache, rng)? else {
            return Ok((f64::NEG_INFINITY, Some(rev), Vec::new()));
        };
        match self.reverse_path(target, x_star, x, &rev.positions, &eval.canonical_ops) {
            Some(back) if back.positions == forward.positions && back.slots == forward.slots => {
                Ok((eval.factors.total(), Some(rev), eval.aux))
            }
            _ => Ok((f64::NEG_INFINITY, Some(rev), eval.aux)),
        }
    }

    /// Probability of proposing `path` from `x`. Fills for the other
    /// templates in the group come from `aux` when given, else are drawn.
    /// `None` when the path's template is not enumerated at its positions.
    pub fn path_log_prob<R: Rng + ?Sized>(
        &self,
        target: &Target,
        x: &[TokenId],
        path: &Path,
        aux: Option<&[Vec<TokenId>]>,
        cache: &mut FitCache,
        rng: &mut R,
    ) -> Result<Option<PathEval>> {
        if path.positions.len() != self.k.min(x.len()) {
            return Ok(None);
        }
        let en = enumerate_templates(x, &path.positions, &target.partition, &target.constraints, target.max_len);
        let Some(idx) = en.find(&path.slots) else {
            return Ok(None);
        };
        let groups = en.groups();
        let glp = group_log_probs(&groups, target.constraints.ln_beta());
        let gi = groups
            .iter()
            .position(|g| g.error == en.templates[idx].error)
            .expect("every template belongs to its error group");
        let group = &groups[gi];

        let (sentence, log_p_fill) = fill_template(target, &path.slots, Some(&path.fill), rng)?;
        let mut fits = Vec::with_capacity(group.members.len());
        let mut used_aux = Vec::with_capacity(group.members.len().saturating_sub(1));
        let mut sel_fit = f64::NAN;
        let mut next_aux = 0;
        for &ti in &group.members {
            if ti == idx {
                sel_fit = cache.get(target, &sentence)?;
                fits.push(sel_fit);
                continue;
            }
            let slots = &en.templates[ti].template.slots;
            let s = match aux {
                Some(a) => fill_template(target, slots, Some(&a[next_aux]), rng)?.0,
                None => fill_template(target, slots, None, rng)?.0,
            };
            next_aux += 1;
            fits.push(cache.get(target, &s)?);
            used_aux.push(placeholder_words(slots, &s));
        }
        let factors = Factors {
            log_p_pos: -ln_choose(x.len(), path.positions.len()),
            log_p_group: glp[gi],
            log_p_fill,
            log_p_template: sel_fit - logsumexp(&fits),
        };
        Ok(Some(PathEval {
            factors,
            canonical_ops: en.templates[idx].template.ops.clone(),
            group_error: group.error,
            aux: used_aux,
        }))
    }

    /// Builds the inverse of the edit `(positions, ops)` taking `x` to
    /// `x_star`: replace with the original word's category, delete what was
    /// inserted, insert what was deleted before the word that followed it.
    /// Untouched selected positions map to their images and pad the
    /// position set to `min(k, |x*|)`, topped up with the lowest free
    /// positions. `None` when the inverse needs two edits on one word, an
    /// insertion past the last word, or more than `k` edits.
    pub fn reverse_path(
        &self,
        target: &Target,
        x: &[TokenId],
        x_star: &[TokenId],
        positions: &[usize],
        ops: &[EditOp],
    ) -> Option<Path> {
        let part = &target.partition;
        let mut active: Vec<(usize, EditOp)> = Vec::new();
        let mut kept: Vec<usize> = Vec::new();
        let mut pending = None;
        let mut j = 0;
        let mut sel = positions.iter().zip(ops).peekable();
        for (i, &w) in x.iter().enumerate() {
            let op = match sel.peek() {
                Some(&(&p, &op)) if p == i => {
                    sel.next();
                    Some(op)
                }
                _ => None,
            };
            match op {
                None | Some(EditOp::None) => {
                    if let Some(c) = pending.take() {
                        active.push((j, EditOp::Insert(c)));
                    } else if op.is_some() {
                        kept.push(j);
                    }
                    j += 1;
                }
                Some(_) if pending.is_some() => return None,
                Some(EditOp::Delete) => pending = Some(part.cat(w)),
                Some(EditOp::Replace(_)) => {
                    active.push((j, EditOp::Replace(part.cat(w))));
                    j += 1;
                }
                Some(EditOp::Insert(_)) => {
                    active.push((j, EditOp::Delete));
                    j += 2;
                }
            }
        }
        if pending.is_some() || j != x_star.len() {
            return None;
        }
        let want = self.k.min(x_star.len());
        if active.len() > want {
            return None;
        }
        let mut taken = vec![false; x_star.len()];
        for &(p, _) in &active {
            taken[p] = true;
        }
        let mut chosen: Vec<(usize, EditOp)> = active;
        let fillers = kept.into_iter().chain(0..x_star.len());
        for p in fillers {
            if chosen.len() == want {
                break;
            }
            if !taken[p] {
                taken[p] = true;
                chosen.push((p, EditOp::None));
            }
        }
        chosen.sort_unstable_by_key(|&(p, _)| p);
        let (rpos, rops): (Vec<usize>, Vec<EditOp>) = chosen.into_iter().unzip();
        let slots = apply_ops(x_star, &rpos, &rops);
        if slots.len() != x.len() {
            return None;
        }
        let mut fill = Vec::new();
        for (s, &w) in slots.iter().zip(x) {
            match *s {
                Slot::Word(t) if t != w => return None,
                Slot::Word(_) => {}
                Slot::Placeholder(_) => fill.push(w),
            }
        }
        Some(Path {
            positions: rpos,
            ops: rops,
            slots,
            fill,
        })
    }
}

impl Proposer for TsmhProposer {
    fn propose(
        &self,
        target: &Target,
        x: &[TokenId],
        cache: &mut FitCache,
        rng: &mut dyn rand::RngCore,
    ) -> Result<ProposalRecord> {
        self.propose_move(target, x, cache, rng)
    }

    fn name(&self) -> &'static str {
        "tsmh"
    }
}

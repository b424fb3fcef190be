//! Depth-first enumeration of edit templates and grouping by constraint error.

use rustc_hash::FxHashMap;

use crate::lm::log_normalize;
use crate::partition::CategoryPartition;
use crate::template::{apply_ops, EditOp, Slot, Template};
use crate::logic::ConstraintSet;
use crate::vocab::TokenId;

#[derive(Debug, Clone)]
pub struct Enumerated {
    pub template: Template,
    pub error: u32,
}

/// Templates reachable from one sentence at one position set, deduplicated
/// by slot sequence. Each keeps the provenance met first in depth-first
/// order, which is its canonical provenance.
#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Operation combinations visited before pruning.
    pub raw_count: u64,
    pub templates: Vec<Enumerated>,
    index: FxHashMap<Vec<Slot>, usize>,
}

/// Templates sharing one constraint error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub error: u32,
    /// Indices into [`Enumeration::templates`], in enumeration order.
    pub members: Vec<usize>,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn find(&self, slots: &[Slot]) -> Option<usize> {
        self.index.get(slots).copied()
    }

    /// Groups in ascending error order.
    pub fn groups(&self) -> Vec<Group> {
        let mut by_error: Vec<Group> = Vec::new();
        for (i, t) in self.templates.iter().enumerate() {
            match by_error.iter_mut().find(|g| g.error == t.error) {
                Some(g) => g.members.push(i),
                None => by_error.push(Group {
                    error: t.error,
                    members: vec![i],
                }),
            }
        }
        by_error.sort_by_key(|g| g.error);
        by_error
    }
}

/// Visits all `(2|V|+2)^k'` operation combinations over `positions`
/// (ascending, 0-based), first position outermost. Results that would be
/// empty, longer than `max_len`, or hold a placeholder for an empty
/// category are pruned.
pub fn enumerate_templates(
    tokens: &[TokenId],
    positions: &[usize],
    partition: &CategoryPartition,
    constraints: &ConstraintSet,
    max_len: usize,
) -> Enumeration {
    let ops = EditOp::all(partition.len());
    let mut state = Dfs {
        tokens,
        positions,
        partition,
        constraints,
        max_len,
        ops: &ops,
        chosen: Vec::with_capacity(positions.len()),
        out: Enumeration {
            raw_count: 0,
            templates: Vec::new(),
            index: FxHashMap::default(),
        },
    };
    state.visit(tokens.len() as isize);
    state.out
}

struct Dfs<'a> {
    tokens: &'a [TokenId],
    positions: &'a [usize],
    partition: &'a CategoryPartition,
    constraints: &'a ConstraintSet,
    max_len: usize,
    ops: &'a [EditOp],
    chosen: Vec<EditOp>,
    out: Enumeration,
}

impl Dfs<'_> {
    fn visit(&mut self, len: isize) {
        let depth = self.chosen.len();
        if depth == self.positions.len() {
            self.out.raw_count += 1;
            self.leaf(len);
            return;
        }
        for &op in self.ops {
            let delta = match op {
                EditOp::Delete => -1,
                EditOp::Insert(_) => 1,
                _ => 0,
            };
            self.chosen.push(op);
            self.visit(len + delta);
            self.chosen.pop();
        }
    }

    fn leaf(&mut self, len: isize) {
        if len < 1 || len as usize > self.max_len {
            return;
        }
        let empty_category = self.chosen.iter().any(|op| match *op {
            EditOp::Replace(c) | EditOp::Insert(c) => self.partition.members(c).is_empty(),
            _ => false,
        });
        if empty_category {
            return;
        }
        let slots = apply_ops(self.tokens, self.positions, &self.chosen);
        if self.out.index.contains_key(&slots) {
            return;
        }
        let error = self.constraints.template_error(&slots, self.partition);
        self.out.index.insert(slots.clone(), self.out.templates.len());
        self.out.templates.push(Enumerated {
            template: Template {
                slots,
                positions: self.positions.to_vec(),
                ops: self.chosen.clone(),
            },
            error,
        });
    }
}

/// Normalized log-probabilities of the groups: weight `β^(C_i − C_min)`
/// renormalized over the groups present. The `(1 − β)` factor is common to
/// all groups and cancels.
pub fn group_log_probs(groups: &[Group], ln_beta: f64) -> Vec<f64> {
    let Some(min) = groups.iter().map(|g| g.error).min() else {
        return Vec::new();
    };
    let mut w: Vec<f64> = groups
        .iter()
        .map(|g| (g.error - min) as f64 * ln_beta)
        .collect();
    log_normalize(&mut w);
    w
}

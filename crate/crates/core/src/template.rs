//! Sentence templates and word-level edit operations.

use std::fmt;

use crate::partition::{CategoryId, CategoryPartition};
use crate::vocab::{TokenId, Vocabulary};

/// One slot of a template: a fixed word or a category placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Word(TokenId),
    Placeholder(CategoryId),
}

/// Word-level operation attached to a selected position.
///
/// `Insert` places a new word immediately before the word at its position;
/// the original word is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOp {
    None,
    Delete,
    Replace(CategoryId),
    Insert(CategoryId),
}

impl EditOp {
    /// All `2|V| + 2` operations in enumeration order: none, delete, then
    /// replace and insert per category.
    pub fn all(num_categories: usize) -> Vec<EditOp> {
        let mut ops = Vec::with_capacity(2 * num_categories + 2);
        ops.push(EditOp::None);
        ops.push(EditOp::Delete);
        ops.extend((0..num_categories).map(EditOp::Replace));
        ops.extend((0..num_categories).map(EditOp::Insert));
        ops
    }

    pub fn label(&self, partition: &CategoryPartition) -> String {
        match *self {
            EditOp::None => "none".to_string(),
            EditOp::Delete => "delete".to_string(),
            EditOp::Replace(c) => format!("replace[{}]", partition.name(c)),
            EditOp::Insert(c) => format!("insert[{}]", partition.name(c)),
        }
    }
}

/// A template plus the edit that produced it from the source sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub slots: Vec<Slot>,
    /// Selected positions (0-based, ascending) in the source sentence.
    pub positions: Vec<usize>,
    /// One operation per selected position.
    pub ops: Vec<EditOp>,
}

impl Template {
    pub fn placeholder_count(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| matches!(s, Slot::Placeholder(_)))
            .count()
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|o| *o == EditOp::None)
    }

    pub fn render(&self, vocab: &Vocabulary, partition: &CategoryPartition) -> String {
        render_slots(&self.slots, vocab, partition)
    }
}

pub fn render_slots(slots: &[Slot], vocab: &Vocabulary, partition: &CategoryPartition) -> String {
    let parts: Vec<String> = slots
        .iter()
        .map(|s| match *s {
            Slot::Word(t) => vocab.word(t).to_string(),
            Slot::Placeholder(c) => format!("[{}]", partition.name(c)),
        })
        .collect();
    parts.join(" ")
}

/// Applies `ops` at `positions` (both against the original sentence).
/// Equivalent to applying the edits right to left.
pub fn apply_ops(tokens: &[TokenId], positions: &[usize], ops: &[EditOp]) -> Vec<Slot> {
    debug_assert_eq!(positions.len(), ops.len());
    let mut out = Vec::with_capacity(tokens.len() + ops.len());
    let mut sel = positions.iter().zip(ops).peekable();
    for (i, &tok) in tokens.iter().enumerate() {
        match sel.peek() {
            Some(&(&p, op)) if p == i => {
                sel.next();
                match *op {
                    EditOp::None => out.push(Slot::Word(tok)),
                    EditOp::Delete => {}
                    EditOp::Replace(c) => out.push(Slot::Placeholder(c)),
                    EditOp::Insert(c) => {
                        out.push(Slot::Placeholder(c));
                        out.push(Slot::Word(tok));
                    }
                }
            }
            _ => out.push(Slot::Word(tok)),
        }
    }
    out
}

/// Substitutes `fill` into the placeholders of `slots`, left to right.
pub fn instantiate(slots: &[Slot], fill: &[TokenId]) -> Vec<TokenId> {
    let mut it = fill.iter();
    slots
        .iter()
        .map(|s| match *s {
            Slot::Word(t) => t,
            Slot::Placeholder(_) => *it.next().expect("fill shorter than placeholder count"),
        })
        .collect()
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::None => write!(f, "N"),
            EditOp::Delete => write!(f, "D"),
            EditOp::Replace(c) => write!(f, "R{c}"),
            EditOp::Insert(c) => write!(f, "I{c}"),
        }
    }
}

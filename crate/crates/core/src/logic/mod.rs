//! Propositional hard constraints over position/category indicators.
//!
//! A variable `w<i>[V]` is true when the i-th word (1-based) of a sentence
//! belongs to category `V`. Positions past the end of the sentence are
//! false. Because variables only look at categories, a formula evaluates
//! the same on a template as on every sentence that instantiates it.

mod parser;

use std::fmt;

pub use parser::{parse_formula, ParseError};

use crate::error::{Error, Result};
use crate::partition::{normalize_name, CategoryId, CategoryPartition};
use crate::template::Slot;
use crate::vocab::Sentence;

/// Default β, shared by the hard score and group selection.
pub const DEFAULT_BETA: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    /// `w<pos>[category]`, `pos` 1-based.
    Var { pos: usize, category: String },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(pos: usize, category: impl Into<String>) -> Self {
        Formula::Var {
            pos,
            category: category.into(),
        }
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Left-associated conjunction; `None` for an empty list.
    pub fn all(items: impl IntoIterator<Item = Formula>) -> Option<Self> {
        items.into_iter().reduce(Formula::and)
    }

    /// Left-associated disjunction; `None` for an empty list.
    pub fn any(items: impl IntoIterator<Item = Formula>) -> Option<Self> {
        items.into_iter().reduce(Formula::or)
    }

    /// Category names referenced by the formula, in first-use order.
    pub fn categories(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_vars(&mut |_, c| {
            if !out.contains(&c) {
                out.push(c);
            }
        });
        out
    }

    fn visit_vars<'a>(&'a self, f: &mut impl FnMut(usize, &'a str)) {
        match self {
            Formula::Var { pos, category } => f(*pos, category),
            Formula::Not(a) => a.visit_vars(f),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn compile(&self, partition: &CategoryPartition) -> Result<Node> {
        Ok(match self {
            Formula::Var { pos, category } => {
                let id = partition
                    .id_of(category)
                    .ok_or_else(|| Error::UnknownCategory(normalize_name(category).to_string()))?;
                Node::Var(pos - 1, id)
            }
            Formula::Not(a) => Node::Not(Box::new(a.compile(partition)?)),
            Formula::And(a, b) => Node::And(
                Box::new(a.compile(partition)?),
                Box::new(b.compile(partition)?),
            ),
            Formula::Or(a, b) => Node::Or(
                Box::new(a.compile(partition)?),
                Box::new(b.compile(partition)?),
            ),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Not(_) => 3,
            Formula::Var { .. } => 4,
        }
    }
}

/// Compact printing: no spaces; a binary child is parenthesized when its
/// operator differs from the parent's, or when it is a right-nested
/// operand of the same operator. `parse(print(f)) == f` structurally.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Var { pos, category } => write!(f, "w{pos}[{}]", normalize_name(category)),
            Formula::Not(a) => {
                if a.precedence() < 3 {
                    write!(f, "!({a})")
                } else {
                    write!(f, "!{a}")
                }
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let op = if matches!(self, Formula::And(..)) { '&' } else { '|' };
                let me = self.precedence();
                let left_paren = a.precedence() < 3 && a.precedence() != me;
                let right_paren = b.precedence() < 3;
                if left_paren {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, "{op}")?;
                if right_paren {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

/// Parses and checks every category against `partition`.
pub fn parse_formula_in(text: &str, partition: &CategoryPartition) -> Result<Formula> {
    let f = parse_formula(text)?;
    f.compile(partition)?;
    Ok(f)
}

#[derive(Debug, Clone)]
enum Node {
    Var(usize, CategoryId),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, cats: &[CategoryId]) -> bool {
        match self {
            Node::Var(i, c) => cats.get(*i) == Some(c),
            Node::Not(a) => !a.eval(cats),
            Node::And(a, b) => a.eval(cats) && b.eval(cats),
            Node::Or(a, b) => a.eval(cats) || b.eval(cats),
        }
    }
}

/// Categories of each word of a sentence.
pub fn sentence_categories(x: &Sentence, partition: &CategoryPartition) -> Vec<CategoryId> {
    x.tokens().iter().map(|&t| partition.cat(t)).collect()
}

/// Category of each slot: the placeholder's category or the fixed word's.
pub fn template_categories(slots: &[Slot], partition: &CategoryPartition) -> Vec<CategoryId> {
    slots
        .iter()
        .map(|s| match *s {
            Slot::Word(t) => partition.cat(t),
            Slot::Placeholder(c) => c,
        })
        .collect()
}

pub fn eval_sentence(f: &Formula, x: &Sentence, partition: &CategoryPartition) -> Result<bool> {
    Ok(f.compile(partition)?.eval(&sentence_categories(x, partition)))
}

pub fn eval_template(f: &Formula, slots: &[Slot], partition: &CategoryPartition) -> Result<bool> {
    Ok(f.compile(partition)?.eval(&template_categories(slots, partition)))
}

/// Hard constraints `c_1..c_M` with penalty base β.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    formulas: Vec<Formula>,
    compiled: Vec<Node>,
    beta: f64,
    ln_beta: f64,
}

impl ConstraintSet {
    pub fn new(formulas: Vec<Formula>, beta: f64, partition: &CategoryPartition) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidBeta(beta));
        }
        let compiled = formulas
            .iter()
            .map(|f| f.compile(partition))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstraintSet {
            formulas,
            compiled,
            beta,
            ln_beta: beta.ln(),
        })
    }

    pub fn empty(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidBeta(beta));
        }
        Ok(ConstraintSet {
            formulas: Vec::new(),
            compiled: Vec::new(),
            beta,
            ln_beta: beta.ln(),
        })
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ln_beta(&self) -> f64 {
        self.ln_beta
    }

    /// Number of violated constraints for a category sequence.
    pub fn error_of(&self, cats: &[CategoryId]) -> u32 {
        self.compiled.iter().filter(|n| !n.eval(cats)).count() as u32
    }

    /// Which constraints hold, in order.
    pub fn satisfied(&self, cats: &[CategoryId]) -> Vec<bool> {
        self.compiled.iter().map(|n| n.eval(cats)).collect()
    }

    pub fn constraint_error(&self, x: &Sentence, partition: &CategoryPartition) -> u32 {
        self.error_of(&sentence_categories(x, partition))
    }

    pub fn template_error(&self, slots: &[Slot], partition: &CategoryPartition) -> u32 {
        self.error_of(&template_categories(slots, partition))
    }

    /// `ln Φ_hard = C · ln β`.
    pub fn log_hard_score_of(&self, error: u32) -> f64 {
        if error == 0 {
            0.0
        } else {
            error as f64 * self.ln_beta
        }
    }

    pub fn log_hard_score(&self, x: &Sentence, partition: &CategoryPartition) -> f64 {
        self.log_hard_score_of(self.constraint_error(x, partition))
    }

    /// `β^C(x)`; exactly 1.0 when nothing is violated. Underflows to 0 for
    /// large errors, use [`ConstraintSet::log_hard_score`] in arithmetic.
    pub fn hard_score(&self, x: &Sentence, partition: &CategoryPartition) -> f64 {
        self.log_hard_score(x, partition).exp()
    }
}

/// `w1[K] | w2[K] | ... | w<max_len>[K]`.
pub fn keyword_constraint(category: &str, max_len: usize) -> Formula {
    let name = normalize_name(category);
    Formula::any((1..=max_len).map(|i| Formula::var(i, name))).expect("max_len >= 1")
}

/// One-hot expansion: some position holds `K` and no other position does.
pub fn keyword_exactly_once(category: &str, max_len: usize) -> Formula {
    let name = normalize_name(category);
    Formula::any((1..=max_len).map(|i| {
        let others = (1..=max_len)
            .filter(|&j| j != i)
            .map(|j| Formula::not(Formula::var(j, name)));
        match Formula::all(others) {
            Some(rest) => Formula::and(Formula::var(i, name), rest),
            None => Formula::var(i, name),
        }
    }))
    .expect("max_len >= 1")
}

/// First word is a wh-word.
pub fn question_word_first() -> Formula {
    Formula::var(1, "QWH")
}

/// Exactly one of the second and third words is an auxiliary.
pub fn auxiliary_second_or_third() -> Formula {
    Formula::or(
        Formula::and(Formula::var(2, "AUX"), Formula::not(Formula::var(3, "AUX"))),
        Formula::and(Formula::var(3, "AUX"), Formula::not(Formula::var(2, "AUX"))),
    )
}

/// The two interrogative constraints; `strict` adds exactly-one wh-word and
/// exactly-one auxiliary over positions `1..=max_len`.
pub fn interrogative_formulas(strict: bool, max_len: usize) -> Vec<Formula> {
    let mut out = vec![question_word_first(), auxiliary_second_or_third()];
    if strict {
        out.push(keyword_exactly_once("QWH", max_len));
        out.push(keyword_exactly_once("AUX", max_len));
    }
    out
}

pub fn interrogative_constraints(
    partition: &CategoryPartition,
    strict: bool,
    max_len: usize,
    beta: f64,
) -> Result<ConstraintSet> {
    require(partition, &["QWH", "AUX"])?;
    ConstraintSet::new(interrogative_formulas(strict, max_len), beta, partition)
}

/// `w1[VERB] | (w1[ADV] & w2[VERB])`.
pub fn imperative_formula() -> Formula {
    Formula::or(
        Formula::var(1, "VERB"),
        Formula::and(Formula::var(1, "ADV"), Formula::var(2, "VERB")),
    )
}

pub fn imperative_constraints(partition: &CategoryPartition, beta: f64) -> Result<ConstraintSet> {
    require(partition, &["VERB", "ADV"])?;
    ConstraintSet::new(vec![imperative_formula()], beta, partition)
}

fn require(partition: &CategoryPartition, names: &[&str]) -> Result<()> {
    for n in names {
        if partition.id_of(n).is_none() {
            return Err(Error::UnknownCategory(n.to_string()));
        }
    }
    Ok(())
}

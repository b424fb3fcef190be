//! Recursive-descent parser for the constraint DSL.
//!
//! ```text
//! formula := or
//! or      := and ( "|" and )*
//! and     := unary ( "&" unary )*
//! unary   := "!" unary | atom
//! atom    := var | "(" formula ")"
//! var     := "w" DIGITS "[" NAME "]"
//! ```
//!
//! Whitespace is ignored between tokens. Offsets in errors are 1-based
//! character positions; end of input reports `len + 1`.

use std::fmt;

use super::Formula;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut p = Parser { chars, pos: 0 };
    let f = p.or()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected `{}`", p.chars[p.pos])));
    }
    Ok(f)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.peek() == Some('|') {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some('&') {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some('!') => {
                self.pos += 1;
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Some('(') => {
                self.pos += 1;
                let inner = self.or()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some('w') => self.var(),
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn var(&mut self) -> Result<Formula, ParseError> {
        self.pos += 1; // 'w'
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected position digits after `w`"));
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        let pos: usize = digits.parse().map_err(|_| ParseError {
            offset: start + 1,
            message: format!("position `{digits}` out of range"),
        })?;
        if pos == 0 {
            return Err(ParseError {
                offset: start + 1,
                message: "positions are 1-based".to_string(),
            });
        }
        if self.chars.get(self.pos) != Some(&'[') {
            return Err(self.error("expected `[`"));
        }
        self.pos += 1;
        let name_start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c == ']' || c == '[' || c.is_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if name_start == self.pos {
            return Err(self.error("expected category name"));
        }
        let category: String = self.chars[name_start..self.pos].iter().collect();
        if self.chars.get(self.pos) != Some(&']') {
            return Err(self.error("expected `]`"));
        }
        self.pos += 1;
        Ok(Formula::Var { pos, category })
    }
}

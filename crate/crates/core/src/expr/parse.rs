//! Recursive-descent expression parser.
//!
//! Precedence, loosest to tightest: `+ -`, `* /`, unary minus, `^`. Power
//! binds tighter than unary minus, so `-x^2` parses as `-(x^2)`. Exponents
//! must be (optionally parenthesized, optionally signed) numeric literals;
//! decimal literals are converted to exact rationals, never floats.

use std::collections::HashSet;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::Pow;

use super::arena::{ExprArena, ExprId, UnaryFn};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the parsed text.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.position + 1, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Parses `input` into `arena`, interning every identifier as a symbol.
pub fn parse_expression(arena: &mut ExprArena, input: &str) -> Result<ExprId, ParseError> {
    Parser { arena, input: input.as_bytes(), pos: 0, allowed: None }.run()
}

/// As `parse_expression`, but identifiers outside `allowed` are rejected with
/// their position. Function names (`log`, `exp`, ...) are always accepted in
/// call position.
pub fn parse_expression_checked(
    arena: &mut ExprArena,
    input: &str,
    allowed: &HashSet<String>,
) -> Result<ExprId, ParseError> {
    Parser { arena, input: input.as_bytes(), pos: 0, allowed: Some(allowed) }.run()
}

struct Parser<'a> {
    arena: &'a mut ExprArena,
    input: &'a [u8],
    pos: usize,
    allowed: Option<&'a HashSet<String>>,
}

impl<'a> Parser<'a> {
    fn run(mut self) -> Result<ExprId, ParseError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos != self.input.len() {
            return Err(self.err(format!(
                "unexpected character '{}'",
                self.input[self.pos] as char
            )));
        }
        Ok(e)
    }

    fn err(&self, message: String) -> ParseError {
        ParseError { position: self.pos, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.input.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<ExprId, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                acc = self.arena.add(acc, rhs);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                acc = self.arena.sub(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<ExprId, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                acc = self.arena.mul(acc, rhs);
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                acc = self.arena.div(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<ExprId, ParseError> {
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(self.arena.neg(inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprId, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let exponent = self.exponent_literal()?;
        if self.peek() == Some(b'^') {
            return Err(self.err("chained '^' requires parentheses".into()));
        }
        Ok(self.arena.pow(base, exponent))
    }

    /// `^` exponents are numeric literals: `2`, `1.7`, `-2`, `(±number)`.
    fn exponent_literal(&mut self) -> Result<BigRational, ParseError> {
        let parenthesized = self.eat(b'(');
        let negative = self.eat(b'-');
        let c = self
            .peek()
            .ok_or_else(|| self.err("expected a numeric literal exponent".into()))?;
        if !c.is_ascii_digit() {
            return Err(self.err("exponent must be a numeric literal".into()));
        }
        let mut value = self.number()?;
        if negative {
            value = -value;
        }
        if parenthesized {
            self.expect(b')')?;
        }
        Ok(value)
    }

    fn atom(&mut self) -> Result<ExprId, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok(self.arena.constant(v))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(c) => Err(self.err(format!("unexpected character '{}'", c as char))),
            None => Err(self.err("unexpected end of expression".into())),
        }
    }

    fn name(&mut self) -> Result<ExprId, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.input.len()
            && (self.input[self.pos].is_ascii_alphanumeric() || self.input[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.input[start..self.pos])
            .expect("ascii identifier")
            .to_owned();
        if self.peek() == Some(b'(') {
            let Some(f) = UnaryFn::from_name(&name) else {
                self.pos = start;
                return Err(self.err(format!("unknown function '{name}'")));
            };
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(self.arena.unary(f, arg));
        }
        if let Some(allowed) = self.allowed {
            if !allowed.contains(&name) {
                self.pos = start;
                return Err(self.err(format!("undeclared symbol '{name}'")));
            }
        }
        let sym = self.arena.symbol(&name);
        Ok(self.arena.sym_expr(sym))
    }

    /// Unsigned decimal literal with optional fraction and e-notation,
    /// converted exactly.
    fn number(&mut self) -> Result<BigRational, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut int_digits = String::new();
        let mut frac_digits = String::new();
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
            int_digits.push(self.input[self.pos] as char);
            self.pos += 1;
        }
        if self.pos < self.input.len() && self.input[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                frac_digits.push(self.input[self.pos] as char);
                self.pos += 1;
            }
        }
        if int_digits.is_empty() && frac_digits.is_empty() {
            self.pos = start;
            return Err(self.err("malformed numeric literal".into()));
        }
        let mut exp10: i64 = 0;
        if self.pos < self.input.len() && (self.input[self.pos] | 32) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            let neg = if self.pos < self.input.len() && self.input[self.pos] == b'-' {
                self.pos += 1;
                true
            } else {
                if self.pos < self.input.len() && self.input[self.pos] == b'+' {
                    self.pos += 1;
                }
                false
            };
            let estart = self.pos;
            while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == estart {
                // Not an exponent after all (e.g. a symbol like `e2a` cannot
                // appear here, but `2e` followed by junk should error at the
                // right spot by rewinding).
                self.pos = mark;
            } else {
                let digits = std::str::from_utf8(&self.input[estart..self.pos]).unwrap();
                let v: i64 = digits
                    .parse()
                    .map_err(|_| self.err("exponent out of range".into()))?;
                exp10 = if neg { -v } else { v };
            }
        }
        let int_part: BigInt = if int_digits.is_empty() {
            BigInt::from(0)
        } else {
            int_digits.parse().expect("digits")
        };
        let scale = BigInt::from(10u32).pow(frac_digits.len() as u32);
        let frac_part: BigInt = if frac_digits.is_empty() {
            BigInt::from(0)
        } else {
            frac_digits.parse().expect("digits")
        };
        let mut value = BigRational::new(int_part * &scale + frac_part, scale);
        if exp10 != 0 {
            let ten = BigInt::from(10u32).pow(exp10.unsigned_abs() as u32);
            if exp10 > 0 {
                value *= BigRational::from_integer(ten);
            } else {
                value /= BigRational::from_integer(ten);
            }
        }
        Ok(value)
    }
}

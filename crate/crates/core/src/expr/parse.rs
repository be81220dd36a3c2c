//! Recursive-descent parser for coordinate expressions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | coord | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than a leading minus, so
//! `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at byte {offset}: {message} (expected {expected})")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub expected: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(u8),
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    coords: &'a [String],
    tok: Tok,
    tok_start: usize,
}

fn is_ident(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphabetic())
        && bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Parses `source` with coordinates named by `coords` (index = position).
pub fn parse(source: &str, coords: &[String]) -> Result<Expr, ParseError> {
    for (i, name) in coords.iter().enumerate() {
        if !is_ident(name) || Func::from_name(name).is_some() {
            return Err(ParseError {
                offset: 0,
                message: format!("invalid coordinate name {name:?}"),
                expected: "an identifier that is not a function name",
            });
        }
        if coords[..i].contains(name) {
            return Err(ParseError {
                offset: 0,
                message: format!("duplicate coordinate name {name:?}"),
                expected: "distinct coordinate names",
            });
        }
    }
    if source.trim().is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
            expected: "an expression",
        });
    }
    let mut p = Parser {
        src: source,
        pos: 0,
        coords,
        tok: Tok::End,
        tok_start: 0,
    };
    p.advance()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.error(
            match p.tok {
                Tok::Sym(b')') => "unbalanced ')'".to_string(),
                _ => "unexpected trailing input".to_string(),
            },
            "an operator or end of input",
        ));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn error(&self, message: String, expected: &'static str) -> ParseError {
        // keep the offset inside the source even at end of input
        let offset = self.tok_start.min(self.src.len().saturating_sub(1));
        ParseError {
            offset,
            message,
            expected,
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = bytes[self.pos];
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
            {
                self.pos += 1;
            }
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let mut look = self.pos + 1;
                if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                    look += 1;
                }
                if look < bytes.len() && bytes[look].is_ascii_digit() {
                    self.pos = look;
                    while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
            }
            let text = &self.src[start..self.pos];
            let v: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number {text:?}"),
                expected: "a decimal number",
            })?;
            self.tok = Tok::Num(v);
        } else if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
        } else if b"+-*/^()".contains(&c) {
            self.pos += 1;
            self.tok = Tok::Sym(c);
        } else {
            let ch = self.src[self.pos..].chars().next().unwrap_or('?');
            return Err(ParseError {
                offset: self.pos,
                message: format!("unexpected character {ch:?}"),
                expected: "a number, identifier, operator or parenthesis",
            });
        }
        Ok(())
    }

    fn eat(&mut self, sym: u8) -> Result<bool, ParseError> {
        if self.tok == Tok::Sym(sym) {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'+') => BinOp::Add,
                Tok::Sym(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::binary(op, &lhs, &rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'*') => BinOp::Mul,
                Tok::Sym(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, &lhs, &rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-')? {
            Ok(self.unary()?.neg())
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat(b'^')? {
            let exponent = self.unary()?;
            Ok(base.pow(&exponent))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::constant(v))
            }
            Tok::Ident(name) => {
                let at = self.tok_start;
                self.advance()?;
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Expr::coord(i));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError {
                        offset: at,
                        message: format!("unknown identifier {name:?}"),
                        expected: "a coordinate name or function",
                    });
                };
                if !self.eat(b'(')? {
                    return Err(self.error(
                        format!("function {name} needs an argument"),
                        "'('",
                    ));
                }
                let arg = self.expr()?;
                if !self.eat(b')')? {
                    return Err(self.error("unbalanced '('".into(), "')'"));
                }
                Ok(Expr::call(func, &arg))
            }
            Tok::Sym(b'(') => {
                self.advance()?;
                let e = self.expr()?;
                if !self.eat(b')')? {
                    return Err(self.error("unbalanced '('".into(), "')'"));
                }
                Ok(e)
            }
            Tok::End => Err(self.error("unexpected end of input".into(), "an operand")),
            Tok::Sym(c) => Err(self.error(
                format!("unexpected '{}'", c as char),
                "a number, identifier or '('",
            )),
        }
    }
}

//! Arithmetic expression grammar for data functions.
//!
//! Grammar (whitespace-insensitive):
//!   expr   := term (('+' | '-') term)*
//!   term   := factor (('*' | '/') factor)*
//!   factor := '-' factor | power
//!   power  := atom ('^' factor)?
//!   atom   := number | 'pi' | 't' | 'x' | 'y' | func '(' expr ')' | '(' expr ')'
//!   func   := 'sin' | 'cos' | 'exp' | 'abs'
//!
//! Variables: `t` (time), `x`, `y` (space). Which variables are in scope
//! depends on the field being defined; out-of-scope variables are rejected
//! at parse time.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    Y,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    /// Parse with a restricted variable scope.
    pub fn parse(src: &str, scope: &[Var]) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            scope,
        };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Neg(e) => -e.eval(t, x, y),
            Expr::Add(a, b) => a.eval(t, x, y) + b.eval(t, x, y),
            Expr::Sub(a, b) => a.eval(t, x, y) - b.eval(t, x, y),
            Expr::Mul(a, b) => a.eval(t, x, y) * b.eval(t, x, y),
            Expr::Div(a, b) => a.eval(t, x, y) / b.eval(t, x, y),
            Expr::Pow(a, b) => a.eval(t, x, y).powf(b.eval(t, x, y)),
            Expr::Sin(e) => e.eval(t, x, y).sin(),
            Expr::Cos(e) => e.eval(t, x, y).cos(),
            Expr::Exp(e) => e.eval(t, x, y).exp(),
            Expr::Abs(e) => e.eval(t, x, y).abs(),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    scope: &'a [Var],
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            line: 1,
            msg: format!(
                "{msg} at offset {} in expression `{}`",
                self.pos,
                String::from_utf8_lossy(self.src)
            ),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.factor()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let v: f64 = text
            .parse()
            .map_err(|_| self.err(&format!("bad number `{text}`")))?;
        self.skip_ws();
        Ok(Expr::Num(v))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        self.skip_ws();
        match name {
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "t" | "x" | "y" => {
                let var = match name {
                    "t" => Var::T,
                    "x" => Var::X,
                    _ => Var::Y,
                };
                if !self.scope.contains(&var) {
                    return Err(self.err(&format!("variable `{name}` not allowed here")));
                }
                Ok(Expr::Var(var))
            }
            "sin" | "cos" | "exp" | "abs" => {
                if !self.eat(b'(') {
                    return Err(self.err(&format!("expected `(` after `{name}`")));
                }
                let arg = Box::new(self.expr()?);
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(match name {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    "exp" => Expr::Exp(arg),
                    _ => Expr::Abs(arg),
                })
            }
            other => Err(self.err(&format!("unknown identifier `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TXY: &[Var] = &[Var::T, Var::X, Var::Y];

    #[test]
    fn parses_default_instance_expressions() {
        let e = Expr::parse("(1-t)*sin(pi*x)", TXY).unwrap();
        let got = e.eval(0.25, 0.5, 0.0);
        assert!((got - 0.75).abs() < 1e-15);
        let e = Expr::parse("-1", TXY).unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), -1.0);
    }

    #[test]
    fn precedence_and_power() {
        let e = Expr::parse("2+3*4^2", &[]).unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 50.0);
        let e = Expr::parse("-x^2", &[Var::X]).unwrap();
        // unary minus binds the whole power
        assert_eq!(e.eval(0.0, 3.0, 0.0), -9.0);
    }

    #[test]
    fn scientific_numbers() {
        let e = Expr::parse("1e-3 + 2.5E2", &[]).unwrap();
        assert!((e.eval(0.0, 0.0, 0.0) - 250.001).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_scope_and_garbage() {
        assert!(Expr::parse("t + x", &[Var::X]).is_err());
        assert!(Expr::parse("sin x", TXY).is_err());
        assert!(Expr::parse("2 +", TXY).is_err());
        assert!(Expr::parse("foo(1)", TXY).is_err());
        assert!(Expr::parse("1 2", TXY).is_err());
    }
}

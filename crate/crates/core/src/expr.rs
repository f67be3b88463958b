//! Scalar expressions over coordinates, parsed from text and evaluated either
//! as plain values or as third-order jets.
//!
//! Grammar (usual precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr  := term {('+'|'-') term}
//! term  := unary {('*'|'/') unary}
//! unary := '-' unary | power
//! power := atom ['^' unary]
//! atom  := number | const | coord | func '(' expr {',' expr} ')' | '(' expr ')'
//! ```
//!
//! Constants: `pi`, `e`. Coordinates: `x`, `y`, `z` (indices 0, 1, 2) or
//! `x0`, `x1`, ... Functions: `exp`, `log`/`ln`, `sin`, `cos`, `sqrt`,
//! `pow(base, exponent)`.

use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Unary, Box<Expr>),
}

impl Expr {
    /// Parse an expression from text.
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr(0)?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "unexpected trailing input at token {:?}",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    /// Smallest dimension that contains every coordinate used.
    pub fn min_dim(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Coord(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.min_dim(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.min_dim().max(b.min_dim()),
        }
    }

    /// Evaluate at a point; a non-finite result is a domain error.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval_raw(x)?;
        if !v.is_finite() {
            return Err(Error::domain(format!(
                "expression not finite at {x:?} (value {v})"
            )));
        }
        Ok(v)
    }

    fn eval_raw(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => {
                if *i >= x.len() {
                    return Err(Error::dimension(format!(
                        "coordinate x{} used, point has dimension {}",
                        i,
                        x.len()
                    )));
                }
                x[*i]
            }
            Expr::Neg(a) => -a.eval_raw(x)?,
            Expr::Add(a, b) => a.eval_raw(x)? + b.eval_raw(x)?,
            Expr::Sub(a, b) => a.eval_raw(x)? - b.eval_raw(x)?,
            Expr::Mul(a, b) => a.eval_raw(x)? * b.eval_raw(x)?,
            Expr::Div(a, b) => a.eval_raw(x)? / b.eval_raw(x)?,
            Expr::Pow(a, b) => {
                let base = a.eval_raw(x)?;
                let expo = b.eval_raw(x)?;
                if let Some(n) = int_exponent(b, x) {
                    base.powi(n)
                } else {
                    base.powf(expo)
                }
            }
            Expr::Call(f, a) => {
                let u = a.eval_raw(x)?;
                match f {
                    Unary::Exp => u.exp(),
                    Unary::Log => u.ln(),
                    Unary::Sin => u.sin(),
                    Unary::Cos => u.cos(),
                    Unary::Sqrt => u.sqrt(),
                }
            }
        })
    }

    /// Evaluate as a third-order jet at a point; non-finite bands are a
    /// domain error.
    pub fn eval_jet(&self, x: &[f64]) -> Result<Jet> {
        let j = self.eval_jet_raw(x)?;
        if !j.is_finite() {
            return Err(Error::domain(format!(
                "expression jets not finite at {x:?}"
            )));
        }
        Ok(j)
    }

    fn eval_jet_raw(&self, x: &[f64]) -> Result<Jet> {
        let d = x.len();
        Ok(match self {
            Expr::Const(c) => Jet::constant(d, *c),
            Expr::Coord(i) => {
                if *i >= d {
                    return Err(Error::dimension(format!(
                        "coordinate x{i} used, point has dimension {d}"
                    )));
                }
                Jet::variable(d, *i, x[*i])
            }
            Expr::Neg(a) => -&a.eval_jet_raw(x)?,
            Expr::Add(a, b) => &a.eval_jet_raw(x)? + &b.eval_jet_raw(x)?,
            Expr::Sub(a, b) => &a.eval_jet_raw(x)? - &b.eval_jet_raw(x)?,
            Expr::Mul(a, b) => &a.eval_jet_raw(x)? * &b.eval_jet_raw(x)?,
            Expr::Div(a, b) => &a.eval_jet_raw(x)? / &b.eval_jet_raw(x)?,
            Expr::Pow(a, b) => {
                let base = a.eval_jet_raw(x)?;
                if let Some(n) = int_exponent(b, x) {
                    base.powi(n)
                } else {
                    let expo = b.eval_raw(x)?;
                    if b.min_dim() > 0 {
                        // Variable exponent: a^b = exp(b log a).
                        let eb = b.eval_jet_raw(x)?;
                        (&eb * &base.ln()).exp()
                    } else {
                        base.powf(expo)
                    }
                }
            }
            Expr::Call(f, a) => {
                let u = a.eval_jet_raw(x)?;
                match f {
                    Unary::Exp => u.exp(),
                    Unary::Log => u.ln(),
                    Unary::Sin => u.sin(),
                    Unary::Cos => u.cos(),
                    Unary::Sqrt => u.sqrt(),
                }
            }
        })
    }
}

/// If the exponent is a constant integer of modest size, return it.
fn int_exponent(b: &Expr, x: &[f64]) -> Option<i32> {
    if b.min_dim() > 0 {
        return None;
    }
    let v = b.eval_raw(x).ok()?;
    if v.fract() == 0.0 && v.abs() <= 64.0 {
        Some(v as i32)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent part: e/E followed by optional sign and digits
                if i < bytes.len()
                    && matches!(bytes[i] as char, 'e' | 'E')
                    && i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_digit()
                        || ((bytes[i + 1] as char == '+' || bytes[i + 1] as char == '-')
                            && i + 2 < bytes.len()
                            && bytes[i + 2].is_ascii_digit()))
                {
                    i += 2;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let s = &src[start..i];
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number literal {s:?}")))?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] as char == '_')
                {
                    i += 1;
                }
                out.push(Tok::Ident(src[start..i].to_string()));
            }
            _ => {
                return Err(Error::Config(format!(
                    "unexpected character {c:?} at byte {i}"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

const MAX_DEPTH: usize = 64;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Config(format!("expected {t:?}, found {got:?}"))),
        }
    }

    fn expr(&mut self, depth: usize) -> Result<Expr> {
        if depth > MAX_DEPTH {
            return Err(Error::Config("expression nested too deeply".into()));
        }
        let mut lhs = self.term(depth + 1)?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term(depth + 1)?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term(depth + 1)?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self, depth: usize) -> Result<Expr> {
        if depth > MAX_DEPTH {
            return Err(Error::Config("expression nested too deeply".into()));
        }
        let mut lhs = self.unary(depth + 1)?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.unary(depth + 1)?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.unary(depth + 1)?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self, depth: usize) -> Result<Expr> {
        if depth > MAX_DEPTH {
            return Err(Error::Config("expression nested too deeply".into()));
        }
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            let inner = self.unary(depth + 1)?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power(depth + 1)
    }

    fn power(&mut self, depth: usize) -> Result<Expr> {
        if depth > MAX_DEPTH {
            return Err(Error::Config("expression nested too deeply".into()));
        }
        let base = self.atom(depth + 1)?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let expo = self.unary(depth + 1)?;
            return Ok(Expr::Pow(Box::new(base), Box::new(expo)));
        }
        Ok(base)
    }

    fn atom(&mut self, depth: usize) -> Result<Expr> {
        if depth > MAX_DEPTH {
            return Err(Error::Config("expression nested too deeply".into()));
        }
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr(depth + 1)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident(&name, depth),
            got => Err(Error::Config(format!(
                "expected a value, found {got:?}"
            ))),
        }
    }

    fn ident(&mut self, name: &str, depth: usize) -> Result<Expr> {
        // Constants.
        match name {
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "e" => return Ok(Expr::Const(std::f64::consts::E)),
            _ => {}
        }
        // Coordinates.
        let coord = match name {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => {
                if let Some(rest) = name.strip_prefix('x') {
                    rest.parse::<usize>().ok().filter(|&i| i < 64)
                } else {
                    None
                }
            }
        };
        if let Some(i) = coord {
            return Ok(Expr::Coord(i));
        }
        // Functions require a parenthesized argument list.
        let func = match name {
            "exp" => Some(Unary::Exp),
            "log" | "ln" => Some(Unary::Log),
            "sin" => Some(Unary::Sin),
            "cos" => Some(Unary::Cos),
            "sqrt" => Some(Unary::Sqrt),
            "pow" => None,
            _ => {
                return Err(Error::Config(format!(
                    "unknown identifier {name:?} (expected a constant, coordinate, or function)"
                )))
            }
        };
        self.expect(Tok::LParen)?;
        let first = self.expr(depth + 1)?;
        match func {
            Some(f) => {
                self.expect(Tok::RParen)?;
                Ok(Expr::Call(f, Box::new(first)))
            }
            None => {
                // pow(base, exponent)
                self.expect(Tok::Comma)?;
                let second = self.expr(depth + 1)?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Pow(Box::new(first), Box::new(second)))
            }
        }
    }
}

//! Fourier-side coefficient symbols `m ↦ F(m, ε)`.
//!
//! A symbol is either a closed-form expression or a table. Expressions are
//! built from `m`, `eps`, `i`, `pi`, numeric literals, the operators
//! `+ - * / ^` and the functions `exp`, `abs`, `sqrt`, `cos`, `sin`, `cosh`.
//! Every expression must be a polynomial in `eps`: division, non-integer
//! functions and negative powers only accept `eps`-free operands. Evaluating
//! at a fixed `m` therefore yields the Taylor coefficients in `eps` exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("symbol parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("symbol is not polynomial in eps: {0}")]
    NotPolynomial(String),
    #[error("table symbol needs at least two samples and m_min < m_max")]
    BadTable,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(Complex64),
    M,
    Eps,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Abs,
    Sqrt,
    Cos,
    Sin,
    Cosh,
}

/// Polynomial in ε, coefficients low to high.
type EpsPoly = Vec<Complex64>;

fn trim(mut p: EpsPoly) -> EpsPoly {
    while p.len() > 1 && *p.last().unwrap() == Complex64::new(0.0, 0.0) {
        p.pop();
    }
    if p.is_empty() {
        p.push(Complex64::new(0.0, 0.0));
    }
    p
}

fn padd(a: &EpsPoly, b: &EpsPoly, sign: f64) -> EpsPoly {
    let n = a.len().max(b.len());
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, v) in a.iter().enumerate() {
        out[i] += v;
    }
    for (i, v) in b.iter().enumerate() {
        out[i] += v * sign;
    }
    out
}

fn pmul(a: &EpsPoly, b: &EpsPoly) -> EpsPoly {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Structural ε-degree of a node; `None` marks a non-polynomial construction.
fn degree(n: &Node) -> Option<usize> {
    match n {
        Node::Num(_) | Node::M => Some(0),
        Node::Eps => Some(1),
        Node::Neg(a) => degree(a),
        Node::Add(a, b) | Node::Sub(a, b) => Some(degree(a)?.max(degree(b)?)),
        Node::Mul(a, b) => Some(degree(a)? + degree(b)?),
        Node::Div(a, b) => (degree(b)? == 0).then_some(degree(a)?),
        Node::Pow(a, e) => {
            let d = degree(a)?;
            if *e < 0 && d > 0 {
                None
            } else {
                Some(d * (*e).max(0) as usize)
            }
        }
        Node::Call(_, a) => (degree(a)? == 0).then_some(0),
    }
}

fn eval(n: &Node, m: f64) -> EpsPoly {
    let c = |v: Complex64| vec![v];
    match n {
        Node::Num(v) => c(*v),
        Node::M => c(Complex64::new(m, 0.0)),
        Node::Eps => vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        Node::Neg(a) => eval(a, m).into_iter().map(|v| -v).collect(),
        Node::Add(a, b) => padd(&eval(a, m), &eval(b, m), 1.0),
        Node::Sub(a, b) => padd(&eval(a, m), &eval(b, m), -1.0),
        Node::Mul(a, b) => pmul(&eval(a, m), &eval(b, m)),
        Node::Div(a, b) => {
            let d = eval(b, m)[0];
            eval(a, m).into_iter().map(|v| v / d).collect()
        }
        Node::Pow(a, e) => {
            let base = eval(a, m);
            if *e >= 0 {
                let mut acc = vec![Complex64::new(1.0, 0.0)];
                for _ in 0..*e {
                    acc = pmul(&acc, &base);
                }
                acc
            } else {
                c(base[0].powi(*e))
            }
        }
        Node::Call(f, a) => {
            let x = eval(a, m)[0];
            c(match f {
                Func::Exp => x.exp(),
                Func::Abs => Complex64::new(x.norm(), 0.0),
                Func::Sqrt => x.sqrt(),
                Func::Cos => x.cos(),
                Func::Sin => x.sin(),
                Func::Cosh => x.cosh(),
            })
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: &str) -> Result<T, SymbolError> {
        Err(SymbolError::Parse { pos: self.pos, msg: msg.to_string() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<(), SymbolError> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected '{}'", ch as char))
        }
    }

    fn expr(&mut self) -> Result<Node, SymbolError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, SymbolError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, SymbolError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, SymbolError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return self.err("exponent must be an integer literal");
            }
            let e: i32 = std::str::from_utf8(&self.s[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| SymbolError::Parse { pos: start, msg: "exponent overflow".into() })?;
            return Ok(Node::Pow(Box::new(base), if neg { -e } else { e }));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, SymbolError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let ch = self.s[self.pos];
                    let exp_sign = (ch == b'-' || ch == b'+')
                        && self.pos > start
                        && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if ch.is_ascii_digit() || ch == b'.' || ch == b'e' || ch == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                txt.parse::<f64>()
                    .map(|v| Node::Num(Complex64::new(v, 0.0)))
                    .map_err(|_| SymbolError::Parse { pos: start, msg: format!("bad number '{txt}'") })
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                let func = match name {
                    "m" => return Ok(Node::M),
                    "eps" => return Ok(Node::Eps),
                    "i" => return Ok(Node::Num(Complex64::new(0.0, 1.0))),
                    "pi" => return Ok(Node::Num(Complex64::new(std::f64::consts::PI, 0.0))),
                    "exp" => Func::Exp,
                    "abs" => Func::Abs,
                    "sqrt" => Func::Sqrt,
                    "cos" => Func::Cos,
                    "sin" => Func::Sin,
                    "cosh" => Func::Cosh,
                    _ => {
                        self.pos = start;
                        return self.err(&format!("unknown identifier '{name}'"));
                    }
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            _ => self.err("unexpected token"),
        }
    }
}

/// Evaluable coefficient symbol, polynomial in ε.
#[derive(Debug, Clone, PartialEq)]
pub enum FourierSymbol {
    Expr { source: String, ast: ExprAst },
    /// Samples on a uniform grid over `[m_min, m_max]`, ε-independent,
    /// linear interpolation inside and zero outside the declared range.
    Table { m_min: f64, m_max: f64, values: Vec<Complex64> },
}

impl Default for FourierSymbol {
    fn default() -> Self {
        FourierSymbol::zero()
    }
}

/// Opaque parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Node,
    eps_degree: usize,
}

impl FourierSymbol {
    pub fn parse(source: &str) -> Result<Self, SymbolError> {
        let mut p = Parser { s: source.as_bytes(), pos: 0 };
        let root = p.expr()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        let eps_degree = degree(&root).ok_or_else(|| SymbolError::NotPolynomial(source.to_string()))?;
        Ok(FourierSymbol::Expr { source: source.to_string(), ast: ExprAst { root, eps_degree } })
    }

    pub fn zero() -> Self {
        Self::parse("0").unwrap()
    }

    pub fn table(m_min: f64, m_max: f64, values: Vec<Complex64>) -> Result<Self, SymbolError> {
        if values.len() < 2 || !(m_min < m_max) {
            return Err(SymbolError::BadTable);
        }
        Ok(FourierSymbol::Table { m_min, m_max, values })
    }

    /// Upper bound on the ε-degree.
    pub fn eps_degree(&self) -> usize {
        match self {
            FourierSymbol::Expr { ast, .. } => ast.eps_degree,
            FourierSymbol::Table { .. } => 0,
        }
    }

    /// Taylor coefficients in ε at fixed `m`; length `eps_degree() + 1`.
    pub fn taylor(&self, m: f64) -> Vec<Complex64> {
        let n = self.eps_degree() + 1;
        let mut out = match self {
            FourierSymbol::Expr { ast, .. } => trim(eval(&ast.root, m)),
            FourierSymbol::Table { m_min, m_max, values } => {
                if m < *m_min || m > *m_max {
                    vec![Complex64::new(0.0, 0.0)]
                } else {
                    let h = (m_max - m_min) / (values.len() - 1) as f64;
                    let x = (m - m_min) / h;
                    let i = (x.floor() as usize).min(values.len() - 2);
                    let f = x - i as f64;
                    vec![values[i] * (1.0 - f) + values[i + 1] * f]
                }
            }
        };
        out.resize(n, Complex64::new(0.0, 0.0));
        out
    }

    /// Taylor coefficient of order `n` (zero above the degree).
    pub fn taylor_coeff(&self, m: f64, n: usize) -> Complex64 {
        if n > self.eps_degree() {
            return Complex64::new(0.0, 0.0);
        }
        self.taylor(m)[n]
    }

    pub fn eval(&self, m: f64, eps: Complex64) -> Complex64 {
        self.taylor(m).iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * eps + c)
    }

    /// Bound of `sup_{|ε|≤ε₀} |F(m, ε)|` by the sum of Taylor moduli.
    pub fn disc_bound(&self, m: f64, eps0: f64) -> f64 {
        self.taylor(m).iter().rev().fold(0.0, |acc, c| acc * eps0 + c.norm())
    }

    /// True when the symbol vanishes at every probe abscissa (used to skip work).
    pub fn is_zero(&self) -> bool {
        const PROBES: [f64; 7] = [-7.3, -2.1, -0.4, 0.0, 0.55, 1.9, 6.2];
        match self {
            FourierSymbol::Table { values, .. } => values.iter().all(|v| v.norm() == 0.0),
            FourierSymbol::Expr { .. } => {
                PROBES.iter().all(|&m| self.taylor(m).iter().all(|c| c.norm() == 0.0))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    m_min: f64,
    m_max: f64,
    values: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SymbolRepr {
    Expr(String),
    Table { table: TableRepr },
}

impl Serialize for FourierSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FourierSymbol::Expr { source, .. } => SymbolRepr::Expr(source.clone()).serialize(s),
            FourierSymbol::Table { m_min, m_max, values } => SymbolRepr::Table {
                table: TableRepr {
                    m_min: *m_min,
                    m_max: *m_max,
                    values: values.iter().map(|v| (v.re, v.im)).collect(),
                },
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for FourierSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match SymbolRepr::deserialize(d)? {
            SymbolRepr::Expr(src) => FourierSymbol::parse(&src).map_err(serde::de::Error::custom),
            SymbolRepr::Table { table } => FourierSymbol::table(
                table.m_min,
                table.m_max,
                table.values.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(),
            )
            .map_err(serde::de::Error::custom),
        }
    }
}

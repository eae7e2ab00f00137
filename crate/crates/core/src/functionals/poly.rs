//! Polynomials in stencil conductances and their text form.
//!
//! Grammar: `expr := ['-'] term (('+'|'-') term)*`, `term := [number '*'] factor ('*' factor)* | number`,
//! `factor := 'w(' x1,…,xd ';' axis ')' ['^' k]`. The token `w(0;0)` in d=1 is the edge
//! from the origin to `+e_1`.

use std::collections::BTreeMap;
use std::fmt;

use crate::environment::EdgeOffset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    /// `(stencil index, power)`, indices ascending, powers ≥ 1.
    pub factors: Vec<(usize, u32)>,
}

/// `c0 + Σ coef Π ω_{e_i}^{p_i}` over a fixed stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub dim: usize,
    pub stencil: Vec<EdgeOffset>,
    pub constant: f64,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self { dim, stencil: vec![], constant: c, terms: vec![] }
    }

    /// Builder: adds `coef · Π ω^p` over edges given as offsets, merging repeated edges.
    pub fn with_term(mut self, coef: f64, factors: &[(EdgeOffset, u32)]) -> Self {
        let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
        for (edge, p) in factors {
            let idx = match self.stencil.iter().position(|e| e == edge) {
                Some(i) => i,
                None => {
                    self.stencil.push(edge.clone());
                    self.stencil.len() - 1
                }
            };
            *merged.entry(idx).or_insert(0) += p;
        }
        let factors: Vec<(usize, u32)> = merged.into_iter().filter(|(_, p)| *p > 0).collect();
        if factors.is_empty() {
            self.constant += coef;
        } else if let Some(t) = self.terms.iter_mut().find(|t| t.factors == factors) {
            t.coef += coef;
        } else {
            self.terms.push(Monomial { coef, factors });
        }
        self
    }

    pub fn eval(&self, omega: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| t.coef * t.factors.iter().map(|&(i, p)| omega[i].powi(p as i32)).product::<f64>())
                .sum::<f64>()
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Parser { s: text.as_bytes(), pos: 0, dim, text }.expr()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let sign = |f: &mut fmt::Formatter<'_>, c: f64, first: &mut bool| -> fmt::Result {
            if *first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if c < 0.0 { " - " } else { " + " })?;
            }
            *first = false;
            Ok(())
        };
        for t in &self.terms {
            sign(f, t.coef, &mut first)?;
            if t.coef.abs() != 1.0 {
                write!(f, "{}*", t.coef.abs())?;
            }
            for (j, &(i, p)) in t.factors.iter().enumerate() {
                if j > 0 {
                    write!(f, "*")?;
                }
                let e = &self.stencil[i];
                let coords: Vec<String> = e.base.iter().map(|c| c.to_string()).collect();
                write!(f, "w({};{})", coords.join(","), e.axis)?;
                if p != 1 {
                    write!(f, "^{p}")?;
                }
            }
        }
        if self.constant != 0.0 || first {
            sign(f, self.constant, &mut first)?;
            write!(f, "{}", self.constant.abs())?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    dim: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn err(&self, m: &str) -> Error {
        Error::Parameter(format!("polynomial '{}' at column {}: {m}", self.text, self.pos + 1))
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || b".eE".contains(&self.s[self.pos]) || (self.pos > start && b"+-".contains(&self.s[self.pos]) && b"eE".contains(&self.s[self.pos - 1]))) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().map_err(|_| self.err("expected a number"))
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if self.pos < self.s.len() && self.s[self.pos] == b'-' {
            self.pos += 1;
        }
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().map_err(|_| self.err("expected an integer"))
    }

    fn factor(&mut self) -> Result<(EdgeOffset, u32)> {
        if !(self.eat(b'w') && self.eat(b'(')) {
            return Err(self.err("expected 'w('"));
        }
        let mut base = vec![self.integer()?];
        while self.eat(b',') {
            base.push(self.integer()?);
        }
        if !self.eat(b';') {
            return Err(self.err("expected ';' before the axis"));
        }
        let axis = self.integer()?;
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        if base.len() != self.dim {
            return Err(self.err(&format!("edge has {} coordinates, dimension is {}", base.len(), self.dim)));
        }
        if axis < 0 || axis as usize >= self.dim {
            return Err(self.err(&format!("axis {axis} out of range")));
        }
        let power = if self.eat(b'^') {
            let p = self.integer()?;
            if !(1..=16).contains(&p) {
                return Err(self.err("power must be in 1..=16"));
            }
            p as u32
        } else {
            1
        };
        Ok((EdgeOffset::new(base, axis as usize), power))
    }

    fn term(&mut self) -> Result<(f64, Vec<(EdgeOffset, u32)>)> {
        let mut coef = 1.0;
        let mut factors = vec![];
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                coef = self.number()?;
                if !self.eat(b'*') {
                    return Ok((coef, factors));
                }
                factors.push(self.factor()?);
            }
            _ => factors.push(self.factor()?),
        }
        while self.eat(b'*') {
            factors.push(self.factor()?);
        }
        Ok((coef, factors))
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut poly = Polynomial::constant(self.dim, 0.0);
        let mut sign = if self.eat(b'-') { -1.0 } else { 1.0 };
        loop {
            let (c, factors) = self.term()?;
            poly = poly.with_term(sign * c, &factors);
            if self.eat(b'+') {
                sign = 1.0;
            } else if self.eat(b'-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        if self.peek().is_some() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(poly)
    }
}

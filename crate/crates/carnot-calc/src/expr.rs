//! Polynomial and rational expressions in named variables.
//!
//! Text syntax: sums of monomials such as `x^2 + y^2`, `0.5*u*v - 3`, `2x y^3`.
//! A single top-level `/` builds a quotient, e.g. `v/u` or `(u+v)/(1+u^2)`.
//! JSON syntax: `{"terms": [[coef, [e1, e2, ...]], ...]}`, optionally with a `"den"` block.

use serde_json::Value;

use crate::error::{CalcError, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<T> {
    pub coef: T,
    pub exps: Vec<u32>,
}

/// Polynomial in a fixed number of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    nvars: usize,
    terms: Vec<Monomial<T>>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(nvars: usize, terms: Vec<Monomial<T>>) -> Result<Self> {
        if terms.iter().any(|m| m.exps.len() != nvars) {
            return Err(CalcError::Parse(format!("monomial arity differs from {nvars} variables")));
        }
        Ok(Self { nvars, terms }.simplified())
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        Self { nvars, terms: vec![Monomial { coef: c, exps: vec![0; nvars] }] }.simplified()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Monomial<T>] {
        &self.terms
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|m| m.exps.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(T::zero(), |acc, m| {
            let mut v = m.coef;
            for (xi, &e) in x.iter().zip(&m.exps) {
                if e > 0 {
                    v = v * xi.powi(e as i32);
                }
            }
            acc + v
        })
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|m| m.exps[var] > 0)
            .map(|m| {
                let mut exps = m.exps.clone();
                let e = exps[var];
                exps[var] -= 1;
                Monomial { coef: m.coef * T::from_u32(e).unwrap(), exps }
            })
            .collect();
        Self { nvars: self.nvars, terms }.simplified()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let exps = a.exps.iter().zip(&b.exps).map(|(x, y)| x + y).collect();
                terms.push(Monomial { coef: a.coef * b.coef, exps });
            }
        }
        Self { nvars: self.nvars, terms }.simplified()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { nvars: self.nvars, terms }.simplified()
    }

    pub fn scale(&self, c: T) -> Self {
        let terms = self.terms.iter().map(|m| Monomial { coef: m.coef * c, exps: m.exps.clone() }).collect();
        Self { nvars: self.nvars, terms }.simplified()
    }

    fn simplified(mut self) -> Self {
        self.terms.sort_by(|a, b| a.exps.cmp(&b.exps));
        let mut out: Vec<Monomial<T>> = Vec::with_capacity(self.terms.len());
        for m in self.terms {
            match out.last_mut() {
                Some(last) if last.exps == m.exps => last.coef = last.coef + m.coef,
                _ => out.push(m),
            }
        }
        out.retain(|m| m.coef != T::zero());
        self.terms = out;
        self
    }

    /// Parses the text syntax with the given variable names.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Self> {
        Parser::new(src, vars)?.polynomial()
    }

    /// Parses `{"terms": [[coef, [e...]], ...]}`.
    pub fn from_json(v: &Value, nvars: usize) -> Result<Self> {
        let arr = v
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| CalcError::Parse("polynomial JSON needs a \"terms\" array".into()))?;
        let mut terms = Vec::with_capacity(arr.len());
        for t in arr {
            let pair = t.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                CalcError::Parse("each term must be [coef, [exponents]]".into())
            })?;
            let coef = pair[0].as_f64().ok_or_else(|| CalcError::Parse("coefficient must be a number".into()))?;
            let exps = pair[1]
                .as_array()
                .ok_or_else(|| CalcError::Parse("exponents must be an array".into()))?
                .iter()
                .map(|e| e.as_u64().map(|x| x as u32).ok_or_else(|| CalcError::Parse("exponents must be non-negative integers".into())))
                .collect::<Result<Vec<u32>>>()?;
            terms.push(Monomial { coef: lit(coef), exps });
        }
        Self::new(nvars, terms)
    }
}

/// Quotient of two polynomials (denominator absent means 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Expr<T> {
    pub num: Polynomial<T>,
    pub den: Option<Polynomial<T>>,
}

impl<T: Real> Expr<T> {
    pub fn polynomial(p: Polynomial<T>) -> Self {
        Self { num: p, den: None }
    }

    pub fn eval(&self, x: &[T]) -> T {
        match &self.den {
            None => self.num.eval(x),
            Some(d) => self.num.eval(x) / d.eval(x),
        }
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_none()
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        Self::polynomial(Polynomial::constant(nvars, c))
    }

    /// The variable with index `var`.
    pub fn variable(nvars: usize, var: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[var] = 1;
        Self::polynomial(Polynomial { nvars, terms: vec![Monomial { coef: T::one(), exps }] })
    }

    pub fn add(&self, other: &Self) -> Self {
        match (&self.den, &other.den) {
            (None, None) => Self::polynomial(self.num.add(&other.num)),
            (Some(d), None) => Self { num: self.num.add(&other.num.mul(d)), den: Some(d.clone()) },
            (None, Some(d)) => Self { num: self.num.mul(d).add(&other.num), den: Some(d.clone()) },
            (Some(d1), Some(d2)) => Self {
                num: self.num.mul(d2).add(&other.num.mul(d1)),
                den: Some(d1.mul(d2)),
            },
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let den = match (&self.den, &other.den) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(d1), Some(d2)) => Some(d1.mul(d2)),
        };
        Self { num: self.num.mul(&other.num), den }
    }

    pub fn scale(&self, c: T) -> Self {
        Self { num: self.num.scale(c), den: self.den.clone() }
    }

    /// Partial derivative in variable `var`, by the quotient rule when a denominator is present.
    pub fn derivative(&self, var: usize) -> Self {
        match &self.den {
            None => Self::polynomial(self.num.derivative(var)),
            Some(d) => {
                let num = self.num.derivative(var).mul(d).add(&self.num.mul(&d.derivative(var)).scale(-T::one()));
                Self { num, den: Some(d.mul(d)) }
            }
        }
    }

    /// Parses text: a polynomial, or `num/den` with optional outer parentheses on each side.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Self> {
        let parts: Vec<&str> = src.split('/').collect();
        match parts.as_slice() {
            [p] => Ok(Self::polynomial(Polynomial::parse(strip_parens(p), vars)?)),
            [n, d] => {
                let den = Polynomial::parse(strip_parens(d), vars)?;
                if den.terms().is_empty() {
                    return Err(CalcError::Parse("denominator is identically zero".into()));
                }
                Ok(Self { num: Polynomial::parse(strip_parens(n), vars)?, den: Some(den) })
            }
            _ => Err(CalcError::Parse(format!("at most one '/' allowed in {src:?}"))),
        }
    }

    /// Parses either a JSON string (text syntax) or a JSON object with `terms` and optional `den`.
    pub fn from_json(v: &Value, vars: &[&str]) -> Result<Self> {
        if let Some(s) = v.as_str() {
            return Self::parse(s, vars);
        }
        if let Some(x) = v.as_f64() {
            return Ok(Self::polynomial(Polynomial::constant(vars.len(), lit(x))));
        }
        let num = Polynomial::from_json(v, vars.len())?;
        let den = match v.get("den") {
            Some(d) => Some(Polynomial::from_json(d, vars.len())?),
            None => None,
        };
        Ok(Self { num, den })
    }
}

fn strip_parens(s: &str) -> &str {
    let t = s.trim();
    if t.starts_with('(') && t.ends_with(')') {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Plus,
    Minus,
    Star,
    Caret,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    nvars: usize,
}

impl Parser {
    fn new(src: &str, vars: &[&str]) -> Result<Self> {
        let mut toks = Vec::new();
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let save = i;
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    if i < chars.len() && chars[i].is_ascii_digit() {
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| CalcError::Parse(format!("bad number {s:?}")))?;
                toks.push(Tok::Num(v));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                let idx = vars
                    .iter()
                    .position(|v| *v == name)
                    .ok_or_else(|| CalcError::Parse(format!("unknown variable {name:?}; expected one of {vars:?}")))?;
                toks.push(Tok::Var(idx));
            } else {
                toks.push(match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    _ => return Err(CalcError::Parse(format!("unexpected character {c:?}"))),
                });
                i += 1;
            }
        }
        Ok(Self { toks, pos: 0, nvars: vars.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn polynomial<T: Real>(&mut self) -> Result<Polynomial<T>> {
        if self.toks.is_empty() {
            return Err(CalcError::Parse("empty expression".into()));
        }
        let mut terms = Vec::new();
        let mut first = true;
        while self.pos < self.toks.len() {
            let mut sign = 1.0;
            match self.peek() {
                Some(Tok::Plus) => self.pos += 1,
                Some(Tok::Minus) => {
                    sign = -1.0;
                    self.pos += 1;
                }
                _ if first => {}
                other => return Err(CalcError::Parse(format!("expected '+' or '-', found {other:?}"))),
            }
            first = false;
            // tolerate doubled signs such as "+ -0.5 x" produced by string formatting
            while let Some(t @ (Tok::Plus | Tok::Minus)) = self.peek() {
                if *t == Tok::Minus {
                    sign = -sign;
                }
                self.pos += 1;
            }
            let (coef, exps) = self.term()?;
            terms.push(Monomial { coef: lit::<T>(sign * coef), exps });
        }
        Polynomial::new(self.nvars, terms)
    }

    fn term(&mut self) -> Result<(f64, Vec<u32>)> {
        let mut coef = 1.0;
        let mut exps = vec![0u32; self.nvars];
        let mut factors = 0;
        loop {
            match self.peek().cloned() {
                Some(Tok::Num(v)) => {
                    self.pos += 1;
                    coef *= v;
                }
                Some(Tok::Var(k)) => {
                    self.pos += 1;
                    let mut e = 1u32;
                    if let Some(Tok::Caret) = self.peek() {
                        self.pos += 1;
                        match self.peek().cloned() {
                            Some(Tok::Num(p)) if p >= 0.0 && p.fract() == 0.0 => {
                                self.pos += 1;
                                e = p as u32;
                            }
                            other => return Err(CalcError::Parse(format!("exponent must be a non-negative integer, found {other:?}"))),
                        }
                    }
                    exps[k] += e;
                }
                _ => break,
            }
            factors += 1;
            if let Some(Tok::Star) = self.peek() {
                self.pos += 1;
                if !matches!(self.peek(), Some(Tok::Num(_)) | Some(Tok::Var(_))) {
                    return Err(CalcError::Parse("dangling '*'".into()));
                }
            }
        }
        if factors == 0 {
            return Err(CalcError::Parse(format!("expected a factor at token {}", self.pos)));
        }
        Ok((coef, exps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rational_arithmetic() {
        let vars = ["u", "v"];
        let a = Expr::<f64>::parse("v/u", &vars).unwrap();
        let b = Expr::<f64>::parse("u^2 + 1", &vars).unwrap();
        let c = Expr::<f64>::parse("1/(v+2)", &vars).unwrap();
        let x = [1.5, -0.5];
        let (ea, eb, ec) = (a.eval(&x), b.eval(&x), c.eval(&x));
        assert!((a.add(&b).eval(&x) - (ea + eb)).abs() < 1e-14);
        assert!((b.add(&a).eval(&x) - (ea + eb)).abs() < 1e-14);
        assert!((a.add(&c).eval(&x) - (ea + ec)).abs() < 1e-14);
        assert!((a.mul(&c).eval(&x) - ea * ec).abs() < 1e-14);
        assert!((a.mul(&b).scale(2.0).eval(&x) - 2.0 * ea * eb).abs() < 1e-14);
        assert_eq!(Expr::<f64>::variable(2, 1).eval(&x), -0.5);
    }

    #[test]
    fn quotient_derivative() {
        let e = Expr::<f64>::parse("v/u", &["u", "v"]).unwrap();
        let du = e.derivative(0);
        assert!((du.eval(&[2.0, 3.0]) + 0.75).abs() < 1e-15);
        assert!((e.derivative(1).eval(&[2.0, 3.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parses_sum_of_squares() {
        let p = Polynomial::<f64>::parse("x^2 + y^2", &["x", "y"]).unwrap();
        assert_eq!(p.eval(&[3.0, 4.0]), 25.0);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn parses_coefficients_signs_and_implicit_products() {
        let p = Polynomial::<f64>::parse("-0.5*u*v + 2u^3 - 3", &["u", "v"]).unwrap();
        let (u, v) = (1.5, -2.0);
        assert!((p.eval(&[u, v]) - (-0.5 * u * v + 2.0 * u * u * u - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn like_terms_merge() {
        let p = Polynomial::<f64>::parse("x + x - 2x", &["x"]).unwrap();
        assert!(p.terms().is_empty());
        assert_eq!(p.eval(&[7.0]), 0.0);
    }

    #[test]
    fn derivative_is_exact() {
        let p = Polynomial::<f64>::parse("x^3 y + 4 y^2", &["x", "y"]).unwrap();
        let dx = p.derivative(0);
        let dy = p.derivative(1);
        assert_eq!(dx.eval(&[2.0, 3.0]), 36.0);
        assert_eq!(dy.eval(&[2.0, 3.0]), 32.0);
    }

    #[test]
    fn rational_parse() {
        let e = Expr::<f64>::parse("v/u", &["u", "v"]).unwrap();
        assert_eq!(e.eval(&[2.0, 3.0]), 1.5);
        let e = Expr::<f64>::parse("(u+v)/(1+u^2)", &["u", "v"]).unwrap();
        assert_eq!(e.eval(&[1.0, 1.0]), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Polynomial::<f64>::parse("z", &["x"]).is_err());
        assert!(Polynomial::<f64>::parse("x^-1", &["x"]).is_err());
        assert!(Polynomial::<f64>::parse("x*", &["x"]).is_err());
        assert!(Polynomial::<f64>::parse("", &["x"]).is_err());
        assert!(Expr::<f64>::parse("u/0", &["u"]).is_err());
        assert!(Expr::<f64>::parse("u/v/u", &["u", "v"]).is_err());
    }

    #[test]
    fn json_forms() {
        let v = json!({"terms": [[1.0, [2, 0]], [-1.0, [0, 1]]]});
        let p = Expr::<f64>::from_json(&v, &["x", "y"]).unwrap();
        assert_eq!(p.eval(&[2.0, 1.0]), 3.0);
        let s = json!("x*y");
        assert_eq!(Expr::<f64>::from_json(&s, &["x", "y"]).unwrap().eval(&[2.0, 5.0]), 10.0);
        assert!(Polynomial::<f64>::from_json(&json!({"terms": [[1.0, [1]]]}), 2).is_err());
    }

    #[test]
    fn scientific_notation() {
        let p = Polynomial::<f64>::parse("1e-3 x + 2.5E2", &["x"]).unwrap();
        assert!((p.eval(&[1000.0]) - 251.0).abs() < 1e-12);
    }
}

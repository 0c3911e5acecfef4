//! Finite trigonometric perturbations `f(x, y, t) = Σ c·cos(a·x + b·y + m·t + φ)`.
//!
//! Two text forms are accepted: a term list with one `c a b m phi` record per
//! line, and an inline expression such as `1.0*cos(x+2y+t) - 0.5*sin(x-t)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One harmonic `c·cos(a·x + b·y + m·t + phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub c: f64,
    pub a: i32,
    pub b: i32,
    pub m: i32,
    pub phi: f64,
}

impl Term {
    pub fn new(c: f64, a: i32, b: i32, m: i32, phi: f64) -> Self {
        Self { c, a, b, m, phi }
    }

    #[inline]
    pub fn phase(&self, x: f64, y: f64, t: f64) -> f64 {
        self.a as f64 * x + self.b as f64 * y + self.m as f64 * t + self.phi
    }
}

/// Value, gradient and Hessian of `f` at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub terms: Vec<Term>,
}

impl Perturbation {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `cos(x + 2y + t)`.
    pub fn standard() -> Self {
        Self {
            terms: vec![Term::new(1.0, 1, 2, 1, 0.0)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.c == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term { c: t.c * k, ..*t })
                .collect(),
        }
    }

    pub fn plus(&self, other: &Perturbation) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms }
    }

    /// True when every term has `m = 0`.
    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.m == 0 || t.c == 0.0)
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|k| k.c * k.phase(x, y, t).cos())
            .sum()
    }

    /// `(f_x, f_y)`.
    #[inline]
    pub fn gradient(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let mut fx = 0.0;
        let mut fy = 0.0;
        for k in &self.terms {
            let s = k.c * k.phase(x, y, t).sin();
            fx -= k.a as f64 * s;
            fy -= k.b as f64 * s;
        }
        (fx, fy)
    }

    pub fn jet(&self, x: f64, y: f64, t: f64) -> Jet {
        let mut j = Jet::default();
        for k in &self.terms {
            let (s, c) = k.phase(x, y, t).sin_cos();
            let (a, b) = (k.a as f64, k.b as f64);
            j.f += k.c * c;
            j.fx -= k.c * a * s;
            j.fy -= k.c * b * s;
            j.fxx -= k.c * a * a * c;
            j.fxy -= k.c * a * b * c;
            j.fyy -= k.c * b * b * c;
        }
        j
    }

    /// Upper bound on `|f_x| + |f_y|` over all of phase space.
    pub fn gradient_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|k| k.c.abs() * (k.a.abs() + k.b.abs()) as f64)
            .sum()
    }

    /// Parses the `c a b m phi` term-list form. Blank lines and `#` comments are skipped.
    pub fn from_term_list(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {}: expected `c a b m phi`, got {} fields",
                    lineno + 1,
                    fields.len()
                )));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
            let c: f64 = fields[0].parse().map_err(|_| bad("coefficient"))?;
            let a: i32 = fields[1].parse().map_err(|_| bad("x multiplier"))?;
            let b: i32 = fields[2].parse().map_err(|_| bad("y multiplier"))?;
            let m: i32 = fields[3].parse().map_err(|_| bad("t multiplier"))?;
            let phi: f64 = fields[4].parse().map_err(|_| bad("phase"))?;
            terms.push(Term::new(c, a, b, m, phi));
        }
        Ok(Self { terms })
    }

    pub fn to_term_list(&self) -> String {
        let mut out = String::new();
        for k in &self.terms {
            out.push_str(&format!(
                "{:.16e} {} {} {} {:.16e}\n",
                k.c, k.a, k.b, k.m, k.phi
            ));
        }
        out
    }

    /// Parses an inline expression: a signed sum of `[c[*]](cos|sin)(linear form)`
    /// where the linear form combines integer multiples of `x`, `y`, `t` and an
    /// optional real phase.
    pub fn parse_expr(src: &str) -> Result<Self> {
        ExprParser::new(src).parse()
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_expr(s)
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, k) in self.terms.iter().enumerate() {
            match (i > 0, k.c < 0.0) {
                (true, true) => write!(f, " - {}*cos(", -k.c)?,
                (true, false) => write!(f, " + {}*cos(", k.c)?,
                (false, _) => write!(f, "{}*cos(", k.c)?,
            }
            let mut first = true;
            for (mult, var) in [(k.a, "x"), (k.b, "y"), (k.m, "t")] {
                if mult == 0 {
                    continue;
                }
                if !first || mult < 0 {
                    write!(f, "{}", if mult < 0 { "-" } else { "+" })?;
                }
                if mult.abs() != 1 {
                    write!(f, "{}", mult.abs())?;
                }
                write!(f, "{var}")?;
                first = false;
            }
            if k.phi != 0.0 || first {
                if !first && k.phi >= 0.0 {
                    write!(f, "+")?;
                }
                write!(f, "{}", k.phi)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

struct ExprParser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> ExprParser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
            src,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {} in `{}`", self.pos, self.src))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let n = w.chars().count();
        if self.pos + n <= self.chars.len()
            && self.chars[self.pos..self.pos + n]
                .iter()
                .copied()
                .eq(w.chars())
        {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        let mut end = self.pos;
        let mut seen_digit = false;
        while end < self.chars.len() {
            let c = self.chars[end];
            if c.is_ascii_digit() {
                seen_digit = true;
                end += 1;
            } else if c == '.' {
                end += 1;
            } else if (c == 'e' || c == 'E') && seen_digit {
                // exponent only if followed by a digit or sign+digit
                let next = self.chars.get(end + 1).copied();
                let next2 = self.chars.get(end + 2).copied();
                let ok = matches!(next, Some(d) if d.is_ascii_digit())
                    || (matches!(next, Some('+') | Some('-'))
                        && matches!(next2, Some(d) if d.is_ascii_digit()));
                if !ok {
                    break;
                }
                end += 2;
            } else {
                break;
            }
        }
        if !seen_digit {
            return None;
        }
        let text: String = self.chars[start..end].iter().collect();
        let value = text.parse().ok()?;
        self.pos = end;
        Some(value)
    }

    fn parse(mut self) -> Result<Perturbation> {
        let mut terms = Vec::new();
        if self.chars.is_empty() || (self.chars.len() == 1 && self.chars[0] == '0') {
            return Ok(Perturbation::zero());
        }
        let mut sign = if self.eat('-') {
            -1.0
        } else {
            self.eat('+');
            1.0
        };
        loop {
            terms.push(self.term(sign)?);
            if self.eat('+') {
                sign = 1.0;
            } else if self.eat('-') {
                sign = -1.0;
            } else if self.peek().is_none() {
                break;
            } else {
                return Err(self.err("expected `+` or `-`"));
            }
        }
        Ok(Perturbation { terms })
    }

    fn term(&mut self, sign: f64) -> Result<Term> {
        let coef = match self.number() {
            Some(c) => {
                self.eat('*');
                c
            }
            None => 1.0,
        };
        let is_sin = if self.eat_word("cos") {
            false
        } else if self.eat_word("sin") {
            true
        } else {
            return Err(self.err("expected `cos` or `sin`"));
        };
        if !self.eat('(') {
            return Err(self.err("expected `(`"));
        }
        let (a, b, m, mut phi) = self.linear()?;
        if !self.eat(')') {
            return Err(self.err("expected `)`"));
        }
        if is_sin {
            phi -= FRAC_PI_2;
        }
        Ok(Term::new(sign * coef, a, b, m, phi))
    }

    fn linear(&mut self) -> Result<(i32, i32, i32, f64)> {
        let (mut a, mut b, mut m, mut phi) = (0i32, 0i32, 0i32, 0.0);
        let mut first = true;
        loop {
            let sign = if self.eat('-') {
                -1
            } else if self.eat('+') || first {
                1
            } else {
                break;
            };
            first = false;
            let start = self.pos;
            let num = self.number();
            self.eat('*');
            let var = match self.peek() {
                Some(v @ ('x' | 'y' | 't')) => {
                    self.pos += 1;
                    Some(v)
                }
                _ => None,
            };
            match (num, var) {
                (None, None) => return Err(self.err("expected a term")),
                (Some(p), None) => phi += sign as f64 * p,
                (n, Some(v)) => {
                    let k = match n {
                        None => 1,
                        Some(k) if k.fract() == 0.0 && k.abs() < 1e6 => k as i32,
                        Some(_) => {
                            self.pos = start;
                            return Err(self.err("multipliers of x, y, t must be integers"));
                        }
                    };
                    match v {
                        'x' => a += sign * k,
                        'y' => b += sign * k,
                        _ => m += sign * k,
                    }
                }
            }
            if self.peek() == Some(')') {
                break;
            }
        }
        Ok((a, b, m, phi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_standard_expression() {
        let p = Perturbation::parse_expr("1.0*cos(x+2y+t)").unwrap();
        assert_eq!(p, Perturbation::standard());
    }

    #[test]
    fn parses_sums_and_sines() {
        let p = Perturbation::parse_expr("0.5 cos(2x - y) - sin(x + 3*t + 0.25)").unwrap();
        assert_eq!(p.terms.len(), 2);
        assert_eq!(p.terms[0], Term::new(0.5, 2, -1, 0, 0.0));
        let t = p.terms[1];
        assert_eq!((t.c, t.a, t.b, t.m), (-1.0, 1, 0, 3));
        assert!((t.phi - (0.25 - FRAC_PI_2)).abs() < 1e-15);
        let v = p.value(0.3, 0.7, 1.1);
        let direct = 0.5 * (0.6f64 - 0.7).cos() - (0.3f64 + 3.3 + 0.25).sin();
        assert!((v - direct).abs() < 1e-14);
    }

    #[test]
    fn rejects_fractional_multiplier() {
        assert!(Perturbation::parse_expr("cos(0.5x)").is_err());
        assert!(Perturbation::parse_expr("cos(x").is_err());
        assert!(Perturbation::parse_expr("tan(x)").is_err());
    }

    #[test]
    fn term_list_round_trip() {
        let text = "# default\n1.0 1 2 1 0.0\n\n-0.25 0 1 2 0.5\n";
        let p = Perturbation::from_term_list(text).unwrap();
        assert_eq!(p.terms.len(), 2);
        let back = Perturbation::from_term_list(&p.to_term_list()).unwrap();
        assert_eq!(p, back);
        assert!(Perturbation::from_term_list("1 2 3").is_err());
    }

    #[test]
    fn display_parses_back() {
        let p = Perturbation::parse_expr("cos(x+2y+t) - 0.5*cos(-x+3y-2t+0.1)").unwrap();
        let back = Perturbation::parse_expr(&p.to_string()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn jet_matches_finite_differences() {
        let p = Perturbation::parse_expr("cos(x+2y+t) + 0.3*sin(2x-y)").unwrap();
        let (x, y, t) = (0.4, -1.3, 2.2);
        let h = 1e-5;
        let j = p.jet(x, y, t);
        let fx = (p.value(x + h, y, t) - p.value(x - h, y, t)) / (2.0 * h);
        let fy = (p.value(x, y + h, t) - p.value(x, y - h, t)) / (2.0 * h);
        assert!((j.fx - fx).abs() < 1e-8);
        assert!((j.fy - fy).abs() < 1e-8);
        let (gx, gy) = p.gradient(x, y, t);
        assert_eq!((gx, gy), (j.fx, j.fy));
        let fxy = (p.gradient(x, y + h, t).0 - p.gradient(x, y - h, t).0) / (2.0 * h);
        assert!((j.fxy - fxy).abs() < 1e-8);
    }
}

//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Terms are kept in graded order: ascending total degree, then descending
//! lexicographic exponent vectors, so `a^2` precedes `a*b` precedes `b^2`.
//! That order is also the print order of the canonical text form,
//! e.g. `a*t - 1/2*a^2*t^2 + 1/6*a^3*t^3`, which [`MultiPoly::parse`]
//! reads back exactly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational from a binary64 value (every finite double is a dyadic
/// rational).
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"3"`, `"-7/10"`, `"0.25"` or `"1e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let err = || Error::PolySyntax {
        column: 1,
        message: format!("`{text}` is not a rational number"),
    };
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    decimal_to_rational(t).ok_or_else(err)
}

fn decimal_to_rational(t: &str) -> Option<BigRational> {
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], body[pos + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    Some(if sign < 0 { -value } else { value })
}

/// An ordered list of variable names shared by compatible polynomials.
#[derive(Clone)]
pub struct Vars(Arc<[String]>);

impl Vars {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for n in names {
            let n = n.as_ref();
            let valid = n
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(Error::PolySyntax {
                    column: 1,
                    message: format!("`{n}` is not a valid variable name"),
                });
            }
            if !seen.insert(n.to_string()) {
                return Err(Error::PolySyntax {
                    column: 1,
                    message: format!("duplicate variable `{n}`"),
                });
            }
        }
        Ok(Self(names.iter().map(|s| s.as_ref().to_string()).collect()))
    }

    pub fn empty() -> Self {
        Self(Arc::from(Vec::<String>::new()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    /// `self` followed by the names of `other` not already present.
    pub fn union(&self, other: &Vars) -> Vars {
        let mut names: Vec<String> = self.0.to_vec();
        for n in other.names() {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
        Vars(names.into())
    }

    fn joined(&self) -> String {
        self.0.join(",")
    }
}

impl PartialEq for Vars {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Vars {}

impl fmt::Debug for Vars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.joined())
    }
}

/// Exponent vector with cached total degree.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial {
    degree: u32,
    exps: Box<[u32]>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Self {
            degree: exps.iter().sum(),
            exps: exps.into_boxed_slice(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::new(vec![0; nvars])
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            degree: self.degree + other.degree,
            exps: self.exps.iter().zip(other.exps.iter()).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct MultiPoly {
    vars: Vars,
    terms: BTreeMap<Monomial, BigRational>,
}

impl MultiPoly {
    pub fn zero(vars: &Vars) -> Self {
        Self {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(vars: &Vars) -> Self {
        Self::constant(vars, BigRational::one())
    }

    pub fn constant(vars: &Vars, c: BigRational) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(vars.len()), c);
        }
        p
    }

    pub fn var(vars: &Vars, name: &str) -> Result<Self> {
        let idx = vars
            .index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        let mut exps = vec![0; vars.len()];
        exps[idx] = 1;
        Ok(Self::monomial(vars, exps, BigRational::one()))
    }

    pub fn monomial(vars: &Vars, exps: Vec<u32>, c: BigRational) -> Self {
        assert_eq!(exps.len(), vars.len(), "exponent vector length");
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Monomial::new(exps), c);
        }
        p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, exps: &[u32]) -> BigRational {
        self.terms
            .get(&Monomial::new(exps.to_vec()))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Maximum total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(Monomial::degree)
    }

    pub fn degree_in(&self, idx: usize) -> u32 {
        self.terms.keys().map(|m| m.exps[idx]).max().unwrap_or(0)
    }

    /// Largest combined degree in the variables at `indices`.
    pub fn degree_in_set(&self, indices: &[usize]) -> u32 {
        self.terms
            .keys()
            .map(|m| indices.iter().map(|&i| m.exps[i]).sum())
            .max()
            .unwrap_or(0)
    }

    fn check_vars(&self, other: &MultiPoly) -> Result<()> {
        if self.vars != other.vars {
            return Err(Error::VariableMismatch(self.vars.joined(), other.vars.joined()));
        }
        Ok(())
    }

    fn add_term(&mut self, mono: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// `self += c * other`; the variable lists must already agree.
    pub(crate) fn add_scaled_assign(&mut self, other: &MultiPoly, c: &BigRational) {
        debug_assert_eq!(self.vars, other.vars);
        if c.is_zero() {
            return;
        }
        let unit = c.is_one();
        for (m, v) in &other.terms {
            let term = if unit { v.clone() } else { v * c };
            self.add_term(m.clone(), term);
        }
    }

    /// `self += a * b`; the variable lists must already agree.
    pub(crate) fn add_product_assign(&mut self, a: &MultiPoly, b: &MultiPoly) {
        debug_assert_eq!(self.vars, a.vars);
        debug_assert_eq!(self.vars, b.vars);
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                self.add_term(ma.mul(mb), ca * cb);
            }
        }
    }

    pub fn try_add(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = self.clone();
        out.add_scaled_assign(other, &BigRational::one());
        Ok(out)
    }

    pub fn try_sub(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = self.clone();
        out.add_scaled_assign(other, &-BigRational::one());
        Ok(out)
    }

    pub fn try_mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = MultiPoly::zero(&self.vars);
        out.add_product_assign(self, other);
        Ok(out)
    }

    pub fn scale(&self, c: &BigRational) -> MultiPoly {
        let mut out = MultiPoly::zero(&self.vars);
        out.add_scaled_assign(self, c);
        out
    }

    pub fn pow(&self, k: u32) -> MultiPoly {
        let mut out = MultiPoly::one(&self.vars);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn diff(&self, var: &str) -> Result<MultiPoly> {
        let idx = self
            .vars
            .index_of(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        Ok(self.diff_index(idx))
    }

    pub fn diff_index(&self, idx: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.exps[idx];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps.to_vec();
            exps[idx] -= 1;
            out.add_term(Monomial::new(exps), c * BigRational::from_integer(e.into()));
        }
        out
    }

    /// Exact value at a rational point.
    pub fn eval_rational(&self, point: &[BigRational]) -> BigRational {
        assert_eq!(point.len(), self.vars.len(), "point dimension");
        let mut total = BigRational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (x, &e) in point.iter().zip(m.exps.iter()) {
                if e > 0 {
                    term *= num_traits::pow(x.clone(), e as usize);
                }
            }
            total += term;
        }
        total
    }

    /// Value at a binary64 point: the inputs are taken as exact rationals,
    /// the polynomial is evaluated exactly and rounded once.
    pub fn eval(&self, point: &[f64]) -> f64 {
        let exact: Vec<BigRational> = point.iter().map(|&x| rational_from_f64(x)).collect();
        rational_to_f64(&self.eval_rational(&exact))
    }

    pub fn eval_map(&self, assignment: &HashMap<String, f64>) -> Result<f64> {
        let point = self
            .vars
            .names()
            .iter()
            .map(|n| {
                assignment
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::MissingAssignment(n.clone()))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.eval(&point))
    }

    /// Replaces variable `idx` by a constant; the variable stays in the
    /// list with exponent zero everywhere.
    pub fn substitute_index(&self, idx: usize, value: &BigRational) -> MultiPoly {
        let mut out = MultiPoly::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.exps[idx];
            if e == 0 {
                out.add_term(m.clone(), c.clone());
                continue;
            }
            let mut exps = m.exps.to_vec();
            exps[idx] = 0;
            out.add_term(
                Monomial::new(exps),
                c * num_traits::pow(value.clone(), e as usize),
            );
        }
        out
    }

    pub fn substitute(&self, var: &str, value: &BigRational) -> Result<MultiPoly> {
        let idx = self
            .vars
            .index_of(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        Ok(self.substitute_index(idx, value))
    }

    /// Re-expresses the polynomial over `target`, matching variables by
    /// name. Variables missing from `target` must not occur in any term.
    pub fn embed(&self, target: &Vars) -> Result<MultiPoly> {
        if &self.vars == target {
            return Ok(self.clone());
        }
        let map: Vec<Option<usize>> = self
            .vars
            .names()
            .iter()
            .map(|n| target.index_of(n))
            .collect();
        let mut out = MultiPoly::zero(target);
        for (m, c) in &self.terms {
            let mut exps = vec![0; target.len()];
            for (i, &e) in m.exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                match map[i] {
                    Some(j) => exps[j] = e,
                    None => return Err(Error::UnknownVariable(self.vars.names()[i].clone())),
                }
            }
            out.add_term(Monomial::new(exps), c.clone());
        }
        Ok(out)
    }

    /// Same terms over a positionally renamed variable list.
    pub fn rename(&self, target: &Vars) -> Result<MultiPoly> {
        if target.len() != self.vars.len() {
            return Err(Error::VariableMismatch(self.vars.joined(), target.joined()));
        }
        Ok(MultiPoly {
            vars: target.clone(),
            terms: self.terms.clone(),
        })
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            nvars: self.vars.len(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.exps.to_vec(), rational_to_f64(c)))
                .collect(),
        }
    }

    /// Parses the canonical text form (and any expression built from
    /// identifiers, rational or decimal literals, `+ - * / ^` and
    /// parentheses). Division is only allowed by nonzero constants.
    pub fn parse(text: &str, vars: &Vars) -> Result<MultiPoly> {
        let mut parser = Parser::new(text, vars)?;
        let p = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(Error::PolySyntax {
                column: tok.column,
                message: format!("unexpected {:?}", tok.kind),
            });
        }
        Ok(p)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let negative = c.is_negative();
            if k == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if negative { " - " } else { " + " })?;
            }
            let abs = c.abs();
            let mut factors: Vec<String> = Vec::new();
            let constant = m.degree == 0;
            if !abs.is_one() || constant {
                factors.push(abs.to_string());
            }
            for (name, &e) in self.vars.names().iter().zip(m.exps.iter()) {
                match e {
                    0 => {}
                    1 => factors.push(name.clone()),
                    _ => factors.push(format!("{name}^{e}")),
                }
            }
            f.write_str(&factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly{:?}({})", self.vars, self)
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    /// Panics on mismatched variable lists; use [`MultiPoly::try_add`] to
    /// handle that case.
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        self.try_add(rhs).expect("polynomial variable mismatch")
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self.try_sub(rhs).expect("polynomial variable mismatch")
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        self.try_mul(rhs).expect("polynomial variable mismatch")
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(&-BigRational::one())
    }
}

/// Binary64 copy of a polynomial for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    nvars: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl CompiledPoly {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&k, &xi)| if k == 0 { acc } else { acc * xi.powi(k as i32) })
            })
            .sum()
    }

    /// Value and gradient.
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for (e, c) in &self.terms {
            let mut term = *c;
            for (&k, &xi) in e.iter().zip(x) {
                if k > 0 {
                    term *= xi.powi(k as i32);
                }
            }
            value += term;
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let mut d = *c * k as f64;
                for (j, (&kj, &xj)) in e.iter().zip(x).enumerate() {
                    let p = if j == i { kj - 1 } else { kj };
                    if p > 0 {
                        d *= xj.powi(p as i32);
                    }
                }
                grad[i] += d;
            }
        }
        value
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokKind {
    Num(BigRational),
    Ident(String),
    Op(char),
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokKind,
    column: usize,
}

struct Parser<'v> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'v Vars,
    end_column: usize,
}

impl<'v> Parser<'v> {
    fn new(text: &str, vars: &'v Vars) -> Result<Self> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let value = decimal_to_rational(&lit).ok_or(Error::PolySyntax {
                    column,
                    message: format!("bad number `{lit}`"),
                })?;
                tokens.push(Token {
                    kind: TokKind::Num(value),
                    column,
                });
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokKind::Ident(chars[start..i].iter().collect()),
                    column,
                });
            } else if "+-*/^()".contains(c) {
                tokens.push(Token {
                    kind: TokKind::Op(c),
                    column,
                });
                i += 1;
            } else {
                return Err(Error::PolySyntax {
                    column,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
        Ok(Self {
            tokens,
            pos: 0,
            vars,
            end_column: chars.len() + 1,
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: TokKind::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: &str) -> Error {
        Error::PolySyntax {
            column: self.peek().map_or(self.end_column, |t| t.column),
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<MultiPoly> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op('+') {
                acc = &acc + &self.term()?;
            } else if self.eat_op('-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<MultiPoly> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op('*') {
                acc = &acc * &self.unary()?;
            } else if self.peek().map(|t| &t.kind) == Some(&TokKind::Op('/')) {
                let column = self.peek().map_or(self.end_column, |t| t.column);
                self.pos += 1;
                let divisor = self.unary()?;
                let c = match divisor.degree() {
                    Some(0) => divisor.terms.values().next().cloned().unwrap_or_default(),
                    _ => {
                        return Err(Error::PolySyntax {
                            column,
                            message: "division is only allowed by a nonzero constant".into(),
                        })
                    }
                };
                acc = acc.scale(&c.recip());
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<MultiPoly> {
        if self.eat_op('-') {
            return Ok(-&self.unary()?);
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<MultiPoly> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let column = self.peek().map_or(self.end_column, |t| t.column);
            match self.peek().map(|t| t.kind.clone()) {
                Some(TokKind::Num(n)) if n.is_integer() && !n.is_negative() => {
                    self.pos += 1;
                    let k = n.to_integer().to_u32().ok_or(Error::PolySyntax {
                        column,
                        message: "exponent too large".into(),
                    })?;
                    return Ok(base.pow(k));
                }
                _ => {
                    return Err(Error::PolySyntax {
                        column,
                        message: "exponent must be a non-negative integer literal".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<MultiPoly> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| self.error_here("unexpected end of expression"))?;
        self.pos += 1;
        match tok.kind {
            TokKind::Num(v) => Ok(MultiPoly::constant(self.vars, v)),
            TokKind::Ident(name) => MultiPoly::var(self.vars, &name).map_err(|_| Error::PolySyntax {
                column: tok.column,
                message: format!("unknown variable `{name}`"),
            }),
            TokKind::Op('(') => {
                let inner = self.expr()?;
                if !self.eat_op(')') {
                    return Err(self.error_here("expected `)`"));
                }
                Ok(inner)
            }
            TokKind::Op(c) => Err(Error::PolySyntax {
                column: tok.column,
                message: format!("unexpected `{c}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vars {
        Vars::new(names).unwrap()
    }

    fn p(text: &str, v: &Vars) -> MultiPoly {
        MultiPoly::parse(text, v).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn addition_examples() {
        let v = vars(&["a", "b", "t"]);
        assert!((&p("a", &v) + &p("-a", &v)).is_zero());
        let sum = &p("a*t", &v) + &p("b*t", &v);
        assert_eq!(sum.num_terms(), 2);
        assert_eq!(sum, p("a*t + b*t", &v));
        let x = p("3*a^2 - b/7", &v);
        assert_eq!(&x + &MultiPoly::zero(&v), x);
    }

    #[test]
    fn multiplication_examples() {
        let v = vars(&["a", "b", "t"]);
        assert_eq!(&p("a+b", &v) * &p("a-b", &v), p("a^2 - b^2", &v));
        let x = p("a*b - 2*t", &v);
        assert_eq!(&x * &MultiPoly::one(&v), x);
        assert_eq!(&p("a^2/2*t^2", &v) * &p("a*t", &v), p("1/2*a^3*t^3", &v));
    }

    #[test]
    fn derivative_examples() {
        let v = vars(&["a", "b", "t"]);
        assert_eq!(p("a*t - a^2*t^2/2", &v).diff("a").unwrap(), p("t - a*t^2", &v));
        assert!(p("a*t", &v).diff("b").unwrap().is_zero());
        assert_eq!(
            p("a^3*b^2*t^4/4", &v).diff("a").unwrap(),
            p("3/4*a^2*b^2*t^4", &v)
        );
        assert!(matches!(p("a", &v).diff("z"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn evaluation_examples() {
        let v = vars(&["a", "t"]);
        let x = p("a*t - a^2*t^2/2", &v);
        assert_eq!(x.eval(&[1.0, 0.25]), 0.21875);
        assert_eq!(MultiPoly::zero(&v).eval(&[3.0, 4.0]), 0.0);
        let mut assignment = HashMap::new();
        assignment.insert("a".to_string(), 1.0);
        assert!(matches!(x.eval_map(&assignment), Err(Error::MissingAssignment(_))));
        assignment.insert("t".to_string(), 0.25);
        assert_eq!(x.eval_map(&assignment).unwrap(), 0.21875);
    }

    #[test]
    fn mismatched_variables_are_rejected() {
        let x = p("a", &vars(&["a"]));
        let y = p("a", &vars(&["a", "b"]));
        assert!(matches!(x.try_add(&y), Err(Error::VariableMismatch(..))));
        assert!(matches!(x.try_mul(&y), Err(Error::VariableMismatch(..))));
    }

    #[test]
    fn canonical_print_order() {
        let v = vars(&["a", "b", "t"]);
        let x = p("a*t - a^2/2*t^2 + a^3/6*t^3 - a^3*b^2/4*t^4 - a^4*b^2/10*t^5", &v);
        assert_eq!(
            x.to_string(),
            "a*t - 1/2*a^2*t^2 + 1/6*a^3*t^3 - 1/4*a^3*b^2*t^4 - 1/10*a^4*b^2*t^5"
        );
        assert_eq!(p("b^2 + a*b + a^2 + 1", &v).to_string(), "1 + a^2 + a*b + b^2");
        assert_eq!(p("-a", &v).to_string(), "-a");
        assert_eq!(MultiPoly::zero(&v).to_string(), "0");
        assert_eq!(p("-3/2", &v).to_string(), "-3/2");
    }

    #[test]
    fn parse_errors_carry_columns() {
        let v = vars(&["a"]);
        match MultiPoly::parse("a + z", &v) {
            Err(Error::PolySyntax { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        match MultiPoly::parse("a ^ a", &v) {
            Err(Error::PolySyntax { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(MultiPoly::parse("a / a", &v).is_err());
        assert!(MultiPoly::parse("(a + 1", &v).is_err());
        assert!(MultiPoly::parse("a $", &v).is_err());
        assert!(MultiPoly::parse("", &v).is_err());
    }

    #[test]
    fn decimals_are_exact() {
        let v = vars(&["a"]);
        assert_eq!(p("0.25*a", &v), MultiPoly::monomial(&v, vec![1], q(1, 4)));
        assert_eq!(p("1e-3", &v), MultiPoly::constant(&v, q(1, 1000)));
        assert_eq!(parse_rational("-7/10").unwrap(), q(-7, 10));
        assert_eq!(parse_rational("2.5E1").unwrap(), q(25, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn substitute_and_embed() {
        let v = vars(&["a", "y0"]);
        let x = p("a*y0^2 + y0 - a", &v);
        let s = x.substitute("y0", &q(1, 2)).unwrap();
        assert_eq!(s, p("-3/4*a + 1/2", &v));
        let target = vars(&["a"]);
        assert_eq!(s.embed(&target).unwrap(), p("1/2 - 3/4*a", &target));
        assert!(x.embed(&target).is_err());
        let wide = vars(&["t", "a", "y0"]);
        assert_eq!(x.embed(&wide).unwrap(), p("a*y0^2 + y0 - a", &wide));
    }

    #[test]
    fn compiled_gradient_matches_symbolic() {
        let v = vars(&["a", "b"]);
        let x = p("a^3*b^2 - 2*a*b + 5*b^4 - 1", &v);
        let c = x.compile();
        let mut g = [0.0; 2];
        let val = c.eval_grad(&[1.3, -0.7], &mut g);
        assert!((val - x.eval(&[1.3, -0.7])).abs() < 1e-12);
        assert!((g[0] - x.diff("a").unwrap().eval(&[1.3, -0.7])).abs() < 1e-12);
        assert!((g[1] - x.diff("b").unwrap().eval(&[1.3, -0.7])).abs() < 1e-12);
    }
}

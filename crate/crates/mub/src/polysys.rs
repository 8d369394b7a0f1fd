//! Multivariate quadratic systems whose zeros are the vectors MU to {I, H}.
//!
//! A candidate vector is parametrized by 2(d-1) reals: sqrt(d)·v_0 = 1 and
//! sqrt(d)·v_j = x_j + i y_j for j = 1..d-1. Membership in the MU set is then
//! equivalent to d-1 modulus constraints x_j^2 + y_j^2 - 1 = 0 plus d-1
//! unbiasedness constraints, one per column of H (the last column is implied
//! by completeness and dropped). [`mu_system`] builds that system with exact
//! Q(sqrt 3) coefficients when possible, or rational approximations of a
//! requested significance otherwise.

use crate::apf::Real;
use crate::catalog::{self, Family, HadamardMatrix};
use crate::rat::{pow10_neg, rat_from_decimal, round_sig, sqrt3_interval, RInt, Rat};
use rug::Integer;
use serde_json::{json, Value};
use std::cmp::Ordering;
use std::fmt;

/// Hard cap on variable count: dimensions up to d = 7 need 2(d-1) = 12.
pub const MAX_VARS: usize = 12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolyError {
    #[error("coefficient {value} at column {k}, rows ({j},{l}) is not in Q(sqrt3)")]
    NotRepresentable { k: usize, j: usize, l: usize, value: String },
    #[error("wrong source system: {0}")]
    WrongSource(String),
    #[error("point has {got} coordinates, system has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bad system data: {0}")]
    BadData(String),
}

// ---------------------------------------------------------------------------
// Coefficient field Q(sqrt 3)

/// Element a + b·sqrt(3) of the real quadratic field Q(sqrt 3).
///
/// Rational approximations live in the same type with b = 0, so every
/// polynomial routine is written once. Zero iff a = b = 0; signs and
/// comparisons are exact (no radical evaluation needed).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QSqrt3 {
    pub a: Rat,
    pub b: Rat,
}

impl QSqrt3 {
    pub fn zero() -> Self {
        QSqrt3 { a: Rat::new(), b: Rat::new() }
    }

    pub fn one() -> Self {
        QSqrt3::from_int(1)
    }

    pub fn new(a: Rat, b: Rat) -> Self {
        QSqrt3 { a, b }
    }

    pub fn from_rat(a: Rat) -> Self {
        QSqrt3 { a, b: Rat::new() }
    }

    pub fn from_int(n: i64) -> Self {
        QSqrt3 { a: Rat::from(n), b: Rat::new() }
    }

    /// a + b·sqrt(3) with both parts given as integers.
    pub fn from_pair(a: i64, b: i64) -> Self {
        QSqrt3 { a: Rat::from(a), b: Rat::from(b) }
    }

    pub fn is_zero(&self) -> bool {
        self.a.cmp0() == Ordering::Equal && self.b.cmp0() == Ordering::Equal
    }

    pub fn is_rational(&self) -> bool {
        self.b.cmp0() == Ordering::Equal
    }

    /// The rational part, provided b = 0.
    pub fn as_rat(&self) -> Option<&Rat> {
        self.is_rational().then_some(&self.a)
    }

    pub fn add(&self, o: &QSqrt3) -> QSqrt3 {
        QSqrt3 {
            a: Rat::from(&self.a + &o.a),
            b: Rat::from(&self.b + &o.b),
        }
    }

    pub fn sub(&self, o: &QSqrt3) -> QSqrt3 {
        QSqrt3 {
            a: Rat::from(&self.a - &o.a),
            b: Rat::from(&self.b - &o.b),
        }
    }

    pub fn neg(&self) -> QSqrt3 {
        QSqrt3 { a: -self.a.clone(), b: -self.b.clone() }
    }

    pub fn mul(&self, o: &QSqrt3) -> QSqrt3 {
        // (a1 + b1 s)(a2 + b2 s) = a1 a2 + 3 b1 b2 + (a1 b2 + b1 a2) s
        if self.b.cmp0() == Ordering::Equal && o.b.cmp0() == Ordering::Equal {
            return QSqrt3 { a: Rat::from(&self.a * &o.a), b: Rat::new() };
        }
        let a = Rat::from(&self.a * &o.a) + Rat::from(&self.b * &o.b) * 3u32;
        let b = Rat::from(&self.a * &o.b) + Rat::from(&self.b * &o.a);
        QSqrt3 { a, b }
    }

    pub fn mul_rat(&self, r: &Rat) -> QSqrt3 {
        QSqrt3 {
            a: Rat::from(&self.a * r),
            b: Rat::from(&self.b * r),
        }
    }

    /// Multiplicative inverse; panics on zero.
    pub fn inv(&self) -> QSqrt3 {
        assert!(!self.is_zero(), "inverse of zero in Q(sqrt3)");
        // 1/(a + b s) = (a - b s) / (a^2 - 3 b^2); the norm is nonzero since
        // sqrt(3) is irrational.
        let norm = Rat::from(self.a.clone().square()) - Rat::from(self.b.clone().square()) * 3u32;
        QSqrt3 {
            a: Rat::from(&self.a / &norm),
            b: -Rat::from(&self.b / &norm),
        }
    }

    pub fn div(&self, o: &QSqrt3) -> QSqrt3 {
        self.mul(&o.inv())
    }

    /// Exact sign of a + b·sqrt(3).
    pub fn sign(&self) -> Ordering {
        let sa = self.a.cmp0();
        let sb = self.b.cmp0();
        if sb == Ordering::Equal {
            return sa;
        }
        if sa == Ordering::Equal || sa == sb {
            return sb;
        }
        // opposite signs: compare a^2 against 3 b^2
        let a2 = Rat::from(self.a.clone().square());
        let b23 = Rat::from(self.b.clone().square()) * 3u32;
        match a2.cmp(&b23) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal, // unreachable for nonzero a, b
        }
    }

    /// Exact rational enclosure, sqrt(3) taken at `digits` decimal digits.
    pub fn enclosure(&self, digits: u32) -> RInt {
        if self.b.cmp0() == Ordering::Equal {
            return RInt::point(self.a.clone());
        }
        let s3 = sqrt3_interval(digits);
        s3.scale(&self.b).add(&RInt::point(self.a.clone()))
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64() + 3f64.sqrt() * self.b.to_f64()
    }

    pub fn to_json(&self) -> Value {
        json!({ "a": frac_str(&self.a), "b": frac_str(&self.b) })
    }

    pub fn from_json(v: &Value) -> Result<QSqrt3, PolyError> {
        let part = |key: &str| -> Result<Rat, PolyError> {
            let s = v[key]
                .as_str()
                .ok_or_else(|| PolyError::BadData(format!("coeff missing {key:?}")))?;
            rat_from_decimal(s).map_err(PolyError::BadData)
        };
        Ok(QSqrt3 { a: part("a")?, b: part("b")? })
    }
}

impl fmt::Display for QSqrt3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        if self.b.cmp0() == Ordering::Equal {
            return write!(f, "{}", self.a);
        }
        if self.a.cmp0() == Ordering::Equal {
            return write!(f, "{}*s3", self.b);
        }
        let sign = if self.b.cmp0() == Ordering::Less { "-" } else { "+" };
        let babs = Rat::from(self.b.clone().abs());
        write!(f, "({} {sign} {}*s3)", self.a, babs)
    }
}

fn frac_str(r: &Rat) -> String {
    r.to_string()
}

// ---------------------------------------------------------------------------
// Monomials and orders

/// Exponent vector over at most [`MAX_VARS`] variables; unused slots stay 0.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub [u16; MAX_VARS]);

impl Monomial {
    pub fn one() -> Self {
        Monomial([0; MAX_VARS])
    }

    pub fn var(i: usize) -> Self {
        let mut m = Monomial::one();
        m.0[i] = 1;
        m
    }

    pub fn var_pow(i: usize, e: u16) -> Self {
        let mut m = Monomial::one();
        m.0[i] = e;
        m
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        let mut m = *self;
        for i in 0..MAX_VARS {
            m.0[i] += o.0[i];
        }
        m
    }

    /// True if `self` divides `o`.
    pub fn divides(&self, o: &Monomial) -> bool {
        self.0.iter().zip(o.0.iter()).all(|(a, b)| a <= b)
    }

    /// `o / self`; caller guarantees divisibility.
    pub fn quotient_of(&self, o: &Monomial) -> Monomial {
        let mut m = *o;
        for i in 0..MAX_VARS {
            debug_assert!(m.0[i] >= self.0[i]);
            m.0[i] -= self.0[i];
        }
        m
    }

    pub fn lcm(&self, o: &Monomial) -> Monomial {
        let mut m = *self;
        for i in 0..MAX_VARS {
            m.0[i] = m.0[i].max(o.0[i]);
        }
        m
    }

    pub fn coprime(&self, o: &Monomial) -> bool {
        self.0.iter().zip(o.0.iter()).all(|(&a, &b)| a == 0 || b == 0)
    }

    /// `Some(i)` if the monomial is a positive power of variable i alone.
    pub fn pure_power(&self) -> Option<usize> {
        let mut found = None;
        for (i, &e) in self.0.iter().enumerate() {
            if e > 0 {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OrderKind {
    Lex,
    GrevLex,
}

/// A monomial order: lexicographic or graded-reverse-lexicographic over an
/// explicit variable priority list (`perm[0]` is the most significant
/// variable, given as an index into the system's variable storage).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MonomialOrder {
    pub kind: OrderKind,
    pub perm: Vec<usize>,
}

impl MonomialOrder {
    /// Default elimination order: x1 > y1 > x2 > y2 > ... > x_{d-1} > y_{d-1},
    /// so lex elimination proceeds toward the final imaginary coordinate.
    pub fn lex_default(nvars: usize) -> Self {
        MonomialOrder { kind: OrderKind::Lex, perm: interleave(nvars) }
    }

    pub fn grevlex_default(nvars: usize) -> Self {
        MonomialOrder { kind: OrderKind::GrevLex, perm: interleave(nvars) }
    }

    /// Lex in variable storage order (x1..x_{d-1}, y1..y_{d-1}); used as the
    /// canonical term ordering inside [`MultiPoly`].
    pub fn lex_storage(nvars: usize) -> Self {
        MonomialOrder { kind: OrderKind::Lex, perm: (0..nvars).collect() }
    }

    pub fn nvars(&self) -> usize {
        self.perm.len()
    }

    pub fn cmp(&self, m1: &Monomial, m2: &Monomial) -> Ordering {
        match self.kind {
            OrderKind::Lex => {
                for &i in &self.perm {
                    match m1.0[i].cmp(&m2.0[i]) {
                        Ordering::Equal => {}
                        ord => return ord,
                    }
                }
                Ordering::Equal
            }
            OrderKind::GrevLex => {
                match m1.total_degree().cmp(&m2.total_degree()) {
                    Ordering::Equal => {}
                    ord => return ord,
                }
                for &i in self.perm.iter().rev() {
                    match m1.0[i].cmp(&m2.0[i]) {
                        // smaller exponent in the least significant place wins
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => {}
                    }
                }
                Ordering::Equal
            }
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self.kind {
            OrderKind::Lex => "lex",
            OrderKind::GrevLex => "grevlex",
        };
        json!({ "kind": kind, "perm": self.perm })
    }

    pub fn from_json(v: &Value) -> Result<MonomialOrder, PolyError> {
        let kind = match v["kind"].as_str() {
            Some("lex") => OrderKind::Lex,
            Some("grevlex") => OrderKind::GrevLex,
            _ => return Err(PolyError::BadData("order kind must be lex|grevlex".into())),
        };
        let perm = v["perm"]
            .as_array()
            .ok_or_else(|| PolyError::BadData("order missing perm".into()))?
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| PolyError::BadData("order perm not integers".into()))?;
        let mut seen = vec![false; perm.len()];
        for &i in &perm {
            if i >= perm.len() || seen[i] {
                return Err(PolyError::BadData("order perm is not a permutation".into()));
            }
            seen[i] = true;
        }
        Ok(MonomialOrder { kind, perm })
    }
}

/// x1, y1, x2, y2, ... as storage indices (x block first, then y block).
fn interleave(nvars: usize) -> Vec<usize> {
    assert!(nvars % 2 == 0, "MU systems have an even variable count");
    let m = nvars / 2;
    let mut p = Vec::with_capacity(nvars);
    for j in 0..m {
        p.push(j);
        p.push(m + j);
    }
    p
}

// ---------------------------------------------------------------------------
// Polynomials

/// Multivariate polynomial with Q(sqrt 3) coefficients.
///
/// Terms are kept strictly descending under the canonical storage-lex order
/// with no zero coefficients, so structural equality is value equality and
/// serialization is byte-deterministic.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MultiPoly {
    pub nvars: usize,
    pub terms: Vec<(Monomial, QSqrt3)>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> Self {
        MultiPoly { nvars, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, c: QSqrt3) -> Self {
        MultiPoly::from_terms(nvars, vec![(Monomial::one(), c)])
    }

    /// Sorts, merges equal monomials, and drops zero coefficients.
    pub fn from_terms(nvars: usize, mut terms: Vec<(Monomial, QSqrt3)>) -> Self {
        let ord = MonomialOrder::lex_storage(nvars);
        terms.sort_by(|t1, t2| ord.cmp(&t2.0, &t1.0));
        let mut out: Vec<(Monomial, QSqrt3)> = Vec::with_capacity(terms.len());
        for (m, c) in terms {
            match out.last_mut() {
                Some((lm, lc)) if *lm == m => *lc = lc.add(&c),
                _ => out.push((m, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        MultiPoly { nvars, terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.iter().map(|(m, _)| m.total_degree()).max().unwrap_or(0)
    }

    pub fn coeff(&self, m: &Monomial) -> QSqrt3 {
        self.terms
            .iter()
            .find(|(tm, _)| tm == m)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(QSqrt3::zero)
    }

    /// Leading term under `order` (scan; storage order is only canonical lex).
    pub fn leading<'p>(&'p self, order: &MonomialOrder) -> (&'p Monomial, &'p QSqrt3) {
        assert!(!self.is_zero(), "leading term of zero polynomial");
        let mut best = &self.terms[0];
        for t in &self.terms[1..] {
            if order.cmp(&t.0, &best.0) == Ordering::Greater {
                best = t;
            }
        }
        (&best.0, &best.1)
    }

    pub fn add(&self, o: &MultiPoly) -> MultiPoly {
        debug_assert_eq!(self.nvars, o.nvars);
        let ord = MonomialOrder::lex_storage(self.nvars);
        let mut out = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < o.terms.len() {
            match ord.cmp(&self.terms[i].0, &o.terms[j].0) {
                Ordering::Greater => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(o.terms[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = self.terms[i].1.add(&o.terms[j].1);
                    if !c.is_zero() {
                        out.push((self.terms[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend(o.terms[j..].iter().cloned());
        MultiPoly { nvars: self.nvars, terms: out }
    }

    pub fn sub(&self, o: &MultiPoly) -> MultiPoly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> MultiPoly {
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (*m, c.neg())).collect(),
        }
    }

    pub fn scale(&self, c: &QSqrt3) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(self.nvars);
        }
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, tc)| (*m, tc.mul(c))).collect(),
        }
    }

    /// `self · c·mono` — multiplying by a single term keeps the sort order.
    pub fn mul_term(&self, mono: &Monomial, c: &QSqrt3) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(self.nvars);
        }
        MultiPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, tc)| (m.mul(mono), tc.mul(c)))
                .collect(),
        }
    }

    pub fn mul(&self, o: &MultiPoly) -> MultiPoly {
        let mut acc = MultiPoly::zero(self.nvars);
        for (m, c) in &o.terms {
            acc = acc.add(&self.mul_term(m, c));
        }
        acc
    }

    /// Divides out the rational content: afterwards every coefficient part is
    /// an integer and the gcd of all parts is 1. No-op on zero.
    pub fn content_strip(&mut self) {
        if self.is_zero() {
            return;
        }
        let mut denom_lcm = Integer::from(1);
        for (_, c) in &self.terms {
            denom_lcm.lcm_mut(c.a.denom());
            denom_lcm.lcm_mut(c.b.denom());
        }
        let mut num_gcd = Integer::new();
        for (_, c) in &self.terms {
            // scaling by the common denominator makes each part integral
            let sa = Integer::from(c.a.numer() * &denom_lcm) / c.a.denom();
            let sb = Integer::from(c.b.numer() * &denom_lcm) / c.b.denom();
            num_gcd.gcd_mut(&sa);
            num_gcd.gcd_mut(&sb);
        }
        let factor = Rat::from((denom_lcm, num_gcd));
        for (_, c) in &mut self.terms {
            *c = c.mul_rat(&factor);
        }
    }

    /// Flips the overall sign if the leading coefficient under `order` is
    /// negative.
    pub fn leading_positive(&mut self, order: &MonomialOrder) {
        if self.is_zero() {
            return;
        }
        if self.leading(order).1.sign() == Ordering::Less {
            for (_, c) in &mut self.terms {
                *c = c.neg();
            }
        }
    }

    /// Scales so the leading coefficient under `order` is exactly 1.
    pub fn make_monic(&mut self, order: &MonomialOrder) {
        if self.is_zero() {
            return;
        }
        let inv = self.leading(order).1.inv();
        for (_, c) in &mut self.terms {
            *c = c.mul(&inv);
        }
    }

    /// Canonical display/test normalization: content-free with positive
    /// leading coefficient under storage lex; a polynomial whose every
    /// coefficient is a pure sqrt(3) multiple is divided by sqrt(3).
    pub fn normalize_display(&mut self) {
        if self
            .terms
            .iter()
            .all(|(_, c)| c.a.cmp0() == Ordering::Equal)
        {
            for (_, c) in &mut self.terms {
                std::mem::swap(&mut c.a, &mut c.b);
            }
        }
        self.content_strip();
        let ord = MonomialOrder::lex_storage(self.nvars);
        self.leading_positive(&ord);
    }

    /// Interval evaluation: `point[i]` encloses coordinate i, `s3` encloses
    /// sqrt(3). The result encloses the exact value.
    pub fn eval_rint(&self, point: &[RInt], s3: &RInt) -> RInt {
        assert_eq!(point.len(), self.nvars);
        let mut acc = RInt::zero();
        for (m, c) in &self.terms {
            let mut t = RInt::point(c.a.clone());
            if c.b.cmp0() != Ordering::Equal {
                t = t.add(&s3.scale(&c.b));
            }
            for i in 0..self.nvars {
                let e = m.0[i];
                if e > 0 {
                    t = t.mul(&point[i].pow(e as u32));
                }
            }
            acc = acc.add(&t);
        }
        acc
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.nvars);
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64();
            for i in 0..self.nvars {
                for _ in 0..m.0[i] {
                    t *= point[i];
                }
            }
            acc += t;
        }
        acc
    }

    /// Renders with the given variable names, terms in canonical order.
    pub fn render(&self, vars: &[String]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (idx, (m, c)) in self.terms.iter().enumerate() {
            let cs = c.to_string();
            let (neg, body) = match cs.strip_prefix('-') {
                Some(rest) => (true, rest.to_string()),
                None => (false, cs),
            };
            if idx == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            if body != "1" || m.is_one() {
                factors.push(body);
            }
            for i in 0..self.nvars {
                match m.0[i] {
                    0 => {}
                    1 => factors.push(vars[i].clone()),
                    e => factors.push(format!("{}^{e}", vars[i])),
                }
            }
            s.push_str(&factors.join("*"));
        }
        s
    }

    /// Parses "3*y2 - 4*y2^3" style text: terms joined by + or -, each a
    /// product of an optional rational coefficient, optional `s3` (sqrt 3)
    /// factors, and variable powers `x1`, `y2^3`. Variable names must come
    /// from `vars`.
    pub fn parse(src: &str, vars: &[&str]) -> Result<MultiPoly, String> {
        let nvars = vars.len();
        let mut terms: Vec<(Monomial, QSqrt3)> = Vec::new();
        let cleaned: String = src.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Err("empty polynomial text".into());
        }
        // split on top-level + / - signs (no parentheses in this grammar)
        let bytes = cleaned.as_bytes();
        let mut pieces: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        let mut at_start = true;
        for (i, &ch) in bytes.iter().enumerate() {
            let c = ch as char;
            if (c == '+' || c == '-') && !at_start && bytes[i - 1] != b'^' && bytes[i - 1] != b'/' {
                pieces.push((neg, std::mem::take(&mut cur)));
                neg = c == '-';
            } else if c == '-' && at_start {
                neg = true;
            } else if c == '+' && at_start {
            } else {
                cur.push(c);
            }
            at_start = false;
        }
        pieces.push((neg, cur));
        for (negated, piece) in pieces {
            if piece.is_empty() {
                return Err(format!("dangling sign in {src:?}"));
            }
            let mut coeff = QSqrt3::one();
            let mut mono = Monomial::one();
            for factor in piece.split('*') {
                if factor.is_empty() {
                    return Err(format!("empty factor in {piece:?}"));
                }
                let (base, exp) = match factor.find('^') {
                    Some(i) => {
                        let e: u16 = factor[i + 1..]
                            .parse()
                            .map_err(|_| format!("bad exponent in {factor:?}"))?;
                        (&factor[..i], e)
                    }
                    None => (factor, 1),
                };
                if base == "s3" {
                    let s3 = QSqrt3::from_pair(0, 1);
                    for _ in 0..exp {
                        coeff = coeff.mul(&s3);
                    }
                } else if let Some(vi) = vars.iter().position(|v| *v == base) {
                    mono.0[vi] += exp;
                } else if base.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                    let r = rat_from_decimal(base)?;
                    let mut p = QSqrt3::from_rat(r);
                    if exp != 1 {
                        let b = p.clone();
                        for _ in 1..exp {
                            p = p.mul(&b);
                        }
                    }
                    coeff = coeff.mul(&p);
                } else {
                    return Err(format!("unknown factor {base:?}"));
                }
            }
            if negated {
                coeff = coeff.neg();
            }
            terms.push((mono, coeff));
        }
        Ok(MultiPoly::from_terms(nvars, terms))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(m, c)| {
                    json!({
                        "coeff": c.to_json(),
                        "mono": m.0[..self.nvars].to_vec(),
                    })
                })
                .collect(),
        )
    }

    pub fn from_json(v: &Value, nvars: usize) -> Result<MultiPoly, PolyError> {
        let arr = v
            .as_array()
            .ok_or_else(|| PolyError::BadData("poly is not an array".into()))?;
        let mut terms = Vec::with_capacity(arr.len());
        for t in arr {
            let c = QSqrt3::from_json(&t["coeff"])?;
            let mono = t["mono"]
                .as_array()
                .ok_or_else(|| PolyError::BadData("term missing mono".into()))?;
            if mono.len() != nvars {
                return Err(PolyError::BadData(format!(
                    "monomial has {} exponents, system has {nvars} variables",
                    mono.len()
                )));
            }
            let mut m = Monomial::one();
            for (i, e) in mono.iter().enumerate() {
                m.0[i] = e
                    .as_u64()
                    .filter(|&e| e <= u16::MAX as u64)
                    .ok_or_else(|| PolyError::BadData("bad exponent".into()))?
                    as u16;
            }
            terms.push((m, c));
        }
        Ok(MultiPoly::from_terms(nvars, terms))
    }
}

// ---------------------------------------------------------------------------
// Systems

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CoeffMode {
    /// Coefficients exact in Q(sqrt 3).
    Exact,
    /// Rational coefficients rounded to the given significant decimal digits.
    Approx(u32),
}

impl fmt::Display for CoeffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffMode::Exact => write!(f, "exact"),
            CoeffMode::Approx(d) => write!(f, "approx({d})"),
        }
    }
}

impl CoeffMode {
    pub fn parse(s: &str) -> Result<CoeffMode, PolyError> {
        if s == "exact" {
            return Ok(CoeffMode::Exact);
        }
        if let Some(d) = s.strip_prefix("approx(").and_then(|r| r.strip_suffix(')')) {
            let d: u32 = d
                .parse()
                .map_err(|_| PolyError::BadData(format!("bad mode {s:?}")))?;
            return Ok(CoeffMode::Approx(d));
        }
        Err(PolyError::BadData(format!("bad mode {s:?}")))
    }
}

/// The MU polynomial system for one Hadamard matrix: d-1 modulus constraints
/// followed by d-1 unbiasedness constraints.
#[derive(Clone, PartialEq, Debug)]
pub struct PolynomialSystem {
    pub dim: usize,
    pub mode: CoeffMode,
    pub vars: Vec<String>,
    pub polys: Vec<MultiPoly>,
    /// Label of the source matrix, e.g. "F(1/6, 0)"; provenance only.
    pub source: Option<String>,
}

impl PolynomialSystem {
    pub fn nvars(&self) -> usize {
        2 * (self.dim - 1)
    }

    pub fn var_names(dim: usize) -> Vec<String> {
        let m = dim - 1;
        (1..=m)
            .map(|j| format!("x{j}"))
            .chain((1..=m).map(|j| format!("y{j}")))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let mut obj = json!({
            "dim": self.dim,
            "mode": self.mode.to_string(),
            "vars": self.vars,
            "polys": self.polys.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
        });
        if let Some(src) = &self.source {
            obj["source"] = json!(src);
        }
        obj
    }

    pub fn from_json(v: &Value) -> Result<PolynomialSystem, PolyError> {
        let dim = v["dim"]
            .as_u64()
            .ok_or_else(|| PolyError::BadData("missing dim".into()))? as usize;
        if dim < 2 || 2 * (dim - 1) > MAX_VARS {
            return Err(PolyError::BadData(format!("dimension {dim} out of range")));
        }
        let mode = CoeffMode::parse(
            v["mode"]
                .as_str()
                .ok_or_else(|| PolyError::BadData("missing mode".into()))?,
        )?;
        let vars = v["vars"]
            .as_array()
            .ok_or_else(|| PolyError::BadData("missing vars".into()))?
            .iter()
            .map(|s| s.as_str().map(String::from))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| PolyError::BadData("vars must be strings".into()))?;
        let nvars = 2 * (dim - 1);
        if vars.len() != nvars {
            return Err(PolyError::BadData(format!(
                "expected {nvars} variables, found {}",
                vars.len()
            )));
        }
        let polys = v["polys"]
            .as_array()
            .ok_or_else(|| PolyError::BadData("missing polys".into()))?
            .iter()
            .map(|p| MultiPoly::from_json(p, nvars))
            .collect::<Result<Vec<_>, _>>()?;
        let source = v.get("source").and_then(|s| s.as_str()).map(String::from);
        Ok(PolynomialSystem { dim, mode, vars, polys, source })
    }
}

// ---------------------------------------------------------------------------
// System construction

/// Builds the MU system for {I, H}.
///
/// Modulus constraints are x_j^2 + y_j^2 - 1 for j = 1..d-1. For each column
/// k = 0..d-2 of H the unbiasedness constraint |sum_j H*_{jk} v_j|^2 = 1/d is
/// expanded in the x, y parametrization; the squared-modulus terms are
/// eliminated with the modulus constraints, and the result is normalized to
/// content-free form with positive leading coefficient. The dropped column
/// k = d-1 is implied by completeness of the columns of H.
pub fn mu_system(h: &HadamardMatrix, mode: CoeffMode) -> Result<PolynomialSystem, PolyError> {
    let d = h.dim;
    let m = d - 1;
    let nvars = 2 * m;
    assert!(nvars <= MAX_VARS, "dimension {d} exceeds supported range");

    // Entries at working precision: rebuild from family parameters when the
    // stored precision leaves too little headroom for coefficient detection.
    let rebuilt;
    let src = if h.digits < 40 && h.family != Family::Custom {
        rebuilt = catalog::build_unchecked(h.family, h.dim, &h.params, h.branch, 40)
            .map_err(|e| PolyError::BadData(format!("source rebuild failed: {e}")))?;
        &rebuilt
    } else {
        h
    };

    let mut polys = Vec::with_capacity(nvars);
    for j in 0..m {
        // x_j^2 + y_j^2 - 1
        polys.push(MultiPoly::from_terms(
            nvars,
            vec![
                (Monomial::var_pow(j, 2), QSqrt3::one()),
                (Monomial::var_pow(m + j, 2), QSqrt3::one()),
                (Monomial::one(), QSqrt3::from_int(-1)),
            ],
        ));
    }

    for k in 0..m {
        let mut p = unbiasedness_poly(src, k, mode)?;
        if mode == CoeffMode::Exact {
            p.normalize_display();
        }
        polys.push(p);
    }

    Ok(PolynomialSystem {
        dim: d,
        mode,
        vars: PolynomialSystem::var_names(d),
        polys,
        source: Some(h.label()),
    })
}

/// The unbiasedness constraint for column k of H with the squared-modulus
/// diagonal already eliminated: writing u = sqrt(d)·H and z_jl = u*_jk u_lk,
///
///   2 sum_{l>=1} (Re z_0l · x_l + Im z_0l · y_l)
///   + 2 sum_{1<=j<l} (Re z_jl (x_j x_l + y_j y_l) - Im z_jl (y_j x_l - x_j y_l))
///
/// which vanishes exactly when |<h(k)|v>|^2 = 1/d on the modulus manifold.
fn unbiasedness_poly(src: &HadamardMatrix, k: usize, mode: CoeffMode) -> Result<MultiPoly, PolyError> {
    let d = src.dim;
    let m = d - 1;
    let nvars = 2 * m;
    let scale = Real::from_u32(d as u32, src.entry(0, 0).digits()).sqrt();
    let mut terms: Vec<(Monomial, QSqrt3)> = Vec::new();
    for j in 0..d {
        for l in (j + 1)..d {
            let u_j = src.entry(j, k).scale(&scale);
            let u_l = src.entry(l, k).scale(&scale);
            let z = u_j.conj().mul(&u_l);
            let re = coefficient(&z.re, mode, k, j, l)?;
            let im = coefficient(&z.im, mode, k, j, l)?;
            let two = QSqrt3::from_int(2);
            let re2 = re.mul(&two);
            let im2 = im.mul(&two);
            if j == 0 {
                terms.push((Monomial::var(l - 1), re2));
                terms.push((Monomial::var(m + l - 1), im2));
            } else {
                let (xj, yj) = (j - 1, m + j - 1);
                let (xl, yl) = (l - 1, m + l - 1);
                terms.push((Monomial::var(xj).mul(&Monomial::var(xl)), re2.clone()));
                terms.push((Monomial::var(yj).mul(&Monomial::var(yl)), re2));
                terms.push((Monomial::var(yj).mul(&Monomial::var(xl)), im2.neg()));
                terms.push((Monomial::var(xj).mul(&Monomial::var(yl)), im2));
            }
        }
    }
    Ok(MultiPoly::from_terms(nvars, terms))
}

/// Snap tolerance for recognizing structural zeros and exact coefficients.
const DETECT_TOL_DIGITS: u32 = 30;

fn coefficient(v: &Real, mode: CoeffMode, k: usize, j: usize, l: usize) -> Result<QSqrt3, PolyError> {
    match mode {
        CoeffMode::Exact => detect_qsqrt3(v).ok_or_else(|| PolyError::NotRepresentable {
            k,
            j,
            l,
            value: v.to_decimal(),
        }),
        CoeffMode::Approx(digits) => {
            let r = v.to_rat();
            let tol = pow10_neg(DETECT_TOL_DIGITS);
            if Rat::from(r.clone().abs()) < tol {
                return Ok(QSqrt3::zero());
            }
            Ok(QSqrt3::from_rat(round_sig(&r, digits)))
        }
    }
}

/// Recognizes v as (n1 + n2 sqrt(3))/q for small integers and q from the
/// denominators that arise in the supported exact families. Returns None when
/// no candidate lands within 10^-30.
fn detect_qsqrt3(v: &Real) -> Option<QSqrt3> {
    const DENOMS: [i64; 9] = [1, 2, 3, 4, 6, 8, 12, 24, 48];
    let r = v.to_rat();
    let s3 = sqrt3_interval(DETECT_TOL_DIGITS + 10).mid();
    let tol = pow10_neg(DETECT_TOL_DIGITS);
    for q in DENOMS {
        let w = Rat::from(&r * &Rat::from(q));
        // |w| <= q * |v|; MU coefficients satisfy |v| <= 2, so n2 stays small
        let bound = (Rat::from(w.clone().abs()).to_f64() / 1.7 + 2.0) as i64;
        for n2 in -bound..=bound {
            let rem = Rat::from(&w - Rat::from(n2) * s3.clone());
            let n1 = rem.clone().round();
            let err = Rat::from(&rem - &n1).abs();
            if err < tol {
                let n1 = Rat::from(n1);
                return Some(QSqrt3::new(
                    n1 / Rat::from(q),
                    Rat::from(n2) / Rat::from(q),
                ));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// The d = 6 Fourier simplification

/// Replaces the five unbiasedness polynomials of the exact F6 system by five
/// much shorter equivalents: fixed integer combinations of the column
/// constraints, each isolating a single index-distance class. Output order:
/// the five combinations, then the five modulus constraints. The solution
/// set is unchanged.
pub fn simplify_fourier6(p: &PolynomialSystem) -> Result<PolynomialSystem, PolyError> {
    if p.dim != 6 {
        return Err(PolyError::WrongSource(format!("dimension {} is not 6", p.dim)));
    }
    if p.mode != CoeffMode::Exact {
        return Err(PolyError::WrongSource(format!("mode {} is not exact", p.mode)));
    }
    let f6 = catalog::build_unchecked(Family::Fourier, 6, &[], None, 40)
        .map_err(|e| PolyError::BadData(format!("reference build failed: {e}")))?;
    let reference = mu_system(&f6, CoeffMode::Exact)?;
    if p.polys != reference.polys {
        return Err(PolyError::WrongSource(
            "polynomials do not match the d=6 Fourier MU system".into(),
        ));
    }

    let nvars = 10;
    // Un-normalized column constraints: the combinations below carry fixed
    // weights, so rebuild the raw polynomials rather than undo the
    // per-polynomial content normalization of the stored system.
    let c: Vec<MultiPoly> = (0..5)
        .map(|k| unbiasedness_poly(&f6, k, CoeffMode::Exact))
        .collect::<Result<_, _>>()?;
    // Integer weight rows over columns 0..4 (column 5 is dependent through
    // completeness). Each row collapses the bilinear terms onto a single
    // index-distance class mod conjugation, so every surviving coefficient
    // is +-1 after normalization; rows 2 and 5 come out as pure sqrt(3)
    // multiples, which normalization divides away.
    const WEIGHTS: [[i64; 5]; 5] = [
        [1, 0, -2, -3, -2],
        [1, 2, 2, 1, 0],
        [1, 0, 1, 0, 1],
        [1, 0, 0, 1, 0],
        [1, 2, 0, 1, 2],
    ];
    let mut polys: Vec<MultiPoly> = WEIGHTS
        .iter()
        .map(|row| {
            let mut q = MultiPoly::zero(nvars);
            for (k, &w) in row.iter().enumerate() {
                if w != 0 {
                    q = q.add(&c[k].scale(&QSqrt3::from_int(w)));
                }
            }
            q.normalize_display();
            q
        })
        .collect();
    polys.extend(p.polys[..5].iter().cloned());
    Ok(PolynomialSystem {
        dim: 6,
        mode: CoeffMode::Exact,
        vars: p.vars.clone(),
        polys,
        source: p.source.clone(),
    })
}

// ---------------------------------------------------------------------------
// Rounding and evaluation

/// Rounds every coefficient to `digits` significant decimal digits,
/// evaluating sqrt(3) parts numerically. Monomial support is preserved
/// (nonzero coefficients stay nonzero); idempotent at fixed digits.
pub fn round_coefficients(p: &PolynomialSystem, digits: u32) -> PolynomialSystem {
    assert!(digits >= 3, "rounding below 3 digits discards too much structure");
    let s3 = sqrt3_interval(digits + DETECT_TOL_DIGITS).mid();
    let polys = p
        .polys
        .iter()
        .map(|poly| MultiPoly {
            nvars: poly.nvars,
            terms: poly
                .terms
                .iter()
                .map(|(m, c)| {
                    let v = Rat::from(&c.a + Rat::from(&c.b * &s3));
                    (*m, QSqrt3::from_rat(round_sig(&v, digits)))
                })
                .collect(),
        })
        .collect();
    PolynomialSystem {
        dim: p.dim,
        mode: CoeffMode::Approx(digits),
        vars: p.vars.clone(),
        polys,
        source: p.source.clone(),
    }
}

/// Certified upper bound on max_n |p_n(point)|, via interval arithmetic with
/// sqrt(3) enclosed at 60 decimal digits beyond the detection tolerance.
pub fn evaluate_residual(p: &PolynomialSystem, point: &[Rat]) -> Result<Rat, PolyError> {
    let nvars = p.nvars();
    if point.len() != nvars {
        return Err(PolyError::DimensionMismatch { expected: nvars, got: point.len() });
    }
    let s3 = sqrt3_interval(DETECT_TOL_DIGITS + 60);
    let coords: Vec<RInt> = point.iter().map(|r| RInt::point(r.clone())).collect();
    let mut worst = Rat::new();
    for poly in &p.polys {
        let v = poly.eval_rint(&coords, &s3).mag_hi();
        if v > worst {
            worst = v;
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------

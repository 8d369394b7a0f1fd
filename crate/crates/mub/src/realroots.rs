//! Certified real solutions of zero-dimensional lex Gröbner bases.
//!
//! Univariate roots are isolated by Sturm sequences over exact rationals and
//! refined by bisection on exact endpoints, so an interval never loses its
//! root. Multivariate solving walks the lex triangle from the innermost
//! variable outward, interval-specializing the basis at every level; a
//! candidate branch is accepted only with a certified-small residual on the
//! original system and discarded only with a certified-nonzero one. Branches
//! that cannot be decided retry at doubled working precision (up to 4x)
//! before surfacing as an error.

use std::cmp::Ordering;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::groebner::{is_zero_dimensional, GroebnerBasis};
use crate::polysys::{evaluate_residual, CoeffMode, MultiPoly, OrderKind, PolynomialSystem};
use crate::rat::{pow10_neg, rat_from_decimal, rat_to_decimal, sqrt3_interval, RInt, Rat};

#[derive(Error, Debug)]
pub enum RootError {
    #[error("basis is not zero-dimensional")]
    NotZeroDimensional,
    #[error("branch undecidable at maximum precision: {0}")]
    PrecisionExhausted(String),
    #[error("bad data: {0}")]
    BadData(String),
}

// ---------------------------------------------------------------------------
// Univariate polynomials over Q

/// Dense univariate polynomial, `c[i]` the coefficient of x^i, trimmed.
#[derive(Clone, PartialEq, Debug)]
struct UniPoly {
    c: Vec<Rat>,
}

impl UniPoly {
    fn new(mut c: Vec<Rat>) -> UniPoly {
        while c.last().map(|x| x.cmp0() == Ordering::Equal) == Some(true) {
            c.pop();
        }
        UniPoly { c }
    }

    fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    fn leading(&self) -> &Rat {
        self.c.last().expect("leading coefficient of zero polynomial")
    }

    fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::new();
        for c in self.c.iter().rev() {
            acc = Rat::from(&acc * x) + c;
        }
        acc
    }

    fn derivative(&self) -> UniPoly {
        if self.c.len() <= 1 {
            return UniPoly::new(vec![]);
        }
        UniPoly::new(
            self.c[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| Rat::from(c * Rat::from(i as i64 + 1)))
                .collect(),
        )
    }

    /// Scale by a positive constant to integer coefficients with gcd 1;
    /// sign-preserving (Sturm chains depend on that), and keeps Euclidean
    /// remainder chains from blowing up.
    fn content_normalize(&mut self) {
        if self.is_zero() {
            return;
        }
        let mut denom_lcm = crate::rat::Int::from(1);
        for c in &self.c {
            denom_lcm.lcm_mut(c.denom());
        }
        let mut num_gcd = crate::rat::Int::new();
        let scaled: Vec<crate::rat::Int> = self
            .c
            .iter()
            .map(|c| crate::rat::Int::from(c.numer() * &denom_lcm) / c.denom())
            .collect();
        for s in &scaled {
            num_gcd.gcd_mut(s);
        }
        self.c = scaled
            .into_iter()
            .map(|s| Rat::from((s, num_gcd.clone())))
            .collect();
    }

    /// Euclidean remainder (rational arithmetic).
    fn rem(&self, d: &UniPoly) -> UniPoly {
        assert!(!d.is_zero());
        let mut r = self.c.clone();
        let dd = d.degree();
        let dl = d.leading();
        while r.len() > dd && !r.is_empty() {
            let k = Rat::from(r.last().unwrap() / dl);
            let shift = r.len() - 1 - dd;
            for (i, dc) in d.c.iter().enumerate() {
                let t = Rat::from(dc * &k);
                r[shift + i] -= t;
            }
            while r.last().map(|x| x.cmp0() == Ordering::Equal) == Some(true) {
                r.pop();
            }
        }
        UniPoly::new(r)
    }

    /// Exact quotient; caller guarantees divisibility.
    fn divide_exact(&self, d: &UniPoly) -> UniPoly {
        assert!(!d.is_zero());
        let mut r = self.c.clone();
        let dd = d.degree();
        let dl = d.leading();
        let mut q = vec![Rat::new(); self.c.len().saturating_sub(dd)];
        while r.len() > dd {
            let k = Rat::from(r.last().unwrap() / dl);
            let shift = r.len() - 1 - dd;
            q[shift] = k.clone();
            for (i, dc) in d.c.iter().enumerate() {
                let t = Rat::from(dc * &k);
                r[shift + i] -= t;
            }
            while r.last().map(|x| x.cmp0() == Ordering::Equal) == Some(true) {
                r.pop();
            }
        }
        debug_assert!(r.is_empty(), "inexact polynomial division");
        UniPoly::new(q)
    }

    fn gcd(a: &UniPoly, b: &UniPoly) -> UniPoly {
        let (mut f, mut g) = (a.clone(), b.clone());
        f.content_normalize();
        g.content_normalize();
        while !g.is_zero() {
            let mut r = f.rem(&g);
            r.content_normalize();
            f = g;
            g = r;
        }
        f
    }

    /// Square-free part: self / gcd(self, self'), normalized to integer
    /// coefficients with positive leading coefficient.
    fn square_free(&self) -> UniPoly {
        let d = self.derivative();
        if d.is_zero() {
            return self.clone();
        }
        let g = UniPoly::gcd(self, &d);
        let mut sf = if g.degree() == 0 { self.clone() } else { self.divide_exact(&g) };
        sf.content_normalize();
        if sf.leading().cmp0() == Ordering::Less {
            sf.c.iter_mut().for_each(|c| *c = -c.clone());
        }
        sf
    }

    /// Strict bound on root magnitude: 1 + max |c_i| / |c_n|.
    fn cauchy_bound(&self) -> Rat {
        let lead = Rat::from(self.leading().clone().abs());
        let mut m = Rat::new();
        for c in &self.c[..self.c.len() - 1] {
            let a = Rat::from(c.clone().abs());
            if a > m {
                m = a;
            }
        }
        Rat::from(&m / &lead) + Rat::from(1)
    }
}

// ---------------------------------------------------------------------------
// Sturm sequences

struct Sturm {
    chain: Vec<UniPoly>,
}

impl Sturm {
    /// Chain of a square-free polynomial: p, p', then negated remainders.
    fn new(sf: &UniPoly) -> Sturm {
        let mut chain = vec![sf.clone(), sf.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let mut r = chain[n - 2].rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            r.c.iter_mut().for_each(|c| *c = -c.clone());
            r.content_normalize();
            chain.push(r);
        }
        Sturm { chain }
    }

    fn variations<I: Iterator<Item = Ordering>>(signs: I) -> usize {
        let mut last: Option<Ordering> = None;
        let mut v = 0;
        for s in signs {
            if s == Ordering::Equal {
                continue;
            }
            if let Some(l) = last {
                if l != s {
                    v += 1;
                }
            }
            last = Some(s);
        }
        v
    }

    fn variations_at(&self, x: &Rat) -> usize {
        Sturm::variations(self.chain.iter().map(|p| {
            if p.is_zero() {
                Ordering::Equal
            } else {
                p.eval(x).cmp0()
            }
        }))
    }

    fn variations_at_neg_inf(&self) -> usize {
        Sturm::variations(self.chain.iter().map(|p| {
            if p.is_zero() {
                return Ordering::Equal;
            }
            let s = p.leading().cmp0();
            if p.degree() % 2 == 1 {
                s.reverse()
            } else {
                s
            }
        }))
    }

    fn variations_at_pos_inf(&self) -> usize {
        Sturm::variations(self.chain.iter().map(|p| {
            if p.is_zero() {
                Ordering::Equal
            } else {
                p.leading().cmp0()
            }
        }))
    }

    /// Distinct roots in the open interval (a, b); requires nonzero endpoint
    /// values.
    fn count_between(&self, a: &Rat, b: &Rat) -> usize {
        self.variations_at(a) - self.variations_at(b)
    }
}

// ---------------------------------------------------------------------------
// Isolation and refinement

/// An interval containing exactly one real root of the referenced square-free
/// polynomial. `lo == hi` marks an exact rational root.
#[derive(Clone, Debug)]
pub struct IsolatingInterval {
    pub lo: Rat,
    pub hi: Rat,
    /// Dense coefficients (index = power) of the square-free polynomial.
    pub poly: Arc<Vec<Rat>>,
    pub multiplicity_free: bool,
}

impl IsolatingInterval {
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn mid(&self) -> Rat {
        (Rat::from(&self.lo + &self.hi)) / 2
    }

    pub fn rint(&self) -> RInt {
        RInt::new(self.lo.clone(), self.hi.clone())
    }

    pub fn width(&self) -> Rat {
        Rat::from(&self.hi - &self.lo)
    }
}

/// Isolating intervals for all distinct real roots of `p` (dense rational
/// coefficients, index = power), ascending. Works on the square-free part, so
/// every interval holds a simple root. The Sturm count identity
/// V(-inf) - V(+inf) = number of intervals is asserted on every call.
pub fn sturm_isolate(p: &[Rat]) -> Vec<IsolatingInterval> {
    let p = UniPoly::new(p.to_vec());
    assert!(!p.is_zero(), "cannot isolate roots of the zero polynomial");
    if p.degree() == 0 {
        return vec![];
    }
    let sf = p.square_free();
    let sturm = Sturm::new(&sf);
    let total = sturm.variations_at_neg_inf() - sturm.variations_at_pos_inf();
    let poly = Arc::new(sf.c.clone());
    let b = sf.cauchy_bound();
    let mut out = Vec::with_capacity(total);
    let neg_b = -b.clone();
    isolate_rec(
        &sturm,
        &sf,
        &poly,
        &neg_b,
        &b,
        sturm.variations_at(&neg_b),
        sturm.variations_at(&b),
        &mut out,
    );
    assert_eq!(out.len(), total, "Sturm variation count identity violated");
    out
}

#[allow(clippy::too_many_arguments)]
fn isolate_rec(
    sturm: &Sturm,
    sf: &UniPoly,
    poly: &Arc<Vec<Rat>>,
    lo: &Rat,
    hi: &Rat,
    vlo: usize,
    vhi: usize,
    out: &mut Vec<IsolatingInterval>,
) {
    let n = vlo - vhi;
    if n == 0 {
        return;
    }
    if n == 1 {
        out.push(IsolatingInterval {
            lo: lo.clone(),
            hi: hi.clone(),
            poly: poly.clone(),
            multiplicity_free: true,
        });
        return;
    }
    let mid = Rat::from(lo + hi) / 2;
    if sf.eval(&mid).cmp0() == Ordering::Equal {
        // exact root at the split point: carve out a window holding only it
        let mut delta = Rat::from(hi - lo) / 4;
        loop {
            let a = Rat::from(&mid - &delta);
            let b = Rat::from(&mid + &delta);
            if sf.eval(&a).cmp0() != Ordering::Equal
                && sf.eval(&b).cmp0() != Ordering::Equal
                && sturm.count_between(&a, &b) == 1
            {
                isolate_rec(sturm, sf, poly, lo, &a, vlo, sturm.variations_at(&a), out);
                out.push(IsolatingInterval {
                    lo: mid.clone(),
                    hi: mid.clone(),
                    poly: poly.clone(),
                    multiplicity_free: true,
                });
                isolate_rec(sturm, sf, poly, &b, hi, sturm.variations_at(&b), vhi, out);
                return;
            }
            delta /= 2;
        }
    }
    let vm = sturm.variations_at(&mid);
    isolate_rec(sturm, sf, poly, lo, &mid, vlo, vm, out);
    isolate_rec(sturm, sf, poly, &mid, hi, vm, vhi, out);
}

/// Bisection refinement to width <= 10^-digits (always within the
/// 10^-digits * max(1, |root|) contract). Exact rational roots collapse to a
/// zero-width interval the moment a bisection point hits one.
pub fn refine(iv: &IsolatingInterval, digits: u32) -> IsolatingInterval {
    if iv.is_exact() {
        return iv.clone();
    }
    let p = UniPoly::new(iv.poly.as_ref().clone());
    let tol = pow10_neg(digits);
    let mut lo = iv.lo.clone();
    let mut hi = iv.hi.clone();
    let s_lo = p.eval(&lo).cmp0();
    debug_assert!(s_lo != Ordering::Equal, "isolating interval endpoint is a root");
    let exact = |m: Rat| IsolatingInterval {
        lo: m.clone(),
        hi: m,
        poly: iv.poly.clone(),
        multiplicity_free: true,
    };
    while Rat::from(&hi - &lo) > tol {
        let mid = Rat::from(&lo + &hi) / 2;
        match p.eval(&mid).cmp0() {
            Ordering::Equal => return exact(mid),
            s if s == s_lo => lo = mid,
            _ => hi = mid,
        }
    }
    IsolatingInterval { lo, hi, poly: iv.poly.clone(), multiplicity_free: true }
}

// ---------------------------------------------------------------------------
// Solutions

#[derive(Clone, PartialEq, Debug)]
pub struct SolutionPoint {
    /// Rational coordinates in variable storage order, each within `err` of
    /// the true solution coordinate.
    pub coords: Vec<Rat>,
    pub err: Rat,
    /// Certified upper bound on max |p_n(coords)| over the original system.
    pub residual: Rat,
}

#[derive(Clone, Debug)]
pub struct SolutionSet {
    pub dim: usize,
    pub digits: u32,
    pub mode: CoeffMode,
    /// Lexicographically sorted by coordinates.
    pub points: Vec<SolutionPoint>,
    /// Closed branches: every one was either accepted or rejected with an
    /// interval certificate, so explored = points + rejected.
    pub explored: u64,
    pub rejected: u64,
    pub precision_doublings: u32,
    /// True when every point carries an interval-certified error and
    /// residual bound (this solver); false for heuristic sources.
    pub certified: bool,
}

impl SolutionSet {
    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "digits": self.digits,
            "mode": self.mode.to_string(),
            "explored": self.explored,
            "rejected": self.rejected,
            "certified": self.certified,
            "points": self.points.iter().map(|p| {
                json!({
                    "coords": p.coords.iter()
                        .map(|c| rat_to_decimal(c, self.digits + 2))
                        .collect::<Vec<_>>(),
                    "err": format!("1e-{}", self.digits),
                    "residual": rat_to_decimal(&p.residual, 3),
                })
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<SolutionSet, RootError> {
        let bad = |m: &str| RootError::BadData(m.into());
        let dim = v["dim"].as_u64().ok_or_else(|| bad("missing dim"))? as usize;
        let digits = v["digits"].as_u64().ok_or_else(|| bad("missing digits"))? as u32;
        let mode = CoeffMode::parse(v["mode"].as_str().ok_or_else(|| bad("missing mode"))?)
            .map_err(|e| RootError::BadData(e.to_string()))?;
        let mut points = Vec::new();
        for p in v["points"].as_array().ok_or_else(|| bad("missing points"))? {
            let coords = p["coords"]
                .as_array()
                .ok_or_else(|| bad("point missing coords"))?
                .iter()
                .map(|c| c.as_str().ok_or_else(|| bad("coord not a string")).and_then(|s| {
                    rat_from_decimal(s).map_err(RootError::BadData)
                }))
                .collect::<Result<Vec<_>, _>>()?;
            let err = rat_from_decimal(p["err"].as_str().ok_or_else(|| bad("point missing err"))?)
                .map_err(RootError::BadData)?;
            let residual =
                rat_from_decimal(p["residual"].as_str().ok_or_else(|| bad("point missing residual"))?)
                    .map_err(RootError::BadData)?;
            points.push(SolutionPoint { coords, err, residual });
        }
        Ok(SolutionSet {
            dim,
            digits,
            mode,
            points,
            explored: v["explored"].as_u64().unwrap_or(0),
            rejected: v["rejected"].as_u64().unwrap_or(0),
            precision_doublings: 0,
            certified: v["certified"].as_bool().unwrap_or(false),
        })
    }
}

// ---------------------------------------------------------------------------
// Triangular back-substitution

struct Level {
    /// Storage index of the variable this level fixes.
    var: usize,
    /// Index of the basis polynomial specialized to a univariate here.
    chosen: usize,
    /// Basis polynomials fully supported on the variables fixed so far;
    /// certified-nonzero evaluation prunes a branch.
    checks: Vec<usize>,
}

fn support(p: &MultiPoly) -> Vec<usize> {
    let mut s = vec![false; p.nvars];
    for (m, _) in &p.terms {
        for (i, &e) in m.0[..p.nvars].iter().enumerate() {
            if e > 0 {
                s[i] = true;
            }
        }
    }
    s.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

fn plan_levels(g: &GroebnerBasis) -> Result<Vec<Level>, RootError> {
    let nvars = g.system.nvars();
    let mut fixed = vec![false; nvars];
    let mut levels = Vec::with_capacity(nvars);
    for depth in 0..nvars {
        let var = g.order.perm[nvars - 1 - depth];
        let mut chosen: Option<(usize, u32)> = None;
        for (i, p) in g.polys().iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let (lm, _) = p.leading(&g.order);
            if lm.pure_power() == Some(var) {
                let deg = lm.total_degree();
                if chosen.map(|(_, d)| deg < d).unwrap_or(true) {
                    chosen = Some((i, deg));
                }
            }
        }
        let (chosen, _) = chosen.ok_or(RootError::NotZeroDimensional)?;
        fixed[var] = true;
        let checks = g
            .polys()
            .iter()
            .enumerate()
            .filter(|(i, p)| *i != chosen && !p.is_zero() && support(p).iter().all(|&v| fixed[v]))
            .map(|(i, _)| i)
            .collect();
        levels.push(Level { var, chosen, checks });
    }
    Ok(levels)
}

struct FixedRoot {
    var: usize,
    iv: IsolatingInterval,
}

/// Decimal digits of bracket width given up per level so that a bracket stays
/// wide relative to the coefficient-interval noise the level above feeds it;
/// certification needs that headroom.
const SLACK: u32 = 15;

enum Halt {
    /// Retry the whole solve at doubled precision.
    Retry(String),
    Fatal(RootError),
}

struct Solver<'a> {
    g: &'a GroebnerBasis,
    original: &'a PolynomialSystem,
    levels: &'a [Level],
    digits: u32,
    /// Working decimal precision for this attempt.
    w: u32,
    /// True in the last attempt: near-degenerate root gaps no longer force a
    /// retry, only a failed certification does.
    final_attempt: bool,
    s3: RInt,
    accept_tol: Rat,
    gap_tol: Rat,
    explored: u64,
    rejected: u64,
    points: Vec<(Vec<Rat>, Rat)>,
}

impl<'a> Solver<'a> {
    fn box_for(&self, fixed: &[FixedRoot]) -> Vec<RInt> {
        let nvars = self.g.system.nvars();
        let mut b = vec![RInt::zero(); nvars];
        for f in fixed {
            b[f.var] = f.iv.rint();
        }
        b
    }

    /// Interval coefficients of `levels[depth].chosen` as a univariate in the
    /// level variable, exact leading coefficient 1 by monicity.
    fn specialize(&self, depth: usize, fixed: &[FixedRoot]) -> Vec<RInt> {
        let level = &self.levels[depth];
        let poly = &self.g.polys()[level.chosen];
        let deg = poly
            .terms
            .iter()
            .map(|(m, _)| m.0[level.var])
            .max()
            .unwrap_or(0) as usize;
        let mut coeffs = vec![RInt::zero(); deg + 1];
        for (m, c) in &poly.terms {
            let mut t = RInt::point(c.a.clone());
            if c.b.cmp0() != Ordering::Equal {
                t = t.add(&self.s3.scale(&c.b));
            }
            for f in fixed {
                let e = m.0[f.var];
                if e > 0 {
                    t = t.mul(&f.iv.rint().pow(e as u32));
                }
            }
            coeffs[m.0[level.var] as usize] = coeffs[m.0[level.var] as usize].add(&t);
        }
        coeffs
    }

    fn descend(&mut self, depth: usize, fixed: &mut Vec<FixedRoot>) -> Result<(), Halt> {
        if depth == self.levels.len() {
            return self.close_leaf(fixed);
        }
        let coeffs = self.specialize(depth, fixed);
        let exact_coeffs = coeffs
            .iter()
            .all(|c| c.width().cmp0() == Ordering::Equal);
        // Bracket refinement depth: the budgeted per-level slack, but never
        // below the actual noise floor of the specialized coefficients.
        // Bases with large coefficients amplify the width of earlier root
        // intervals far beyond the budget; brackets must stay a slack above
        // that noise or the endpoint signs below can never be certified.
        let budget = self.w.saturating_sub(SLACK * depth as u32) as i64;
        let ld = if exact_coeffs {
            budget
        } else {
            let noise = coeffs
                .iter()
                .map(|c| c.width())
                .max()
                .expect("level polynomial has coefficients");
            budget.min(digits_below_one(&noise) - SLACK as i64)
        };
        if ld < 3 {
            return Err(Halt::Retry(format!(
                "coefficient noise at depth {depth} leaves no workable bracket width"
            )));
        }
        let ld = ld as u32;
        let mids: Vec<Rat> = coeffs.iter().map(|c| c.mid()).collect();
        let mut roots: Vec<IsolatingInterval> = sturm_isolate(&mids)
            .iter()
            .map(|iv| refine(iv, ld))
            .collect();
        if !exact_coeffs {
            // The brackets pin roots of the midpoint polynomial; the true
            // specialized roots sit up to the coefficient noise away, which
            // can put one on or outside a bracket endpoint (bisection loves
            // landing exactly on round numbers). Pad each bracket outward by
            // far more than the noise — clamped so neighbors stay disjoint —
            // so the true root is strictly interior and the endpoint values
            // clear the noise floor.
            let pad = pow10_neg(ld);
            let ends: Vec<(Rat, Rat)> = roots.iter().map(|r| (r.lo.clone(), r.hi.clone())).collect();
            let n = roots.len();
            for (i, iv) in roots.iter_mut().enumerate() {
                let mut lo_pad = pad.clone();
                if i > 0 {
                    let gap = Rat::from(&ends[i].0 - &ends[i - 1].1) / 4;
                    if gap < lo_pad {
                        lo_pad = gap;
                    }
                }
                let mut hi_pad = pad.clone();
                if i + 1 < n {
                    let gap = Rat::from(&ends[i + 1].0 - &ends[i].1) / 4;
                    if gap < hi_pad {
                        hi_pad = gap;
                    }
                }
                iv.lo -= lo_pad;
                iv.hi += hi_pad;
            }
        }
        // near-degenerate gap: distinct roots this close need more precision
        // to propagate reliably through the remaining levels
        if !self.final_attempt {
            for pair in roots.windows(2) {
                if Rat::from(&pair[1].lo - &pair[0].hi) < self.gap_tol {
                    return Err(Halt::Retry(format!(
                        "roots separated by less than 1e-{} at depth {depth}",
                        self.digits / 2
                    )));
                }
            }
        }
        for iv in roots {
            // certify a sign change of the interval-coefficient polynomial;
            // with exact coefficients the bisection bracket already is one
            if !exact_coeffs {
                let at = |x: &Rat| eval_ipoly(&coeffs, &RInt::point(x.clone()));
                match (at(&iv.lo).sign(), at(&iv.hi).sign()) {
                    (Some(a), Some(b)) if a != b => {}
                    _ => {
                        return Err(Halt::Retry(format!(
                            "cannot certify root bracket at depth {depth}"
                        )))
                    }
                }
            }
            fixed.push(FixedRoot { var: self.levels[depth].var, iv });
            let boxed = self.box_for(fixed);
            let mut pruned = false;
            for &chk in &self.levels[depth].checks {
                let e = self.g.polys()[chk].eval_rint(&boxed, &self.s3);
                if !e.contains_zero() {
                    self.explored += 1;
                    self.rejected += 1;
                    pruned = true;
                    break;
                }
            }
            if !pruned {
                self.descend(depth + 1, fixed)?;
            }
            fixed.pop();
        }
        Ok(())
    }

    fn close_leaf(&mut self, fixed: &[FixedRoot]) -> Result<(), Halt> {
        // Every accepted point claims its coordinates to 10^-digits; when a
        // noisy level forced coarser brackets the claim fails here and the
        // whole solve retries at higher precision.
        let claim = pow10_neg(self.digits);
        for f in fixed {
            if f.iv.width() > claim {
                return Err(Halt::Retry(format!(
                    "bracket for variable {} wider than the requested precision",
                    f.var
                )));
            }
        }
        let nvars = self.g.system.nvars();
        let mut coords = vec![Rat::new(); nvars];
        for f in fixed {
            coords[f.var] = f.iv.mid();
        }
        let residual = evaluate_residual(self.original, &coords)
            .map_err(|e| Halt::Fatal(RootError::BadData(e.to_string())))?;
        if residual < self.accept_tol {
            self.explored += 1;
            self.points.push((coords, residual));
            return Ok(());
        }
        // certified rejection: some original polynomial is bounded away from
        // zero on the whole candidate box
        let boxed = self.box_for(fixed);
        for p in &self.original.polys {
            if !p.eval_rint(&boxed, &self.s3).contains_zero() {
                self.explored += 1;
                self.rejected += 1;
                return Ok(());
            }
        }
        Err(Halt::Retry(format!(
            "leaf residual {} not acceptable yet not excludable",
            rat_to_decimal(&residual, 3)
        )))
    }
}

/// Conservative floor of -log10 for a positive rational: how many decimal
/// digits below one the value certainly is. Bit-length based, so it stays
/// exact far beyond f64 range in both directions.
fn digits_below_one(r: &Rat) -> i64 {
    if r.cmp0() == Ordering::Equal {
        return i64::MAX / 4;
    }
    let nb = r.numer().significant_bits() as i64;
    let db = r.denom().significant_bits() as i64;
    (((db - nb - 1) as f64) * std::f64::consts::LOG10_2).floor() as i64
}

fn eval_ipoly(c: &[RInt], x: &RInt) -> RInt {
    let mut acc = RInt::zero();
    for ci in c.iter().rev() {
        acc = acc.mul(x).add(ci);
    }
    acc
}

/// All real solutions of the zero-dimensional lex basis `g`, refined to
/// `digits` significant digits and certified against `original`: accepted
/// points carry residual < 10^(2-digits), discarded candidates carried a
/// certified-nonzero interval residual.
pub fn solve_triangular(
    g: &GroebnerBasis,
    original: &PolynomialSystem,
    digits: u32,
) -> Result<SolutionSet, RootError> {
    if g.order.kind != OrderKind::Lex {
        return Err(RootError::BadData("solver requires a lex basis".into()));
    }
    if !g.reduced {
        return Err(RootError::BadData("solver requires a reduced basis".into()));
    }
    let nvars = g.system.nvars();
    if original.nvars() != nvars {
        return Err(RootError::BadData(format!(
            "basis has {} variables, original system has {}",
            nvars,
            original.nvars()
        )));
    }
    if !(3..=1000).contains(&digits) {
        return Err(RootError::BadData("digits must lie in 3..=1000".into()));
    }
    let empty = |explored: u64, rejected: u64| SolutionSet {
        dim: g.system.dim,
        digits,
        mode: g.system.mode,
        points: vec![],
        explored,
        rejected,
        precision_doublings: 0,
        certified: true,
    };
    // inconsistent system: the basis is the unit ideal, no solutions
    if g.polys().iter().any(|p| !p.is_zero() && p.total_degree() == 0) {
        return Ok(empty(0, 0));
    }
    if !is_zero_dimensional(g) {
        return Err(RootError::NotZeroDimensional);
    }
    let levels = plan_levels(g)?;
    // headroom for every level's slack plus a safety margin on top of the
    // requested output precision
    let base_w = digits + 10 + SLACK * nvars as u32;
    let mut last_reason = String::new();
    // Five doublings: bases with very tall coefficients need working
    // precision proportional to the coefficient height before the leaf
    // precision claim can hold; clean bases succeed on the first rung.
    const ATTEMPTS: u32 = 5;
    for attempt in 0..ATTEMPTS {
        let w = base_w << attempt;
        let mut solver = Solver {
            g,
            original,
            levels: &levels,
            digits,
            w,
            final_attempt: attempt == ATTEMPTS - 1,
            s3: sqrt3_interval(w + 5),
            accept_tol: pow10_neg(digits - 2),
            gap_tol: pow10_neg(digits / 2),
            explored: 0,
            rejected: 0,
            points: Vec::new(),
        };
        match solver.descend(0, &mut Vec::new()) {
            Ok(()) => {
                let mut points: Vec<SolutionPoint> = solver
                    .points
                    .into_iter()
                    .map(|(coords, residual)| SolutionPoint {
                        coords,
                        err: pow10_neg(digits),
                        residual,
                    })
                    .collect();
                points.sort_by(|a, b| a.coords.cmp(&b.coords));
                return Ok(SolutionSet {
                    dim: g.system.dim,
                    digits,
                    mode: g.system.mode,
                    points,
                    explored: solver.explored,
                    rejected: solver.rejected,
                    precision_doublings: attempt,
                    certified: true,
                });
            }
            Err(Halt::Retry(reason)) => last_reason = reason,
            Err(Halt::Fatal(e)) => return Err(e),
        }
    }
    Err(RootError::PrecisionExhausted(last_reason))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Family};
    use crate::groebner::{buchberger, lex_groebner};
    use crate::polysys::{mu_system, MonomialOrder};

    fn rats(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| Rat::from(x)).collect()
    }

    #[test]
    fn isolate_cubic_with_exact_zero() {
        // 3y - 4y^3: roots -sqrt(3)/2, 0, +sqrt(3)/2
        let ivs = sturm_isolate(&rats(&[0, 3, 0, -4]));
        assert_eq!(ivs.len(), 3);
        assert!(ivs[1].is_exact() && ivs[1].lo.cmp0() == Ordering::Equal);
        let s3half = sqrt3_interval(30).scale(&Rat::from((1, 2)));
        let hi = refine(&ivs[2], 25);
        assert!(hi.rint().contains(&s3half.mid()));
        assert!(hi.width() <= pow10_neg(25));
        let lo = refine(&ivs[0], 25);
        assert!(lo.rint().contains(&-s3half.mid()));
        // 20-digit decimal expansion of sqrt(3)/2
        let dec = rat_to_decimal(&refine(&ivs[2], 40).mid(), 21);
        assert!(dec.starts_with("0.86602540378443864676"), "{dec}");
    }

    #[test]
    fn isolate_no_real_roots() {
        assert!(sturm_isolate(&rats(&[1, 0, 1])).is_empty());
        assert!(sturm_isolate(&rats(&[5])).is_empty());
    }

    #[test]
    fn isolate_handles_multiple_roots() {
        // (y - 1)^2 * (y + 2): isolation counts distinct roots only
        let ivs = sturm_isolate(&rats(&[2, -3, 0, 1]));
        assert_eq!(ivs.len(), 2);
        assert!(ivs[0].multiplicity_free && ivs[1].multiplicity_free);
        let a = refine(&ivs[0], 12);
        let b = refine(&ivs[1], 12);
        assert!(a.rint().contains(&Rat::from(-2)));
        assert!(b.rint().contains(&Rat::from(1)));
    }

    #[test]
    fn degree_25_elimination_polynomial_has_15_roots() {
        // coefficients of the innermost-variable eliminant of the d=6
        // Fourier system, odd powers only
        let mut c = vec![Rat::new(); 26];
        for (pow, val) in [
            (1i64, -245025i64),
            (3, 4318758),
            (5, -28135161),
            (7, 89685000),
            (9, -158611892),
            (11, 177275680),
            (13, -150745472),
            (15, 104333824),
            (17, -43667456),
            (19, 2351104),
            (21, 4882432),
            (23, -1703936),
            (25, 262144),
        ] {
            c[pow as usize] = Rat::from(val);
        }
        let ivs = sturm_isolate(&c);
        assert_eq!(ivs.len(), 15);
        let s3 = sqrt3_interval(40).mid();
        let half = Rat::from((1, 2));
        let expected: Vec<Rat> = {
            let mut v = vec![
                Rat::new(),
                Rat::from(1),
                half.clone(),
                Rat::from(&s3 * &half),
                Rat::from(Rat::from(&s3 + 1) * &half),
                Rat::from(Rat::from(&s3 - 1) * &half),
                rat_from_decimal("0.988940").unwrap(),
                rat_from_decimal("0.622915").unwrap(),
            ];
            let negs: Vec<Rat> = v.iter().skip(1).map(|x| -x.clone()).collect();
            v.extend(negs);
            v.sort();
            v
        };
        let tol = pow10_neg(6);
        for (iv, want) in ivs.iter().zip(expected.iter()) {
            let r = refine(iv, 12);
            assert!(
                Rat::from(&r.mid() - want).abs() <= tol,
                "root {} vs {}",
                rat_to_decimal(&r.mid(), 10),
                rat_to_decimal(want, 10)
            );
        }
    }

    fn f3_exact_points() -> Vec<Vec<Rat>> {
        // (x1, x2, y1, y2) for the six known solutions, in half-units; the
        // flag +-3 stands for +-sqrt(3), realized as a 60-digit rational
        let s = sqrt3_interval(60).mid();
        let h = Rat::from((1, 2));
        let m = |coords: [i64; 4]| -> Vec<Rat> {
            coords
                .iter()
                .map(|&k| match k {
                    3 => Rat::from(&s * &h),
                    -3 => -Rat::from(&s * &h),
                    v => Rat::from(v) * &h,
                })
                .collect()
        };
        vec![
            m([-1, -1, 3, 3]),
            m([-1, 2, -3, 0]),
            m([2, -1, 0, -3]),
            m([-1, -1, -3, -3]),
            m([2, -1, 0, 3]),
            m([-1, 2, 3, 0]),
        ]
    }

    #[test]
    fn solve_dim3_reproduces_six_points() {
        let h = catalog::build(Family::Fourier, 3, &[], None, 40).unwrap();
        let sys = mu_system(&h, CoeffMode::Exact).unwrap();
        let gb = buchberger(&sys, &MonomialOrder::lex_default(4)).unwrap();
        let sol = solve_triangular(&gb, &sys, 20).unwrap();
        assert_eq!(sol.points.len(), 6);
        assert_eq!(sol.explored, sol.points.len() as u64 + sol.rejected);
        // match each known solution to a distinct solver point (sorting
        // approximate coordinates can break exact ties either way, so the
        // pairing is by proximity, not position)
        let expected = f3_exact_points();
        let tol = pow10_neg(20);
        let mut used = vec![false; sol.points.len()];
        for want in &expected {
            let i = sol
                .points
                .iter()
                .position(|p| {
                    p.coords
                        .iter()
                        .zip(want.iter())
                        .all(|(c, w)| Rat::from(c - w).abs() <= tol)
                })
                .expect("known solution missing from solver output");
            assert!(!used[i]);
            used[i] = true;
            assert!(sol.points[i].residual < pow10_neg(18));
        }
        // points pairwise separated well beyond 2 * err
        for i in 0..sol.points.len() {
            for j in i + 1..sol.points.len() {
                let far = sol.points[i]
                    .coords
                    .iter()
                    .zip(&sol.points[j].coords)
                    .any(|(a, b)| Rat::from(a - b).abs() > Rat::from(&sol.points[i].err * Rat::from(2)));
                assert!(far);
            }
        }
    }

    #[test]
    fn solve_dim2_forced_pair() {
        let h = catalog::build(Family::Fourier, 2, &[], None, 40).unwrap();
        let sys = mu_system(&h, CoeffMode::Exact).unwrap();
        let gb = lex_groebner(&sys).unwrap();
        let sol = solve_triangular(&gb, &sys, 20).unwrap();
        assert_eq!(sol.points.len(), 2);
        let a = &sol.points[0].coords;
        let b = &sol.points[1].coords;
        assert_eq!(a[0].cmp0(), Ordering::Equal);
        assert_eq!(b[0].cmp0(), Ordering::Equal);
        assert_eq!(a[1], Rat::from(-1));
        assert_eq!(b[1], Rat::from(1));
    }

    #[test]
    fn solve_rejects_positive_dimension() {
        let vars = ["x1", "y1"];
        let sys = PolynomialSystem {
            dim: 2,
            mode: CoeffMode::Exact,
            vars: vars.iter().map(|s| s.to_string()).collect(),
            polys: vec![MultiPoly::parse("x1 - y1", &vars).unwrap()],
            source: None,
        };
        let gb = buchberger(&sys, &MonomialOrder::lex_default(2)).unwrap();
        match solve_triangular(&gb, &sys, 20) {
            Err(RootError::NotZeroDimensional) => {}
            other => panic!("expected NotZeroDimensional, got {other:?}"),
        }
    }

    #[test]
    fn near_degenerate_roots_trigger_doubling() {
        let vars = ["x1", "y1"];
        let parse = |s: &str| MultiPoly::parse(s, &vars).unwrap();
        // roots of x^2 = 1e-30 sit 2e-15 apart: closer than the digits=20
        // degeneracy threshold 1e-10, so the first attempt retries
        let sys = PolynomialSystem {
            dim: 2,
            mode: CoeffMode::Exact,
            vars: vars.iter().map(|s| s.to_string()).collect(),
            polys: vec![
                parse("y1 - 1"),
                parse("x1^2 - 1/1000000000000000000000000000000"),
            ],
            source: None,
        };
        let gb = buchberger(&sys, &MonomialOrder::lex_default(2)).unwrap();
        let sol = solve_triangular(&gb, &sys, 20).unwrap();
        assert_eq!(sol.points.len(), 2);
        assert!(sol.precision_doublings > 0);
        let r = pow10_neg(15);
        let tol = pow10_neg(20);
        assert!(Rat::from(&sol.points[0].coords[0] + &r).abs() <= tol);
        assert!(Rat::from(&sol.points[1].coords[0] - &r).abs() <= tol);
    }

    #[test]
    fn solution_json_round_trip() {
        let h = catalog::build(Family::Fourier, 3, &[], None, 40).unwrap();
        let sys = mu_system(&h, CoeffMode::Exact).unwrap();
        let gb = buchberger(&sys, &MonomialOrder::lex_default(4)).unwrap();
        let sol = solve_triangular(&gb, &sys, 20).unwrap();
        let j = sol.to_json();
        assert_eq!(j["points"].as_array().unwrap().len(), 6);
        assert_eq!(j["points"][0]["err"], json!("1e-20"));
        let back = SolutionSet::from_json(&j).unwrap();
        assert_eq!(back.dim, 3);
        assert_eq!(back.points.len(), 6);
        // decimal coords reparse within the stated error
        for (a, b) in back.points.iter().zip(sol.points.iter()) {
            for (x, y) in a.coords.iter().zip(b.coords.iter()) {
                assert!(Rat::from(x - y).abs() <= pow10_neg(20));
            }
        }
        // determinism: same computation twice serializes identically
        let again = solve_triangular(&gb, &sys, 20).unwrap();
        assert_eq!(sol.to_json().to_string(), again.to_json().to_string());
    }
}

//! Reduced Gröbner bases over Q(sqrt 3).
//!
//! The core is a sequential Buchberger loop with normal (minimal-degree-lcm)
//! pair selection, optional coprime/chain pair pruning, content-free
//! coefficient normalization after every reduction, and hard resource budgets
//! instead of open-ended thrashing. For zero-dimensional systems a cheaper
//! route is available: compute the basis under graded reverse lex and convert
//! to the lex elimination order with a linear-algebra change of order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::polysys::{
    Monomial, MonomialOrder, MultiPoly, OrderKind, PolyError, PolynomialSystem, QSqrt3, MAX_VARS,
};
use crate::rat::Rat;

#[derive(Error, Debug)]
pub enum GroebnerError {
    #[error("input system has no nonzero polynomials")]
    EmptyInput,
    #[error("incompatible inputs: {0}")]
    ModeMismatch(String),
    #[error("resource budget exceeded: {0}")]
    ResourceBudgetExceeded(String),
    #[error("ideal is not zero-dimensional")]
    NotZeroDimensional,
    #[error("bad data: {0}")]
    BadData(String),
}

impl From<PolyError> for GroebnerError {
    fn from(e: PolyError) -> Self {
        GroebnerError::BadData(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Budgets and options

/// Hard limits for a single basis computation. Exceeding any of them aborts
/// the run with [`GroebnerError::ResourceBudgetExceeded`] rather than letting
/// the host thrash.
#[derive(Clone, Debug)]
pub struct Budget {
    /// Cap on critical pairs ever enqueued.
    pub max_pairs: u64,
    /// Approximate cap on resident bytes (basis + pair queue + working poly).
    pub max_mem_bytes: u64,
    /// Cap on the term count of any intermediate polynomial.
    pub max_terms: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_pairs: 10_000_000,
            max_mem_bytes: 8 << 30,
            max_terms: 4_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuchbergerOptions {
    pub budget: Budget,
    /// Apply the coprime and chain criteria. Pruning never changes the final
    /// reduced basis; the flag exists so that claim stays testable.
    pub prune: bool,
    /// Keep a record of every pruned pair (small runs only).
    pub record_pruned: bool,
}

impl Default for BuchbergerOptions {
    fn default() -> Self {
        BuchbergerOptions { budget: Budget::default(), prune: true, record_pruned: false }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PruneReason {
    /// Leading monomials are coprime, so the S-polynomial reduces to zero.
    CoprimeLeadingTerms,
    /// A third basis element divides the pair lcm and both side pairs were
    /// already treated.
    Chain,
}

/// Bookkeeping record for one critical pair.
#[derive(Clone, Debug)]
pub struct CriticalPair {
    pub i: usize,
    pub j: usize,
    pub lcm: Monomial,
    pub degree: u32,
    pub pruned: Option<PruneReason>,
}

#[derive(Clone, Debug, Default)]
pub struct BuchbergerStats {
    pub pairs_generated: u64,
    pub pairs_pruned_coprime: u64,
    pub pairs_pruned_chain: u64,
    pub zero_reductions: u64,
    pub basis_insertions: u64,
    /// Populated only when `record_pruned` is set.
    pub pruned: Vec<CriticalPair>,
}

// ---------------------------------------------------------------------------
// Basis type

/// A Gröbner basis together with the order it was computed under. `reduced`
/// means: monic leading coefficients, no term of any member divisible by
/// another member's leading monomial, and every S-polynomial reduces to zero.
#[derive(Clone, PartialEq, Debug)]
pub struct GroebnerBasis {
    pub system: PolynomialSystem,
    pub order: MonomialOrder,
    pub reduced: bool,
}

impl GroebnerBasis {
    pub fn polys(&self) -> &[MultiPoly] {
        &self.system.polys
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.system.to_json();
        v["order"] = self.order.to_json();
        v["reduced"] = json!(self.reduced);
        v
    }

    pub fn from_json(v: &Value) -> Result<GroebnerBasis, GroebnerError> {
        let system = PolynomialSystem::from_json(v)?;
        let order = MonomialOrder::from_json(&v["order"])?;
        if order.nvars() != system.nvars() {
            return Err(GroebnerError::BadData(format!(
                "order covers {} variables, system has {}",
                order.nvars(),
                system.nvars()
            )));
        }
        let reduced = v["reduced"]
            .as_bool()
            .ok_or_else(|| GroebnerError::BadData("missing reduced flag".into()))?;
        Ok(GroebnerBasis { system, order, reduced })
    }
}

/// True iff every variable has some basis leading monomial that is a pure
/// power of it — for a reduced basis this certifies a finite solution set.
pub fn is_zero_dimensional(g: &GroebnerBasis) -> bool {
    let nvars = g.system.nvars();
    let mut covered = vec![false; nvars];
    for p in g.polys() {
        if p.is_zero() {
            continue;
        }
        if let Some(i) = p.leading(&g.order).0.pure_power() {
            covered[i] = true;
        }
    }
    covered.into_iter().all(|c| c)
}

// ---------------------------------------------------------------------------
// Term-list arithmetic under an active order

/// Terms sorted strictly descending under the active order.
type Terms = Vec<(Monomial, QSqrt3)>;

fn sorted_terms(p: &MultiPoly, order: &MonomialOrder) -> Terms {
    let mut t = p.terms.clone();
    t.sort_by(|a, b| order.cmp(&b.0, &a.0));
    t
}

fn to_poly(nvars: usize, terms: Terms) -> MultiPoly {
    MultiPoly::from_terms(nvars, terms)
}

/// `a - k * q * b` where both inputs are descending; the result is descending.
fn sub_scaled(a: &[(Monomial, QSqrt3)], b: &[(Monomial, QSqrt3)], q: &Monomial, k: &QSqrt3, order: &MonomialOrder) -> Terms {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let bm = b[j].0.mul(q);
        match order.cmp(&a[i].0, &bm) {
            std::cmp::Ordering::Greater => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Less => {
                out.push((bm, b[j].1.mul(k).neg()));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let c = a[i].1.sub(&b[j].1.mul(k));
                if !c.is_zero() {
                    out.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    for (m, c) in &b[j..] {
        out.push((m.mul(q), c.mul(k).neg()));
    }
    out
}

struct Elem {
    terms: Terms,
    lm: Monomial,
    lc: QSqrt3,
}

impl Elem {
    fn new(p: &MultiPoly, order: &MonomialOrder) -> Elem {
        let terms = sorted_terms(p, order);
        let (lm, lc) = terms[0].clone();
        Elem { terms, lm, lc }
    }
}

fn rat_bytes(r: &Rat) -> u64 {
    ((r.numer().significant_bits() + r.denom().significant_bits()) as u64) / 8 + 32
}

fn coeff_bytes(c: &QSqrt3) -> u64 {
    rat_bytes(&c.a) + rat_bytes(&c.b)
}

fn terms_bytes(t: &[(Monomial, QSqrt3)]) -> u64 {
    t.iter().map(|(_, c)| coeff_bytes(c) + 2 * MAX_VARS as u64 + 16).sum()
}

/// Full multivariate division: no term of the result is divisible by any
/// basis leading monomial; the difference from the input lies in the ideal.
/// `skip` excludes one basis index (used during interreduction).
fn normal_form(
    mut work: Terms,
    basis: &[Elem],
    skip: Option<usize>,
    order: &MonomialOrder,
    budget: &Budget,
    resident_bytes: u64,
) -> Result<Terms, GroebnerError> {
    let mut idx = 0;
    let mut steps: u32 = 0;
    while idx < work.len() {
        let m = work[idx].0;
        let reducer = basis
            .iter()
            .enumerate()
            .find(|(k, g)| Some(*k) != skip && g.lm.divides(&m));
        match reducer {
            Some((_, g)) => {
                let q = g.lm.quotient_of(&m);
                let k = work[idx].1.div(&g.lc);
                let tail = sub_scaled(&work[idx..], &g.terms, &q, &k, order);
                debug_assert!(tail.first().map(|(t, _)| order.cmp(t, &m)) != Some(std::cmp::Ordering::Equal));
                work.truncate(idx);
                work.extend(tail);
                if work.len() > budget.max_terms {
                    return Err(GroebnerError::ResourceBudgetExceeded(format!(
                        "intermediate polynomial reached {} terms",
                        work.len()
                    )));
                }
                steps += 1;
                if steps % 256 == 0 && terms_bytes(&work) + resident_bytes > budget.max_mem_bytes {
                    return Err(GroebnerError::ResourceBudgetExceeded(
                        "memory guard tripped during reduction".into(),
                    ));
                }
            }
            None => idx += 1,
        }
    }
    Ok(work)
}

// ---------------------------------------------------------------------------
// Public reduction operations

/// Remainder of `f` under full division by `g_list` (order of listing is the
/// tie-break among applicable divisors). Exact: `f - reduce(f)` lies in the
/// ideal generated by `g_list`.
pub fn reduce(f: &MultiPoly, g_list: &[MultiPoly], order: &MonomialOrder) -> Result<MultiPoly, GroebnerError> {
    let nvars = f.nvars;
    if order.nvars() != nvars {
        return Err(GroebnerError::ModeMismatch(format!(
            "order covers {} variables, polynomial has {}",
            order.nvars(),
            nvars
        )));
    }
    for g in g_list {
        if g.nvars != nvars {
            return Err(GroebnerError::ModeMismatch(format!(
                "divisor has {} variables, dividend has {}",
                g.nvars, nvars
            )));
        }
    }
    let basis: Vec<Elem> = g_list
        .iter()
        .filter(|g| !g.is_zero())
        .map(|g| Elem::new(g, order))
        .collect();
    let rem = normal_form(sorted_terms(f, order), &basis, None, order, &Budget::default(), 0)?;
    Ok(to_poly(nvars, rem))
}

/// S(f, g) = (lcm/lt f)·f − (lcm/lt g)·g: the smallest combination whose
/// leading terms cancel. Panics on zero input.
pub fn s_polynomial(f: &MultiPoly, g: &MultiPoly, order: &MonomialOrder) -> MultiPoly {
    assert!(!f.is_zero() && !g.is_zero(), "S-polynomial of zero polynomial");
    let (fm, fc) = f.leading(order);
    let (gm, gc) = g.leading(order);
    let lcm = fm.lcm(gm);
    let uf = fm.quotient_of(&lcm);
    let ug = gm.quotient_of(&lcm);
    f.mul_term(&uf, &fc.inv()).sub(&g.mul_term(&ug, &gc.inv()))
}

// ---------------------------------------------------------------------------
// Buchberger

/// Selection key: minimal lcm degree first, then the permuted exponent
/// vector, then the pair indices — a fixed total order, so runs are
/// reproducible byte for byte.
type PairKey = (u32, [u16; MAX_VARS], u32, u32);

fn pair_key(lcm: &Monomial, order: &MonomialOrder, i: u32, j: u32) -> PairKey {
    let mut exps = [0u16; MAX_VARS];
    for (slot, &v) in order.perm.iter().enumerate() {
        exps[slot] = lcm.0[v];
    }
    (lcm.total_degree(), exps, i, j)
}

pub fn buchberger(p: &PolynomialSystem, order: &MonomialOrder) -> Result<GroebnerBasis, GroebnerError> {
    buchberger_with(p, order, &BuchbergerOptions::default()).map(|(g, _)| g)
}

pub fn buchberger_with(
    p: &PolynomialSystem,
    order: &MonomialOrder,
    opts: &BuchbergerOptions,
) -> Result<(GroebnerBasis, BuchbergerStats), GroebnerError> {
    let nvars = p.nvars();
    if order.nvars() != nvars {
        return Err(GroebnerError::ModeMismatch(format!(
            "order covers {} variables, system has {}",
            order.nvars(),
            nvars
        )));
    }
    let mut stats = BuchbergerStats::default();
    let mut basis: Vec<Elem> = Vec::new();
    let mut basis_bytes: u64 = 0;
    let mut queue: BinaryHeap<Reverse<PairKey>> = BinaryHeap::new();
    let mut treated: HashSet<(u32, u32)> = HashSet::new();

    let insert = |q: MultiPoly,
                      basis: &mut Vec<Elem>,
                      queue: &mut BinaryHeap<Reverse<PairKey>>,
                      basis_bytes: &mut u64,
                      stats: &mut BuchbergerStats|
     -> Result<(), GroebnerError> {
        let e = Elem::new(&q, order);
        *basis_bytes += terms_bytes(&e.terms);
        let j = basis.len() as u32;
        for i in 0..j {
            let lcm = basis[i as usize].lm.lcm(&e.lm);
            stats.pairs_generated += 1;
            if stats.pairs_generated > opts.budget.max_pairs {
                return Err(GroebnerError::ResourceBudgetExceeded(format!(
                    "critical pair limit {} reached",
                    opts.budget.max_pairs
                )));
            }
            queue.push(Reverse(pair_key(&lcm, order, i, j)));
        }
        basis.push(e);
        stats.basis_insertions += 1;
        if *basis_bytes + queue.len() as u64 * 48 > opts.budget.max_mem_bytes {
            return Err(GroebnerError::ResourceBudgetExceeded(
                "memory guard tripped by basis growth".into(),
            ));
        }
        Ok(())
    };

    for q in &p.polys {
        if q.is_zero() {
            continue;
        }
        let mut q = q.clone();
        q.content_strip();
        q.leading_positive(order);
        insert(q, &mut basis, &mut queue, &mut basis_bytes, &mut stats)?;
    }
    if basis.is_empty() {
        return Err(GroebnerError::EmptyInput);
    }

    while let Some(Reverse((deg, _, i, j))) = queue.pop() {
        treated.insert((i, j));
        let (gi, gj) = (&basis[i as usize], &basis[j as usize]);
        let lcm = gi.lm.lcm(&gj.lm);
        if opts.prune {
            if gi.lm.coprime(&gj.lm) {
                stats.pairs_pruned_coprime += 1;
                if opts.record_pruned {
                    stats.pruned.push(CriticalPair {
                        i: i as usize,
                        j: j as usize,
                        lcm,
                        degree: deg,
                        pruned: Some(PruneReason::CoprimeLeadingTerms),
                    });
                }
                continue;
            }
            let chained = (0..basis.len() as u32).any(|k| {
                k != i
                    && k != j
                    && basis[k as usize].lm.divides(&lcm)
                    && treated.contains(&(i.min(k), i.max(k)))
                    && treated.contains(&(j.min(k), j.max(k)))
            });
            if chained {
                stats.pairs_pruned_chain += 1;
                if opts.record_pruned {
                    stats.pruned.push(CriticalPair {
                        i: i as usize,
                        j: j as usize,
                        lcm,
                        degree: deg,
                        pruned: Some(PruneReason::Chain),
                    });
                }
                continue;
            }
        }
        let ui = gi.lm.quotient_of(&lcm);
        let s = sub_scaled(
            &gi.terms
                .iter()
                .map(|(m, c)| (m.mul(&ui), c.div(&gi.lc)))
                .collect::<Vec<_>>(),
            &gj.terms,
            &gj.lm.quotient_of(&lcm),
            &gj.lc.inv(),
            order,
        );
        let h = normal_form(s, &basis, None, order, &opts.budget, basis_bytes)?;
        if h.is_empty() {
            stats.zero_reductions += 1;
            continue;
        }
        let mut hp = to_poly(nvars, h);
        hp.content_strip();
        hp.leading_positive(order);
        insert(hp, &mut basis, &mut queue, &mut basis_bytes, &mut stats)?;
    }

    let polys = reduce_basis(basis, order, nvars, &opts.budget)?;
    let system = PolynomialSystem {
        dim: p.dim,
        mode: p.mode,
        vars: p.vars.clone(),
        polys,
        source: p.source.clone(),
    };
    Ok((GroebnerBasis { system, order: order.clone(), reduced: true }, stats))
}

/// Minimalize (drop members whose leading monomial another member's leading
/// monomial divides), tail-reduce to a fixpoint, normalize monic, and sort
/// ascending by leading monomial.
fn reduce_basis(
    basis: Vec<Elem>,
    order: &MonomialOrder,
    nvars: usize,
    budget: &Budget,
) -> Result<Vec<MultiPoly>, GroebnerError> {
    let mut idx: Vec<usize> = (0..basis.len()).collect();
    idx.sort_by(|&a, &b| order.cmp(&basis[a].lm, &basis[b].lm).then(a.cmp(&b)));
    let mut kept: Vec<Elem> = Vec::new();
    for i in idx {
        if !kept.iter().any(|k| k.lm.divides(&basis[i].lm)) {
            kept.push(Elem {
                terms: basis[i].terms.clone(),
                lm: basis[i].lm,
                lc: basis[i].lc.clone(),
            });
        }
    }
    // Tail reduction: each member's non-leading terms can mention another
    // member's leading monomial only transiently; iterate to the fixpoint
    // (terminates: each pass replaces tail monomials by strictly smaller ones).
    loop {
        let mut changed = false;
        for i in 0..kept.len() {
            let work = kept[i].terms.clone();
            let red = normal_form(work, &kept, Some(i), order, budget, 0)?;
            if red != kept[i].terms {
                debug_assert_eq!(red[0].0, kept[i].lm);
                kept[i] = Elem { lm: red[0].0, lc: red[0].1.clone(), terms: red };
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<MultiPoly> = kept
        .into_iter()
        .map(|e| {
            let mut p = to_poly(nvars, e.terms);
            p.make_monic(order);
            p
        })
        .collect();
    out.sort_by(|a, b| order.cmp(a.leading(order).0, b.leading(order).0));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Change of order for zero-dimensional ideals

/// Converts a reduced basis of a zero-dimensional ideal to a reduced basis
/// under `target` (which must be a lex order) by linear algebra over the
/// finite-dimensional quotient: enumerate monomials in increasing target
/// order, keep the independent ones as the new staircase, and harvest each
/// dependence as a new basis member.
pub fn fglm(gb: &GroebnerBasis, target: &MonomialOrder) -> Result<GroebnerBasis, GroebnerError> {
    fglm_with(gb, target, &Budget::default())
}

pub fn fglm_with(
    gb: &GroebnerBasis,
    target: &MonomialOrder,
    budget: &Budget,
) -> Result<GroebnerBasis, GroebnerError> {
    let nvars = gb.system.nvars();
    if !gb.reduced {
        return Err(GroebnerError::BadData("change of order needs a reduced basis".into()));
    }
    if target.kind != OrderKind::Lex {
        return Err(GroebnerError::BadData("change of order targets lex orders".into()));
    }
    if target.nvars() != nvars {
        return Err(GroebnerError::ModeMismatch(format!(
            "target order covers {} variables, system has {}",
            target.nvars(),
            nvars
        )));
    }
    let rebuild = |polys: Vec<MultiPoly>| PolynomialSystem {
        dim: gb.system.dim,
        mode: gb.system.mode,
        vars: gb.system.vars.clone(),
        polys,
        source: gb.system.source.clone(),
    };
    // Unit ideal: empty variety, conversion is immediate.
    if gb.polys().iter().any(|p| !p.is_zero() && p.total_degree() == 0) {
        return Ok(GroebnerBasis {
            system: rebuild(vec![MultiPoly::constant(nvars, QSqrt3::one())]),
            order: target.clone(),
            reduced: true,
        });
    }
    if !is_zero_dimensional(gb) {
        return Err(GroebnerError::NotZeroDimensional);
    }
    let src = &gb.order;
    let elems: Vec<Elem> = gb.polys().iter().map(|p| Elem::new(p, src)).collect();
    let lms: Vec<Monomial> = elems.iter().map(|e| e.lm).collect();

    // Staircase of the source basis = monomial basis of the quotient space.
    let mut stair: Vec<Monomial> = Vec::new();
    let mut seen: HashSet<Monomial> = HashSet::new();
    let mut stack = vec![Monomial::one()];
    while let Some(m) = stack.pop() {
        if seen.contains(&m) || lms.iter().any(|lm| lm.divides(&m)) {
            continue;
        }
        seen.insert(m);
        stair.push(m);
        for v in 0..nvars {
            stack.push(m.mul(&Monomial::var(v)));
        }
        if stair.len() > 1 << 20 {
            return Err(GroebnerError::ResourceBudgetExceeded(
                "quotient staircase exceeded 2^20 monomials".into(),
            ));
        }
    }
    stair.sort_by(|a, b| src.cmp(a, b));
    let dim = stair.len();
    let index: HashMap<Monomial, usize> = stair.iter().enumerate().map(|(i, &m)| (m, i)).collect();

    // Normal forms of border monomials (staircase times one variable), filled
    // on demand; remainders are supported on the staircase by construction.
    let mut border: HashMap<Monomial, Vec<QSqrt3>> = HashMap::new();
    let border_nf = |m: Monomial, border: &mut HashMap<Monomial, Vec<QSqrt3>>| -> Result<Vec<QSqrt3>, GroebnerError> {
        if let Some(v) = border.get(&m) {
            return Ok(v.clone());
        }
        let rem = normal_form(vec![(m, QSqrt3::one())], &elems, None, src, budget, 0)?;
        let mut dense = vec![QSqrt3::zero(); dim];
        for (mm, c) in rem {
            dense[*index.get(&mm).expect("normal form landed outside the staircase")] = c;
        }
        border.insert(m, dense.clone());
        Ok(dense)
    };

    // Kept monomials (the target-order staircase) with their quotient
    // coordinates, plus an echelonized copy for dependence tests.
    let mut kept: Vec<(Monomial, Vec<QSqrt3>)> = Vec::new();
    struct Row {
        pivot: usize,
        vec: Vec<QSqrt3>,
        /// Coordinates of `vec` over the kept quotient vectors.
        rep: Vec<QSqrt3>,
    }
    let mut echelon: Vec<Row> = Vec::new();
    let mut new_polys: Vec<MultiPoly> = Vec::new();
    let mut new_lms: Vec<Monomial> = Vec::new();

    let target_key = |m: &Monomial| {
        let mut exps = [0u16; MAX_VARS];
        for (slot, &v) in target.perm.iter().enumerate() {
            exps[slot] = m.0[v];
        }
        exps
    };
    // Candidates in increasing target order; each remembers the kept parent
    // it extends and by which variable.
    let mut candidates: BTreeMap<[u16; MAX_VARS], (Monomial, usize, usize)> = BTreeMap::new();
    candidates.insert(target_key(&Monomial::one()), (Monomial::one(), usize::MAX, usize::MAX));

    while let Some((_, (m, parent, var))) = candidates.pop_first() {
        if new_lms.iter().any(|lm| lm.divides(&m)) {
            continue;
        }
        let mut v = if parent == usize::MAX {
            let mut e = vec![QSqrt3::zero(); dim];
            e[index[&Monomial::one()]] = QSqrt3::one();
            e
        } else {
            // v = x_var * kept[parent], expanded through the border table.
            let mut acc = vec![QSqrt3::zero(); dim];
            let xv = Monomial::var(var);
            for (i, c) in kept[parent].1.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let m2 = stair[i].mul(&xv);
                if let Some(&k) = index.get(&m2) {
                    acc[k] = acc[k].add(c);
                } else {
                    let nf = border_nf(m2, &mut border)?;
                    for (k, w) in nf.iter().enumerate() {
                        if !w.is_zero() {
                            acc[k] = acc[k].add(&c.mul(w));
                        }
                    }
                }
            }
            acc
        };
        let original = v.clone();
        // Eliminate against the echelon rows, tracking kept-coordinates.
        let mut combo = vec![QSqrt3::zero(); kept.len()];
        for row in &echelon {
            if v[row.pivot].is_zero() {
                continue;
            }
            let f = v[row.pivot].clone();
            for k in 0..dim {
                if !row.vec[k].is_zero() {
                    v[k] = v[k].sub(&f.mul(&row.vec[k]));
                }
            }
            for (k, r) in row.rep.iter().enumerate() {
                if !r.is_zero() {
                    combo[k] = combo[k].add(&f.mul(r));
                }
            }
        }
        match v.iter().position(|c| !c.is_zero()) {
            None => {
                // Dependent: m − Σ combo·kept is a new basis member, already
                // monic with a fully reduced tail.
                let mut terms: Terms = vec![(m, QSqrt3::one())];
                for (k, c) in combo.iter().enumerate() {
                    if !c.is_zero() {
                        terms.push((kept[k].0, c.neg()));
                    }
                }
                new_polys.push(to_poly(nvars, terms));
                new_lms.push(m);
            }
            Some(pivot) => {
                let piv = v[pivot].clone();
                let inv = piv.inv();
                let vec: Vec<QSqrt3> = v.iter().map(|c| c.mul(&inv)).collect();
                let mut rep = vec![QSqrt3::zero(); kept.len() + 1];
                for (k, c) in combo.iter().enumerate() {
                    rep[k] = c.neg().mul(&inv);
                }
                rep[kept.len()] = inv;
                for row in &mut echelon {
                    row.rep.resize(kept.len() + 1, QSqrt3::zero());
                }
                echelon.push(Row { pivot, vec, rep });
                kept.push((m, original));
                if kept.len() > dim {
                    return Err(GroebnerError::BadData(
                        "quotient dimension overflow during change of order".into(),
                    ));
                }
                for vnext in 0..nvars {
                    let child = m.mul(&Monomial::var(vnext));
                    candidates
                        .entry(target_key(&child))
                        .or_insert((child, kept.len() - 1, vnext));
                }
            }
        }
    }
    debug_assert_eq!(kept.len(), dim);
    Ok(GroebnerBasis {
        system: rebuild(new_polys),
        order: target.clone(),
        reduced: true,
    })
}

/// Reduced basis under the default lex elimination order, taking the cheap
/// route when possible: graded-reverse-lex first, then change of order if the
/// ideal is zero-dimensional, falling back to direct lex otherwise.
pub fn lex_groebner(p: &PolynomialSystem) -> Result<GroebnerBasis, GroebnerError> {
    lex_groebner_with(p, &BuchbergerOptions::default())
}

pub fn lex_groebner_with(
    p: &PolynomialSystem,
    opts: &BuchbergerOptions,
) -> Result<GroebnerBasis, GroebnerError> {
    let lex = MonomialOrder::lex_default(p.nvars());
    let grev = MonomialOrder::grevlex_default(p.nvars());
    let (gb, _) = buchberger_with(p, &grev, opts)?;
    if is_zero_dimensional(&gb) {
        fglm_with(&gb, &lex, &opts.budget)
    } else {
        Ok(buchberger_with(p, &lex, opts)?.0)
    }
}

// ---------------------------------------------------------------------------

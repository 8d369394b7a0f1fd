//! Classification and census of MU vector sets.
//!
//! Solutions become unit vectors; every unordered pair is classified as
//! orthogonal, unbiased, or neither, and a classification is only ever
//! emitted together with a certified margin: the accumulated coordinate and
//! rounding error must clear the decision threshold by a fixed gap, otherwise
//! the pair is reported undecidable. On top of the pair graph the census
//! counts vectors, d-cliques of the orthogonality graph (each one an
//! orthonormal unimodular basis, hence a Hadamard matrix), and unbiased
//! pairs.

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::apf::{Cplx, Real, DEFAULT_DIGITS};
use crate::rat::Rat;
use crate::realroots::SolutionSet;

#[derive(Error, Debug)]
pub enum AnalyzerError {
    #[error("classification undecidable: {0}")]
    Undecidable(String),
    #[error("bad data: {0}")]
    BadData(String),
}

/// Decision threshold for both targets (inner product 0, |inner|² = 1/d).
const THRESHOLD: f64 = 1e-10;
/// A classification must clear its threshold by at least this much.
const CERTIFIED_GAP: f64 = 1e-15;

// ---------------------------------------------------------------------------
// Vectors

/// A unit vector of candidate MU type: component 0 is 1/√d, the rest are
/// unimodular phases scaled by 1/√d, each within `err` of the exact value.
#[derive(Clone, Debug)]
pub struct MUVector {
    pub dim: usize,
    pub components: Vec<Cplx>,
    /// Per-component absolute error bound.
    pub err: Rat,
    /// Index of the originating solution point.
    pub source: usize,
}

/// One vector per solution point: components (1, x₁+iy₁, …)/√d with the
/// point's coordinate error carried over (the 1/√d scaling shrinks the
/// two-coordinate error below the single-coordinate bound, so reusing it is
/// conservative for d ≥ 2).
pub fn vectors_from_solutions(s: &SolutionSet) -> Result<Vec<MUVector>, AnalyzerError> {
    let d = s.dim;
    let m = d - 1;
    let w = (2 * s.digits).max(DEFAULT_DIGITS);
    let inv_sqrt_d = Real::from_u32(1, w).div(&Real::from_u32(d as u32, w).sqrt());
    let mut out = Vec::with_capacity(s.points.len());
    for (idx, p) in s.points.iter().enumerate() {
        if p.coords.len() != 2 * m {
            return Err(AnalyzerError::BadData(format!(
                "point {idx} has {} coordinates, expected {}",
                p.coords.len(),
                2 * m
            )));
        }
        let mut components = Vec::with_capacity(d);
        components.push(Cplx::new(inv_sqrt_d.clone(), Real::new(w)));
        for j in 0..m {
            let re = Real::from_rat(&p.coords[j], w).mul(&inv_sqrt_d);
            let im = Real::from_rat(&p.coords[m + j], w).mul(&inv_sqrt_d);
            components.push(Cplx::new(re, im));
        }
        out.push(MUVector { dim: d, components, err: p.err.clone(), source: idx });
    }
    Ok(out)
}

/// Permuted complex conjugate, rephased so component 0 is again real 1/√d.
/// The rephasing folds the component-0 error into every component, so the
/// output error bound is three times the input one.
pub fn conjugate_permute(v: &MUVector, p: &[usize]) -> Result<MUVector, AnalyzerError> {
    let d = v.dim;
    if p.len() != d {
        return Err(AnalyzerError::BadData(format!(
            "permutation has length {}, vector dimension is {d}",
            p.len()
        )));
    }
    let mut seen = vec![false; d];
    for &i in p {
        if i >= d || seen[i] {
            return Err(AnalyzerError::BadData("not a permutation".into()));
        }
        seen[i] = true;
    }
    let raw: Vec<Cplx> = (0..d).map(|j| v.components[p[j]].conj()).collect();
    let phase = raw[0].phase().conj();
    let components = raw.iter().map(|z| z.mul(&phase)).collect();
    Ok(MUVector {
        dim: d,
        components,
        err: Rat::from(&v.err * Rat::from(3)),
        source: v.source,
    })
}

// ---------------------------------------------------------------------------
// Pair classification

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PairKind {
    Orthogonal,
    Unbiased,
    Neither,
}

impl PairKind {
    fn code(self) -> char {
        match self {
            PairKind::Orthogonal => 'O',
            PairKind::Unbiased => 'U',
            PairKind::Neither => 'N',
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PairClass {
    pub kind: PairKind,
    /// |⟨v|w⟩|
    pub value: f64,
    /// Certified distance by which the decision clears its threshold after
    /// subtracting the error envelope.
    pub margin: f64,
}

/// Classifies one pair with a certified margin. The error envelope 4d·err
/// dominates the coordinate error of the inner product; float rounding at
/// working precision is absorbed by an extra guard term. Orthogonal and
/// unbiased cannot both certify (that would force 1/d below the threshold),
/// and either excludes neither.
pub fn pair_type(v: &MUVector, w: &MUVector) -> Result<PairClass, AnalyzerError> {
    pair_type_at(v, w, THRESHOLD)
}

/// [`pair_type`] with an explicit classification threshold. The default
/// suits interval-certified coordinates; heuristic sources (multistart
/// refinement, approximated coefficients) carry larger real errors than
/// their nominal bounds, so censuses over them use a looser threshold and
/// the report provenance records it.
pub fn pair_type_at(
    v: &MUVector,
    w: &MUVector,
    threshold: f64,
) -> Result<PairClass, AnalyzerError> {
    if v.dim != w.dim {
        return Err(AnalyzerError::BadData(format!(
            "dimension mismatch: {} vs {}",
            v.dim, w.dim
        )));
    }
    let d = v.dim;
    let wd = v.components[0].digits();
    let mut inner = Cplx::zero(wd);
    for (a, b) in v.components.iter().zip(w.components.iter()) {
        inner = inner.add(&a.conj().mul(b));
    }
    let value = inner.abs().to_f64();
    let errmax = if v.err > w.err { v.err.to_f64() } else { w.err.to_f64() };
    let env = 4.0 * d as f64 * errmax + 10f64.powi(-(wd.saturating_sub(5) as i32));
    let dist_unbiased = (value * value - 1.0 / d as f64).abs();
    // d(value²) ≤ 2·value·env + env², and value stays near [0, 1]
    let env_sq = 3.0 * env;

    let orth_margin = threshold - value - env;
    let unb_margin = threshold - dist_unbiased - env_sq;
    let neither_margin = (value - env - threshold).min(dist_unbiased - env_sq - threshold);
    if orth_margin >= CERTIFIED_GAP {
        return Ok(PairClass { kind: PairKind::Orthogonal, value, margin: orth_margin });
    }
    if unb_margin >= CERTIFIED_GAP {
        return Ok(PairClass { kind: PairKind::Unbiased, value, margin: unb_margin });
    }
    if neither_margin >= CERTIFIED_GAP {
        return Ok(PairClass { kind: PairKind::Neither, value, margin: neither_margin });
    }
    Err(AnalyzerError::Undecidable(format!(
        "|<v|w>| = {value:.3e} with envelope {env:.3e} clears no threshold"
    )))
}

// ---------------------------------------------------------------------------
// Census

#[derive(Clone, Copy, Debug, Default)]
pub struct MarginSummary {
    pub orthogonal_min: Option<f64>,
    pub unbiased_min: Option<f64>,
    pub neither_min: Option<f64>,
}

impl MarginSummary {
    fn absorb(&mut self, c: &PairClass) {
        let slot = match c.kind {
            PairKind::Orthogonal => &mut self.orthogonal_min,
            PairKind::Unbiased => &mut self.unbiased_min,
            PairKind::Neither => &mut self.neither_min,
        };
        *slot = Some(slot.map_or(c.margin, |m: f64| m.min(c.margin)));
    }

    fn opt_json(v: Option<f64>) -> Value {
        v.map(|x| json!(x)).unwrap_or(Value::Null)
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisReport {
    pub n_v: usize,
    /// Number of d-subsets of mutually orthogonal vectors (each an
    /// additional Hadamard basis).
    pub n_t: usize,
    /// Number of unbiased unordered pairs.
    pub n_p: usize,
    /// The d-cliques, each sorted, the list sorted.
    pub bases: Vec<Vec<usize>>,
    /// Whether two listed bases are mutually unbiased (giving, with the
    /// identity and the defining Hadamard, four MU bases).
    pub four_bases_found: bool,
    pub margins: MarginSummary,
    /// Upper triangle of the classification matrix, row-major.
    pub classes: Vec<PairKind>,
    /// Where the vectors came from (coefficient mode, digits); counts from
    /// approximate-coefficient runs are bounds, not exact statements.
    pub provenance: Option<String>,
}

fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl AnalysisReport {
    pub fn class(&self, i: usize, j: usize) -> Option<PairKind> {
        if i == j || i >= self.n_v || j >= self.n_v {
            return None;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        Some(self.classes[pair_index(i, j, self.n_v)])
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<String> = (0..self.n_v)
            .map(|i| {
                (i + 1..self.n_v)
                    .map(|j| self.classes[pair_index(i, j, self.n_v)].code())
                    .collect()
            })
            .collect();
        json!({
            "n_v": self.n_v,
            "n_t": self.n_t,
            "n_p": self.n_p,
            "bases": self.bases,
            "four_bases_found": self.four_bases_found,
            "margins": {
                "orthogonal_min": MarginSummary::opt_json(self.margins.orthogonal_min),
                "unbiased_min": MarginSummary::opt_json(self.margins.unbiased_min),
                "neither_min": MarginSummary::opt_json(self.margins.neither_min),
            },
            "pairs": rows,
            "provenance": self.provenance,
        })
    }
}

/// Full census of a vector set: pairwise classification (parallel over
/// pairs), orthogonality d-cliques, unbiased pair count, and the
/// four-bases test. The result depends only on the set, not its order.
pub fn analyze(vectors: &[MUVector], d: usize) -> Result<AnalysisReport, AnalyzerError> {
    analyze_with_provenance(vectors, d, None)
}

pub fn analyze_with_provenance(
    vectors: &[MUVector],
    d: usize,
    provenance: Option<String>,
) -> Result<AnalysisReport, AnalyzerError> {
    analyze_at(vectors, d, THRESHOLD, provenance)
}

/// [`analyze`] with an explicit classification threshold (see
/// [`pair_type_at`]).
pub fn analyze_at(
    vectors: &[MUVector],
    d: usize,
    threshold: f64,
    provenance: Option<String>,
) -> Result<AnalysisReport, AnalyzerError> {
    for v in vectors {
        if v.dim != d {
            return Err(AnalyzerError::BadData(format!(
                "vector of dimension {} in a dimension-{d} census",
                v.dim
            )));
        }
    }
    let n = vectors.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let classes: Vec<PairClass> = pairs
        .par_iter()
        .map(|&(i, j)| pair_type_at(&vectors[i], &vectors[j], threshold))
        .collect::<Result<_, _>>()?;

    let mut margins = MarginSummary::default();
    let mut n_p = 0;
    let mut adj: Vec<Bits> = vec![Bits::new(n); n];
    for (&(i, j), c) in pairs.iter().zip(classes.iter()) {
        margins.absorb(c);
        match c.kind {
            PairKind::Orthogonal => {
                adj[i].set(j);
                adj[j].set(i);
            }
            PairKind::Unbiased => n_p += 1,
            PairKind::Neither => {}
        }
    }

    let bases = cliques_of_size(&adj, n, d);
    let kind_of = |i: usize, j: usize| classes[pair_index(i.min(j), i.max(j), n)].kind;
    let mut four_bases_found = false;
    'outer: for (a, base_a) in bases.iter().enumerate() {
        for base_b in &bases[a + 1..] {
            let all_unbiased = base_a.iter().all(|&i| {
                base_b
                    .iter()
                    .all(|&j| i != j && kind_of(i, j) == PairKind::Unbiased)
            });
            if all_unbiased {
                four_bases_found = true;
                break 'outer;
            }
        }
    }

    Ok(AnalysisReport {
        n_v: n,
        n_t: bases.len(),
        n_p,
        bases,
        four_bases_found,
        margins,
        classes: classes.iter().map(|c| c.kind).collect(),
        provenance,
    })
}

/// Convenience wrapper: vectors, census, and provenance from one solution
/// set.
pub fn analyze_solutions(s: &SolutionSet) -> Result<(Vec<MUVector>, AnalysisReport), AnalyzerError> {
    analyze_solutions_at(s, THRESHOLD)
}

/// [`analyze_solutions`] with an explicit classification threshold.
/// Uncertified solution sets are flagged as such in the provenance.
pub fn analyze_solutions_at(
    s: &SolutionSet,
    threshold: f64,
) -> Result<(Vec<MUVector>, AnalysisReport), AnalyzerError> {
    let vectors = vectors_from_solutions(s)?;
    let mut provenance = format!("{} digits={}", s.mode, s.digits);
    if (threshold - THRESHOLD).abs() > f64::EPSILON * THRESHOLD {
        provenance.push_str(&format!(" threshold={threshold:.0e}"));
    }
    if !s.certified {
        provenance.push_str(" uncertified");
    }
    let report = analyze_at(&vectors, s.dim, threshold, Some(provenance))?;
    Ok((vectors, report))
}

// ---------------------------------------------------------------------------
// Clique enumeration

#[derive(Clone, PartialEq)]
struct Bits {
    w: Vec<u64>,
}

impl Bits {
    fn new(n: usize) -> Bits {
        Bits { w: vec![0; n.div_ceil(64)] }
    }

    fn set(&mut self, i: usize) {
        self.w[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: usize) {
        self.w[i / 64] &= !(1 << (i % 64));
    }

    fn and(&self, o: &Bits) -> Bits {
        Bits { w: self.w.iter().zip(&o.w).map(|(a, b)| a & b).collect() }
    }

    fn minus(&self, o: &Bits) -> Bits {
        Bits { w: self.w.iter().zip(&o.w).map(|(a, b)| a & !b).collect() }
    }

    fn is_empty(&self) -> bool {
        self.w.iter().all(|&x| x == 0)
    }

    fn count(&self) -> usize {
        self.w.iter().map(|x| x.count_ones() as usize).sum()
    }

    fn indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count());
        for (k, &word) in self.w.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let b = word.trailing_zeros() as usize;
                out.push(k * 64 + b);
                word &= word - 1;
            }
        }
        out
    }
}

/// All cliques of size exactly `d` via Bron–Kerbosch with pivoting. Cliques
/// of orthogonal unit vectors cannot exceed size d, so every d-clique is
/// maximal and plain maximal-clique enumeration finds them all.
fn cliques_of_size(adj: &[Bits], n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut p = Bits::new(n);
    for i in 0..n {
        p.set(i);
    }
    let mut out = Vec::new();
    let mut r = Vec::new();
    bron_kerbosch(adj, &mut r, p, Bits::new(n), d, &mut out);
    out.sort();
    out
}

fn bron_kerbosch(
    adj: &[Bits],
    r: &mut Vec<usize>,
    mut p: Bits,
    mut x: Bits,
    d: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        if r.len() == d {
            let mut c = r.clone();
            c.sort_unstable();
            out.push(c);
        }
        return;
    }
    if r.len() + p.count() < d || r.len() >= d {
        return;
    }
    let pivot = p
        .indices()
        .into_iter()
        .chain(x.indices())
        .max_by_key(|&u| p.and(&adj[u]).count())
        .expect("nonempty candidate set");
    for v in p.minus(&adj[pivot]).indices() {
        r.push(v);
        bron_kerbosch(adj, r, p.and(&adj[v]), x.and(&adj[v]), d, out);
        r.pop();
        p.clear(v);
        x.set(v);
    }
}

// ---------------------------------------------------------------------------

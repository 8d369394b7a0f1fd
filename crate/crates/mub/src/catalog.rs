//! Complex Hadamard matrices of dimension ≤ 7: the dimension-6 families with
//! their fundamental regions, plus validation, dephasing, and equivalence
//! testing.
//!
//! Entries are arbitrary-precision complex floats; construction runs with
//! extra guard digits so the returned matrix meets the validation tolerance
//! 10^(2−digits) comfortably.

use crate::apf::{cubic_roots, Cplx, Real};
use crate::rat::{rat_from_decimal, rat_to_decimal, Rat};
use serde_json::{json, Value};
use std::cmp::Ordering;
use std::fmt;

pub const MIN_DIGITS: u32 = 15;
const GUARD_DIGITS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Fourier,
    FourierT,
    Dita,
    Hermitean,
    Symmetric,
    Szollosi,
    SzollosiT,
    Circulant,
    Spectral,
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Fourier => "fourier",
            Family::FourierT => "fourier_t",
            Family::Dita => "dita",
            Family::Hermitean => "hermitean",
            Family::Symmetric => "symmetric",
            Family::Szollosi => "szollosi",
            Family::SzollosiT => "szollosi_t",
            Family::Circulant => "circulant",
            Family::Spectral => "spectral",
            Family::Custom => "custom",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        Some(match s {
            "fourier" | "F" => Family::Fourier,
            "fourier_t" | "FT" => Family::FourierT,
            "dita" | "D" => Family::Dita,
            "hermitean" | "B" => Family::Hermitean,
            "symmetric" | "M" => Family::Symmetric,
            "szollosi" | "X" => Family::Szollosi,
            "szollosi_t" | "XT" => Family::SzollosiT,
            "circulant" | "C" => Family::Circulant,
            "spectral" | "S" => Family::Spectral,
            "custom" => Family::Custom,
            _ => return None,
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }

    pub fn from_str(s: &str) -> Option<Sign> {
        match s {
            "+" | "plus" => Some(Sign::Plus),
            "-" | "minus" => Some(Sign::Minus),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("parameters outside the fundamental region for {0}")]
    OutOfRegion(&'static str),
    #[error("construction failed: {0}")]
    ConstructionFailure(String),
    #[error("row-completion sum is zero; entries underdetermined")]
    SigmaZero,
    #[error("equivalence search infeasible for dimension {0} > 7")]
    DimensionTooLarge(usize),
    #[error("bad input: {0}")]
    BadInput(String),
}

/// A complex Hadamard matrix: unitary with all entry moduli equal to 1/√d.
#[derive(Clone, Debug)]
pub struct HadamardMatrix {
    pub dim: usize,
    pub family: Family,
    pub params: Vec<Rat>,
    pub branch: Option<Sign>,
    pub digits: u32,
    pub entries: Vec<Vec<Cplx>>,
}

impl HadamardMatrix {
    pub fn entry(&self, j: usize, k: usize) -> &Cplx {
        &self.entries[j][k]
    }

    pub fn to_f64(&self) -> Vec<Vec<(f64, f64)>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|z| z.to_f64()).collect())
            .collect()
    }

    pub fn transpose(&self) -> HadamardMatrix {
        let d = self.dim;
        let entries = (0..d)
            .map(|j| (0..d).map(|k| self.entries[k][j].clone()).collect())
            .collect();
        HadamardMatrix { entries, family: Family::Custom, ..self.clone() }
    }

    pub fn conj(&self) -> HadamardMatrix {
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().map(|z| z.conj()).collect())
            .collect();
        HadamardMatrix { entries, family: Family::Custom, ..self.clone() }
    }

    /// Label like "dita(1/8)" used in logs and result stores.
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            format!("{}[d={}]", self.family, self.dim)
        } else {
            let ps: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
            let b = match self.branch {
                Some(s) => format!(";{}", s.as_str()),
                None => String::new(),
            };
            format!("{}({}{})", self.family, ps.join(","), b)
        }
    }
}

/// Fundamental-region membership tests for each parametrized family.
pub struct FundamentalRegion {
    pub family: Family,
}

impl FundamentalRegion {
    pub fn new(family: Family) -> Self {
        FundamentalRegion { family }
    }

    pub fn describe(&self) -> &'static str {
        match self.family {
            Family::Fourier | Family::FourierT => {
                "triangle with vertices (0,0), (1/6,0), (1/6,1/12): 0 <= x1 <= 1/6, 0 <= x2 <= x1/2"
            }
            Family::Dita => "|x| <= 1/8",
            Family::Symmetric => "t in [0, 1/2]",
            Family::Hermitean => "theta in [theta0, 1-theta0], 2*pi*theta0 = acos(1-sqrt(3))",
            Family::Szollosi | Family::SzollosiT => {
                "D(a+ib) <= 0, D(-a-ib) <= 0, 0 <= arg(a+ib) <= pi/3"
            }
            _ => "no parameters",
        }
    }

    /// Membership at the working precision. Exact for families with rational
    /// region boundaries; for the Hermitean interval the irrational endpoint
    /// is compared with slack 10^(2−digits).
    pub fn contains(&self, params: &[Rat], digits: u32) -> Result<bool, CatalogError> {
        match self.family {
            Family::Fourier | Family::FourierT => {
                if params.is_empty() {
                    return Ok(true);
                }
                let [x1, x2] = two(params, "fourier")?;
                Ok(x1.cmp0() != Ordering::Less
                    && *x1 <= Rat::from((1, 6))
                    && x2.cmp0() != Ordering::Less
                    && Rat::from(x2 * 2u32) <= *x1)
            }
            Family::Dita => {
                let x = one(params, "dita")?;
                Ok(Rat::from(x.clone().abs()) <= Rat::from((1, 8)))
            }
            Family::Symmetric => {
                let t = one(params, "symmetric")?;
                Ok(t.cmp0() != Ordering::Less && *t <= Rat::from((1, 2)))
            }
            Family::Hermitean => {
                let th = one(params, "hermitean")?;
                let t0 = theta0(digits + 5);
                let slack = Real::from_rat(&crate::rat::pow10_neg(digits.saturating_sub(2)), digits + 5);
                let th_ap = Real::from_rat(th, digits + 5);
                let lo = t0.sub(&slack);
                let hi = Real::from_u32(1, digits + 5).sub(&t0).add(&slack);
                Ok(th_ap.f >= lo.f && th_ap.f <= hi.f)
            }
            Family::Szollosi | Family::SzollosiT => {
                let [a, b] = two(params, "szollosi")?;
                if a.cmp0() == Ordering::Equal && b.cmp0() == Ordering::Equal {
                    return Ok(true);
                }
                // 0 <= arg <= pi/3  <=>  b >= 0, a >= 0  (sector bounded by
                // b = sqrt(3) a), tested exactly as b^2 <= 3 a^2
                let sector = b.cmp0() != Ordering::Less
                    && a.cmp0() != Ordering::Less
                    && Rat::from(b * b) <= Rat::from(3) * Rat::from(a * a);
                let zero = Rat::new();
                Ok(sector && deltoid(a, b) <= zero && deltoid(&-a.clone(), b) <= zero)
            }
            _ => Ok(params.is_empty()),
        }
    }
}

/// Deltoid discriminant |α|⁴ + 18|α|² − 8 Re(α³) − 27 for α = a + ib,
/// evaluated exactly over the rationals.
pub fn deltoid(a: &Rat, b: &Rat) -> Rat {
    let m2 = Rat::from(a * a) + Rat::from(b * b);
    let re_a3 = Rat::from(a * a) * a - Rat::from(3) * a * Rat::from(b * b);
    Rat::from(&m2 * &m2) + Rat::from(18) * m2 - Rat::from(8) * re_a3 - Rat::from(27)
}

/// θ₀ with 2πθ₀ = acos(1 − √3): lower endpoint of the Hermitean interval.
pub fn theta0(digits: u32) -> Real {
    let w = digits + 10;
    let one = Real::from_u32(1, w);
    let arg = one.sub(&Real::from_u32(3, w).sqrt());
    let two_pi = Real::pi(w).mul(&Real::from_u32(2, w));
    let mut r = arg.acos().div(&two_pi);
    r.digits = digits;
    r
}

fn one<'a>(params: &'a [Rat], fam: &str) -> Result<&'a Rat, CatalogError> {
    match params {
        [p] => Ok(p),
        _ => Err(CatalogError::BadInput(format!(
            "{fam} takes 1 parameter, got {}",
            params.len()
        ))),
    }
}

fn two<'a>(params: &'a [Rat], fam: &str) -> Result<[&'a Rat; 2], CatalogError> {
    match params {
        [p, q] => Ok([p, q]),
        _ => Err(CatalogError::BadInput(format!(
            "{fam} takes 2 parameters, got {}",
            params.len()
        ))),
    }
}

/// Builds a family member, checking the fundamental region first.
pub fn build(
    family: Family,
    dim: usize,
    params: &[Rat],
    branch: Option<Sign>,
    digits: u32,
) -> Result<HadamardMatrix, CatalogError> {
    if !FundamentalRegion::new(family).contains(params, digits)? {
        return Err(CatalogError::OutOfRegion(family.name()));
    }
    build_unchecked(family, dim, params, branch, digits)
}

/// Builds a family member without the region check (explicit override).
pub fn build_unchecked(
    family: Family,
    dim: usize,
    params: &[Rat],
    branch: Option<Sign>,
    digits: u32,
) -> Result<HadamardMatrix, CatalogError> {
    if digits < MIN_DIGITS {
        return Err(CatalogError::BadInput(format!(
            "precision {digits} below minimum {MIN_DIGITS}"
        )));
    }
    let w = digits + GUARD_DIGITS;
    let entries = match family {
        Family::Fourier | Family::FourierT => fourier_entries(dim, params, w)?,
        Family::Dita => dita_entries(dim, params, w)?,
        Family::Hermitean => hermitean_entries(dim, params, branch.unwrap_or(Sign::Plus), w)?,
        Family::Symmetric => {
            let t = one(params, "symmetric")?;
            let e = solve_symmetric_entries(t, w)?;
            symmetric_assemble(&e, w)
        }
        Family::Szollosi | Family::SzollosiT => {
            let [a, b] = two(params, "szollosi")?;
            let e = solve_szollosi_entries(a, b, w)?;
            let m = szollosi_assemble(&e, w);
            if family == Family::SzollosiT {
                transpose_entries(&m)
            } else {
                m
            }
        }
        Family::Circulant => circulant_entries(dim, w)?,
        Family::Spectral => spectral_entries(dim, w)?,
        Family::Custom => {
            return Err(CatalogError::BadInput(
                "custom matrices are loaded from JSON, not built".into(),
            ))
        }
    };
    let entries = if family == Family::FourierT {
        transpose_entries(&entries)
    } else {
        entries
    };
    let m = HadamardMatrix {
        dim: entries.len(),
        family,
        params: params.to_vec(),
        branch,
        digits,
        entries,
    };
    let tol = tol_for(digits);
    let v = validate_hadamard(&m, tol);
    if !v.pass {
        return Err(CatalogError::ConstructionFailure(format!(
            "{} fails validation: unitarity defect {:.3e}, modulus defect {:.3e}",
            m.label(),
            v.unitarity_defect,
            v.modulus_defect
        )));
    }
    Ok(m)
}

pub fn tol_for(digits: u32) -> f64 {
    10f64.powi(2 - digits as i32)
}

fn inv_sqrt_d(d: usize, w: u32) -> Real {
    Real::from_u32(1, w).div(&Real::from_u32(d as u32, w).sqrt())
}

fn transpose_entries(e: &[Vec<Cplx>]) -> Vec<Vec<Cplx>> {
    let d = e.len();
    (0..d).map(|j| (0..d).map(|k| e[k][j].clone()).collect()).collect()
}

fn fourier_entries(dim: usize, params: &[Rat], w: u32) -> Result<Vec<Vec<Cplx>>, CatalogError> {
    if dim < 2 {
        return Err(CatalogError::BadInput(format!("dimension {dim} < 2")));
    }
    if !params.is_empty() && dim != 6 {
        return Err(CatalogError::BadInput(
            "fourier parameters (x1,x2) require dimension 6".into(),
        ));
    }
    let s = inv_sqrt_d(dim, w);
    let mut rows = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut row = Vec::with_capacity(dim);
        for k in 0..dim {
            let mut t = Rat::from(((j * k) as u64, dim as u64));
            if !params.is_empty() && j % 2 == 1 {
                // rows 1,3,5 carry the phase pattern (0, x1, x2, 0, x1, x2)
                match k % 3 {
                    1 => t += &params[0],
                    2 => t += &params[1],
                    _ => {}
                }
            }
            row.push(Cplx::unit_phase(&t, w).scale(&s));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Phase table of the parameter-free core D₀, in units of quarter turns.
const DITA0_QUARTER_TURNS: [[i32; 6]; 6] = [
    [0, 0, 0, 0, 0, 0],
    [0, 2, 1, 3, 3, 1],
    [0, 1, 2, 1, 3, 3],
    [0, 3, 1, 2, 1, 3],
    [0, 3, 3, 1, 2, 1],
    [0, 1, 3, 3, 1, 2],
];

/// Parameter phase pattern: entry (j,k) picks up exp(2πi·c·x) with c below.
const DITA_X_PATTERN: [[i32; 6]; 6] = [
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 1, 1, 0],
    [0, 0, -1, 0, 0, -1],
    [0, 0, -1, 0, 0, -1],
    [0, 0, 0, 1, 1, 0],
];

fn dita_entries(dim: usize, params: &[Rat], w: u32) -> Result<Vec<Vec<Cplx>>, CatalogError> {
    if dim != 6 {
        return Err(CatalogError::BadInput("dita family requires dimension 6".into()));
    }
    let x = one(params, "dita")?;
    let s = inv_sqrt_d(6, w);
    let mut rows = Vec::with_capacity(6);
    for j in 0..6 {
        let mut row = Vec::with_capacity(6);
        for k in 0..6 {
            let mut t = Rat::from((DITA0_QUARTER_TURNS[j][k], 4));
            t += Rat::from(DITA_X_PATTERN[j][k]) * x;
            row.push(Cplx::unit_phase(&t, w).scale(&s));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn hermitean_entries(
    dim: usize,
    params: &[Rat],
    branch: Sign,
    w: u32,
) -> Result<Vec<Vec<Cplx>>, CatalogError> {
    if dim != 6 {
        return Err(CatalogError::BadInput("hermitean family requires dimension 6".into()));
    }
    let th = one(params, "hermitean")?;
    let y = Cplx::unit_phase(th, w);
    let one_c = Cplx::one(w);
    let two = Cplx::from_f64(2.0, 0.0, w);
    let y2 = y.mul(&y);
    // z = (1 + 2y - y^2) / (y (-1 + 2y + y^2))
    let zn = one_c.add(&two.mul(&y)).sub(&y2);
    let zd = y.mul(&two.mul(&y).sub(&one_c).add(&y2));
    let z = zn.div(&zd);
    // x = (1 + 2y + y^2 ± sqrt(2 (1 + 2y + 2y^3 + y^4))) / (1 + 2y - y^2)
    let y3 = y2.mul(&y);
    let y4 = y2.mul(&y2);
    let rad = two.mul(&one_c.add(&two.mul(&y)).add(&two.mul(&y3)).add(&y4));
    let root = rad.sqrt();
    let num0 = one_c.add(&two.mul(&y)).add(&y2);
    let num = match branch {
        Sign::Plus => num0.add(&root),
        Sign::Minus => num0.sub(&root),
    };
    let x = num.div(&zn);
    let t = x.mul(&y).mul(&z);

    // Hermitean layout with diagonal (1,-1,1,-1,1,-1); fully determined by
    // requiring unitarity of the completed matrix (unique sign pattern).
    let o = || Cplx::one(w);
    let xc = x.conj();
    let yc = y.conj();
    let zc = z.conj();
    let tc = t.conj();
    let rows: Vec<Vec<Cplx>> = vec![
        vec![o(), o(), o(), o(), o(), o()],
        vec![o(), o().neg(), xc.neg(), y.neg(), y.clone(), xc.clone()],
        vec![o(), x.neg(), o(), y.clone(), zc.clone(), tc.neg()],
        vec![o(), yc.neg(), yc.clone(), o().neg(), tc.neg(), tc.clone()],
        vec![o(), yc.clone(), z.clone(), t.neg(), o(), xc.neg()],
        vec![o(), x.clone(), t.neg(), t.clone(), x.neg(), o().neg()],
    ];
    let s = inv_sqrt_d(6, w);
    Ok(rows.into_iter().map(|r| r.into_iter().map(|e| e.scale(&s)).collect()).collect())
}

/// Unit-modulus entries of the symmetric family member M(t).
#[derive(Clone, Debug)]
pub struct SymmetricEntries {
    pub x: Cplx,
    pub a: Cplx,
    pub b: Cplx,
    pub c: Cplx,
    pub d: Cplx,
    pub p: Cplx,
    pub q: Cplx,
}

/// Both unit-modulus completions of a pair with the given sum:
/// u, v = s/2 ± i (s/|s|) sqrt(1 − |s/2|²).
fn pair_completions(s: &Cplx, w: u32) -> Vec<(Cplx, Cplx)> {
    let half = Cplx::from_f64(0.5, 0.0, w);
    let h = s.mul(&half);
    let one = Real::from_u32(1, w);
    let disc = one.sub(&h.norm_sq());
    // |s/2| <= 1 must hold for unit-modulus completion; tiny negatives are
    // roundoff on tangent cases
    let root = if disc.cmp0() == Ordering::Less {
        Cplx::new(Real::new(w), disc.neg().sqrt())
    } else {
        Cplx::new(disc.sqrt(), Real::new(w))
    };
    let dir = s.phase();
    let i_dir = Cplx::new(dir.im.neg(), dir.re.clone()); // i * dir
    let off = i_dir.mul(&root);
    let u = h.add(&off);
    let v = h.sub(&off);
    vec![(u.clone(), v.clone()), (v, u)]
}

fn symmetric_assemble(e: &SymmetricEntries, w: u32) -> Vec<Vec<Cplx>> {
    let o = || Cplx::one(w);
    let SymmetricEntries { x, a, b, c, d, p, q } = e;
    let rows: Vec<Vec<Cplx>> = vec![
        vec![o(), o(), o(), o(), o(), o()],
        vec![o(), o().neg(), x.clone(), x.clone(), x.neg(), x.neg()],
        vec![o(), x.clone(), d.clone(), a.clone(), b.clone(), c.clone()],
        vec![o(), x.clone(), a.clone(), d.clone(), c.clone(), b.clone()],
        vec![o(), x.neg(), b.clone(), c.clone(), p.clone(), q.clone()],
        vec![o(), x.neg(), c.clone(), b.clone(), q.clone(), p.clone()],
    ];
    let s = inv_sqrt_d(6, w);
    rows.into_iter().map(|r| r.into_iter().map(|z| z.scale(&s)).collect()).collect()
}

/// Solves the symmetric-family entry equations at x = e^(2πit).
///
/// The four defining equations determine the pair sums a+d, b+c, p+q; each
/// pair is completed to unit-modulus entries, and the assignment that makes
/// the assembled matrix a Hadamard matrix is selected deterministically. At
/// t = 1/4 the sum b+c vanishes and the pair is recovered instead from the
/// orthogonality of rows 2 and 4, b² = −(d−a)/conj(p−q).
pub fn solve_symmetric_entries(t: &Rat, digits: u32) -> Result<SymmetricEntries, CatalogError> {
    let w = digits + GUARD_DIGITS;
    let x = Cplx::unit_phase(t, w);
    let one = Cplx::one(w);
    let two = Cplx::from_f64(2.0, 0.0, w);
    let half = Cplx::from_f64(0.5, 0.0, w);
    let x2 = x.mul(&x);
    // a+d = (x² − 2x − 1)/2,  b+c = −(x² + 1)/2,  p+q = x − 1 + (x² + 1)/2
    let s_ad = x2.sub(&two.mul(&x)).sub(&one).mul(&half);
    let s_bc = x2.add(&one).mul(&half).neg();
    let s_pq = x.sub(&one).add(&x2.add(&one).mul(&half));

    let degenerate = Real::from_rat(&crate::rat::pow10_neg(digits / 2 + 5), w);
    let bc_degenerate = s_bc.abs().f < degenerate.f;

    let ad_opts = pair_completions(&s_ad, w);
    let pq_opts = pair_completions(&s_pq, w);
    let tol = tol_for(digits);

    for (a, d) in &ad_opts {
        for (p, q) in &pq_opts {
            let bc_opts: Vec<(Cplx, Cplx)> = if bc_degenerate {
                // b + c = 0: pin b from row-2 ⊥ row-4, (d−a) b̄ + b (p̄−q̄) = 0
                let num = d.sub(a).neg();
                let den = p.sub(q).conj();
                if den.abs().f < degenerate.f {
                    continue;
                }
                let b = num.div(&den).sqrt();
                vec![(b.clone(), b.neg()), (b.clone().neg(), b)]
            } else {
                pair_completions(&s_bc, w)
            };
            for (b, c) in &bc_opts {
                let cand = SymmetricEntries {
                    x: x.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                    d: d.clone(),
                    p: p.clone(),
                    q: q.clone(),
                };
                let m = HadamardMatrix {
                    dim: 6,
                    family: Family::Symmetric,
                    params: vec![t.clone()],
                    branch: None,
                    digits,
                    entries: symmetric_assemble(&cand, w),
                };
                if validate_hadamard(&m, tol).pass {
                    return Ok(cand);
                }
            }
        }
    }
    if bc_degenerate {
        Err(CatalogError::SigmaZero)
    } else {
        Err(CatalogError::ConstructionFailure(format!(
            "no entry assignment for symmetric family at t={t} validates"
        )))
    }
}

/// Root entries of the two cubics defining the Szöllősi matrix X(a,b).
#[derive(Clone, Debug)]
pub struct SzollosiEntries {
    pub x: Cplx,
    pub y: Cplx,
    pub u: Cplx,
    pub v: Cplx,
}

fn szollosi_assemble(e: &SzollosiEntries, w: u32) -> Vec<Vec<Cplx>> {
    let o = || Cplx::one(w);
    let SzollosiEntries { x, y, u, v } = e;
    let xy = x.mul(y);
    let uv = u.mul(v);
    let x2y = x.mul(x).mul(y);
    let xy2 = x.mul(&y.mul(y));
    let xy_uv = xy.div(&uv);
    let uxy = u.mul(&xy);
    let vxy = v.mul(&xy);
    let x_y = x.div(y);
    let x_u = x.div(u);
    let x_v = x.div(v);
    let uvx = uv.mul(x);
    let rows: Vec<Vec<Cplx>> = vec![
        vec![o(), o(), o(), o(), o(), o()],
        vec![o(), x2y.clone(), xy2.clone(), xy_uv.clone(), uxy.clone(), vxy.clone()],
        vec![o(), x_y.clone(), x2y.clone(), x_u.clone(), x_v.clone(), uvx.clone()],
        vec![o(), uvx.clone(), uxy.clone(), o().neg(), uxy.neg(), uvx.neg()],
        vec![o(), x_u.clone(), vxy.clone(), x_u.neg(), o().neg(), vxy.neg()],
        vec![o(), x_v.clone(), xy_uv.clone(), xy_uv.neg(), x_v.neg(), o().neg()],
    ];
    let s = inv_sqrt_d(6, w);
    rows.into_iter().map(|r| r.into_iter().map(|z| z.scale(&s)).collect()).collect()
}

/// Roots of z³ − αz² + α*z − 1, sorted by argument (ascending).
fn cubic_roots_sorted(alpha: &Cplx, w: u32) -> Vec<Cplx> {
    let c2 = alpha.neg();
    let c1 = alpha.conj();
    let c0 = Cplx::one(w).neg();
    let mut roots = cubic_roots(&c2, &c1, &c0);
    roots.sort_by(|p, q| {
        p.arg()
            .f
            .partial_cmp(&q.arg().f)
            .unwrap_or(Ordering::Equal)
    });
    roots
}

/// Picks roots (x,y) of f_α and (u,v) of f_{−α} making X(a,b) a Hadamard
/// matrix. Roots are sorted by argument and assignments tried in index order;
/// the first valid one wins.
pub fn solve_szollosi_entries(a: &Rat, b: &Rat, digits: u32) -> Result<SzollosiEntries, CatalogError> {
    let w = digits + GUARD_DIGITS;
    let alpha = Cplx::new(Real::from_rat(a, w), Real::from_rat(b, w));
    let rp = cubic_roots_sorted(&alpha, w);
    let rm = cubic_roots_sorted(&alpha.neg(), w);
    let tol = tol_for(digits);
    for x in &rp {
        for y in &rp {
            for u in &rm {
                for v in &rm {
                    let cand = SzollosiEntries {
                        x: x.clone(),
                        y: y.clone(),
                        u: u.clone(),
                        v: v.clone(),
                    };
                    let m = HadamardMatrix {
                        dim: 6,
                        family: Family::Szollosi,
                        params: vec![a.clone(), b.clone()],
                        branch: None,
                        digits,
                        entries: szollosi_assemble(&cand, w),
                    };
                    if validate_hadamard(&m, tol).pass {
                        return Ok(cand);
                    }
                }
            }
        }
    }
    Err(CatalogError::ConstructionFailure(format!(
        "no root assignment at alpha = {a} + {b} i yields a Hadamard matrix"
    )))
}

fn circulant_entries(dim: usize, w: u32) -> Result<Vec<Vec<Cplx>>, CatalogError> {
    if dim != 6 {
        return Err(CatalogError::BadInput("circulant matrix has dimension 6".into()));
    }
    // z = (1 − √3)/2 + i sqrt(√3 / 2)
    let one = Real::from_u32(1, w);
    let s3 = Real::from_u32(3, w).sqrt();
    let two = Real::from_u32(2, w);
    let z = Cplx::new(one.sub(&s3).div(&two), s3.div(&two).sqrt());
    let i = Cplx::new(Real::new(w), Real::from_u32(1, w));
    let zc = z.conj();
    let c = [
        Cplx::one(w),
        i.mul(&z),
        z.neg(),
        i.neg(),
        zc.neg(),
        i.mul(&zc),
    ];
    let s = inv_sqrt_d(6, w);
    Ok((0..6)
        .map(|j| (0..6).map(|k| c[(k + 6 - j) % 6].scale(&s)).collect())
        .collect())
}

/// Phase table of the spectral matrix in units of third turns.
const SPECTRAL_THIRD_TURNS: [[i32; 6]; 6] = [
    [0, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 2, 2],
    [0, 1, 0, 2, 2, 1],
    [0, 1, 2, 0, 1, 2],
    [0, 2, 2, 1, 0, 1],
    [0, 2, 1, 2, 1, 0],
];

fn spectral_entries(dim: usize, w: u32) -> Result<Vec<Vec<Cplx>>, CatalogError> {
    if dim != 6 {
        return Err(CatalogError::BadInput("spectral matrix has dimension 6".into()));
    }
    let s = inv_sqrt_d(6, w);
    Ok((0..6)
        .map(|j| {
            (0..6)
                .map(|k| {
                    let t = Rat::from((SPECTRAL_THIRD_TURNS[j][k], 3));
                    Cplx::unit_phase(&t, w).scale(&s)
                })
                .collect()
        })
        .collect())
}

/// Validation report: both defects are maximum absolute deviations.
#[derive(Clone, Copy, Debug)]
pub struct Validation {
    pub pass: bool,
    pub unitarity_defect: f64,
    pub modulus_defect: f64,
}

/// Checks unitarity (H†H = I) and the entry-modulus condition |H_jk| = 1/√d.
pub fn validate_hadamard(h: &HadamardMatrix, tol: f64) -> Validation {
    let d = h.dim;
    let w = h.entries[0][0].digits();
    let target = inv_sqrt_d(d, w);
    let mut modulus_defect = 0f64;
    for row in &h.entries {
        for z in row {
            let dev = z.abs().sub(&target).abs().to_f64();
            modulus_defect = modulus_defect.max(dev);
        }
    }
    let mut unitarity_defect = 0f64;
    for j in 0..d {
        for k in j..d {
            let mut acc = Cplx::zero(w);
            for l in 0..d {
                acc = acc.add(&h.entries[l][j].conj().mul(&h.entries[l][k]));
            }
            let dev = if j == k {
                acc.sub(&Cplx::one(w)).abs().to_f64()
            } else {
                acc.abs().to_f64()
            };
            unitarity_defect = unitarity_defect.max(dev);
        }
    }
    Validation {
        pass: unitarity_defect < tol && modulus_defect < tol,
        unitarity_defect,
        modulus_defect,
    }
}

/// Dephased form: first row and first column made real positive (= 1/√d) by
/// row and column phase factors.
pub fn dephase(h: &HadamardMatrix) -> HadamardMatrix {
    let d = h.dim;
    let mut e = h.entries.clone();
    for j in 0..d {
        let ph = e[j][0].phase().conj();
        for k in 0..d {
            e[j][k] = e[j][k].mul(&ph);
        }
    }
    for k in 1..d {
        let ph = e[0][k].phase().conj();
        for j in 0..d {
            e[j][k] = e[j][k].mul(&ph);
        }
    }
    HadamardMatrix { entries: e, ..h.clone() }
}

fn dephase_f64(e: &mut [[(f64, f64); 7]], d: usize) {
    for j in 0..d {
        let (re, im) = e[j][0];
        let m = (re * re + im * im).sqrt();
        let (pr, pi) = (re / m, -im / m);
        for k in 0..d {
            let (a, b) = e[j][k];
            e[j][k] = (a * pr - b * pi, a * pi + b * pr);
        }
    }
    for k in 1..d {
        let (re, im) = e[0][k];
        let m = (re * re + im * im).sqrt();
        let (pr, pi) = (re / m, -im / m);
        for j in 0..d {
            let (a, b) = e[j][k];
            e[j][k] = (a * pr - b * pi, a * pi + b * pr);
        }
    }
}

/// Equivalence under row/column permutations and phases: searches all
/// permutation pairs, dephasing after each, and compares entrywise.
///
/// The search runs in f64 (entry noise ~1e-15, prefilter tolerance 1e-9 or
/// the caller's tolerance if looser); candidate permutations are confirmed in
/// full precision when the caller's tolerance is tighter than the prefilter.
pub fn equivalent(h1: &HadamardMatrix, h2: &HadamardMatrix, tol: f64) -> Result<bool, CatalogError> {
    if h1.dim != h2.dim {
        return Ok(false);
    }
    let d = h1.dim;
    if d > 7 {
        return Err(CatalogError::DimensionTooLarge(d));
    }
    let pre_tol = tol.max(1e-9);

    let grab = |h: &HadamardMatrix| -> [[(f64, f64); 7]; 7] {
        let mut e = [[(0f64, 0f64); 7]; 7];
        for j in 0..d {
            for k in 0..d {
                e[j][k] = h.entries[j][k].to_f64();
            }
        }
        e
    };
    let e1 = {
        let mut e = grab(h1);
        dephase_f64(&mut e, d);
        e
    };
    let e2 = grab(h2);

    let perms = permutations(d);
    for pr in &perms {
        for pc in &perms {
            let mut cand = [[(0f64, 0f64); 7]; 7];
            for j in 0..d {
                for k in 0..d {
                    cand[j][k] = e2[pr[j]][pc[k]];
                }
            }
            dephase_f64(&mut cand, d);
            let mut ok = true;
            'cmp: for j in 0..d {
                for k in 0..d {
                    let dr = cand[j][k].0 - e1[j][k].0;
                    let di = cand[j][k].1 - e1[j][k].1;
                    if dr * dr + di * di > pre_tol * pre_tol {
                        ok = false;
                        break 'cmp;
                    }
                }
            }
            if ok {
                if tol >= 1e-9 || confirm_equivalent_ap(h1, h2, pr, pc, tol) {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

fn confirm_equivalent_ap(
    h1: &HadamardMatrix,
    h2: &HadamardMatrix,
    pr: &[usize],
    pc: &[usize],
    tol: f64,
) -> bool {
    let d = h1.dim;
    let permuted = HadamardMatrix {
        entries: (0..d)
            .map(|j| (0..d).map(|k| h2.entries[pr[j]][pc[k]].clone()).collect())
            .collect(),
        ..h2.clone()
    };
    let a = dephase(h1);
    let b = dephase(&permuted);
    for j in 0..d {
        for k in 0..d {
            if a.entries[j][k].sub(&b.entries[j][k]).abs().to_f64() >= tol {
                return false;
            }
        }
    }
    true
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..d).collect();
    heap_permute(&mut cur, d, &mut out);
    out.sort();
    out
}

fn heap_permute(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..k {
        heap_permute(arr, k - 1, out);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

// ---------------------------------------------------------------------------
// JSON interchange

impl HadamardMatrix {
    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|z| json!([z.re.to_decimal(), z.im.to_decimal()]))
                        .collect(),
                )
            })
            .collect();
        let mut obj = json!({
            "dim": self.dim,
            "family": self.family.name(),
            "params": self.params.iter().map(|p| rat_to_decimal(p, self.digits)).collect::<Vec<_>>(),
            "entries": entries,
        });
        if let Some(b) = self.branch {
            obj["branch"] = json!(b.as_str());
        }
        obj
    }

    pub fn from_json(v: &Value) -> Result<HadamardMatrix, CatalogError> {
        let bad = |m: &str| CatalogError::BadInput(m.to_string());
        let dim = v["dim"].as_u64().ok_or_else(|| bad("missing dim"))? as usize;
        let family = v["family"]
            .as_str()
            .and_then(Family::from_name)
            .ok_or_else(|| bad("missing or unknown family"))?;
        let params = v["params"]
            .as_array()
            .ok_or_else(|| bad("missing params"))?
            .iter()
            .map(|p| {
                p.as_str()
                    .ok_or_else(|| bad("param not a string"))
                    .and_then(|s| rat_from_decimal(s).map_err(CatalogError::BadInput))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let branch = match v.get("branch") {
            Some(Value::String(s)) => {
                Some(Sign::from_str(s).ok_or_else(|| bad("branch must be + or -"))?)
            }
            _ => None,
        };
        let rows = v["entries"].as_array().ok_or_else(|| bad("missing entries"))?;
        if rows.len() != dim {
            return Err(bad("entries row count != dim"));
        }
        let mut digits = MIN_DIGITS;
        let mut parsed: Vec<Vec<(Rat, Rat)>> = Vec::with_capacity(dim);
        for row in rows {
            let row = row.as_array().ok_or_else(|| bad("entry row not an array"))?;
            if row.len() != dim {
                return Err(bad("entries column count != dim"));
            }
            let mut prow = Vec::with_capacity(dim);
            for z in row {
                let pair = z.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad("entry not [re,im]"))?;
                let re_s = pair[0].as_str().ok_or_else(|| bad("re not a string"))?;
                let im_s = pair[1].as_str().ok_or_else(|| bad("im not a string"))?;
                digits = digits.max(sig_len(re_s)).max(sig_len(im_s));
                let re = rat_from_decimal(re_s).map_err(CatalogError::BadInput)?;
                let im = rat_from_decimal(im_s).map_err(CatalogError::BadInput)?;
                prow.push((re, im));
            }
            parsed.push(prow);
        }
        let entries = parsed
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|(re, im)| Cplx::new(Real::from_rat(&re, digits), Real::from_rat(&im, digits)))
                    .collect()
            })
            .collect();
        Ok(HadamardMatrix { dim, family, params, branch, digits, entries })
    }
}

fn sig_len(s: &str) -> u32 {
    s.chars().filter(|c| c.is_ascii_digit()).count() as u32
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apf::cplx_dist_f64;

    fn f(s: &str) -> Rat {
        rat_from_decimal(s).unwrap()
    }

    #[test]
    fn fourier_d3_validates() {
        let h = build(Family::Fourier, 3, &[], None, 40).unwrap();
        let v = validate_hadamard(&h, 1e-38);
        assert!(v.pass, "{v:?}");
        // entry (1,2) = omega^2 / sqrt(3)
        let (re, im) = h.entry(1, 2).to_f64();
        assert!((re - (-0.5) / 3f64.sqrt()).abs() < 1e-14);
        assert!((im - (-0.75f64.sqrt()) / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn dita_zero_entries() {
        let h = build(Family::Dita, 6, &[f("0")], None, 40).unwrap();
        // entries in {1, -1, i, -i}/sqrt(6)
        for row in &h.entries {
            for z in row {
                let (re, im) = z.to_f64();
                let s = 6f64.sqrt();
                let ok = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
                    .iter()
                    .any(|(a, b)| (re - a / s).abs() < 1e-14 && (im - b / s).abs() < 1e-14);
                assert!(ok, "unexpected entry ({re}, {im})");
            }
        }
        assert!(validate_hadamard(&h, 1e-38).pass);
    }

    #[test]
    fn dita_family_validates() {
        let h = build(Family::Dita, 6, &[f("1/144")], None, 40).unwrap();
        assert!(validate_hadamard(&h, 1e-38).pass);
        assert!(build(Family::Dita, 6, &[f("0.2")], None, 40).is_err());
    }

    #[test]
    fn fourier_family_region() {
        assert!(build(Family::Fourier, 6, &[f("1/6"), f("1/12")], None, 40).is_ok());
        assert!(matches!(
            build(Family::Fourier, 6, &[f("1/6"), f("1/11")], None, 40),
            Err(CatalogError::OutOfRegion(_))
        ));
        assert!(build_unchecked(Family::Fourier, 6, &[f("1/6"), f("1/11")], None, 40).is_ok());
    }

    #[test]
    fn spectral_and_circulant_validate() {
        let s = build(Family::Spectral, 6, &[], None, 40).unwrap();
        assert!(validate_hadamard(&s, 1e-38).pass);
        let c = build(Family::Circulant, 6, &[], None, 40).unwrap();
        assert!(validate_hadamard(&c, 1e-38).pass);
    }

    #[test]
    fn symmetric_at_quarter() {
        // the b+c = 0 degenerate point must still construct
        let h = build(Family::Symmetric, 6, &[f("1/4")], None, 40).unwrap();
        assert!(validate_hadamard(&h, 1e-38).pass);
    }

    #[test]
    fn symmetric_generic_point() {
        let h = build(Family::Symmetric, 6, &[f("17/144")], None, 40).unwrap();
        assert!(validate_hadamard(&h, 1e-38).pass);
    }

    #[test]
    fn hermitean_interval() {
        let t0 = theta0(40);
        assert!((t0.to_f64() - 0.3807183253753336).abs() < 1e-14);
        let th = f("0.45");
        let h = build(Family::Hermitean, 6, &[th], None, 40).unwrap();
        assert!(validate_hadamard(&h, 1e-38).pass);
        assert!(matches!(
            build(Family::Hermitean, 6, &[f("0.2")], None, 40),
            Err(CatalogError::OutOfRegion(_))
        ));
    }

    #[test]
    fn szollosi_origin() {
        let h = build(Family::Szollosi, 6, &[f("0"), f("0")], None, 40).unwrap();
        assert!(validate_hadamard(&h, 1e-38).pass);
    }

    #[test]
    fn dephase_fixed_point() {
        let h = build(Family::Fourier, 6, &[], None, 40).unwrap();
        let d = dephase(&h);
        for j in 0..6 {
            for k in 0..6 {
                assert!(cplx_dist_f64(&h.entries[j][k], &d.entries[j][k]) < 1e-30);
            }
        }
    }

    #[test]
    fn equivalence_reflexive_and_negative() {
        let h = build(Family::Fourier, 6, &[], None, 30).unwrap();
        assert!(equivalent(&h, &h, 1e-12).unwrap());
        let s = build(Family::Spectral, 6, &[], None, 30).unwrap();
        assert!(!equivalent(&h, &s, 1e-12).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let h = build(Family::Dita, 6, &[f("1/8")], None, 40).unwrap();
        let v = h.to_json();
        let back = HadamardMatrix::from_json(&v).unwrap();
        assert_eq!(back.dim, 6);
        assert_eq!(back.family, Family::Dita);
        for j in 0..6 {
            for k in 0..6 {
                assert!(cplx_dist_f64(&h.entries[j][k], &back.entries[j][k]) < 1e-35);
            }
        }
        assert!(validate_hadamard(&back, 1e-30).pass);
    }

    #[test]
    fn deltoid_values() {
        assert_eq!(deltoid(&f("0"), &f("0")), Rat::from(-27));
        // |alpha| = 3 on the real axis: D = 81 + 162 - 216 - 27 = 0
        assert_eq!(deltoid(&f("3"), &f("0")), Rat::from(0));
    }
}

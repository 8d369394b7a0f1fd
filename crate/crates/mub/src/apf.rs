//! Arbitrary-precision real and complex floats for matrix entries.
//!
//! Thin layer over MPFR (`rug::Float`). Precision is tracked in decimal
//! digits; binary working precision carries guard bits so that results are
//! good to the stated digits. Arithmetic results carry the minimum precision
//! of their operands.

use crate::rat::{rat_from_decimal, Rat};
use rug::float::Round;
use rug::Float;
use std::cmp::Ordering;

pub const DEFAULT_DIGITS: u32 = 40;
const GUARD_BITS: u32 = 24;

pub fn bits_for(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + GUARD_BITS
}

/// Arbitrary-precision real number with decimal-digit precision tracking.
#[derive(Clone, Debug)]
pub struct Real {
    pub f: Float,
    pub digits: u32,
}

impl Real {
    pub fn new(digits: u32) -> Self {
        Real { f: Float::new(bits_for(digits)), digits }
    }

    pub fn from_f64(v: f64, digits: u32) -> Self {
        Real { f: Float::with_val(bits_for(digits), v), digits }
    }

    pub fn from_u32(v: u32, digits: u32) -> Self {
        Real { f: Float::with_val(bits_for(digits), v), digits }
    }

    pub fn from_rat(r: &Rat, digits: u32) -> Self {
        Real { f: Float::with_val(bits_for(digits), r), digits }
    }

    pub fn from_decimal(s: &str, digits: u32) -> Result<Self, String> {
        let r = rat_from_decimal(s)?;
        Ok(Self::from_rat(&r, digits))
    }

    pub fn pi(digits: u32) -> Self {
        let p = bits_for(digits);
        Real { f: Float::with_val(p, rug::float::Constant::Pi), digits }
    }

    fn meet(a: &Real, b: &Real) -> u32 {
        a.digits.min(b.digits)
    }

    pub fn add(&self, o: &Real) -> Real {
        let d = Real::meet(self, o);
        Real { f: Float::with_val(bits_for(d), &self.f + &o.f), digits: d }
    }

    pub fn sub(&self, o: &Real) -> Real {
        let d = Real::meet(self, o);
        Real { f: Float::with_val(bits_for(d), &self.f - &o.f), digits: d }
    }

    pub fn mul(&self, o: &Real) -> Real {
        let d = Real::meet(self, o);
        Real { f: Float::with_val(bits_for(d), &self.f * &o.f), digits: d }
    }

    pub fn div(&self, o: &Real) -> Real {
        let d = Real::meet(self, o);
        Real { f: Float::with_val(bits_for(d), &self.f / &o.f), digits: d }
    }

    pub fn neg(&self) -> Real {
        Real { f: Float::with_val(bits_for(self.digits), -&self.f), digits: self.digits }
    }

    pub fn abs(&self) -> Real {
        Real { f: Float::with_val(bits_for(self.digits), self.f.abs_ref()), digits: self.digits }
    }

    pub fn sqrt(&self) -> Real {
        Real { f: Float::with_val(bits_for(self.digits), self.f.sqrt_ref()), digits: self.digits }
    }

    pub fn sin(&self) -> Real {
        Real { f: Float::with_val(bits_for(self.digits), self.f.sin_ref()), digits: self.digits }
    }

    pub fn cos(&self) -> Real {
        Real { f: Float::with_val(bits_for(self.digits), self.f.cos_ref()), digits: self.digits }
    }

    pub fn acos(&self) -> Real {
        Real { f: Float::with_val(bits_for(self.digits), self.f.acos_ref()), digits: self.digits }
    }

    pub fn atan2(&self, x: &Real) -> Real {
        let d = Real::meet(self, x);
        Real { f: Float::with_val(bits_for(d), self.f.atan2_ref(&x.f)), digits: d }
    }

    pub fn to_f64(&self) -> f64 {
        self.f.to_f64()
    }

    /// Decimal string carrying the full tracked precision.
    pub fn to_decimal(&self) -> String {
        if self.f.is_zero() {
            return "0".into();
        }
        let (sign, digits, exp) = self.f.to_sign_string_exp_round(10, Some(self.digits as usize), Round::Nearest);
        let e = i64::from(exp.unwrap_or(0)) - 1; // exponent for d.ddd form
        let trimmed = digits.trim_end_matches('0');
        let ms = if trimmed.is_empty() { "0" } else { trimmed };
        let s = if sign { "-" } else { "" };
        format!("{s}{}", crate::rat::place_point(ms, e))
    }

    /// Nearest rational with denominator 2^k capturing full precision.
    pub fn to_rat(&self) -> Rat {
        self.f.to_rational().unwrap_or_default()
    }

    pub fn cmp0(&self) -> Ordering {
        self.f.cmp0().unwrap_or(Ordering::Equal)
    }
}

/// Arbitrary-precision complex number (pair of [`Real`]).
#[derive(Clone, Debug)]
pub struct Cplx {
    pub re: Real,
    pub im: Real,
}

impl Cplx {
    pub fn zero(digits: u32) -> Self {
        Cplx { re: Real::new(digits), im: Real::new(digits) }
    }

    pub fn one(digits: u32) -> Self {
        Cplx { re: Real::from_u32(1, digits), im: Real::new(digits) }
    }

    pub fn new(re: Real, im: Real) -> Self {
        Cplx { re, im }
    }

    pub fn from_f64(re: f64, im: f64, digits: u32) -> Self {
        Cplx { re: Real::from_f64(re, digits), im: Real::from_f64(im, digits) }
    }

    pub fn digits(&self) -> u32 {
        self.re.digits.min(self.im.digits)
    }

    /// e^(2πi t) for rational t, at full precision.
    pub fn unit_phase(t: &Rat, digits: u32) -> Self {
        let two_pi = Real::pi(digits + 8).mul(&Real::from_u32(2, digits + 8));
        let ang = two_pi.mul(&Real::from_rat(t, digits + 8));
        Cplx { re: ang.cos(), im: ang.sin() }.at_digits(digits)
    }

    /// e^(iθ) for a real angle θ.
    pub fn from_angle(theta: &Real) -> Self {
        Cplx { re: theta.cos(), im: theta.sin() }
    }

    fn at_digits(&self, digits: u32) -> Self {
        Cplx {
            re: Real { f: Float::with_val(bits_for(digits), &self.re.f), digits },
            im: Real { f: Float::with_val(bits_for(digits), &self.im.f), digits },
        }
    }

    pub fn add(&self, o: &Cplx) -> Cplx {
        Cplx { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn sub(&self, o: &Cplx) -> Cplx {
        Cplx { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }

    pub fn mul(&self, o: &Cplx) -> Cplx {
        Cplx {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    pub fn conj(&self) -> Cplx {
        Cplx { re: self.re.clone(), im: self.im.neg() }
    }

    pub fn neg(&self) -> Cplx {
        Cplx { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn scale(&self, r: &Real) -> Cplx {
        Cplx { re: self.re.mul(r), im: self.im.mul(r) }
    }

    pub fn norm_sq(&self) -> Real {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    pub fn abs(&self) -> Real {
        self.norm_sq().sqrt()
    }

    pub fn div(&self, o: &Cplx) -> Cplx {
        let d = o.norm_sq();
        let n = self.mul(&o.conj());
        Cplx { re: n.re.div(&d), im: n.im.div(&d) }
    }

    pub fn inv(&self) -> Cplx {
        let d = self.norm_sq();
        Cplx { re: self.re.div(&d), im: self.im.neg().div(&d) }
    }

    /// Principal square root: branch cut on the negative real axis.
    pub fn sqrt(&self) -> Cplx {
        let r = self.abs();
        let half = |v: Real| {
            let two = Real::from_u32(2, v.digits);
            v.div(&two)
        };
        let re = half(r.add(&self.re)).sqrt();
        let im_mag = half(r.sub(&self.re)).sqrt();
        let im = if self.im.cmp0() == Ordering::Less { im_mag.neg() } else { im_mag };
        Cplx { re, im }
    }

    /// Argument in (-π, π].
    pub fn arg(&self) -> Real {
        self.im.atan2(&self.re)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    /// Unit-modulus phase factor z/|z|.
    pub fn phase(&self) -> Cplx {
        let m = self.abs();
        Cplx { re: self.re.div(&m), im: self.im.div(&m) }
    }
}

/// |a - b| as f64, for quick comparisons at tolerances ≥ 1e-14.
pub fn cplx_dist_f64(a: &Cplx, b: &Cplx) -> f64 {
    let dr = a.re.to_f64() - b.re.to_f64();
    let di = a.im.to_f64() - b.im.to_f64();
    (dr * dr + di * di).sqrt()
}

/// Full-precision distance |a - b|.
pub fn cplx_dist(a: &Cplx, b: &Cplx) -> Real {
    a.sub(b).abs()
}

/// Roots of the monic cubic z³ + c2 z² + c1 z + c0 by Durand-Kerner, at the
/// operands' precision. Converges for the well-separated and mildly clustered
/// roots this crate encounters; iteration caps at 4x digit-precision steps.
pub fn cubic_roots(c2: &Cplx, c1: &Cplx, c0: &Cplx) -> Vec<Cplx> {
    let digits = c2.digits().min(c1.digits()).min(c0.digits());
    let eval = |z: &Cplx| -> Cplx {
        // ((z + c2) z + c1) z + c0
        z.add(c2).mul(z).add(c1).mul(z).add(c0)
    };
    // distinct, asymmetric starting points
    let mut zs: Vec<Cplx> = (0..3)
        .map(|k| {
            let t = Rat::from((2 * k as i64 + 1, 7));
            Cplx::unit_phase(&t, digits).scale(&Real::from_decimal("1.2", digits).unwrap())
        })
        .collect();
    let tol = Real::from_rat(&crate::rat::pow10_neg(digits), digits + 8);
    for _ in 0..(digits as usize * 4) {
        let mut moved = false;
        for i in 0..3 {
            let mut den = Cplx::one(digits);
            for j in 0..3 {
                if j != i {
                    den = den.mul(&zs[i].sub(&zs[j]));
                }
            }
            if den.abs().cmp0() == Ordering::Equal {
                // coincident iterates: nudge
                zs[i] = zs[i].add(&Cplx::from_f64(1e-3, 1e-3, digits));
                moved = true;
                continue;
            }
            let step = eval(&zs[i]).div(&den);
            if step.abs().f > tol.f {
                moved = true;
            }
            zs[i] = zs[i].sub(&step);
        }
        if !moved {
            break;
        }
    }
    zs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_values() {
        let d = 40;
        let half = Cplx::unit_phase(&Rat::from((1, 2)), d);
        assert!((half.re.to_f64() + 1.0).abs() < 1e-30);
        assert!(half.im.to_f64().abs() < 1e-30);
        let third = Cplx::unit_phase(&Rat::from((1, 3)), d);
        assert!((third.re.to_f64() + 0.5).abs() < 1e-15);
        assert!((third.im.to_f64() - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn decimal_precision() {
        let d = 40;
        let s3 = Real::from_u32(3, d).sqrt();
        let s = s3.to_decimal();
        assert!(s.starts_with("1.732050807568877293527446341505872366943"), "{s}");
    }

    #[test]
    fn complex_sqrt_branch() {
        let d = 30;
        let z = Cplx::from_f64(-4.0, 0.0, d);
        let r = z.sqrt();
        assert!(r.re.to_f64().abs() < 1e-25);
        assert!((r.im.to_f64() - 2.0).abs() < 1e-25);
        let w = Cplx::from_f64(3.0, -4.0, d);
        let rw = w.sqrt();
        let back = rw.mul(&rw);
        assert!(cplx_dist_f64(&back, &w) < 1e-25);
        assert!(rw.re.to_f64() > 0.0);
    }

    #[test]
    fn cubic_unit_roots() {
        // z^3 - 1: roots are the three cube roots of unity
        let d = 35;
        let roots = cubic_roots(
            &Cplx::zero(d),
            &Cplx::zero(d),
            &Cplx::from_f64(-1.0, 0.0, d),
        );
        for z in &roots {
            let m = z.abs().to_f64();
            assert!((m - 1.0).abs() < 1e-30);
            let p = z.mul(z).mul(z);
            assert!((p.re.to_f64() - 1.0).abs() < 1e-30);
            assert!(p.im.to_f64().abs() < 1e-30);
        }
    }
}
